"""Command-line front end: study drivers and the exchange demonstration.

Every command honors --seed for full determinism, writes its artifacts
(CSV tables plus a JSON run manifest) under --out, and orders output rows
canonically by sweep coordinates regardless of --threads.  Exit codes:
0 on success, 2 on configuration errors, 3 on runtime failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from . import __version__
from . import analysis
from . import ecc as ecc_mod
from . import protocol, randomness
from .chipset import Chipset, HASH_ADC_BITS
from .config import ConfigError, Settings, load_file, resolve
from .timer_model import AdcConfig

# settings that exist as flags on every subcommand
_FLAG_FIELDS = ("seed", "threads", "out", "adc_bits", "hash_timers",
                "key_timers", "ecc", "trials", "snr_db", "delta_t_hours",
                "timer_count")

_BASE_TIME = 86400.0  # chipset age at first use: one day of drift


# -- artifact plumbing ----------------------------------------------------

def _cell(value):
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, float):
        return f"{value:.10g}"
    return value


def _write_csv(path: Path, header: Sequence[str],
               rows: Iterable[Sequence]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _write_manifest(out_dir: Path, command: str, settings: Settings,
                    outputs: List[Path]) -> Path:
    manifest = {
        "command": command,
        "config": settings.as_dict(),
        "seed": settings.seed,
        "outputs": sorted(p.name for p in outputs),
        "version": __version__,
    }
    path = out_dir / f"{command.replace('-', '_')}_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _map_cells(fn, cells, threads: int) -> list:
    """Run fn over cells, optionally on a pool; order follows cells."""
    if threads > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, cells))
    return [fn(c) for c in cells]


def _ecc_for(settings: Settings, **kwargs) -> ecc_mod.CrcConfig:
    n = settings.key_timers
    if n <= ecc_mod.DEFAULT_DEGREE:
        raise ConfigError(
            f"--ecc needs key_timers > {ecc_mod.DEFAULT_DEGREE} "
            f"(remainder spends that many bits), got {n}")
    return ecc_mod.CrcConfig.from_hex(
        ecc_mod.DEFAULT_POLY_HEX, ecc_mod.DEFAULT_DEGREE, n, **kwargs)


def _compact(body: dict) -> str:
    """One-line rendering of a message body; long index lists abbreviated."""
    parts = []
    for k, v in body.items():
        if isinstance(v, (list, tuple)) and len(v) > 6:
            head = ", ".join(str(x) for x in v[:4])
            parts.append(f"{k}=[{head}, ... {len(v)} total]")
        elif isinstance(v, str) and len(v) > 40:
            parts.append(f"{k}={v[:12]}..{v[-4:]} ({len(v)} chars)")
        else:
            parts.append(f"{k}={v}")
    return " ".join(parts)


# -- subcommands ----------------------------------------------------------

def cmd_exchange(settings: Settings, args, out_dir: Path) -> int:
    g, n = settings.hash_timers, settings.key_timers
    trials = settings.trials if settings.trials is not None else 1
    count = settings.timer_count if settings.timer_count is not None else g + n
    key_bits = settings.adc_bits[0] if settings.adc_bits else 12
    ecc_cfg = _ecc_for(settings) if settings.ecc else None

    rng = np.random.default_rng([settings.seed, 0xE8])
    registry = protocol.ServerRegistry(key_adc=AdcConfig(bits=key_bits),
                                       hash_adc=AdcConfig(bits=HASH_ADC_BITS))

    matched = succeeded = 0
    outcome = session = None
    for _ in range(trials):
        chip = registry.issue_chipset(count, seed=int(rng.integers(2 ** 62)))
        channel = protocol.PublicChannel(protocol.SimClock(_BASE_TIME))
        outcome = protocol.exchange_server_user(
            registry, chip, G=g, N=n, rng=rng, channel=channel, ecc=ecc_cfg)
        matched += outcome.matched

        chip_a = registry.issue_chipset(count, seed=int(rng.integers(2 ** 62)))
        chip_b = registry.issue_chipset(count, seed=int(rng.integers(2 ** 62)))
        channel = protocol.PublicChannel(protocol.SimClock(_BASE_TIME))
        session = protocol.exchange_between_users(
            registry, chip_a, chip_b, G=g, N=n, rng=rng, channel=channel,
            ecc=ecc_cfg)
        succeeded += session.succeeded

    print(f"protocol 1 (server <-> user): {matched}/{trials} key matches")
    print(f"protocol 2 (user <-> user):   {succeeded}/{trials} sessions "
          f"agreed on the relayed session key")

    if args.demo:
        print("\nprotocol 1 message flow (last run):")
        for entry in outcome.transcript:
            print(f"  [t={entry['at']:>9.1f}s] {entry['from']:>7s} "
                  f"-> channel  {entry['kind']}: {_compact(entry['body'])}")
        print(f"  user key   : {outcome.user_key.to_hex()}")
        print(f"  server key : {outcome.server_key.to_hex()}")
        print(f"  match      : {outcome.matched}")
        print("\nprotocol 2 message flow (last run):")
        for entry in session.transcript:
            print(f"  [t={entry['at']:>9.1f}s] {entry['from']:>7s} "
                  f"-> channel  {entry['kind']}: {_compact(entry['body'])}")
        print(f"  {session.user_a} key      : {session.key_a.to_hex()}")
        print(f"  {session.user_b} key      : {session.key_b.to_hex()}")
        print(f"  session key at {session.user_a}: "
              f"{session.key_r_at_a.to_hex() if session.key_r_at_a else None}")
        print(f"  session key at {session.user_b}: "
              f"{session.key_r_at_b.to_hex() if session.key_r_at_b else None}")
        print(f"  agreed     : {session.succeeded}")

    transcript_path = out_dir / "exchange_transcript.json"
    transcript_path.write_text(json.dumps({
        "summary": {"trials": trials, "protocol_1_matched": int(matched),
                    "protocol_2_succeeded": int(succeeded),
                    "ecc": settings.ecc},
        "protocol_1": outcome.transcript,
        "protocol_2": session.transcript,
    }, indent=2, sort_keys=True) + "\n")
    manifest = _write_manifest(out_dir, "exchange", settings,
                               [transcript_path])
    print(f"wrote {transcript_path} and {manifest}")

    if matched != trials or succeeded != trials:
        print("error: at least one exchange failed to agree on a key",
              file=sys.stderr)
        return 3
    return 0


def cmd_randomness(settings: Settings, args, out_dir: Path) -> int:
    bits_list = sorted(set(settings.adc_bits or (4, 6, 9, 12, 16)))
    keys = settings.trials if settings.trials is not None else 1000
    g, n = settings.hash_timers, settings.key_timers

    def one(b: int):
        return randomness.pass_percentage_sweep(
            [b], keys, seed=settings.seed, G=g, N=n)

    rows = [r for chunk in _map_cells(one, bits_list, settings.threads)
            for r in chunk]
    base = randomness.prng_baseline(keys, n, seed=settings.seed)

    sweep_path = out_dir / "randomness.csv"
    _write_csv(sweep_path, ("adc_bits", "test_name", "keys", "pass_pct"),
               [(r["adc_bits"], r["test_name"], r["keys"], r["pass_pct"])
                for r in rows])
    base_path = out_dir / "prng_baseline.csv"
    _write_csv(base_path, ("test_name", "keys", "pass_pct"),
               [(r["test_name"], r["keys"], r["pass_pct"]) for r in base])
    manifest = _write_manifest(out_dir, "randomness", settings,
                               [sweep_path, base_path])

    basemap = {r["test_name"]: r["pass_pct"] for r in base}
    for r in rows:
        print(f"b={r['adc_bits']:>2d}  {r['test_name']:<16s} "
              f"pass {r['pass_pct']:6.2f}%   (prng baseline "
              f"{basemap[r['test_name']]:6.2f}%)")
    print(f"wrote {sweep_path}, {base_path} and {manifest}")
    return 0


def cmd_eavesdrop(settings: Settings, args, out_dir: Path) -> int:
    bits_list = sorted(set(settings.adc_bits or (12,)))
    deltas = sorted(set(settings.delta_t_hours))
    trials = settings.trials if settings.trials is not None else 500
    g, n = settings.hash_timers, settings.key_timers
    cells = [(b, dt) for b in bits_list for dt in deltas]

    def one(cell):
        b, dt = cell
        rng = np.random.default_rng(
            [settings.seed, b, int(round(dt * 3.6e6)), 0xEA])
        chip_user = Chipset.fabricate_random(
            trials * (g + n), seed=int(rng.integers(2 ** 62)),
            chipset_id=f"victim-{b}b",
            key_adc=AdcConfig(bits=b),
            hash_adc=AdcConfig(bits=HASH_ADC_BITS))
        chip_attacker = chip_user.replica(chipset_id=f"stolen-{b}b")
        out = analysis.eavesdrop_attack(
            chip_user, chip_attacker, G=g, N=n, t=_BASE_TIME,
            delta_t=dt * 3600.0, trials=trials, rng=rng)
        return (b, dt, trials, out.d, out.h_se)

    rows = _map_cells(one, cells, settings.threads)
    csv_path = out_dir / "eavesdrop.csv"
    _write_csv(csv_path, ("adc_bits", "delta_t_hours", "trials", "d", "h_se"),
               rows)
    manifest = _write_manifest(out_dir, "eavesdrop", settings, [csv_path])
    for b, dt, k, d, h in rows:
        print(f"b={b:>2d}  delta_t={dt:6.2f}h  attacker mismatch d={d:.4f}  "
              f"entropy h_se={h:.4f}")
    print(f"wrote {csv_path} and {manifest}")
    return 0


def cmd_bit_mismatch(settings: Settings, args, out_dir: Path) -> int:
    bits_list = sorted(set(settings.adc_bits or (4, 9, 12)))
    deltas = sorted(set(settings.delta_t_hours))
    trials = settings.trials if settings.trials is not None else 1000
    g, n = settings.hash_timers, settings.key_timers

    def one(b: int):
        return analysis.bit_mismatch_sweep(
            [dt * 3600.0 for dt in deltas], adc_bits=b, trials=trials,
            seed=settings.seed, G=g, N=n, t=_BASE_TIME)

    nested = _map_cells(one, bits_list, settings.threads)
    rows = [(r["adc_bits"], r["delta_t_hours"], r["trials"], r["d"], r["h_se"])
            for chunk in nested for r in chunk]
    csv_path = out_dir / "bit_mismatch.csv"
    _write_csv(csv_path, ("adc_bits", "delta_t_hours", "trials", "d", "h_se"),
               rows)
    manifest = _write_manifest(out_dir, "bit-mismatch", settings, [csv_path])
    for b, dt, k, d, h in rows:
        print(f"b={b:>2d}  delta_t={dt:6.2f}h  mismatch d={d:.4f}  "
              f"h_se={h:.4f}")
    print(f"wrote {csv_path} and {manifest}")
    return 0


def cmd_noise(settings: Settings, args, out_dir: Path) -> int:
    bits_list = sorted(set(settings.adc_bits or (12, 16)))
    snrs = sorted(set(settings.snr_db))
    keys = settings.trials if settings.trials is not None else 1000
    g, n = settings.hash_timers, settings.key_timers
    # cap the remainder search so a hopeless syndrome fails fast instead of
    # spending seconds per trial; exact reconciliations are unaffected
    ecc_cfg = (_ecc_for(settings, op_cap=200_000)
               if settings.ecc else None)

    def one(b: int):
        return analysis.noise_failure_study(
            [b], snrs, keys_per_cell=keys, seed=settings.seed, G=g, N=n,
            ecc=ecc_cfg)

    nested = _map_cells(one, bits_list, settings.threads)
    rows = [(r["adc_bits"], r["snr_db"], r["ecc"], r["trials"],
             r["failure_pct"], r["failure_var"])
            for chunk in nested for r in chunk]
    csv_path = out_dir / "noise.csv"
    _write_csv(csv_path, ("adc_bits", "snr_db", "ecc", "trials",
                          "failure_pct", "failure_var"), rows)
    manifest = _write_manifest(out_dir, "noise", settings, [csv_path])
    for b, snr, e, k, pct, var in rows:
        print(f"b={b:>2d}  snr={snr:5.1f}dB  ecc={int(e)}  "
              f"failure {pct:6.2f}%  (var {var:.3g})")
    print(f"wrote {csv_path} and {manifest}")
    return 0


def cmd_search_space(settings: Settings, args, out_dir: Path) -> int:
    report = analysis.search_space(settings.hash_timers)
    print(f"installed parameters per chipset (p_total): {report.p_total}")
    print(f"log2 of the brute-force search space: {report.sp_exponent}")
    print(f"log2 bound on distinct chipsets: {report.c_total_bound}")
    csv_path = out_dir / "search_space.csv"
    _write_csv(csv_path,
               ("hash_timers", "p_total", "sp_exponent",
                "sp_after_j_exponent", "c_total_bound"),
               [(settings.hash_timers, report.p_total, report.sp_exponent,
                 report.sp_after_j_exponent, report.c_total_bound)])
    manifest = _write_manifest(out_dir, "search-space", settings, [csv_path])
    print(f"wrote {csv_path} and {manifest}")
    return 0


# -- argument parsing ------------------------------------------------------

def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, metavar="INT",
                     help="master seed; identical seeds reproduce runs "
                          "byte for byte")
    sub.add_argument("--threads", type=int, metavar="INT",
                     help="worker pool size for sweep cells")
    sub.add_argument("--out", metavar="DIR",
                     help="directory for CSV/JSON artifacts (default runs/)")
    sub.add_argument("--config", metavar="FILE",
                     help="TOML config file; flags override its values")
    sub.add_argument("--adc-bits", type=int, nargs="+", metavar="B",
                     help="key-timer ADC resolutions to run")
    sub.add_argument("--hash-timers", type=int, metavar="G",
                     help="hash timers folded into the mask per key")
    sub.add_argument("--key-timers", type=int, metavar="N",
                     help="key timers per key, i.e. the key length")
    sub.add_argument("--ecc", action=argparse.BooleanOptionalAction,
                     help="broadcast a remainder and reconcile server-side")
    sub.add_argument("--trials", type=int, metavar="INT",
                     help="exchanges / keys / reads per sweep cell")
    sub.add_argument("--snr-db", type=float, nargs="+", metavar="DB",
                     help="signal-to-noise ratios for the noise study")
    sub.add_argument("--delta-t-hours", type=float, nargs="+", metavar="H",
                     help="broadcast wait times in hours")
    sub.add_argument("--timer-count", type=int, metavar="C",
                     help="timers per fabricated chipset")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="timekey",
        description="Tunneling-timer key distribution: protocol demos and "
                    "Monte Carlo studies.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    specs = [
        ("exchange", cmd_exchange,
         "Run both key-exchange protocols noiselessly and check agreement."),
        ("randomness", cmd_randomness,
         "Pass percentages of the five-test battery per ADC resolution."),
        ("eavesdrop", cmd_eavesdrop,
         "Replay broadcasts on a stolen replica after a delay."),
        ("bit-mismatch", cmd_bit_mismatch,
         "Re-measurement mismatch fraction versus broadcast wait time."),
        ("noise", cmd_noise,
         "Exchange failure rate under measurement noise, with or without "
         "remainder reconciliation."),
        ("search-space", cmd_search_space,
         "Exact parameter-space exponents for a brute-force adversary."),
    ]
    for name, handler, blurb in specs:
        sub = subs.add_parser(name, help=blurb, description=blurb)
        _add_common(sub)
        if name == "exchange":
            sub.add_argument("--demo", action="store_true",
                             help="print the message-by-message transcript")
        sub.set_defaults(handler=handler)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        file_values = load_file(args.config) if args.config else None
        overrides = {name: getattr(args, name) for name in _FLAG_FIELDS
                     if getattr(args, name, None) is not None}
        settings = resolve(file_values, overrides)
        out_dir = Path(settings.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        return args.handler(settings, args, out_dir)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
