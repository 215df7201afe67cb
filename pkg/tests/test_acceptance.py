"""Release gate: the nine checks a build must pass before it ships.

One test per criterion, in order.  Each prints a single PASS/FAIL line
on the real terminal (capture suspended for just that line), then
asserts.  Exact claims use integer or strict float equality; trend
claims use the stated tolerances; timed studies also enforce their
runtime budgets.
"""

import itertools
import time

import numpy as np

from timekey import (
    AdcConfig,
    Chipset,
    CrcConfig,
    OneTimeReadError,
    PublicChannel,
    ServerRegistry,
    SimClock,
    TamperError,
    analysis,
    ecc,
    exchange_between_users,
    exchange_server_user,
    randomness,
)

G, N = 128, 256
BASE_T = 86400.0


def _verdict(cap, num: int, label: str, ok: bool, detail: str) -> None:
    with cap.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {num} ({label}): "
              f"{detail}", flush=True)
    assert ok, f"criterion {num} ({label}): {detail}"


def test_criterion_1_protocol_correctness(capfd):
    trials = 10_000
    reg = ServerRegistry(key_adc=AdcConfig(bits=12))
    rng = np.random.default_rng([7, 0xACC, 1])
    start = time.perf_counter()
    ok_direct = ok_paired = 0
    for _ in range(trials):
        chip = reg.issue_chipset(G + N, seed=int(rng.integers(2 ** 62)))
        out = exchange_server_user(reg, chip, G=G, N=N, rng=rng,
                                   channel=PublicChannel(SimClock(BASE_T)))
        ok_direct += out.matched
        chip_a = reg.issue_chipset(G + N, seed=int(rng.integers(2 ** 62)))
        chip_b = reg.issue_chipset(G + N, seed=int(rng.integers(2 ** 62)))
        ses = exchange_between_users(reg, chip_a, chip_b, G=G, N=N, rng=rng,
                                     channel=PublicChannel(SimClock(BASE_T)))
        ok_paired += ses.succeeded
    elapsed = time.perf_counter() - start
    ok = ok_direct == trials and ok_paired == trials and elapsed < 60.0
    _verdict(capfd, 1, "protocol correctness", ok,
             f"server-user {ok_direct}/{trials}, user-user {ok_paired}/{trials}, "
             f"{elapsed:.1f}s (budget 60s)")


def test_criterion_2_search_space_arithmetic(capfd):
    rep = analysis.search_space(G=128, r_exp=63)
    exact = (rep.p_total == 516 and rep.sp_exponent == 32508
             and rep.c_total_bound == 252 * (128 + 1))
    js = sorted(set(range(0, 32509, 251)) | {0, 1, 32508})
    reductions_ok = all(
        analysis.sampling_reduction(128, 63, j) == 32508 - j for j in js)
    ok = exact and reductions_ok
    _verdict(capfd, 2, "search-space arithmetic", ok,
             f"p_total={rep.p_total}, exponent={rep.sp_exponent}, "
             f"chip bound={rep.c_total_bound}, reductions exact at {len(js)} J values")


def test_criterion_3_entropy_endpoints(capfd):
    endpoints = (analysis.shannon_entropy(0.0) == 0.0
                 and analysis.shannon_entropy(1.0) == 0.0
                 and analysis.shannon_entropy(0.5) == 1.0)
    d = np.random.default_rng([7, 0xACC, 3]).uniform(0.0, 1.0, 1000)
    gap = float(np.max(np.abs(analysis.shannon_entropy(d)
                              - analysis.shannon_entropy(1.0 - d))))
    ok = endpoints and gap <= 1e-12
    _verdict(capfd, 3, "entropy endpoints", ok,
             f"H(0)=H(1)=0 and H(1/2)=1 exact, symmetry gap {gap:.2e} on 10^3 draws")


def test_criterion_4_eavesdropper_entropy(capfd):
    start = time.perf_counter()
    trials = 500
    rng = np.random.default_rng([7, 0xACC, 4])
    chip = Chipset.fabricate_random(trials * (G + N),
                                    seed=int(rng.integers(2 ** 62)),
                                    key_adc=AdcConfig(bits=12))
    stolen = chip.replica(chipset_id="stolen")
    late = analysis.eavesdrop_attack(chip, stolen, G=G, N=N, t=BASE_T,
                                     delta_t=24 * 3600.0, trials=trials, rng=rng)
    per_bit_ok = bool(np.all((late.per_bit_mismatch >= 0.4)
                             & (late.per_bit_mismatch <= 0.6)))

    chip2 = Chipset.fabricate_random(100 * (G + N),
                                     seed=int(rng.integers(2 ** 62)),
                                     key_adc=AdcConfig(bits=12))
    live = analysis.eavesdrop_attack(chip2, chip2.replica(), G=G, N=N,
                                     t=BASE_T, delta_t=0.0, trials=100, rng=rng)
    elapsed = time.perf_counter() - start
    ok = (late.h_se >= 0.95 and per_bit_ok and live.d == 0.0
          and elapsed < 300.0)
    _verdict(capfd, 4, "eavesdropper study", ok,
             f"24h wait: h_se={late.h_se:.4f} (>=0.95), per-bit mismatch in "
             f"[{late.per_bit_mismatch.min():.3f}, {late.per_bit_mismatch.max():.3f}] "
             f"(window 0.5+-0.1); zero wait: d={live.d}; {elapsed:.1f}s (budget 300s)")


def test_criterion_5_randomness_pass_rates(capfd):
    start = time.perf_counter()
    keys = 10_000
    rows = randomness.pass_percentage_sweep([4, 9, 12, 16], keys, seed=7)
    base = {r["test_name"]: r["pass_pct"]
            for r in randomness.prng_baseline(keys, seed=7)}
    healthy_gap = max(abs(r["pass_pct"] - base[r["test_name"]])
                      for r in rows if r["adc_bits"] >= 9)
    coarse_drop = max(base[r["test_name"]] - r["pass_pct"]
                      for r in rows if r["adc_bits"] == 4)
    elapsed = time.perf_counter() - start
    ok = healthy_gap <= 2.0 and coarse_drop >= 20.0 and elapsed < 600.0
    _verdict(capfd, 5, "randomness pass rates", ok,
             f"{keys} keys: b>=9 within {healthy_gap:.2f} points of baseline "
             f"(<=2), b=4 worst test {coarse_drop:.1f} points below (>=20); "
             f"{elapsed:.1f}s (budget 600s)")


def test_criterion_6_noise_monotonicity(capfd):
    start = time.perf_counter()
    snrs = (100.0, 110.0, 120.0, 130.0, 140.0)
    rows = analysis.noise_failure_study([12, 16], snrs, keys_per_cell=1000,
                                        seed=7)
    fail = {(r["adc_bits"], r["snr_db"]): r["failure_pct"] for r in rows}
    monotone = all(fail[(b, hi)] <= fail[(b, lo)] + 1.0
                   for b in (12, 16)
                   for lo, hi in itertools.pairwise(snrs))
    coarser_no_worse = all(fail[(12, s)] <= fail[(16, s)] for s in snrs)
    elapsed = time.perf_counter() - start
    ok = monotone and coarser_no_worse and elapsed < 600.0
    _verdict(capfd, 6, "noise robustness", ok,
             f"failure pct non-increasing in snr (tie tolerance 1 point) and "
             f"b=12 <= b=16 in all {len(snrs)} cells; "
             f"b=12 sweep {[fail[(12, s)] for s in snrs]}; "
             f"{elapsed:.1f}s (budget 600s)")


def test_criterion_7_ecc_roundtrip_and_trend(capfd):
    toy = CrcConfig.toy()
    rng = np.random.default_rng([7, 0xACC, 7])
    users = rng.integers(0, 2, size=(40, toy.key_len), dtype=np.uint8)
    radius = toy.hd_budget  # toy distance is 4: unique decoding up to weight 1
    patterns = [np.zeros(toy.key_len, dtype=np.uint8)]
    for pos in itertools.combinations(range(toy.key_len), radius):
        e = np.zeros(toy.key_len, dtype=np.uint8)
        e[list(pos)] = 1
        patterns.append(e)
    exact = 0
    for user in users:
        r_user = ecc.crc(user, toy)
        for e in patterns:
            exact += bool(np.array_equal(ecc.reconcile(user ^ e, r_user, toy),
                                         user))
    within_radius_ok = exact == len(users) * len(patterns)

    # past the radius the decoder may give up but must never fabricate
    never_wrong = True
    user = users[0]
    r_user = ecc.crc(user, toy)
    for pos in itertools.combinations(range(toy.key_len), radius + 1):
        e = np.zeros(toy.key_len, dtype=np.uint8)
        e[list(pos)] = 1
        try:
            fixed = ecc.reconcile(user ^ e, r_user, toy)
        except ecc.EccError:
            continue
        never_wrong &= bool(np.array_equal(fixed, user))

    cfg = CrcConfig.default(op_cap=200_000)
    snrs = (100.0, 110.0, 120.0, 130.0, 140.0)
    plain = analysis.noise_failure_study([12], snrs, keys_per_cell=400,
                                         seed=7, N=cfg.key_len)
    fixed = analysis.noise_failure_study([12], snrs, keys_per_cell=400,
                                         seed=7, N=cfg.key_len, ecc=cfg)
    trend_ok = all(f["failure_pct"] <= p["failure_pct"]
                   for p, f in zip(plain, fixed))
    ok = within_radius_ok and never_wrong and trend_ok
    _verdict(capfd, 7, "error-correction round trip", ok,
             f"toy code: {exact}/{len(users) * len(patterns)} within-radius "
             f"patterns reconciled exactly, none wrong past the radius; "
             f"degree-28 ({cfg.key_len}-bit key, {cfg.effective_len} effective): "
             f"ecc failure <= plain in all {len(snrs)} cells "
             f"({[f['failure_pct'] for f in fixed]} vs "
             f"{[p['failure_pct'] for p in plain]})")


def test_criterion_8_one_time_read(capfd):
    rng = np.random.default_rng([7, 0xACC, 8])
    interleavings = 1000
    reuse_always_errors = probe_always_errors = True
    for k in range(interleavings):
        chip = Chipset.fabricate_random(12, seed=int(rng.integers(2 ** 62)),
                                        chipset_id=f"otr-{k}")
        perm = rng.permutation(12) + 1
        chip.generate_key_output(perm[0:3], perm[3:5], BASE_T)
        chip.generate_key_output(perm[5:8], perm[8:10], BASE_T)
        spent = int(perm[rng.integers(0, 10)])
        before = chip.consumed_count
        try:
            chip.generate_key_output([int(perm[10]), spent], [int(perm[11])],
                                     BASE_T)
            reuse_always_errors = False
        except OneTimeReadError:
            pass
        # the rejected read must not burn the fresh indices it named
        reuse_always_errors &= chip.consumed_count == before
        chip.generate_key_output([int(perm[10])], [int(perm[11])], BASE_T)

        probed = int(rng.integers(1, 13))
        try:
            chip.raw_state_probe(probed)
            probe_always_errors = False
        except TamperError:
            probe_always_errors &= probed not in set(
                int(i) for i in chip.unconsumed_indices())
    ok = reuse_always_errors and probe_always_errors
    _verdict(capfd, 8, "one-time read", ok,
             f"{interleavings} randomized interleavings: every index reuse "
             f"errored without side effects, every raw-state probe errored "
             f"and consumed")


def test_criterion_9_battery_worked_examples(capfd):
    pi_100 = np.array([int(c) for c in
                       "1100100100001111110110101010001000100001011010001100"
                       "001000110100110001001100011001100010100010111000"],
                      dtype=np.uint8)
    long_128 = np.array([int(c) for c in
                         "11001100000101010110110001001100111000000000001001"
                         "00110101010001000100111101011010000000110101111100"
                         "1100111001101101100010110010"], dtype=np.uint8)

    def bits(s):
        return np.array([int(c) for c in s], dtype=np.uint8)

    cases = [
        ("monobit/10", randomness.monobit_p(bits("1011010101")), 0.527089),
        ("monobit/pi", randomness.monobit_p(pi_100), 0.109599),
        ("block/10", randomness.block_frequency_p(bits("0110011010"), 3), 0.801252),
        ("block/pi", randomness.block_frequency_p(pi_100, 10), 0.706438),
        ("runs/10", randomness.runs_p(bits("1001101011")), 0.147232),
        ("runs/pi", randomness.runs_p(pi_100), 0.500798),
        ("longest/128", randomness.longest_run_p(long_128), 0.180609),
        ("cusum-f/10", randomness.cumulative_sums_p(bits("1011010111")), 0.411659),
        ("cusum-f/pi", randomness.cumulative_sums_p(pi_100), 0.219194),
        ("cusum-b/pi", randomness.cumulative_sums_p(pi_100, "backward"), 0.114866),
    ]
    misses = [(name, got, want) for name, got, want in cases
              if round(float(got), 6) != want]
    ok = not misses
    _verdict(capfd, 9, "battery worked examples", ok,
             f"{len(cases)}/{len(cases)} published p-values reproduced to "
             f"6 decimals" if ok else f"mismatches: {misses}")
