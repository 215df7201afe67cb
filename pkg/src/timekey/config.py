"""Layered run configuration: built-in defaults, a TOML file, then flags.

Precedence is strict: a value given on the command line beats the config
file, which beats the defaults below.  Unknown keys in the file are
rejected rather than ignored so a typo cannot silently run a study with
default parameters.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class ConfigError(ValueError):
    """Rejected configuration: unknown key, wrong type, or impossible value."""


@dataclass(frozen=True)
class Settings:
    """Merged knobs for one command invocation.

    adc_bits, trials and timer_count stay None until the command applies
    its own default: a noise sweep and a randomness sweep want different
    resolutions and trial counts, and the fallback chipset size depends
    on how many timers one exchange consumes.
    """

    seed: int = 7
    threads: int = 1
    out: str = "runs"
    adc_bits: Optional[Tuple[int, ...]] = None
    hash_timers: int = 128
    key_timers: int = 256
    ecc: bool = False
    trials: Optional[int] = None
    snr_db: Tuple[float, ...] = (100.0, 110.0, 120.0, 130.0, 140.0)
    delta_t_hours: Tuple[float, ...] = (0.0, 1.0, 6.0, 24.0, 48.0)
    timer_count: Optional[int] = None

    def as_dict(self) -> Dict[str, Any]:
        """JSON-ready snapshot (tuples become lists)."""
        raw = dataclasses.asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v
                for k, v in raw.items()}


_FIELD_NAMES = {f.name for f in dataclasses.fields(Settings)}

# scalar fields and the type they must coerce to; sequence fields below
_SCALAR_KINDS = {
    "seed": int,
    "threads": int,
    "out": str,
    "hash_timers": int,
    "key_timers": int,
    "ecc": bool,
    "trials": int,
    "timer_count": int,
}
_SEQUENCE_KINDS = {
    "adc_bits": int,
    "snr_db": float,
    "delta_t_hours": float,
}


def load_file(path) -> Dict[str, Any]:
    """Parse a TOML config file into a flat settings mapping."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must be a table of settings")
    return data


def _coerce(name: str, value: Any) -> Any:
    if name in _SCALAR_KINDS:
        want = _SCALAR_KINDS[name]
        # bool is an int subclass; keep the check strict in both directions
        if want is bool:
            if not isinstance(value, bool):
                raise ConfigError(f"{name} must be a boolean, got {value!r}")
            return value
        if isinstance(value, bool):
            raise ConfigError(f"{name} must be a {want.__name__}, got {value!r}")
        if want is int and not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
        if want is str and not isinstance(value, str):
            raise ConfigError(f"{name} must be a string, got {value!r}")
        return want(value)
    want = _SEQUENCE_KINDS[name]
    if isinstance(value, (str, bytes)) or not hasattr(value, "__iter__"):
        value = [value]
    out = []
    for item in value:
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise ConfigError(f"{name} entries must be numbers, got {item!r}")
        out.append(want(item))
    return tuple(out)


def resolve(file_values: Optional[Mapping[str, Any]] = None,
            overrides: Optional[Mapping[str, Any]] = None) -> Settings:
    """Merge defaults, file values and explicit flag overrides, then validate."""
    merged: Dict[str, Any] = {}
    for layer, origin in ((file_values, "config file"), (overrides, "flag")):
        if not layer:
            continue
        for name, value in layer.items():
            if name not in _FIELD_NAMES:
                raise ConfigError(f"unknown {origin} setting: {name!r}")
            if value is None:
                continue
            merged[name] = _coerce(name, value)
    settings = Settings(**merged)
    _validate(settings)
    return settings


def _validate(s: Settings) -> None:
    if s.seed < 0:
        raise ConfigError("seed must be >= 0")
    if s.threads < 1:
        raise ConfigError("threads must be >= 1")
    if s.hash_timers < 1:
        raise ConfigError("hash_timers must be >= 1")
    if s.key_timers < 1:
        raise ConfigError("key_timers must be >= 1")
    if s.trials is not None and s.trials < 1:
        raise ConfigError("trials must be >= 1")
    if s.adc_bits is not None:
        if not s.adc_bits:
            raise ConfigError("adc_bits must name at least one resolution")
        for b in s.adc_bits:
            if not 1 <= b <= 24:
                raise ConfigError(f"adc_bits entries must be in [1, 24], got {b}")
    if not s.snr_db or any(v <= 0 for v in s.snr_db):
        raise ConfigError("snr_db values must be positive")
    if not s.delta_t_hours or any(v < 0 for v in s.delta_t_hours):
        raise ConfigError("delta_t_hours values must be >= 0")
    if s.timer_count is not None and s.timer_count < s.key_timers + s.hash_timers:
        raise ConfigError(
            f"timer_count ({s.timer_count}) cannot cover one exchange: "
            f"key_timers + hash_timers = {s.key_timers + s.hash_timers}")
