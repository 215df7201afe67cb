"""Behavioral model of a self-powered drift timer.

A timer is a floating-gate device that leaks charge at a known, monotonic
rate without external power.  Its readout current follows the closed form

    I(t) = p3 * exp(-p2 / ln(p1 * t + p0))

where the tuple (p0, p1, p2, p3) encodes device physics: the gate starts at
a voltage set by p0, discharges at a rate set by p1, and the transistor that
senses the gate converts voltage to current through p2 and p3.  The current
is strictly increasing in t and approaches p3 from below.

A timer's binary state is the least significant bit of the quantized
current:

    s(t) = floor(I(t) / delta) mod 2,    delta = full_scale / 2**bits

Everything here is a pure function of its inputs; randomness enters only
through an explicit generator passed to the sampling helpers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TimerParams",
    "PhysicalParams",
    "AdcConfig",
    "ParamRanges",
    "DEFAULT_RANGES",
    "current_at",
    "current_array",
    "floating_gate_voltage",
    "params_from_physical",
    "quantize",
    "bit_at",
    "bits_array",
    "sample_random_params",
    "params_to_json",
    "params_from_json",
]


@dataclass(frozen=True)
class TimerParams:
    """One timer's behavioral tuple.

    Attributes
    ----------
    p0 : float
        Dimensionless time offset; must exceed 1 so the log is positive
        from t = 0 on.
    p1 : float
        Discharge rate, 1/s.
    p2 : float
        Dimensionless exponent scale.
    p3 : float
        Asymptotic current, normalized current units.
    """

    p0: float
    p1: float
    p2: float
    p3: float

    def __post_init__(self):
        if not self.p0 > 1.0:
            raise ValueError(f"p0 must be > 1, got {self.p0}")
        for name in ("p1", "p2", "p3"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")

    def as_array(self) -> np.ndarray:
        return np.array([self.p0, self.p1, self.p2, self.p3], dtype=np.float64)

    def as_dict(self) -> dict:
        return {"p0": self.p0, "p1": self.p1, "p2": self.p2, "p3": self.p3}


@dataclass(frozen=True)
class PhysicalParams:
    """Device-level description of one timer.

    The behavioral tuple is derived from these; see params_from_physical.
    """

    v0: float        # initial floating-gate voltage, V
    a0: float        # tunneling junction area, m^2
    tox0: float      # oxide thickness, m
    ct: float        # total floating-gate capacitance, F
    alpha: float     # tunneling material constant
    beta: float      # tunneling material constant
    i0: float        # sense transistor characteristic current
    kp: float        # gate efficiency, dimensionless
    ut: float        # thermal voltage, V
    vs: float        # source voltage, V (any sign)
    vt: float        # threshold voltage, V (any sign)

    def __post_init__(self):
        for name in ("v0", "a0", "tox0", "ct", "alpha", "beta", "i0", "kp", "ut"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class AdcConfig:
    """Quantizer description: b bits over [0, full_scale)."""

    bits: int
    full_scale: float = 1.0

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError(f"adc bits must be >= 1, got {self.bits}")
        if not self.full_scale > 0.0:
            raise ValueError(f"full_scale must be > 0, got {self.full_scale}")

    @property
    def resolution(self) -> float:
        """Step size delta = full_scale / 2**bits."""
        return self.full_scale / (1 << self.bits)


def _log_argument(p0, p1, t):
    """ln argument p1*t + p0, with the domain check shared by all readouts."""
    arg = p1 * t + p0
    if np.any(arg <= 1.0):
        raise ValueError("log argument p1*t + p0 must exceed 1 (degenerate timer state)")
    return arg


def current_at(params: TimerParams, t: float) -> float:
    """Readout current of one timer at time t >= 0 seconds.

    Returns p3 * exp(-p2 / ln(p1*t + p0)), strictly increasing in t and
    always inside (0, p3).
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    arg = _log_argument(params.p0, params.p1, t)
    return params.p3 * math.exp(-params.p2 / math.log(arg))


def current_array(pmat: np.ndarray, t) -> np.ndarray:
    """Vectorized readout: pmat is (..., 4) rows of (p0, p1, p2, p3).

    t may be a scalar or an array broadcastable against pmat[..., 0].
    Raises the same domain error as current_at if any row degenerates.
    """
    pmat = np.asarray(pmat, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    arg = _log_argument(pmat[..., 0], pmat[..., 1], t)
    return pmat[..., 3] * np.exp(-pmat[..., 2] / np.log(arg))


def floating_gate_voltage(params: TimerParams, beta_tox0: float, t: float) -> float:
    """Floating-gate potential beta*tox0 / ln(p1*t + p0), strictly decreasing in t.

    beta_tox0 is the product of the tunneling constant and oxide thickness,
    in volts; it sets the voltage scale of the discharge curve.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    arg = _log_argument(params.p0, params.p1, t)
    return beta_tox0 / math.log(arg)


def params_from_physical(phys: PhysicalParams) -> TimerParams:
    """Collapse a device-level description into the behavioral tuple.

    p0 = exp(beta*tox0 / V0)
    p1 = A0*alpha*beta / (CT*tox0)
    p2 = (Kp/UT) * beta*tox0
    p3 = I0 * exp(Kp*(Vs - VT)/UT)

    Raises ValueError if the derived tuple violates the TimerParams
    invariants (possible only through pathological inputs, e.g. overflow).
    """
    p0 = math.exp(phys.beta * phys.tox0 / phys.v0)
    p1 = phys.a0 * phys.alpha * phys.beta / (phys.ct * phys.tox0)
    p2 = (phys.kp / phys.ut) * phys.beta * phys.tox0
    p3 = phys.i0 * math.exp(phys.kp * (phys.vs - phys.vt) / phys.ut)
    if not all(map(math.isfinite, (p0, p1, p2, p3))):
        raise ValueError("physical parameters produce non-finite behavioral tuple")
    return TimerParams(p0=p0, p1=p1, p2=p2, p3=p3)


def quantize(current: float, adc: AdcConfig):
    """Integer ADC code floor(current / delta).  Exact floor semantics:

    a current landing exactly on a step boundary belongs to the upper code.
    No epsilon nudging; server/user agreement depends on this evaluation
    order (current, divide, floor).
    """
    return int(math.floor(current / adc.resolution))


def bit_at(params: TimerParams, adc: AdcConfig, t: float) -> int:
    """Binary state: LSB of the quantizer code at time t."""
    return quantize(current_at(params, t), adc) % 2


def bits_array(pmat: np.ndarray, adc: AdcConfig, t, noise_sigma=None, rng=None) -> np.ndarray:
    """Vectorized binary states for rows of (p0,p1,p2,p3) at time(s) t.

    noise_sigma, if given, is a per-row standard deviation added to the
    current before quantization (the hardware-side measurement noise);
    draws come from rng.  A noisy current below zero floors to a negative
    code whose parity is still well defined.
    """
    current = current_array(pmat, t)
    if noise_sigma is not None:
        current = current + rng.standard_normal(current.shape) * noise_sigma
    return (np.floor(current / adc.resolution).astype(np.int64) % 2).astype(np.uint8)


@dataclass(frozen=True)
class ParamRanges:
    """Per-coordinate uniform sampling intervals for fabrication.

    Defaults are calibration, not ground truth: normalized current units
    with the discharge dynamics placed so that 12-bit key readouts toggle
    on second-to-minute timescales.  Override via config.
    """

    p0: tuple = (2.0, 100.0)
    p1: tuple = (0.1, 10.0)    # 1/s
    p2: tuple = (5.0, 15.0)
    p3: tuple = (0.5, 1.0)     # normalized current

    def __post_init__(self):
        limits = {"p0": 1.0, "p1": 0.0, "p2": 0.0, "p3": 0.0}
        for name, floor_ in limits.items():
            lo, hi = getattr(self, name)
            if not (floor_ < lo <= hi):
                raise ValueError(f"invalid interval for {name}: [{lo}, {hi}]")

    def sample_matrix(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """(count, 4) matrix of tuples drawn uniformly per coordinate."""
        if count < 1:
            raise ValueError(f"count must be >= 1, got {count}")
        cols = [rng.uniform(lo, hi, count) for lo, hi in
                (self.p0, self.p1, self.p2, self.p3)]
        return np.column_stack(cols)

    def as_dict(self) -> dict:
        return {"p0": list(self.p0), "p1": list(self.p1),
                "p2": list(self.p2), "p3": list(self.p3)}

    @classmethod
    def from_dict(cls, mapping: dict) -> "ParamRanges":
        kwargs = {k: tuple(mapping[k]) for k in ("p0", "p1", "p2", "p3") if k in mapping}
        return cls(**kwargs)


DEFAULT_RANGES = ParamRanges()


def sample_random_params(ranges: ParamRanges, rng: np.random.Generator) -> TimerParams:
    """One tuple drawn uniformly per coordinate; deterministic given rng state."""
    row = ranges.sample_matrix(1, rng)[0]
    return TimerParams(*row)


def params_to_json(params) -> str:
    """Serialize one TimerParams or a sequence of them to JSON."""
    if isinstance(params, TimerParams):
        return json.dumps(params.as_dict())
    return json.dumps([p.as_dict() for p in params])


def params_from_json(text: str):
    """Inverse of params_to_json.  Returns TimerParams or a list of them."""
    data = json.loads(text)
    if isinstance(data, dict):
        return TimerParams(**data)
    return [TimerParams(**row) for row in data]
