"""Emulated timer chipset: C timers behind a one-time-read hardware boundary.

The chipset enforces the device axioms the protocol's security rests on:

  * each timer index can appear in at most one successful read; reading
    destroys the state (permanent refusal afterwards, never garbage),
  * the read interface exposes only the XOR-combined key output Q, never a
    raw timer state s_i(t) nor the folded mask bit X(t),
  * any attempt to probe a raw state trips tamper detection, destroying the
    probed timer (and, configurably, coupled neighbors) without revealing
    anything,
  * replicas fabricated from the same parameter list behave identically
    but keep independent consumption ledgers.

Timer parameters live in a private attribute as the emulated hardware
secret; the server holds the same parameters in its registry, which is the
whole point of the scheme.

Indices are 1-based on this interface (and in every serialized form),
0-based internally.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .timer_model import AdcConfig, DEFAULT_RANGES, ParamRanges, TimerParams, bits_array

__all__ = [
    "Chipset",
    "ReadReceipt",
    "NoiseConfig",
    "OneTimeReadError",
    "TamperError",
    "fabricate",
    "HASH_ADC_BITS",
]

HASH_ADC_BITS = 11  # mask-bit readouts are fixed at 11 bits unless an experiment overrides


class OneTimeReadError(RuntimeError):
    """A read named an index whose timer state is already destroyed."""


class TamperError(RuntimeError):
    """Raw-state access attempt: tamper detected, state destroyed."""


@dataclass(frozen=True)
class NoiseConfig:
    """Measurement noise on a hardware chipset (never on a software clone).

    snr is the per-sample linear power ratio: the additive Gaussian noise
    has variance I(t)^2 / snr for each individual current sample.  seed
    feeds a dedicated generator so noisy experiments stay reproducible.
    """

    snr: float
    seed: int = 0

    def __post_init__(self):
        if not self.snr > 0:
            raise ValueError(f"snr must be > 0, got {self.snr}")


@dataclass(frozen=True)
class ReadReceipt:
    """Everything a read returns: the combined output bits and bookkeeping.

    bits is the N-bit key output Q (read-only array); indices_consumed is
    the union of the key and mask index sets (1-based); sample_time is the
    read instant in seconds.
    """

    bits: np.ndarray
    indices_consumed: frozenset
    sample_time: float


def _check_indices(name: str, indices: Sequence[int], size: int) -> np.ndarray:
    arr = np.asarray(indices, dtype=np.int64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty flat index sequence")
    if np.unique(arr).size != arr.size:
        raise ValueError(f"{name} contains duplicate indices")
    if arr.min() < 1 or arr.max() > size:
        raise IndexError(f"{name} indices must lie in [1, {size}]")
    return arr


class Chipset:
    """Stateful single-owner object; serialize access per instance.

    Distinct chipsets are fully independent and may be used in parallel.
    """

    def __init__(self, params, *, chipset_id: str = "chip-0",
                 key_adc: AdcConfig = AdcConfig(bits=12),
                 hash_adc: AdcConfig = AdcConfig(bits=HASH_ADC_BITS),
                 noise: Optional[NoiseConfig] = None,
                 probe_blast_radius: int = 0,
                 _seed_recipe: Optional[dict] = None):
        if isinstance(params, np.ndarray):
            pmat = np.array(params, dtype=np.float64)
        else:
            params = list(params)
            if not params:
                raise ValueError("cannot fabricate a chipset with zero timers")
            pmat = np.array([p.as_array() if isinstance(p, TimerParams) else p
                             for p in params], dtype=np.float64)
        if pmat.ndim != 2 or pmat.shape[1] != 4 or pmat.shape[0] == 0:
            raise ValueError("params must be C rows of (p0, p1, p2, p3), C >= 1")
        if np.any(pmat[:, 0] <= 1.0) or np.any(pmat[:, 1:] <= 0.0):
            raise ValueError("a timer tuple violates its invariants")
        self._pmat = pmat
        self._consumed = np.zeros(pmat.shape[0], dtype=bool)
        self.id = chipset_id
        self.key_adc = key_adc
        self.hash_adc = hash_adc
        self.probe_blast_radius = probe_blast_radius
        self._noise = noise
        self._noise_rng = np.random.default_rng(noise.seed) if noise else None
        self._seed_recipe = _seed_recipe

    # -- fabrication ------------------------------------------------------

    @classmethod
    def fabricate_random(cls, count: int, *, seed: int,
                         ranges: ParamRanges = DEFAULT_RANGES,
                         **kwargs) -> "Chipset":
        """Fabricate count timers with tuples drawn uniformly from ranges."""
        rng = np.random.default_rng(seed)
        pmat = ranges.sample_matrix(count, rng)
        recipe = {"seed": seed, "ranges": ranges.as_dict()}
        return cls(pmat, _seed_recipe=recipe, **kwargs)

    def replica(self, *, chipset_id: Optional[str] = None,
                noise: Optional[NoiseConfig] = None) -> "Chipset":
        """A new chipset with identical timers and a fresh ledger."""
        return Chipset(self._pmat.copy(),
                       chipset_id=chipset_id or f"{self.id}-replica",
                       key_adc=self.key_adc, hash_adc=self.hash_adc,
                       noise=noise, probe_blast_radius=self.probe_blast_radius,
                       _seed_recipe=self._seed_recipe)

    @classmethod
    def from_manifest(cls, manifest: dict) -> "Chipset":
        """Rebuild a chipset from its fabrication manifest (see manifest())."""
        key_adc = AdcConfig(bits=int(manifest["key_adc_bits"]),
                            full_scale=float(manifest.get("full_scale", 1.0)))
        hash_adc = AdcConfig(bits=int(manifest["hash_adc_bits"]),
                             full_scale=float(manifest.get("full_scale", 1.0)))
        common = dict(chipset_id=manifest["id"], key_adc=key_adc, hash_adc=hash_adc)
        if "params" in manifest:
            return cls(np.asarray(manifest["params"], dtype=np.float64), **common)
        ranges = ParamRanges.from_dict(manifest["ranges"])
        chip = cls.fabricate_random(int(manifest["C"]), seed=int(manifest["seed"]),
                                    ranges=ranges, **common)
        return chip

    def manifest(self, *, explicit_params: bool = False) -> dict:
        """Fabrication manifest: {id, C, adc bits, seed-or-explicit-params}.

        This is the fabrication-side record (what the server files away),
        not part of the user-facing read interface.
        """
        out = {"id": self.id, "C": self.size,
               "key_adc_bits": self.key_adc.bits,
               "hash_adc_bits": self.hash_adc.bits,
               "full_scale": self.key_adc.full_scale}
        if explicit_params or self._seed_recipe is None:
            out["params"] = self._pmat.tolist()
        else:
            out.update(self._seed_recipe)
        return out

    # -- public state -----------------------------------------------------

    @property
    def size(self) -> int:
        return int(self._pmat.shape[0])

    @property
    def consumed_count(self) -> int:
        return int(self._consumed.sum())

    @property
    def remaining_count(self) -> int:
        return self.size - self.consumed_count

    def unconsumed_indices(self) -> np.ndarray:
        """1-based indices still readable.  The ledger itself is not secret."""
        return np.flatnonzero(~self._consumed) + 1

    def ledger_snapshot(self) -> dict:
        """Exportable consumption ledger for experiment reproducibility."""
        return {"id": self.id,
                "consumed": sorted(int(i) + 1 for i in np.flatnonzero(self._consumed))}

    # -- the one read operation -------------------------------------------

    def generate_key_output(self, key_indices: Iterable[int],
                            hash_indices: Iterable[int], t: float) -> ReadReceipt:
        """Read N key timers masked by the XOR of G hash timers at time t.

        Output bit L is s_key[L] XOR X where X folds every hash-timer state
        (11-bit quantizer) into one bit and s_key uses the key quantizer.
        All G+N named timers are destroyed by the read.  A rejected read
        consumes nothing: validation completes before any state change.
        """
        key_arr = _check_indices("key_indices", key_indices, self.size)
        hash_arr = _check_indices("hash_indices", hash_indices, self.size)
        if np.intersect1d(key_arr, hash_arr).size:
            raise ValueError("key and hash index sets must be disjoint")
        if t < 0:
            raise ValueError(f"t must be >= 0, got {t}")
        both = np.concatenate([key_arr, hash_arr]) - 1
        already = both[self._consumed[both]]
        if already.size:
            raise OneTimeReadError(
                f"timer {int(already[0]) + 1} on {self.id} was already consumed")

        key_bits = self._measure(key_arr - 1, self.key_adc, t)
        hash_bits = self._measure(hash_arr - 1, self.hash_adc, t)
        mask = np.bitwise_xor.reduce(hash_bits)
        out = key_bits ^ mask
        out.setflags(write=False)
        self._consumed[both] = True
        return ReadReceipt(bits=out,
                           indices_consumed=frozenset(map(int, both + 1)),
                           sample_time=float(t))

    def _measure(self, rows: np.ndarray, adc: AdcConfig, t: float) -> np.ndarray:
        pmat = self._pmat[rows]
        sigma = None
        if self._noise is not None:
            from .timer_model import current_array
            sigma = current_array(pmat, t) / np.sqrt(self._noise.snr)
        return bits_array(pmat, adc, t, noise_sigma=sigma, rng=self._noise_rng)

    # -- tamper path --------------------------------------------------------

    def raw_state_probe(self, index: int):
        """Attempt to read a raw timer state.  Never succeeds.

        Destroys the probed timer and probe_blast_radius neighbors on each
        side (coupled energy injection), then raises TamperError.  Probing
        an already-consumed index still raises.
        """
        idx = int(index)
        if idx < 1 or idx > self.size:
            raise IndexError(f"probe index must lie in [1, {self.size}]")
        lo = max(0, idx - 1 - self.probe_blast_radius)
        hi = min(self.size, idx + self.probe_blast_radius)
        self._consumed[lo:hi] = True
        raise TamperError(
            f"tamper detected on {self.id}: timer {idx} destroyed by probe")

    def __repr__(self):
        return (f"Chipset(id={self.id!r}, C={self.size}, "
                f"consumed={self.consumed_count}, key_adc_bits={self.key_adc.bits})")


def fabricate(params, key_adc: AdcConfig = AdcConfig(bits=12), **kwargs) -> Chipset:
    """Fabricate a chipset from an explicit parameter list."""
    return Chipset(params, key_adc=key_adc, **kwargs)
