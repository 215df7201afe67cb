"""Quantitative security and robustness studies.

Four families of results about the timer-key scheme:

  * attacker entropy: how many bits per key bit an eavesdropper is missing
    after measuring a stolen replica at a stale time,
  * brute-force arithmetic: exact integer search-space sizes, the shrinkage
    per observed key broadcast, and the resulting bound on how many
    chipsets one parameter universe can safely back,
  * per-bit mismatch profiles across the broadcast wait time,
  * Monte-Carlo failure rates of the exchange under measurement noise,
    with and without CRC reconciliation.

Studies are vectorized over whole key batches: a trial's G + N timers live
as rows of a parameter tensor and never materialize chipset objects.  The
chipset-object path computes identical bits (asserted in tests); these
batch helpers exist purely for throughput.  Every study takes explicit
seeds and returns plain rows ready for CSV serialization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import xlogy

from . import ecc as ecc_mod
from .chipset import Chipset, HASH_ADC_BITS
from .protocol import DEFAULT_G, DEFAULT_N, InsufficientTimersError, user_generate
from .timer_model import AdcConfig, DEFAULT_RANGES, ParamRanges, current_array

__all__ = [
    "AttackOutcome",
    "SearchSpaceReport",
    "shannon_entropy",
    "search_space",
    "sampling_reduction",
    "eavesdrop_attack",
    "bit_mismatch_sweep",
    "noise_failure_study",
    "sample_population",
    "population_currents",
    "keys_from_currents",
    "generate_key_batch",
    "snr_db_to_linear",
    "DEFAULT_PRECISION_EXP",
]

DEFAULT_PRECISION_EXP = 63  # double precision: 2^63 distinguishable parameter values


# -- attacker entropy ---------------------------------------------------------


def shannon_entropy(d):
    """Binary entropy of a mismatch fraction, in bits; 0*log2(0) is 0.

    1.0 at d = 0.5 means the attacker's measured key shares nothing with
    the user's; 0 at d in {0, 1} means full knowledge (a flipped key is
    knowledge too).
    """
    arr = np.asarray(d, dtype=np.float64)
    if np.any(arr < 0) or np.any(arr > 1):
        raise ValueError("mismatch fraction must lie in [0, 1]")
    # + 0.0 normalizes the -0.0 that the negation produces at d in {0, 1}
    h = -(xlogy(arr, arr) + xlogy(1 - arr, 1 - arr)) / np.log(2.0) + 0.0
    return float(h) if np.isscalar(d) or arr.ndim == 0 else h


# -- brute-force arithmetic (exact integers) ----------------------------------


@dataclass(frozen=True)
class SearchSpaceReport:
    """Exponents (base 2) of brute-force work, exact integer arithmetic."""

    p_total: int             # parameters an attacker must guess: 4 per timer
    sp_exponent: int         # log2 of the full search space
    sp_after_j_exponent: int  # log2 of the expected space after J observed bits
    c_total_bound: int       # chipset count must stay strictly below this

    def __post_init__(self):
        if self.p_total < 0 or self.sp_exponent < 0 or self.c_total_bound < 0:
            raise ValueError("report fields must be nonnegative")


def search_space(G: int, r_exp: int = DEFAULT_PRECISION_EXP,
                 j: int = 0) -> SearchSpaceReport:
    """Search space for one key broadcast: G hash timers plus one key timer.

    Each of the G + 1 timers hides four parameters, each representable at
    2^r_exp distinct values, so the space is 2^(r_exp * 4 * (G + 1)).
    Every public key bit halves the expected surviving candidate set; the
    safe chipset bound keeps the expectation above 2^1 even if an attacker
    some day observes every bit of every chipset's full key budget.
    """
    if G < 1 or r_exp < 1 or j < 0:
        raise ValueError("need G >= 1, r_exp >= 1, j >= 0")
    p_total = 4 * (G + 1)
    sp_exponent = r_exp * p_total
    return SearchSpaceReport(p_total=p_total, sp_exponent=sp_exponent,
                             sp_after_j_exponent=sp_exponent - j,
                             c_total_bound=sp_exponent)


def sampling_reduction(G: int, r_exp: int, j: int) -> int:
    """Exponent of the expected candidate count after j observed key bits."""
    return search_space(G, r_exp, j).sp_after_j_exponent


# -- batch key pipeline -------------------------------------------------------


def sample_population(count: int, timers: int, ranges: ParamRanges,
                      rng: np.random.Generator) -> np.ndarray:
    """(count, timers, 4) parameter tensor: independent chipsets per trial."""
    flat = ranges.sample_matrix(count * timers, rng)
    return flat.reshape(count, timers, 4)


def population_currents(pop: np.ndarray, times) -> np.ndarray:
    """Currents of every timer in the population at its trial's time.

    times broadcasts against the leading population axes, so a (count, 1)
    column gives each trial its own sample instant.
    """
    return current_array(pop, times)


def keys_from_currents(currents: np.ndarray, G: int, N: int,
                       key_adc: AdcConfig, hash_adc: AdcConfig) -> np.ndarray:
    """XOR-masked key bits from a (count, G + N) current matrix.

    Columns [0, N) are key timers, [N, N + G) hash timers, mirroring the
    chipset read: one mask bit per trial folds all hash LSBs, then flips
    the key LSBs.  Currents may carry noise; codes below zero keep exact
    floor semantics.
    """
    if currents.shape[-1] != G + N:
        raise ValueError(f"expected {G + N} current columns")
    key_codes = np.floor(currents[..., :N] / key_adc.resolution).astype(np.int64)
    hash_codes = np.floor(currents[..., N:] / hash_adc.resolution).astype(np.int64)
    mask = np.bitwise_xor.reduce(hash_codes & 1, axis=-1) & 1
    return ((key_codes & 1) ^ mask[..., None]).astype(np.uint8)


def generate_key_batch(count: int, *, adc_bits: int, rng: np.random.Generator,
                       ranges: ParamRanges = DEFAULT_RANGES,
                       G: int = DEFAULT_G, N: int = DEFAULT_N,
                       time_window: Tuple[float, float] = (2.0, 30.0),
                       hash_adc_bits: int = HASH_ADC_BITS,
                       full_scale: float = 1.0) -> np.ndarray:
    """count keys through the full pipeline at uniform random sample times.

    Each key gets a fresh chipset worth of parameters.  The default time
    window is the package's randomness-study window: early in timer life,
    where coarse quantizers still sit below their first code steps, so a
    resolution sweep exposes the randomness cliff (see README).
    """
    pop = sample_population(count, G + N, ranges, rng)
    times = rng.uniform(time_window[0], time_window[1], size=(count, 1))
    cur = population_currents(pop, times)
    return keys_from_currents(cur, G, N,
                              AdcConfig(bits=adc_bits, full_scale=full_scale),
                              AdcConfig(bits=hash_adc_bits, full_scale=full_scale))


# -- eavesdropper simulation ----------------------------------------------------


@dataclass(frozen=True)
class AttackOutcome:
    """What a replica-holding eavesdropper achieved over many trials."""

    d: float                      # mean fraction of key bits it got wrong
    h_se: float                   # entropy per bit implied by d
    per_bit_mismatch: np.ndarray  # mismatch frequency per key-bit position
    trials: int


def eavesdrop_attack(chip_user: Chipset, chip_attacker: Chipset, *,
                     G: int = DEFAULT_G, N: int = DEFAULT_N, t: float,
                     delta_t: float, trials: int,
                     rng: np.random.Generator) -> AttackOutcome:
    """Replay the user's broadcast indices on a stolen replica, late.

    Per trial the user measures at t and broadcasts (O, H, t); the
    attacker, who intercepted the broadcast delta_t seconds after the
    measurement, reads the same indices on its own replica at t + delta_t.
    Timers drifted across quantizer steps in between, so the attacker's
    key decorrelates as delta_t grows.  delta_t = 0 models an attacker
    with a live wiretap and perfect synchronization: it wins exactly.
    """
    if delta_t < 0 or trials < 1:
        raise ValueError("need delta_t >= 0 and trials >= 1")
    mismatch_counts = np.zeros(N, dtype=np.int64)
    for _ in range(trials):
        user_key, req = user_generate(chip_user, G, N, t, rng)
        try:
            stolen = chip_attacker.generate_key_output(req.O, req.H, t + delta_t)
        except Exception as exc:
            raise InsufficientTimersError(
                "attacker replica diverged from the user chipset") from exc
        mismatch_counts += user_key.bits ^ stolen.bits
    per_bit = mismatch_counts / trials
    d = float(mismatch_counts.sum() / (trials * N))
    return AttackOutcome(d=d, h_se=shannon_entropy(d), per_bit_mismatch=per_bit,
                         trials=trials)


def bit_mismatch_sweep(delta_t_list: Sequence[float], *, adc_bits: int,
                       trials: int, seed: int,
                       ranges: ParamRanges = DEFAULT_RANGES,
                       G: int = DEFAULT_G, N: int = DEFAULT_N,
                       t: float = 86400.0,
                       hash_adc_bits: int = HASH_ADC_BITS,
                       full_scale: float = 1.0) -> List[dict]:
    """Mismatch fraction and attacker entropy across broadcast wait times.

    Batch variant of eavesdrop_attack for sweeps: same parameter draws and
    index semantics, without per-trial chipset objects.  Rows are sorted
    by delta_t.
    """
    key_adc = AdcConfig(bits=adc_bits, full_scale=full_scale)
    hash_adc = AdcConfig(bits=hash_adc_bits, full_scale=full_scale)
    rng = np.random.default_rng([seed, 0xB17])
    pop = sample_population(trials, G + N, ranges, rng)
    user_keys = keys_from_currents(population_currents(pop, t), G, N,
                                   key_adc, hash_adc)
    rows = []
    for delta_t in sorted(float(x) for x in delta_t_list):
        if delta_t < 0:
            raise ValueError("delta_t must be >= 0")
        late = keys_from_currents(population_currents(pop, t + delta_t), G, N,
                                  key_adc, hash_adc)
        diff = user_keys ^ late
        d = float(diff.mean())
        rows.append({"delta_t_hours": delta_t / 3600.0, "adc_bits": adc_bits,
                     "trials": trials, "d": d, "h_se": shannon_entropy(d)})
    return rows


# -- noise robustness -----------------------------------------------------------


def snr_db_to_linear(snr_db: float) -> float:
    return float(10.0 ** (snr_db / 10.0))


def noise_failure_study(adc_bits_list: Sequence[int],
                        snr_db_list: Sequence[float], *,
                        keys_per_cell: int, seed: int, reps: int = 10,
                        ranges: ParamRanges = DEFAULT_RANGES,
                        G: int = DEFAULT_G, N: int = DEFAULT_N,
                        time_window: Tuple[float, float] = (3600.0, 172800.0),
                        hash_adc_bits: int = HASH_ADC_BITS,
                        full_scale: float = 1.0,
                        ecc: Optional[ecc_mod.CrcConfig] = None) -> List[dict]:
    """Exchange failure percentage per (adc_bits, snr) cell under AWGN.

    The hardware read adds zero-mean Gaussian noise with per-sample
    variance I(t)^2 / snr to each timer current before quantization; the
    server's software clone stays noiseless.  Without ecc, a trial fails
    on any key-bit mismatch.  With ecc, the user broadcasts its remainder,
    the server reconciles, and the trial fails unless the reconciled key
    equals the user's exactly (budget and operation-cap exhaustion both
    count as failures).

    Noise and parameter draws depend only on (seed, rep, key), never on
    the cell, so sweeps share randomness: comparisons across snr or
    adc_bits see the same chipsets and the same noise shapes, and ECC
    versus plain runs at the same seed face identical error patterns.
    """
    if keys_per_cell < 1 or reps < 1:
        raise ValueError("keys_per_cell and reps must be >= 1")
    if not len(snr_db_list) or not len(adc_bits_list):
        raise ValueError("adc_bits_list and snr_db_list must not be empty")
    if ecc is not None and ecc.key_len != N:
        raise ValueError(f"ecc.key_len {ecc.key_len} must equal N {N}")
    keys_per_rep = max(1, keys_per_cell // reps)
    hash_adc = AdcConfig(bits=hash_adc_bits, full_scale=full_scale)

    # one draw bundle per rep, reused verbatim by every cell
    bundles = []
    for rep in range(reps):
        rng = np.random.default_rng([seed, rep, 0x401])
        pop = sample_population(keys_per_rep, G + N, ranges, rng)
        times = rng.uniform(time_window[0], time_window[1], (keys_per_rep, 1))
        z = rng.standard_normal((keys_per_rep, G + N))
        bundles.append((population_currents(pop, times), z))

    rows = []
    for adc_bits in adc_bits_list:
        key_adc = AdcConfig(bits=int(adc_bits), full_scale=full_scale)
        for snr_db in snr_db_list:
            snr = snr_db_to_linear(float(snr_db))
            if snr <= 0:
                raise ValueError("snr must be positive")
            rep_pcts = []
            for clean, z in bundles:
                noisy = clean * (1.0 + z / np.sqrt(snr))
                gold = keys_from_currents(clean, G, N, key_adc, hash_adc)
                user = keys_from_currents(noisy, G, N, key_adc, hash_adc)
                failures = _count_failures(gold, user, ecc)
                rep_pcts.append(100.0 * failures / keys_per_rep)
            rows.append({
                "adc_bits": int(adc_bits), "snr_db": float(snr_db),
                "ecc": ecc is not None, "trials": keys_per_rep * reps,
                "failure_pct": float(np.mean(rep_pcts)),
                "failure_var": float(np.var(rep_pcts, ddof=1)) if reps > 1 else 0.0,
            })
    return rows


def _count_failures(gold: np.ndarray, user: np.ndarray,
                    ecc: Optional[ecc_mod.CrcConfig]) -> int:
    mismatched = np.flatnonzero(np.any(gold ^ user, axis=1))
    if ecc is None:
        return int(mismatched.size)
    failures = 0
    remainders = ecc_mod.crc_values(user[mismatched], ecc) if mismatched.size else []
    for row, r_val in zip(mismatched, remainders):
        try:
            fixed = ecc_mod.reconcile(gold[row],
                                      ecc_mod.Remainder(int(r_val), ecc.degree),
                                      ecc)
        except ecc_mod.EccError:
            failures += 1
            continue
        if not np.array_equal(fixed, user[row]):
            failures += 1
    return failures
