"""Adversary arithmetic, entropy, batch pipeline, attack and noise sweeps."""

import math

import numpy as np
import pytest

from timekey.analysis import (
    bit_mismatch_sweep,
    eavesdrop_attack,
    generate_key_batch,
    keys_from_currents,
    noise_failure_study,
    population_currents,
    sample_population,
    sampling_reduction,
    search_space,
    shannon_entropy,
    snr_db_to_linear,
)
from timekey.chipset import Chipset, HASH_ADC_BITS
from timekey.ecc import CrcConfig
from timekey.timer_model import AdcConfig, DEFAULT_RANGES


# -- entropy -------------------------------------------------------------------

def test_entropy_endpoints_exact():
    assert shannon_entropy(0.0) == 0.0
    assert shannon_entropy(1.0) == 0.0
    assert shannon_entropy(0.5) == 1.0
    assert math.copysign(1.0, shannon_entropy(0.0)) == 1.0  # not -0.0


def test_entropy_symmetry():
    rng = np.random.default_rng(80)
    d = rng.uniform(0.0, 1.0, 1000)
    assert np.all(np.abs(shannon_entropy(d) - shannon_entropy(1.0 - d))
                  <= 1e-12)


def test_entropy_known_value():
    # -(1/4)log2(1/4) - (3/4)log2(3/4), worked by hand
    assert shannon_entropy(0.25) == pytest.approx(0.8112781244591328,
                                                  rel=1e-15)


def test_entropy_domain():
    with pytest.raises(ValueError):
        shannon_entropy(-0.1)
    with pytest.raises(ValueError):
        shannon_entropy(1.1)


# -- search space ---------------------------------------------------------------

def test_search_space_exact_integers():
    report = search_space(128)
    assert report.p_total == 516
    assert report.sp_exponent == 32508
    assert report.sp_after_j_exponent == 32508
    assert report.c_total_bound == 32508
    assert isinstance(report.sp_exponent, int)


def test_sampling_reduction_all_offsets():
    for j in list(range(0, 33000, 997)) + [0, 1, 32508]:
        assert sampling_reduction(128, 63, j) == 32508 - j
        assert search_space(128, j=j).sp_after_j_exponent == 32508 - j


def test_search_space_scales_with_timer_count():
    assert search_space(64).p_total == 4 * 65
    assert search_space(64).sp_exponent == 63 * 4 * 65
    with pytest.raises(ValueError):
        search_space(0)


# -- batch pipeline ---------------------------------------------------------------

def test_batch_pipeline_matches_chipset_route():
    # oracle: the fast array pipeline must agree bit-for-bit with the
    # chipset object route on the same parameter rows
    rng = np.random.default_rng(81)
    g, n, t = 8, 16, 4321.0
    pop = sample_population(5, g + n, DEFAULT_RANGES, rng)
    key_adc, hash_adc = AdcConfig(bits=12), AdcConfig(bits=HASH_ADC_BITS)
    keys = keys_from_currents(population_currents(pop, t), g, n,
                              key_adc, hash_adc)
    for k in range(5):
        chip = Chipset(pop[k], key_adc=key_adc, hash_adc=hash_adc)
        receipt = chip.generate_key_output(
            list(range(1, n + 1)), list(range(n + 1, n + g + 1)), t)
        assert np.array_equal(keys[k], receipt.bits)


def test_generate_key_batch_shape_and_determinism():
    a = generate_key_batch(50, adc_bits=12, rng=np.random.default_rng(82))
    b = generate_key_batch(50, adc_bits=12, rng=np.random.default_rng(82))
    assert a.shape == (50, 256)
    assert a.dtype == np.uint8
    assert np.array_equal(a, b)


# -- eavesdropping -----------------------------------------------------------------

def test_eavesdrop_zero_delay_wins_exactly():
    chip = Chipset.fabricate_random(20 * 384, seed=83)
    outcome = eavesdrop_attack(chip, chip.replica(), G=128, N=256,
                               t=86400.0, delta_t=0.0, trials=20,
                               rng=np.random.default_rng(83))
    assert outcome.d == 0.0
    assert outcome.h_se == 0.0
    assert math.copysign(1.0, outcome.h_se) == 1.0
    assert np.all(outcome.per_bit_mismatch == 0.0)


def test_eavesdrop_long_delay_decorrelates():
    chip = Chipset.fabricate_random(30 * 384, seed=84)
    outcome = eavesdrop_attack(chip, chip.replica(), G=128, N=256,
                               t=86400.0, delta_t=86400.0, trials=30,
                               rng=np.random.default_rng(84))
    assert 0.35 <= outcome.d <= 0.65
    assert outcome.h_se >= 0.9


def test_bit_mismatch_sweep_rows():
    hours = [0.0, 24.0]
    rows = bit_mismatch_sweep([h * 3600.0 for h in hours], adc_bits=12,
                              trials=100, seed=85)
    assert [r["delta_t_hours"] for r in rows] == hours
    assert rows[0]["d"] == 0.0
    assert rows[1]["h_se"] >= 0.9
    for r in rows:
        assert set(r) == {"delta_t_hours", "adc_bits", "trials", "d", "h_se"}
        assert r["adc_bits"] == 12
        assert r["trials"] == 100


# -- noise ------------------------------------------------------------------------

def test_snr_conversion():
    assert snr_db_to_linear(0.0) == 1.0
    assert snr_db_to_linear(10.0) == pytest.approx(10.0)
    assert snr_db_to_linear(120.0) == pytest.approx(1e12)


def test_noise_failure_rows_and_determinism():
    rows = noise_failure_study([12], [110.0, 130.0], keys_per_cell=100,
                               seed=86)
    again = noise_failure_study([12], [110.0, 130.0], keys_per_cell=100,
                                seed=86)
    assert rows == again
    assert [(r["adc_bits"], r["snr_db"]) for r in rows] == [(12, 110.0),
                                                            (12, 130.0)]
    for r in rows:
        assert set(r) == {"adc_bits", "snr_db", "ecc", "trials",
                          "failure_pct", "failure_var"}
        assert r["ecc"] is False
        assert 0.0 <= r["failure_pct"] <= 100.0
        assert r["failure_var"] >= 0.0
    # more noise, more failures
    assert rows[0]["failure_pct"] >= rows[1]["failure_pct"]


def test_noise_failure_with_reconciliation_never_hurts():
    # common random numbers: both runs face identical noise, so the ECC
    # failure set is a subset of the plain failure set in every cell
    cells = dict(adc_bits_list=[12], snr_db_list=[110.0, 120.0, 130.0],
                 keys_per_cell=150, seed=87)
    plain = noise_failure_study(**cells)
    ecc = noise_failure_study(**cells, N=284,
                              ecc=CrcConfig.default(op_cap=200_000))
    # different key length: compare plain at 284 bits too
    plain_284 = noise_failure_study(**cells, N=284)
    for with_ecc, without in zip(ecc, plain_284):
        assert with_ecc["ecc"] is True
        assert with_ecc["failure_pct"] <= without["failure_pct"]
    assert len(plain) == len(ecc)


def test_noise_study_validates_ecc_length():
    with pytest.raises(ValueError):
        noise_failure_study([12], [120.0], keys_per_cell=100, seed=88,
                            ecc=CrcConfig.default())  # key_len 284 != N 256
