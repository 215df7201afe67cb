"""Configuration layering: defaults, TOML files, flag overrides."""

import pytest

from timekey.config import ConfigError, Settings, load_file, resolve


def test_defaults():
    s = resolve()
    assert s.seed == 7
    assert s.threads == 1
    assert s.hash_timers == 128
    assert s.key_timers == 256
    assert s.ecc is False
    assert s.adc_bits is None            # commands pick their own sweep
    assert s.snr_db == (100.0, 110.0, 120.0, 130.0, 140.0)


def test_precedence_flags_beat_file_beats_defaults(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text("seed = 1\nthreads = 4\nadc_bits = [4, 12]\n")
    file_values = load_file(cfg)
    s = resolve(file_values, {"seed": 2})
    assert s.seed == 2                    # flag wins
    assert s.threads == 4                 # file wins over default
    assert s.adc_bits == (4, 12)
    assert s.key_timers == 256            # default survives


def test_none_overrides_are_ignored(tmp_path):
    s = resolve({"seed": 5}, {"seed": None, "threads": None})
    assert s.seed == 5
    assert s.threads == 1


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        resolve({"sneed": 5})
    with pytest.raises(ConfigError):
        resolve(None, {"frobnicate": True})


def test_type_errors(tmp_path):
    with pytest.raises(ConfigError):
        resolve({"seed": "seven"})
    with pytest.raises(ConfigError):
        resolve({"ecc": 1})               # must be a real boolean
    with pytest.raises(ConfigError):
        resolve({"seed": True})           # a boolean is not a seed
    with pytest.raises(ConfigError):
        resolve({"adc_bits": ["a"]})


def test_scalar_sequences_promote():
    s = resolve({"adc_bits": 12, "snr_db": 120})
    assert s.adc_bits == (12,)
    assert s.snr_db == (120.0,)


def test_value_validation():
    for bad in ({"seed": -1}, {"threads": 0}, {"trials": 0},
                {"adc_bits": [0]}, {"adc_bits": [25]}, {"adc_bits": []},
                {"snr_db": [0.0]}, {"delta_t_hours": [-1.0]},
                {"hash_timers": 0}, {"key_timers": 0}):
        with pytest.raises(ConfigError):
            resolve(bad)


def test_timer_count_must_cover_one_exchange():
    resolve({"timer_count": 384})  # exactly G + N: fine
    with pytest.raises(ConfigError):
        resolve({"timer_count": 383})
    with pytest.raises(ConfigError):
        resolve({"timer_count": 512, "key_timers": 512})


def test_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_file(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("seed = [unclosed")
    with pytest.raises(ConfigError):
        load_file(bad)


def test_as_dict_is_json_ready():
    snapshot = Settings().as_dict()
    assert snapshot["snr_db"] == [100.0, 110.0, 120.0, 130.0, 140.0]
    assert snapshot["adc_bits"] is None
    assert isinstance(snapshot["delta_t_hours"], list)
