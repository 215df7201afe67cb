"""Key-exchange protocols: round trips, replay defense, channel hygiene."""

import json

import numpy as np
import pytest

from timekey.chipset import Chipset
from timekey.ecc import CrcConfig
from timekey.protocol import (
    AuthenticationError,
    DeltaTConfig,
    InsufficientTimersError,
    KeyRequest,
    KeyString,
    PublicChannel,
    ReplayError,
    ServerRegistry,
    SimClock,
    StreamAuthCipher,
    UnknownChipsetError,
    combine_keys,
    decrypt,
    encrypt,
    exchange_between_users,
    exchange_server_user,
    user_generate,
)


@pytest.fixture
def registry():
    return ServerRegistry()


def _chip(registry, count=512, seed=101):
    return registry.issue_chipset(count, seed=seed)


# -- data types --------------------------------------------------------------

def test_keystring_semantics():
    a = KeyString(bits=np.array([1, 0, 1, 1], dtype=np.uint8),
                  derived_at=0.0, source="user-measured")
    b = KeyString(bits=np.array([1, 0, 1, 1], dtype=np.uint8),
                  derived_at=99.0, source="server-derived")
    c = KeyString(bits=np.array([1, 0, 0, 1], dtype=np.uint8),
                  derived_at=0.0, source="user-measured")
    assert a == b            # equality is over bits alone
    assert hash(a) == hash(b)
    assert a != c
    assert a.hamming_distance(c) == 1
    assert len(a) == 4
    again = KeyString.from_bytes(a.to_bytes(), 4, derived_at=0.0,
                                 source="user-measured")
    assert again == a
    with pytest.raises(Exception):
        a.bits[0] = 0  # immutable


def test_key_request_validation_and_wire_format():
    req = KeyRequest(user_id="u", chipset_id="c", O=(5, 2, 9), H=(1, 3),
                     t=10.0)
    msg = req.to_message()
    assert set(msg) == {"user_id", "chipset_id", "O", "H", "t"}
    assert KeyRequest.from_message(json.loads(json.dumps(msg))) == req
    with pytest.raises(ValueError):
        KeyRequest(user_id="u", chipset_id="c", O=(1, 2), H=(2,), t=0.0)
    with pytest.raises(ValueError):
        KeyRequest(user_id="u", chipset_id="c", O=(), H=(1,), t=0.0)
    with pytest.raises(ValueError):
        KeyRequest(user_id="u", chipset_id="c", O=(1, 1), H=(2,), t=0.0)
    with pytest.raises(ValueError):
        KeyRequest(user_id="u", chipset_id="c", O=(1,), H=(2,), t=-1.0)


def test_clock_and_channel():
    clock = SimClock(100.0)
    channel = PublicChannel(clock)
    channel.post({"x": 1}, visible_at=250.0, sender="a")
    assert clock.now() == 250.0
    with pytest.raises(ValueError):
        clock.advance(-1.0)
    entries = channel.transcript()
    assert entries[0]["at"] == 250.0
    json.loads(channel.to_json())  # serializable as-is


def test_delta_t_sampling_range():
    cfg = DeltaTConfig()
    rng = np.random.default_rng(50)
    draws = [cfg.sample(rng) for _ in range(1000)]
    assert all(3600.0 <= d <= 172800.0 for d in draws)
    with pytest.raises(ValueError):
        DeltaTConfig(min_seconds=10.0, max_seconds=5.0)


# -- cipher -------------------------------------------------------------------

def test_cipher_round_trip_and_tamper():
    cipher = StreamAuthCipher()
    key = bytes(range(32))
    blob = cipher.encrypt(key, b"the quick brown fox")
    assert cipher.decrypt(key, blob) == b"the quick brown fox"
    # bit flip anywhere must be caught
    for pos in (0, len(blob) // 2, len(blob) - 1):
        broken = bytearray(blob)
        broken[pos] ^= 1
        with pytest.raises(AuthenticationError):
            cipher.decrypt(key, bytes(broken))
    with pytest.raises(AuthenticationError):
        cipher.decrypt(bytes(32), blob)  # wrong key


def test_cipher_keystring_helpers():
    rng = np.random.default_rng(51)
    key = KeyString(bits=rng.integers(0, 2, 256, dtype=np.uint8),
                    derived_at=0.0, source="user-measured")
    blob = encrypt(key, b"payload", rng=rng)
    assert decrypt(key, blob) == b"payload"


# -- protocol 1 ---------------------------------------------------------------

def test_protocol1_round_trip(registry):
    rng = np.random.default_rng(52)
    for _ in range(10):
        chip = _chip(registry, seed=int(rng.integers(2 ** 32)))
        outcome = exchange_server_user(registry, chip, G=128, N=256, rng=rng)
        assert outcome.matched
        assert outcome.user_key == outcome.server_key
        assert len(outcome.user_key) == 256


def test_protocol1_broadcast_is_public_information_only(registry):
    rng = np.random.default_rng(53)
    chip = _chip(registry)
    outcome = exchange_server_user(registry, chip, G=128, N=256, rng=rng)
    assert len(outcome.transcript) == 1
    body = outcome.transcript[0]["body"]
    assert set(body) == {"user_id", "chipset_id", "O", "H", "t"}
    text = json.dumps(body)
    # neither key bits nor timer parameters travel on the channel
    assert outcome.user_key.to_hex() not in text
    for fragment in ("p0", "p1", "p2", "p3", "bits"):
        assert f'"{fragment}"' not in text


def test_protocol1_with_reconciliation(registry):
    rng = np.random.default_rng(54)
    ecc = CrcConfig.default(key_len=256)
    chip = _chip(registry)
    outcome = exchange_server_user(registry, chip, G=128, N=256, rng=rng,
                                   ecc=ecc)
    assert outcome.matched
    assert len(outcome.user_key) == 256 - 28  # remainder bits are spent
    body = outcome.transcript[0]["body"]
    assert set(body) == {"user_id", "chipset_id", "O", "H", "t", "crc"}
    assert len(body["crc"]) == 7


def test_replay_rejected(registry):
    rng = np.random.default_rng(55)
    chip = _chip(registry)
    _, req = user_generate(chip, 16, 32, 500.0, rng)
    registry.derive(req)
    with pytest.raises(ReplayError):
        registry.derive(req)
    # a single stale index is enough to poison a fresh-looking request
    fresh = user_generate(chip, 16, 32, 500.0, rng)[1]
    poisoned = KeyRequest(user_id=fresh.user_id, chipset_id=fresh.chipset_id,
                          O=(req.O[0],) + fresh.O[1:], H=fresh.H, t=777.0)
    with pytest.raises(ReplayError):
        registry.derive(poisoned)


def test_unknown_chipset_refused(registry):
    req = KeyRequest(user_id="u", chipset_id="nope", O=(1, 2), H=(3,), t=0.0)
    with pytest.raises(UnknownChipsetError):
        registry.derive(req)


def test_insufficient_timers():
    chip = Chipset.fabricate_random(16, seed=7)
    rng = np.random.default_rng(56)
    with pytest.raises(InsufficientTimersError):
        user_generate(chip, 128, 256, 0.0, rng)


# -- protocol 2 ---------------------------------------------------------------

def test_protocol2_round_trip(registry):
    rng = np.random.default_rng(57)
    chip_a = _chip(registry, seed=1)
    chip_b = _chip(registry, seed=2)
    session = exchange_between_users(registry, chip_a, chip_b, G=128, N=256,
                                     rng=rng)
    assert session.succeeded
    assert session.key_r_at_a == session.key_r_at_b == session.session_key
    # the relayed session key is not either user's measured key
    assert session.session_key != session.key_a
    assert session.session_key != session.key_b
    assert session.ciphertext_a != session.ciphertext_b


def test_protocol2_transcript_hygiene(registry):
    rng = np.random.default_rng(58)
    session = exchange_between_users(registry, _chip(registry, seed=3),
                                     _chip(registry, seed=4), G=32, N=64,
                                     rng=rng)
    kinds = [e["kind"] for e in session.transcript]
    assert kinds == ["key-request", "key-request", "ciphertext", "ciphertext"]
    text = json.dumps(session.transcript)
    assert session.session_key.to_hex() not in text
    assert session.key_a.to_hex() not in text
    assert session.key_b.to_hex() not in text


def test_protocol2_sessions_are_unique(registry):
    rng = np.random.default_rng(59)
    s1 = exchange_between_users(registry, _chip(registry, seed=5),
                                _chip(registry, seed=6), G=32, N=64, rng=rng)
    s2 = exchange_between_users(registry, _chip(registry, seed=7),
                                _chip(registry, seed=8), G=32, N=64, rng=rng)
    assert s1.session_key != s2.session_key


def test_combine_keys_depends_on_all_inputs():
    rng = np.random.default_rng(60)
    key_a = KeyString(bits=rng.integers(0, 2, 256, dtype=np.uint8),
                      derived_at=0.0, source="server-derived")
    key_b = KeyString(bits=rng.integers(0, 2, 256, dtype=np.uint8),
                      derived_at=0.0, source="server-derived")
    f1, f2 = b"\x01" * 32, b"\x02" * 32
    k_r = combine_keys(key_a, key_b, f1)
    assert len(k_r) == 256
    assert combine_keys(key_a, key_b, f1) == k_r  # deterministic
    assert combine_keys(key_a, key_b, f2) != k_r
    assert combine_keys(key_b, key_a, f1) != k_r


# -- registry persistence ------------------------------------------------------

def test_registry_save_load_round_trip(registry, tmp_path):
    rng = np.random.default_rng(61)
    chip = _chip(registry)
    _, spent_req = user_generate(chip, 16, 32, 100.0, rng)
    registry.derive(spent_req)

    path = tmp_path / "registry.bin"
    registry.save(path, passphrase="hunter2")
    loaded = ServerRegistry.load(path, passphrase="hunter2")
    assert loaded.knows(chip.id)
    # replay state survives persistence
    with pytest.raises(ReplayError):
        loaded.derive(spent_req)
    # and the loaded registry still derives fresh requests correctly
    user_key, req = user_generate(chip, 16, 32, 300.0, rng)
    assert loaded.derive(req) == user_key


def test_registry_file_is_opaque(registry, tmp_path):
    chip = _chip(registry)
    path = tmp_path / "registry.bin"
    registry.save(path, passphrase="pw")
    text = path.read_text()
    payload = json.loads(text)
    assert payload["format"] == "timekey-registry-v1"
    # parameters are inside the encrypted blob, never in the clear
    assert chip.id not in text.replace(payload["blob"], "")
    assert '"p0"' not in text
    with pytest.raises(AuthenticationError):
        ServerRegistry.load(path, passphrase="wrong")


def test_registry_never_exports_secrets(registry):
    _chip(registry)
    with pytest.raises(PermissionError):
        registry.export_secrets()
