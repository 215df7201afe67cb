"""The two key-exchange protocols built on one-time-readable timer chipsets.

Protocol 1 (server and user): the user measures an XOR-masked key from its
chipset at time t, waits a random delay, and broadcasts only the timer
indices and t.  The server, holding the secret timer parameters of every
chipset it fabricated, replays the same computation on its software clone
and arrives at the same key.  An eavesdropper sees indices and a stale
timestamp; reading its own stolen replica after the delay yields noise
because the timers kept drifting.

Protocol 2 (user and user, server as trusted third party): each user runs
protocol 1 independently; the server folds both keys through a keyed
one-way combiner into a session key K_R and returns K_R to each user
encrypted under that user's own key.

Everything here is driven by an injected simulated clock and explicit RNG
streams, so whole exchanges are reproducible bit for bit.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import secrets
import threading
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import ecc as ecc_mod
from .chipset import HASH_ADC_BITS, Chipset
from .timer_model import AdcConfig, DEFAULT_RANGES, ParamRanges, bits_array

__all__ = [
    "KeyRequest",
    "KeyString",
    "SimClock",
    "PublicChannel",
    "ServerRegistry",
    "Session",
    "ExchangeOutcome",
    "StreamAuthCipher",
    "AuthenticationError",
    "ReplayError",
    "UnknownChipsetError",
    "InsufficientTimersError",
    "DeltaTConfig",
    "user_generate",
    "broadcast_after_wait",
    "combine_keys",
    "encrypt",
    "decrypt",
    "exchange_server_user",
    "exchange_between_users",
    "DEFAULT_G",
    "DEFAULT_N",
]

DEFAULT_G = 128  # hash timers folded into the mask bit
DEFAULT_N = 256  # key timers, one output bit each

USER_MEASURED = "user-measured"
SERVER_DERIVED = "server-derived"
SESSION_COMBINED = "session-combined"


class ReplayError(RuntimeError):
    """A (user, chipset, index) triple appeared in an earlier request."""


class UnknownChipsetError(KeyError):
    pass


class InsufficientTimersError(RuntimeError):
    pass


class AuthenticationError(RuntimeError):
    """Ciphertext failed its integrity check (wrong key or tampering)."""


# -- core value types ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class KeyString:
    """An N-bit key plus generation metadata.  Equality compares bits only."""

    bits: np.ndarray
    derived_at: float
    source: str

    def __post_init__(self):
        arr = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if arr.ndim != 1 or arr.size == 0 or np.any(arr > 1):
            raise ValueError("bits must be a non-empty flat 0/1 vector")
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    def __len__(self):
        return int(self.bits.size)

    def __eq__(self, other):
        if not isinstance(other, KeyString):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(self.to_bytes())

    def to_bytes(self) -> bytes:
        return np.packbits(self.bits).tobytes()

    def to_hex(self) -> str:
        return self.to_bytes().hex()

    @classmethod
    def from_bytes(cls, data: bytes, n_bits: int, *, derived_at: float,
                   source: str) -> "KeyString":
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))[:n_bits]
        if bits.size != n_bits:
            raise ValueError("byte string too short for the requested bit count")
        return cls(bits=bits, derived_at=derived_at, source=source)

    def hamming_distance(self, other: "KeyString") -> int:
        if len(self) != len(other):
            raise ValueError("length mismatch")
        return int(np.count_nonzero(self.bits ^ other.bits))


@dataclass(frozen=True)
class KeyRequest:
    """The public broadcast tuple: indices and sample time, never bits.

    crc_hex optionally carries the remainder of the user's key under the
    public reconciliation polynomial; it leaks its degree in search-space
    bits and nothing else.
    """

    user_id: str
    chipset_id: str
    O: Tuple[int, ...]
    H: Tuple[int, ...]
    t: float
    crc_hex: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "O", tuple(int(i) for i in self.O))
        object.__setattr__(self, "H", tuple(int(i) for i in self.H))
        if not self.O or not self.H:
            raise ValueError("O and H must be non-empty")
        if len(set(self.O)) != len(self.O) or len(set(self.H)) != len(self.H):
            raise ValueError("indices within O and within H must be distinct")
        if set(self.O) & set(self.H):
            raise ValueError("O and H must be disjoint")
        if min(min(self.O), min(self.H)) < 1:
            raise ValueError("indices are 1-based and must be >= 1")
        if self.t < 0:
            raise ValueError("t must be >= 0")

    def to_message(self) -> dict:
        msg = {"user_id": self.user_id, "chipset_id": self.chipset_id,
               "O": list(self.O), "H": list(self.H), "t": self.t}
        if self.crc_hex is not None:
            msg["crc"] = self.crc_hex
        return msg

    @classmethod
    def from_message(cls, msg: dict) -> "KeyRequest":
        return cls(user_id=msg["user_id"], chipset_id=msg["chipset_id"],
                   O=tuple(msg["O"]), H=tuple(msg["H"]), t=float(msg["t"]),
                   crc_hex=msg.get("crc"))


class SimClock:
    """Injected simulation time; nothing in the package reads wall time."""

    def __init__(self, start: float = 0.0):
        self._now = float(start)

    def now(self) -> float:
        return self._now

    def advance(self, dt: float) -> float:
        if dt < 0:
            raise ValueError("time does not run backwards")
        self._now += dt
        return self._now

    def advance_to(self, t: float) -> float:
        if t > self._now:
            self._now = t
        return self._now


class PublicChannel:
    """Broadcast medium every party, including the adversary, can read."""

    def __init__(self, clock: Optional[SimClock] = None):
        self.clock = clock or SimClock()
        self._posts: List[dict] = []

    def post(self, body: dict, *, visible_at: float, sender: str,
             kind: str = "key-request") -> dict:
        entry = {"at": float(visible_at), "from": sender, "kind": kind,
                 "body": body}
        self._posts.append(entry)
        self.clock.advance_to(visible_at)
        return entry

    def transcript(self) -> List[dict]:
        """Everything ever posted, in order.  This is the adversary's view."""
        return [dict(p) for p in self._posts]

    def to_json(self) -> str:
        return json.dumps(self._posts, indent=2, sort_keys=True)


@dataclass(frozen=True)
class DeltaTConfig:
    """Distribution of the wait between measurement and broadcast."""

    min_seconds: float = 3600.0
    max_seconds: float = 172800.0

    def __post_init__(self):
        if not 0 <= self.min_seconds <= self.max_seconds:
            raise ValueError("need 0 <= min_seconds <= max_seconds")

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.min_seconds, self.max_seconds))


# -- authenticated cipher (pluggable) ----------------------------------------


class StreamAuthCipher:
    """Keyed-BLAKE2b keystream XOR with a keyed tag.

    Deliberately simple: the protocol treats encryption as a pluggable
    commodity, and this default keeps the package dependency-free while
    providing real confidentiality plus tamper-evident decryption.  Swap in
    an AEAD from a crypto library by matching encrypt/decrypt signatures.
    """

    NONCE_LEN = 16
    TAG_LEN = 32

    def encrypt(self, key: bytes, plaintext: bytes,
                rng: Optional[np.random.Generator] = None) -> bytes:
        if rng is None:
            nonce = secrets.token_bytes(self.NONCE_LEN)
        else:
            nonce = rng.bytes(self.NONCE_LEN)
        ct = bytes(a ^ b for a, b in
                   zip(plaintext, self._keystream(key, nonce, len(plaintext))))
        return nonce + ct + self._tag(key, nonce + ct)

    def decrypt(self, key: bytes, blob: bytes) -> bytes:
        if len(blob) < self.NONCE_LEN + self.TAG_LEN:
            raise AuthenticationError("ciphertext too short")
        body, tag = blob[:-self.TAG_LEN], blob[-self.TAG_LEN:]
        if not hmac.compare_digest(tag, self._tag(key, body)):
            raise AuthenticationError("tag mismatch: wrong key or tampered data")
        nonce, ct = body[:self.NONCE_LEN], body[self.NONCE_LEN:]
        return bytes(a ^ b for a, b in zip(ct, self._keystream(key, nonce, len(ct))))

    @staticmethod
    def _keystream(key: bytes, nonce: bytes, length: int) -> bytes:
        out = bytearray()
        counter = 0
        while len(out) < length:
            out += hashlib.blake2b(counter.to_bytes(8, "big"), key=key,
                                   salt=nonce, person=b"tk.stream").digest()
            counter += 1
        return bytes(out[:length])

    @staticmethod
    def _tag(key: bytes, data: bytes) -> bytes:
        return hashlib.blake2b(data, key=key, person=b"tk.auth",
                               digest_size=StreamAuthCipher.TAG_LEN).digest()


DEFAULT_CIPHER = StreamAuthCipher()


def encrypt(key: KeyString, plaintext: bytes,
            rng: Optional[np.random.Generator] = None,
            cipher=DEFAULT_CIPHER) -> bytes:
    return cipher.encrypt(key.to_bytes(), plaintext, rng)


def decrypt(key: KeyString, blob: bytes, cipher=DEFAULT_CIPHER) -> bytes:
    return cipher.decrypt(key.to_bytes(), blob)


# -- user side ----------------------------------------------------------------


def user_generate(chip: Chipset, G: int, N: int, t: float,
                  rng: np.random.Generator, *, user_id: str = "user",
                  ecc: Optional[ecc_mod.CrcConfig] = None
                  ) -> Tuple[KeyString, KeyRequest]:
    """Measure a fresh key: pick disjoint (O, H) uniformly, read, broadcast.

    Returns the secret KeyString and the public KeyRequest; the request
    carries indices and time only (plus the CRC remainder when ecc is on).
    """
    if G < 1 or N < 1:
        raise ValueError("G and N must be >= 1")
    pool = chip.unconsumed_indices()
    if pool.size < G + N:
        raise InsufficientTimersError(
            f"need {G + N} unconsumed timers, chipset {chip.id} has {pool.size}")
    pick = rng.choice(pool, size=G + N, replace=False)
    O, H = pick[:N], pick[N:]
    receipt = chip.generate_key_output(O, H, t)
    key = KeyString(bits=receipt.bits, derived_at=t, source=USER_MEASURED)
    crc_hex = None
    if ecc is not None:
        if ecc.key_len != N:
            raise ValueError(f"ecc.key_len {ecc.key_len} must equal N {N}")
        crc_hex = ecc_mod.crc(key.bits, ecc).to_hex()
    req = KeyRequest(user_id=user_id, chipset_id=chip.id,
                     O=tuple(map(int, O)), H=tuple(map(int, H)), t=float(t),
                     crc_hex=crc_hex)
    return key, req


def broadcast_after_wait(req: KeyRequest, delta_t: float,
                         channel: PublicChannel) -> dict:
    """Post the request publicly, visible delta_t seconds after sampling."""
    if delta_t < 0:
        raise ValueError("delta_t must be >= 0")
    return channel.post(req.to_message(), visible_at=req.t + delta_t,
                        sender=req.user_id)


# -- server side ----------------------------------------------------------------


def combine_keys(key_a: KeyString, key_b: KeyString, f_secret: bytes) -> KeyString:
    """Fold two N-bit keys into one through a keyed pseudorandom function.

    The combiner secret is fresh per session and never leaves the server,
    so even a party knowing one input key cannot invert the session key
    toward the other input.
    """
    if len(key_a) != len(key_b):
        raise ValueError("keys must have equal length")
    n = len(key_a)
    material = bytearray()
    counter = 0
    data = key_a.to_bytes() + key_b.to_bytes()
    while len(material) * 8 < n:
        material += hashlib.blake2b(data + counter.to_bytes(8, "big"),
                                    key=f_secret, person=b"tk.combine").digest()
        counter += 1
    bits = np.unpackbits(np.frombuffer(bytes(material), dtype=np.uint8))[:n]
    return KeyString(bits=bits, derived_at=max(key_a.derived_at, key_b.derived_at),
                     source=SESSION_COMBINED)


class ServerRegistry:
    """The fabricator's secret side: timer parameters and the replay log.

    Holds, per chipset id, the full parameter matrix (the 'software clone'
    that can be rewound to any t) and ADC configuration, plus the log of
    (user, chipset, index) triples already spent.  Derivation and replay
    checking are atomic under one lock; distinct registry instances are
    independent.  No public method returns parameter material, and the
    on-disk form is encrypted under a passphrase-derived key.
    """

    _MAGIC = "timekey-registry-v1"

    def __init__(self, *, ranges: ParamRanges = DEFAULT_RANGES,
                 key_adc: AdcConfig = AdcConfig(bits=12),
                 hash_adc: AdcConfig = AdcConfig(bits=HASH_ADC_BITS)):
        self.ranges = ranges
        self.key_adc = key_adc
        self.hash_adc = hash_adc
        self._chips: dict = {}
        self._spent: set = set()
        self._lock = threading.Lock()

    # fabrication

    def issue_chipset(self, count: int, *, seed: int,
                      chipset_id: Optional[str] = None, **chip_kwargs) -> Chipset:
        """Fabricate a chipset for a user and file its parameters away."""
        with self._lock:
            cid = chipset_id or f"chip-{len(self._chips):04d}"
            if cid in self._chips:
                raise ValueError(f"chipset id {cid!r} already issued")
            chip = Chipset.fabricate_random(
                count, seed=seed, ranges=self.ranges, chipset_id=cid,
                key_adc=self.key_adc, hash_adc=self.hash_adc, **chip_kwargs)
            self._chips[cid] = chip._pmat.copy()
            return chip

    def adopt_chipset(self, chip: Chipset) -> None:
        """Register an externally fabricated chipset (testing convenience)."""
        with self._lock:
            if chip.id in self._chips:
                raise ValueError(f"chipset id {chip.id!r} already registered")
            self._chips[chip.id] = chip._pmat.copy()

    def knows(self, chipset_id: str) -> bool:
        return chipset_id in self._chips

    # derivation

    def derive(self, req: KeyRequest,
               ecc: Optional[ecc_mod.CrcConfig] = None) -> KeyString:
        """Recompute the user's key from the secret parameters, noiselessly.

        Enforces the replay defense: every (user, chipset, index) triple is
        single-use across the registry's lifetime.  With ecc given and a
        remainder present on the request, the derived key is reconciled
        toward the user's remainder before being returned.
        """
        with self._lock:
            pmat = self._chips.get(req.chipset_id)
            if pmat is None:
                raise UnknownChipsetError(req.chipset_id)
            size = pmat.shape[0]
            if max(max(req.O), max(req.H)) > size:
                raise ValueError(f"index out of range for chipset {req.chipset_id}")
            triples = [(req.user_id, req.chipset_id, i) for i in req.O + req.H]
            stale = [tr for tr in triples if tr in self._spent]
            if stale:
                raise ReplayError(
                    f"index {stale[0][2]} already spent by {req.user_id} "
                    f"on {req.chipset_id}")
            key_rows = np.asarray(req.O, dtype=np.int64) - 1
            hash_rows = np.asarray(req.H, dtype=np.int64) - 1
            key_bits = bits_array(pmat[key_rows], self.key_adc, req.t)
            mask = np.bitwise_xor.reduce(
                bits_array(pmat[hash_rows], self.hash_adc, req.t))
            bits = key_bits ^ mask
            self._spent.update(triples)
        if ecc is not None and req.crc_hex is not None:
            remainder = ecc_mod.Remainder.from_hex(req.crc_hex, ecc.degree)
            bits = ecc_mod.reconcile(bits, remainder, ecc)
        return KeyString(bits=bits, derived_at=req.t, source=SERVER_DERIVED)

    # persistence (encrypted at rest)

    def export_secrets(self):
        """Refused by design: parameter material never leaves in the clear."""
        raise PermissionError(
            "timer parameters are not exportable; use save(path, passphrase)")

    def save(self, path, passphrase: str) -> None:
        payload = json.dumps({
            "chips": {cid: mat.tolist() for cid, mat in self._chips.items()},
            "spent": sorted(list(tr) for tr in self._spent),
            "ranges": self.ranges.as_dict(),
            "key_adc": {"bits": self.key_adc.bits,
                        "full_scale": self.key_adc.full_scale},
            "hash_adc": {"bits": self.hash_adc.bits,
                         "full_scale": self.hash_adc.full_scale},
        }).encode()
        salt = secrets.token_bytes(16)
        blob = DEFAULT_CIPHER.encrypt(self._file_key(passphrase, salt), payload)
        wrapper = {"format": self._MAGIC, "kdf": "scrypt-n16384-r8-p1",
                   "salt": salt.hex(), "blob": blob.hex()}
        with open(path, "w") as fh:
            json.dump(wrapper, fh)

    @classmethod
    def load(cls, path, passphrase: str) -> "ServerRegistry":
        with open(path) as fh:
            wrapper = json.load(fh)
        if wrapper.get("format") != cls._MAGIC:
            raise ValueError("not a registry file")
        salt = bytes.fromhex(wrapper["salt"])
        try:
            payload = DEFAULT_CIPHER.decrypt(cls._file_key(passphrase, salt),
                                             bytes.fromhex(wrapper["blob"]))
        except AuthenticationError as exc:
            raise AuthenticationError("wrong passphrase or corrupted file") from exc
        state = json.loads(payload)
        reg = cls(ranges=ParamRanges.from_dict(state["ranges"]),
                  key_adc=AdcConfig(**state["key_adc"]),
                  hash_adc=AdcConfig(**state["hash_adc"]))
        reg._chips = {cid: np.asarray(mat, dtype=np.float64)
                      for cid, mat in state["chips"].items()}
        reg._spent = {tuple(tr) for tr in state["spent"]}
        return reg

    @staticmethod
    def _file_key(passphrase: str, salt: bytes) -> bytes:
        return hashlib.scrypt(passphrase.encode(), salt=salt,
                              n=16384, r=8, p=1, dklen=32)

    def __repr__(self):
        return (f"ServerRegistry(chipsets={len(self._chips)}, "
                f"spent={len(self._spent)})")


# -- end-to-end drivers ---------------------------------------------------------


def _effective(key: KeyString, ecc: ecc_mod.CrcConfig) -> KeyString:
    return KeyString(bits=ecc_mod.effective_key(key.bits, ecc),
                     derived_at=key.derived_at, source=key.source)


@dataclass
class ExchangeOutcome:
    """Protocol 1 result: both keys, the broadcast, and the adversary view."""

    user_key: KeyString
    server_key: KeyString
    request: KeyRequest
    matched: bool
    transcript: List[dict] = field(default_factory=list)


def exchange_server_user(server: ServerRegistry, chip: Chipset, *,
                         G: int = DEFAULT_G, N: int = DEFAULT_N,
                         t: Optional[float] = None,
                         delta_t: Optional[float] = None,
                         delta_t_config: DeltaTConfig = DeltaTConfig(),
                         rng: np.random.Generator,
                         channel: Optional[PublicChannel] = None,
                         user_id: str = "user-a",
                         ecc: Optional[ecc_mod.CrcConfig] = None
                         ) -> ExchangeOutcome:
    """Protocol 1, end to end, on an injected clock and channel."""
    channel = channel or PublicChannel()
    if t is None:
        t = channel.clock.now()
    if delta_t is None:
        delta_t = delta_t_config.sample(rng)
    user_key, req = user_generate(chip, G, N, t, rng, user_id=user_id, ecc=ecc)
    entry = broadcast_after_wait(req, delta_t, channel)
    wire = KeyRequest.from_message(entry["body"])
    server_key = server.derive(wire, ecc=ecc)
    if ecc is not None:
        # remainder bits are spent on reconciliation; both sides keep the
        # effective prefix as the usable key
        user_key = _effective(user_key, ecc)
        server_key = _effective(server_key, ecc)
    return ExchangeOutcome(user_key=user_key, server_key=server_key, request=req,
                           matched=(user_key == server_key),
                           transcript=channel.transcript())


@dataclass
class Session:
    """Protocol 2 result: what each party ended up holding."""

    user_a: str
    user_b: str
    key_a: KeyString
    key_b: KeyString
    session_key: KeyString          # the server-side K_R
    ciphertext_a: bytes
    ciphertext_b: bytes
    key_r_at_a: Optional[KeyString]
    key_r_at_b: Optional[KeyString]
    succeeded: bool
    transcript: List[dict] = field(default_factory=list)


def exchange_between_users(server: ServerRegistry, chip_a: Chipset,
                           chip_b: Chipset, *,
                           G: int = DEFAULT_G, N: int = DEFAULT_N,
                           t_a: Optional[float] = None,
                           t_b: Optional[float] = None,
                           delta_t_config: DeltaTConfig = DeltaTConfig(),
                           rng: np.random.Generator,
                           channel: Optional[PublicChannel] = None,
                           cipher=DEFAULT_CIPHER,
                           user_a: str = "user-a", user_b: str = "user-b",
                           ecc: Optional[ecc_mod.CrcConfig] = None) -> Session:
    """Protocol 2: two protocol-1 runs plus combine-and-return-encrypted.

    The users never share timers, times, or chipsets; they only both talk
    to the server.  Each receives K_R under its own key; the session
    succeeds when both decrypt to the same K_R the server computed.
    """
    channel = channel or PublicChannel()
    now = channel.clock.now()
    t_a = now if t_a is None else t_a
    t_b = now if t_b is None else t_b

    key_a, req_a = user_generate(chip_a, G, N, t_a, rng, user_id=user_a, ecc=ecc)
    entry_a = broadcast_after_wait(req_a, delta_t_config.sample(rng), channel)
    key_b, req_b = user_generate(chip_b, G, N, t_b, rng, user_id=user_b, ecc=ecc)
    entry_b = broadcast_after_wait(req_b, delta_t_config.sample(rng), channel)

    derived_a = server.derive(KeyRequest.from_message(entry_a["body"]), ecc=ecc)
    derived_b = server.derive(KeyRequest.from_message(entry_b["body"]), ecc=ecc)
    if ecc is not None:
        key_a, key_b = _effective(key_a, ecc), _effective(key_b, ecc)
        derived_a, derived_b = _effective(derived_a, ecc), _effective(derived_b, ecc)

    f_secret = rng.bytes(32)  # fresh per session, never serialized
    k_r = combine_keys(derived_a, derived_b, f_secret)
    ct_a = cipher.encrypt(derived_a.to_bytes(), k_r.to_bytes(), rng)
    ct_b = cipher.encrypt(derived_b.to_bytes(), k_r.to_bytes(), rng)
    at = channel.clock.now()
    channel.post({"to": user_a, "ciphertext": ct_a.hex()}, visible_at=at,
                 sender="server", kind="ciphertext")
    channel.post({"to": user_b, "ciphertext": ct_b.hex()}, visible_at=at,
                 sender="server", kind="ciphertext")

    def open_at(user_key: KeyString, ct: bytes) -> Optional[KeyString]:
        try:
            data = cipher.decrypt(user_key.to_bytes(), ct)
        except AuthenticationError:
            return None
        return KeyString.from_bytes(data, len(k_r), derived_at=at,
                                    source=SESSION_COMBINED)

    r_at_a = open_at(key_a, ct_a)
    r_at_b = open_at(key_b, ct_b)
    ok = r_at_a is not None and r_at_b is not None and r_at_a == r_at_b == k_r
    return Session(user_a=user_a, user_b=user_b, key_a=key_a, key_b=key_b,
                   session_key=k_r, ciphertext_a=ct_a, ciphertext_b=ct_b,
                   key_r_at_a=r_at_a, key_r_at_b=r_at_b, succeeded=ok,
                   transcript=channel.transcript())
