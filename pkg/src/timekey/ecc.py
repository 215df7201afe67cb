"""CRC key reconciliation over GF(2).

A user appends nothing to the key itself; it broadcasts the remainder
r(x) = m(x)*x^n mod g(x) of its key m under a public degree-n generator
polynomial g.  The server, holding a derived key that may differ from m in
a few positions, subtracts remainders (XOR, by linearity) to get the
syndrome of the error pattern and searches for the minimum-weight pattern
explaining it.  Publishing r costs n bits of search space, so the key is
fabricated n bits longer and truncated to its effective length afterwards.

Bit convention: index 0 of every bit vector is the highest-degree
coefficient (network order).  Generator polynomials are configured as hex
strings holding the low n coefficients with an implicit leading x^n term.

The default degree-28 generator is the product (x+1)*m1(x)*m3(x)*m5(x) of
minimal polynomials over GF(2^9) (field polynomial x^9+x^4+1), i.e. a
parity-extended 3-error-correcting binary BCH generator of length 511.
Its roots include alpha^0..alpha^6, seven consecutive powers, so the BCH
bound gives minimum distance >= 8 at every shortened length, and the
(x+1) factor makes all codeword weights even.  Distance 8 guarantees
unique decoding up to weight 3; the default hd_budget of 8 matches the
mismatch allowance used in the noise studies, with the caveat that
corrections of weight 4 and above are CRC-consistent but not guaranteed
unique (see README).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb
from typing import Optional

import numpy as np

__all__ = [
    "CrcConfig",
    "Remainder",
    "EccError",
    "ReconcileFailure",
    "SearchBudgetExceeded",
    "crc",
    "crc_values",
    "reconcile",
    "effective_key",
    "security_reduction",
    "minimum_distance_scan",
    "DEFAULT_POLY_HEX",
    "DEFAULT_DEGREE",
    "DEFAULT_KEY_LEN",
    "DEFAULT_HD_BUDGET",
    "DEFAULT_OP_CAP",
    "TOY_POLY_HEX",
    "TOY_DEGREE",
    "TOY_KEY_LEN",
]

DEFAULT_POLY_HEX = "7a37d8b"  # low 28 coefficients of (x+1)*m1*m3*m5, see module docstring
DEFAULT_DEGREE = 28
DEFAULT_KEY_LEN = 284  # 256 effective bits + 28 remainder bits of leakage compensation
DEFAULT_HD_BUDGET = 8
DEFAULT_OP_CAP = 10**9

TOY_POLY_HEX = "9b"  # (x+1)(x^7+x^3+1); minimum distance 4 at 16 bits
TOY_DEGREE = 8
TOY_KEY_LEN = 16


class EccError(RuntimeError):
    pass


class ReconcileFailure(EccError):
    """No error pattern within the Hamming budget explains the syndrome."""


class SearchBudgetExceeded(EccError):
    """The syndrome search hit its operation cap before exhausting the budget."""


@dataclass(frozen=True)
class Remainder:
    """An n-bit CRC remainder, held as the integer value of r(x)."""

    value: int
    degree: int

    def __post_init__(self):
        if not 0 <= self.value < (1 << self.degree):
            raise ValueError(f"remainder value does not fit in {self.degree} bits")

    @property
    def bits(self) -> np.ndarray:
        out = np.zeros(self.degree, dtype=np.uint8)
        for i in range(self.degree):
            out[i] = (self.value >> (self.degree - 1 - i)) & 1
        return out

    def to_hex(self) -> str:
        return format(self.value, f"0{(self.degree + 3) // 4}x")

    @classmethod
    def from_hex(cls, s: str, degree: int) -> "Remainder":
        return cls(value=int(s, 16), degree=degree)


@dataclass(frozen=True)
class CrcConfig:
    """Generator polynomial, key length, and reconciliation search limits.

    poly is the full polynomial as an int with bit i the coefficient of
    x^i, including the leading term, so poly.bit_length() - 1 is the
    degree.  key_len counts total key bits; key_len - degree of them are
    effective.  hd_budget caps the correction weight; op_cap caps the
    number of candidate error patterns the search may enumerate.
    """

    poly: int
    key_len: int
    hd_budget: int = DEFAULT_HD_BUDGET
    op_cap: int = DEFAULT_OP_CAP
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.poly < 2 or not self.poly & 1:
            # constant term 1 keeps x^n invertible mod g, so remainders
            # of shifted messages stay a faithful syndrome map
            raise ValueError("generator polynomial needs degree >= 1 and constant term 1")
        if self.key_len <= self.degree:
            raise ValueError("key_len must exceed the generator degree")
        if self.hd_budget < 0 or self.op_cap < 1:
            raise ValueError("hd_budget must be >= 0 and op_cap >= 1")

    @classmethod
    def from_hex(cls, hex_low: str, degree: int, key_len: int, **kwargs) -> "CrcConfig":
        low = int(hex_low, 16)
        if low >> degree:
            raise ValueError(f"hex holds more than {degree} coefficients")
        return cls(poly=(1 << degree) | low, key_len=key_len, **kwargs)

    @classmethod
    def default(cls, **kwargs) -> "CrcConfig":
        kwargs.setdefault("key_len", DEFAULT_KEY_LEN)
        return cls.from_hex(DEFAULT_POLY_HEX, DEFAULT_DEGREE, **kwargs)

    @classmethod
    def toy(cls, **kwargs) -> "CrcConfig":
        kwargs.setdefault("hd_budget", 1)  # toy code has distance 4: radius 1
        kwargs.setdefault("key_len", TOY_KEY_LEN)
        return cls.from_hex(TOY_POLY_HEX, TOY_DEGREE, **kwargs)

    @property
    def degree(self) -> int:
        return self.poly.bit_length() - 1

    @property
    def effective_len(self) -> int:
        return self.key_len - self.degree

    @property
    def poly_hex(self) -> str:
        width = (self.degree + 3) // 4
        return format(self.poly & ((1 << self.degree) - 1), f"0{width}x")

    # -- cached tables ------------------------------------------------------

    def _position_syndromes(self) -> np.ndarray:
        """syn[i] = x^(key_len - 1 - i + degree) mod g, as int64."""
        if "syn" not in self._cache:
            n, g = self.degree, self.poly
            if n > 62:
                raise ValueError("generator degree above 62 is not supported")
            cur = 1 << n  # x^(0 + n), reduce then walk degrees upward
            table = np.empty(self.key_len, dtype=np.int64)
            for d in range(self.key_len):
                c = cur
                if c >> n:
                    c ^= g
                table[self.key_len - 1 - d] = c
                cur = c << 1
            self._cache["syn"] = table
        return self._cache["syn"]

    def _combo_table(self, r: int):
        """All r-position combinations: (sorted syndromes, positions, order)."""
        key = ("combo", r)
        if key not in self._cache:
            syn = self._position_syndromes()
            L = self.key_len
            if r == 0:
                combos = np.zeros((1, 0), dtype=np.int64)
                vals = np.zeros(1, dtype=np.int64)
            elif r == 1:
                combos = np.arange(L, dtype=np.int64)[:, None]
                vals = syn.copy()
            elif r == 2:
                i, j = np.triu_indices(L, k=1)
                combos = np.column_stack([i, j]).astype(np.int64)
                vals = syn[i] ^ syn[j]
            elif r == 3:
                parts_c, parts_v = [], []
                for a in range(L - 2):
                    i, j = np.triu_indices(L - a - 1, k=1)
                    parts_c.append(np.column_stack(
                        [np.full(i.size, a), a + 1 + i, a + 1 + j]).astype(np.int64))
                    parts_v.append(syn[a] ^ syn[a + 1 + i] ^ syn[a + 1 + j])
                combos = np.concatenate(parts_c)
                vals = np.concatenate(parts_v)
            else:
                raise AssertionError("right tables are capped at 3 positions")
            order = np.argsort(vals, kind="stable")
            self._cache[key] = (vals[order], combos[order], order)
        return self._cache[key]


def _check_message(m, cfg: CrcConfig) -> np.ndarray:
    arr = np.asarray(m, dtype=np.uint8)
    if arr.ndim != 1 or arr.size != cfg.key_len:
        raise ValueError(f"message must be a flat {cfg.key_len}-bit vector")
    if np.any(arr > 1):
        raise ValueError("message bits must be 0 or 1")
    return arr


def _crc_value(m: np.ndarray, cfg: CrcConfig) -> int:
    syn = cfg._position_syndromes()
    picked = syn[m.astype(bool)]
    if picked.size == 0:
        return 0
    return int(np.bitwise_xor.reduce(picked))


def crc(m, cfg: CrcConfig) -> Remainder:
    """Remainder of m(x)*x^n modulo g(x) over GF(2).

    Linear: crc(a XOR b) has value crc(a).value XOR crc(b).value.
    """
    arr = _check_message(m, cfg)
    return Remainder(value=_crc_value(arr, cfg), degree=cfg.degree)


def crc_values(bits_matrix, cfg: CrcConfig) -> np.ndarray:
    """Remainder values for a whole (batch, key_len) bit matrix at once."""
    mat = np.asarray(bits_matrix, dtype=np.uint8)
    if mat.ndim != 2 or mat.shape[1] != cfg.key_len:
        raise ValueError(f"expected a (batch, {cfg.key_len}) bit matrix")
    syn = cfg._position_syndromes()
    return np.bitwise_xor.reduce(np.where(mat.astype(bool), syn, 0), axis=1)


def effective_key(m, cfg: CrcConfig) -> np.ndarray:
    """The first key_len - n bits: the part of the key that stays secret."""
    arr = _check_message(m, cfg)
    return arr[: cfg.effective_len].copy()


def security_reduction(cfg: CrcConfig) -> int:
    """Bits of brute-force search space forfeited by publishing the remainder."""
    return cfg.degree


def reconcile(m_server, r_user: Remainder, cfg: CrcConfig) -> np.ndarray:
    """The unique key within hd_budget of m_server whose CRC equals r_user.

    Searches error weights 0, 1, 2, ... in order and returns
    m_server XOR e for the first (minimum-weight) pattern e whose syndrome
    matches; among equal-weight solutions the lexicographically smallest
    pattern wins, so the result is deterministic.  Raises ReconcileFailure
    when no pattern within budget fits, SearchBudgetExceeded when the
    operation cap would be breached first.  Never returns a key whose CRC
    disagrees with r_user.
    """
    server = _check_message(m_server, cfg)
    if r_user.degree != cfg.degree:
        raise ValueError("remainder degree does not match the generator")
    target = _crc_value(server, cfg) ^ r_user.value
    positions = _search_min_weight(cfg, target, cfg.hd_budget, exclude_zero=False)
    if positions is None:
        raise ReconcileFailure(
            f"no error pattern of weight <= {cfg.hd_budget} matches the remainder")
    out = server.copy()
    for p in positions:
        out[p] ^= 1
    return out


def minimum_distance_scan(cfg: CrcConfig, max_weight: int) -> Optional[int]:
    """Smallest nonzero codeword weight <= max_weight, or None if absent.

    A codeword here is an error pattern invisible to the remainder check
    (syndrome zero), so this measures exactly what reconciliation can and
    cannot distinguish at the configured key length.
    """
    positions = _search_min_weight(cfg, 0, max_weight, exclude_zero=True)
    return None if positions is None else len(positions)


# -- minimum-weight syndrome search ------------------------------------------
#
# A weight-w pattern is split into its lowest w - r positions (streamed)
# and highest r = min(w // 2, 3) positions (precomputed table sorted by
# syndrome); the join condition max(left) < min(right) makes each pattern
# enumerated exactly once.  Cost accounting charges one operation per
# candidate combination on either side, checked against op_cap before a
# weight is attempted, so an infeasible budget fails fast and honestly.


def _search_min_weight(cfg, target, max_weight, exclude_zero):
    if target == 0 and not exclude_zero:
        return ()
    L = cfg.key_len
    ops_used = 0
    for w in range(1, min(max_weight, L) + 1):
        r = min(w // 2, 3)
        l = w - r
        planned = comb(L, l) + comb(L, r)
        if ops_used + planned > cfg.op_cap:
            raise SearchBudgetExceeded(
                f"weight-{w} search needs {planned} operations; "
                f"{cfg.op_cap - ops_used} remain of the {cfg.op_cap} cap")
        ops_used += planned
        hits = _matches_at_weight(cfg, target, l, r, exclude_zero)
        if hits:
            return min(hits, key=lambda pos: _pattern_order_key(pos, L))
    return None


def _pattern_order_key(positions, key_len):
    # lexicographically smallest bit string == smallest value as a
    # key_len-bit integer with bit index 0 most significant
    return sum(1 << (key_len - 1 - p) for p in positions)


def _matches_at_weight(cfg, target, l, r, exclude_zero):
    rvals, rcombos, _ = cfg._combo_table(r)
    rmin = rcombos[:, 0] if r else None
    hits = []

    def join(lcombos: np.ndarray, lvals: np.ndarray):
        # lcombos: (k, l) ascending position rows; lvals: their syndromes
        queries = lvals ^ target
        lo = np.searchsorted(rvals, queries, side="left")
        hi = np.searchsorted(rvals, queries, side="right")
        for row in np.flatnonzero(hi > lo):
            lpos = tuple(int(x) for x in lcombos[row])
            for k in range(lo[row], hi[row]):
                if r and lpos and rmin[k] <= lpos[-1]:
                    continue  # not the canonical low/high split of this pattern
                full = lpos + tuple(int(x) for x in rcombos[k])
                if full or not exclude_zero:
                    hits.append(full)

    L = cfg.key_len
    if l <= 3:
        lvals, lcombos, _ = cfg._combo_table(l)
        join(lcombos, lvals)
        return hits

    syn = cfg._position_syndromes()
    # stream left combinations grouped by their first l - 2 positions;
    # the final two come from a vectorized pair slice
    pair_i, pair_j = np.triu_indices(L, k=1)
    pair_vals = syn[pair_i] ^ syn[pair_j]
    for head in itertools.combinations(range(L), l - 2):
        base = 0
        for p in head:
            base ^= int(syn[p])
        lo = np.searchsorted(pair_i, head[-1] + 1, side="left")
        if lo >= pair_i.size:
            continue
        tail_i, tail_j = pair_i[lo:], pair_j[lo:]
        lcombos = np.column_stack(
            [np.tile(np.asarray(head, dtype=np.int64), (tail_i.size, 1)),
             tail_i, tail_j])
        join(lcombos, pair_vals[lo:] ^ base)
    return hits
