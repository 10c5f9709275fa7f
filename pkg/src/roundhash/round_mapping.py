"""Round-mapping: constant-time hash -> bucket lookup with incremental growth.

The hash circle is split into ``m`` arcs. Arcs ``0..p`` are *short* (integer
weight ``s``) and arcs ``p+1..m-1`` are *long* (weight ``s + 1``).  A 64-bit
hash ``h`` lands on arc ``j`` via one 64x64->128 product and a division by a
small constant, and arc ``j`` is mapped to its bucket number in O(1) using
only shifts, adds, multiplies and precomputed reciprocals.

The hot paths are numba kernels.  ``RoundMapper`` owns the (tiny) state and
exposes scalar and vectorised entry points over the same kernels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from llvmlite import ir
from numba import types
from numba.extending import intrinsic

__all__ = [
    "Reciprocals",
    "RoundMapper",
    "pos",
    "ctz",
    "MapperState",
]

_U64 = np.uint64
_ONE = np.uint64(1)
_DEBRUIJN = np.uint64(0x03F79D71B4CB0A89)
_S58 = np.uint64(58)

_MASK64 = (1 << 64) - 1


def _debruijn_table() -> np.ndarray:
    table = np.zeros(64, dtype=np.int64)
    for i in range(64):
        table[(((1 << i) * 0x03F79D71B4CB0A89) & _MASK64) >> 58] = i
    return table


_CTZ_TABLE = _debruijn_table()
_CTZ_LIST = _CTZ_TABLE.tolist()


@intrinsic
def _mulhi(typingctx, a, b):
    """High 64 bits of the full 128-bit product of two uint64 values."""
    sig = types.uint64(types.uint64, types.uint64)

    def codegen(context, builder, signature, args):
        wide = ir.IntType(128)
        prod = builder.mul(builder.zext(args[0], wide), builder.zext(args[1], wide))
        return builder.trunc(builder.lshr(prod, ir.Constant(wide, 64)), ir.IntType(64))

    return sig, codegen


@numba.njit(cache=True, inline="always")
def _rdiv(n, d, base, magic, sh1, sh2):
    # floor(n / d) for d in the reciprocal table window [base, base + len).
    k = d - base
    t = _mulhi(magic[k], n)
    return (t + ((n - t) >> sh1[k])) >> sh2[k]


@numba.njit(cache=True, inline="always")
def _ctz(i, table):
    low = i & (~i + _ONE)
    return table[np.int64((low * _DEBRUIJN) >> _S58)]


@numba.njit(cache=True, inline="always")
def _pos(i, x, q, s0, table):
    e = _ctz(i, table)
    num = (_U64(s0 + x) << _U64(q)) + i
    return np.int64(num >> _U64(e + 1))


@numba.njit(cache=True, inline="always")
def _bucket_of_arc(j, s0, s, p, q, g, magic, sh1, sh2, table):
    if j < s0:
        return j
    if j > p:
        jj = j - g
        sp = s
    else:
        jj = j
        sp = s + 1
    a = np.int64(_rdiv(_U64(jj), _U64(sp), _U64(s0), magic, sh1, sh2))
    r = jj - a * sp
    f = 1 if sp > s0 else 0
    t = 1 if r >= s0 else 0
    x = r - t * s0
    i = (a << f) + t
    return _pos(_U64(i), x, q + f, s0, table)


@numba.njit(cache=True, inline="always")
def _arc_of(h, s0, s, p, w, magic, sh1, sh2):
    v = _mulhi(h, _U64(w))
    short_w = _U64((p + 1) * s)
    if v < short_w:
        return np.int64(_rdiv(v, _U64(s), _U64(s0), magic, sh1, sh2))
    rest = _rdiv(v - short_w, _U64(s + 1), _U64(s0), magic, sh1, sh2)
    return p + 1 + np.int64(rest)


@numba.njit(cache=True)
def _find_bucket_many(hs, out, s0, s, p, q, g, w, magic, sh1, sh2, table):
    for k in range(hs.shape[0]):
        j = _arc_of(hs[k], s0, s, p, w, magic, sh1, sh2)
        out[k] = _bucket_of_arc(j, s0, s, p, q, g, magic, sh1, sh2, table)


@numba.njit(cache=True)
def _find_bucket_packed(hs, out, params, magic, sh1, sh2, table):
    s0, s, p, q, g, w = params[0], params[1], params[2], params[3], params[4], params[5]
    for k in range(hs.shape[0]):
        j = _arc_of(hs[k], s0, s, p, w, magic, sh1, sh2)
        out[k] = _bucket_of_arc(j, s0, s, p, q, g, magic, sh1, sh2, table)


@numba.njit(cache=True)
def _arc_of_many(hs, out, s0, s, p, w, magic, sh1, sh2):
    for k in range(hs.shape[0]):
        out[k] = _arc_of(hs[k], s0, s, p, w, magic, sh1, sh2)


@numba.njit(cache=True)
def _buckets_of_arcs(js, out, s0, s, p, q, g, magic, sh1, sh2, table):
    for k in range(js.shape[0]):
        out[k] = _bucket_of_arc(js[k], s0, s, p, q, g, magic, sh1, sh2, table)


@numba.njit(cache=True)
def _arc_permutation(out, m, s0, s, p, q, g, magic, sh1, sh2, table):
    for j in range(m):
        out[j] = _bucket_of_arc(j, s0, s, p, q, g, magic, sh1, sh2, table)


@numba.njit(cache=True)
def _tally_regular(counts, n_samples, s0, s, p, q, g, w, magic, sh1, sh2, table):
    # Hash values at regular intervals of the 64-bit range.
    step = _U64(0xFFFFFFFFFFFFFFFF) // _U64(n_samples)
    for k in range(n_samples):
        h = _U64(k) * step
        j = _arc_of(h, s0, s, p, w, magic, sh1, sh2)
        counts[_bucket_of_arc(j, s0, s, p, q, g, magic, sh1, sh2, table)] += 1


class Reciprocals:
    """Multiply-shift reciprocals for every divisor in ``[lo, hi]``.

    Uses the round-up scheme of Granlund and Montgomery, which is exact for
    all 64-bit dividends: with ``l = ceil(log2 d)``,
    ``magic = floor(2**64 * (2**l - d) / d) + 1`` and
    ``n // d == (t + ((n - t) >> min(l, 1))) >> max(l - 1, 0)`` where
    ``t = mulhi(magic, n)``.
    """

    def __init__(self, lo: int, hi: int) -> None:
        if lo < 1 or hi < lo:
            raise ValueError(f"bad divisor window [{lo}, {hi}]")
        self.lo = lo
        self.hi = hi
        size = hi - lo + 1
        self.magic = np.zeros(size, dtype=np.uint64)
        self.sh1 = np.zeros(size, dtype=np.uint64)
        self.sh2 = np.zeros(size, dtype=np.uint64)
        for d in range(lo, hi + 1):
            l = (d - 1).bit_length()
            self.magic[d - lo] = ((1 << 64) * ((1 << l) - d)) // d + 1
            self.sh1[d - lo] = min(l, 1)
            self.sh2[d - lo] = max(l - 1, 0)
        self._verify()

    def divide(self, n: int, d: int) -> int:
        """Reference (pure Python) evaluation of the multiply-shift quotient."""
        k = d - self.lo
        t = (int(self.magic[k]) * n) >> 64
        return (t + ((n - t) >> int(self.sh1[k]))) >> int(self.sh2[k])

    def _verify(self) -> None:
        top = (1 << 64) - 1
        for d in range(self.lo, self.hi + 1):
            for n in (0, d - 1, d, d + 1, 2 * d - 1, top // d * d, top - 1, top):
                if self.divide(n, d) != n // d:
                    raise ArithmeticError(f"reciprocal for {d} is wrong at {n}")


def ctz(i: int) -> int:
    """2-adic order of ``i`` (index of its lowest set bit)."""
    if not 0 < i <= _MASK64:
        raise ValueError("ctz needs a positive 64-bit integer")
    return _CTZ_LIST[(((i & -i) * 0x03F79D71B4CB0A89) & _MASK64) >> 58]


def pos(i: int, x: int, q: int, s0: int) -> int:
    """Bucket number at chunk ``i``, offset ``x`` in the ideal layout of round ``q``."""
    if i < 1:
        raise ValueError("pos() needs i >= 1")
    if not 0 <= x < s0:
        raise ValueError(f"offset {x} outside [0, {s0})")
    return (((s0 + x) << q) + i) >> (ctz(i) + 1)


@dataclass(frozen=True)
class MapperState:
    """The five integers that fully describe a mapper."""

    s0: int
    m: int
    s: int
    p: int
    q: int


class RoundMapper:
    """O(1)-space round-mapping over 64-bit hash values.

    The state is ``(s0, m, s, p, q)``.  ``q`` is the round counter as used by
    the bucket formula, i.e. one less than the round currently being built;
    a fresh mapper is the all-short end state of round 0 (``q == -1``) so the
    first ``new_bucket`` starts round 1 at step ``s0``.
    """

    #: every intermediate of ``pos`` and of the arc weights stays below this
    WORD_LIMIT = 1 << 63

    def __init__(self, s0: int) -> None:
        if s0 < 1:
            raise ValueError("s0 must be a positive integer")
        self.s0 = s0
        self.m = s0
        self.s = 2 * s0 - 1
        self.p = s0 - 1
        self.q = -1
        self._recip = Reciprocals(s0, 2 * s0)
        self._refresh()

    @classmethod
    def from_state(cls, state: MapperState) -> "RoundMapper":
        mapper = cls(state.s0)
        mapper._restore(state)
        return mapper

    @classmethod
    def at(cls, s0: int, m: int) -> "RoundMapper":
        """The mapper reached from ``RoundMapper(s0)`` by ``m - s0`` calls to :meth:`new_bucket`.

        Round ``q`` starts at ``s0 * 2**q`` buckets and its step ``s`` at
        ``s * 2**q``; each call inside a step shrinks one group of ``s`` arcs.
        """
        if m < s0:
            raise ValueError("m must be at least s0")
        q = (m // s0).bit_length() - 1
        s = m >> q
        done = m - (s << q)
        if done:
            state = MapperState(s0, m, s, done * (s + 1) - 1, q)
        elif s > s0:
            state = MapperState(s0, m, s - 1, m - 1, q)
        else:
            state = MapperState(s0, m, 2 * s0 - 1, m - 1, q - 1)
        mapper = cls.from_state(state)
        if not mapper._fits(mapper.q):
            raise OverflowError(f"{m} buckets exceed the 64-bit word budget for s0={s0}")
        return mapper

    # -- state bookkeeping -------------------------------------------------

    def _refresh(self) -> None:
        s, p, m = self.s, self.p, self.m
        self._g = (p + 1) // (s + 1)
        self._w = (p + 1) * s + (m - p - 1) * (s + 1)
        # packed for kernels: fewer arguments, cheaper dispatch
        self._params = np.array([self.s0, s, p, self.q, self._g, self._w], dtype=np.int64)

    def _restore(self, state: MapperState) -> None:
        if state.s0 != self.s0:
            raise ValueError("s0 mismatch")
        self.m, self.s, self.p, self.q = state.m, state.s, state.p, state.q
        self._refresh()
        self.check_invariants()

    def state(self) -> MapperState:
        return MapperState(self.s0, self.m, self.s, self.p, self.q)

    @property
    def total_weight(self) -> int:
        """Sum of arc weights: ``s`` per short arc, ``s + 1`` per long arc."""
        return self._w

    def arc_weight(self, j: int) -> int:
        if not 0 <= j < self.m:
            raise IndexError(j)
        return self.s if j <= self.p else self.s + 1

    def arc_start(self, j: int) -> int:
        """Start of arc ``j`` on the integer weight scale ``[0, total_weight)``."""
        if not 0 <= j <= self.m:
            raise IndexError(j)
        short = min(j, self.p + 1)
        return short * self.s + (j - short) * (self.s + 1)

    def check_invariants(self) -> None:
        s0, s, p, m, q = self.s0, self.s, self.p, self.m, self.q
        assert s0 <= s <= 2 * s0 - 1, (s0, s)
        assert -1 <= p <= m - 1, (p, m)
        assert m >= s0
        if q >= 0:
            assert (p + 1) % (s + 1) == 0, (p, s)
            assert (m - p - 1) % s == 0, (m, p, s)
            assert self._w == s * (s + 1) << q, (self._w, s, q)
        else:
            assert (m, s, p) == (s0, 2 * s0 - 1, s0 - 1)

    def _fits(self, q: int) -> bool:
        return (4 * self.s0 * self.s0 + 8) << (q + 1) < self.WORD_LIMIT

    # -- queries -------------------------------------------------------------

    def num_buckets(self) -> int:
        return self.m

    def arc_of(self, h: int) -> int:
        if not 0 <= h <= _MASK64:
            raise ValueError("hash must be a 64-bit unsigned integer")
        div = self._recip.divide
        s, p = self.s, self.p
        v = (h * self._w) >> 64
        short_w = (p + 1) * s
        if v < short_w:
            return div(v, s)
        return p + 1 + div(v - short_w, s + 1)

    def bucket_of_arc(self, j: int) -> int:
        if not 0 <= j < self.m:
            raise IndexError(j)
        s0 = self.s0
        if j < s0:
            return j
        if j > self.p:
            jj, sp = j - self._g, self.s
        else:
            jj, sp = j, self.s + 1
        a = self._recip.divide(jj, sp)
        r = jj - a * sp
        f = 1 if sp > s0 else 0
        t = 1 if r >= s0 else 0
        return pos((a << f) + t, r - t * s0, self.q + f, s0)

    def find_bucket(self, h: int) -> int:
        return self.bucket_of_arc(self.arc_of(h))

    def find_buckets(self, hashes: np.ndarray) -> np.ndarray:
        """Vectorised :meth:`find_bucket` over a uint64 array."""
        hs = np.ascontiguousarray(hashes, dtype=np.uint64)
        out = np.empty(hs.shape[0], dtype=np.int64)
        r = self._recip
        _find_bucket_packed(hs, out, self._params, r.magic, r.sh1, r.sh2, _CTZ_TABLE)
        return out

    def arcs_of(self, hashes: np.ndarray) -> np.ndarray:
        hs = np.ascontiguousarray(hashes, dtype=np.uint64)
        out = np.empty(hs.shape[0], dtype=np.int64)
        r = self._recip
        _arc_of_many(hs, out, self.s0, self.s, self.p, self._w, r.magic, r.sh1, r.sh2)
        return out

    def buckets_of_arcs(self, arcs: np.ndarray) -> np.ndarray:
        js = np.ascontiguousarray(arcs, dtype=np.int64)
        out = np.empty(js.shape[0], dtype=np.int64)
        r = self._recip
        _buckets_of_arcs(
            js, out, self.s0, self.s, self.p, self.q, self._g,
            r.magic, r.sh1, r.sh2, _CTZ_TABLE,
        )
        return out

    def permutation(self, out: np.ndarray | None = None) -> np.ndarray:
        """Bucket number of every arc, in clockwise order."""
        if out is None:
            out = np.empty(self.m, dtype=np.int64)
        r = self._recip
        _arc_permutation(
            out, self.m, self.s0, self.s, self.p, self.q, self._g,
            r.magic, r.sh1, r.sh2, _CTZ_TABLE,
        )
        return out

    def tally_regular(self, n_samples: int) -> np.ndarray:
        """Bucket sizes for ``n_samples`` hashes spaced evenly over 2**64."""
        counts = np.zeros(self.m, dtype=np.int64)
        if n_samples:
            r = self._recip
            _tally_regular(
                counts, n_samples, self.s0, self.s, self.p, self.q, self._g,
                self._w, r.magic, r.sh1, r.sh2, _CTZ_TABLE,
            )
        return counts

    # -- updates -----------------------------------------------------------

    def next_group(self) -> list[int]:
        """Buckets the next :meth:`new_bucket` will shrink, without mutating."""
        saved = self.state()
        try:
            self._advance_step_if_needed()
            return self._group_after_reset()
        finally:
            self._restore(saved)

    def _group_after_reset(self) -> list[int]:
        return [self.bucket_of_arc(j) for j in range(self.p + 1, self.p + self.s + 1)]

    def _advance_step_if_needed(self) -> None:
        if self.m - self.p - 1 != 0:
            return
        # every arc is short: relabel them all long and move to the next step
        self.p = -1
        if self.s == 2 * self.s0 - 1:
            self.s = self.s0
            self.q += 1
        else:
            self.s += 1
        self._refresh()

    def new_bucket(self) -> list[int]:
        """Add bucket ``m``; returns the buckets whose arcs were shrunk, clockwise."""
        saved = self.state()
        self._advance_step_if_needed()
        if not self._fits(self.q):
            self._restore(saved)
            raise OverflowError(f"round {self.q + 1} exceeds the 64-bit word budget")
        shrunk = self._group_after_reset()
        self.p += self.s + 1
        self.m += 1
        self._refresh()
        return shrunk

    def free_bucket(self) -> list[int]:
        """Undo the latest :meth:`new_bucket`; returns the ``s + 1`` short arcs' buckets."""
        if self.m <= self.s0:
            raise ValueError("cannot free below the initial s0 buckets")
        s = self.s
        released = [self.bucket_of_arc(j) for j in range(self.p - s, self.p + 1)]
        self.p -= s + 1
        self.m -= 1
        if self.p == -1:
            # the undone call had started a new step: go back to all-short
            if s == self.s0:
                self.s = 2 * self.s0 - 1
                self.q -= 1
            else:
                self.s = s - 1
            self.p = self.m - 1
        self._refresh()
        return released

    def __repr__(self) -> str:
        return (
            f"RoundMapper(s0={self.s0}, m={self.m}, s={self.s}, "
            f"p={self.p}, q={self.q})"
        )
