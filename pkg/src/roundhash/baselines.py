"""Comparison hashers and the 64-bit mixing/PRNG primitives they share.

* ``mix64`` is the splitmix64 finaliser: a bijective avalanche mixer used to
  turn arbitrary integer keys into uniform 64-bit hashes.
* ``Prng128`` is xoroshiro128+ (rotations 24/16/37) seeded through splitmix64.
  Seeding it with a key and reading the j-th output gives the j-th hash
  function of that key.
* ``jump_hash`` is jump consistent hashing, transcribed with the published
  LCG constant and the double-precision step.
* ``linear_hash`` is linear hashing with partial expansions in the style of
  Larson: buckets are organised in ``2**level`` groups that grow one bucket
  at a time from ``s0`` to ``2*s0`` members, and the key's successive PRNG
  outputs pick its slot at each level.

All three hashers are also exposed through the :class:`PlacementStrategy`
interface (``bucket``/``buckets``/``grow``/``shrink``).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numba
import numpy as np

from roundhash.round_mapping import RoundMapper, _mulhi

__all__ = [
    "mix64",
    "mix64_array",
    "Prng128",
    "jump_hash",
    "jump_hash_array",
    "LinearHashState",
    "linear_hash",
    "linear_hash_array",
    "linear_grow",
    "linear_shrink",
    "PlacementStrategy",
    "RoundStrategy",
    "JumpStrategy",
    "LinearStrategy",
    "make_strategy",
]

MASK64 = (1 << 64) - 1

SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
MIX_C1 = 0xBF58476D1CE4E5B9
MIX_C2 = 0x94D049BB133111EB
JUMP_LCG = 2862933555777941757

_U = np.uint64


# -- scalar reference implementations -------------------------------------


def mix64(key: int) -> int:
    """splitmix64 finaliser; a bijection on 64-bit integers."""
    z = key & MASK64
    z = ((z ^ (z >> 30)) * MIX_C1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_C2) & MASK64
    return z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Prng128:
    """xoroshiro128+ with rotation constants (a, b, c) = (24, 16, 37).

    The two state words are filled from a splitmix64 stream started at
    ``seed``, so every seed (including 0) gives a non-zero state.
    """

    __slots__ = ("s0", "s1")

    def __init__(self, seed: int) -> None:
        x = seed & MASK64
        x = (x + SPLITMIX_GAMMA) & MASK64
        self.s0 = mix64(x)
        x = (x + SPLITMIX_GAMMA) & MASK64
        self.s1 = mix64(x)

    def next(self) -> int:
        s0, s1 = self.s0, self.s1
        out = (s0 + s1) & MASK64
        s1 ^= s0
        self.s0 = _rotl(s0, 24) ^ s1 ^ ((s1 << 16) & MASK64)
        self.s1 = _rotl(s1, 37)
        return out

    def __iter__(self):
        while True:
            yield self.next()


def jump_hash(key: int, m: int) -> int:
    """Jump consistent hash of a 64-bit key into ``[0, m)``."""
    if m < 1:
        raise ValueError("jump_hash needs at least one bucket")
    key &= MASK64
    b, j = -1, 0
    while j < m:
        b = j
        key = (key * JUMP_LCG + 1) & MASK64
        j = int(float(b + 1) * (float(1 << 31) / float((key >> 33) + 1)))
    return b


@dataclass(frozen=True)
class LinearHashState:
    """Linear-hashing expansion state; ``m = s0 * 2**level + split``."""

    s0: int
    level: int = 0
    split: int = 0

    def __post_init__(self) -> None:
        if self.s0 < 1 or self.level < 0:
            raise ValueError("need s0 >= 1 and level >= 0")
        if not 0 <= self.split < self.s0 << self.level:
            raise ValueError("split pointer out of range for this level")

    @property
    def m(self) -> int:
        return (self.s0 << self.level) + self.split

    @property
    def group_step(self) -> int:
        """Size of the groups not yet enlarged during the current pass."""
        return self.s0 + (self.split >> self.level)

    @property
    def group_pointer(self) -> int:
        """Next group to receive a bucket; groups below it already did."""
        return self.split & ((1 << self.level) - 1)


def linear_grow(state: LinearHashState) -> LinearHashState:
    split = state.split + 1
    if split == state.s0 << state.level:
        return replace(state, level=state.level + 1, split=0)
    return replace(state, split=split)


def linear_shrink(state: LinearHashState) -> LinearHashState:
    if state.m <= state.s0:
        raise ValueError("cannot shrink below s0 buckets")
    if state.split == 0:
        return replace(state, level=state.level - 1, split=(state.s0 << (state.level - 1)) - 1)
    return replace(state, split=state.split - 1)


def _jump_walk(seed: int, b: int, size: int) -> int:
    """Continue a jump walk from slot ``b``; returns the last slot below ``size``."""
    key = seed
    while True:
        key = (key * JUMP_LCG + 1) & MASK64
        j = int(float(b + 1) * (float(1 << 31) / float((key >> 33) + 1)))
        if j >= size:
            return b
        b = j


def linear_hash(key: int, state: LinearHashState) -> int:
    """Bucket of ``key`` under linear hashing with partial expansions."""
    s0, top = state.s0, state.level
    step, ptr = state.group_step, state.group_pointer
    rng = Prng128(key)
    slot = (rng.next() * s0) >> 64
    group = 0
    label = slot
    for lvl in range(top + 1):
        if lvl < top:
            size = 2 * s0
        else:
            size = step + 1 if group < ptr else step
        hit = _jump_walk(rng.next(), s0 - 1, size)
        if hit >= s0:
            slot = hit
            label = (hit << lvl) + group
        if lvl < top and slot >= s0:
            group += 1 << lvl
            slot -= s0
    return label


# -- numba kernels ---------------------------------------------------------


@numba.njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> _U(30))) * _U(MIX_C1)
    z = (z ^ (z >> _U(27))) * _U(MIX_C2)
    return z ^ (z >> _U(31))


@numba.njit(cache=True, inline="always")
def _rotl_u(x, k):
    return (x << _U(k)) | (x >> _U(64 - k))


@numba.njit(cache=True, inline="always")
def _jump_walk_nb(key, b, n):
    while True:
        key = key * _U(JUMP_LCG) + _U(1)
        # key >> 33 fits in int64, whose conversion to double is one instruction
        j = np.int64(np.float64(b + 1) * (2147483648.0 / np.float64(np.int64(key >> _U(33)) + 1)))
        if j >= n:
            return b
        b = j


@numba.njit(cache=True)
def _mix64_many(keys, out):
    for i in range(keys.shape[0]):
        out[i] = _mix64(keys[i])


@numba.njit(cache=True)
def _jump_many(keys, m, out):
    for i in range(keys.shape[0]):
        out[i] = _jump_walk_nb(keys[i], np.int64(0), m)


@numba.njit(cache=True, inline="always")
def _linear_one(key, s0, top, step, ptr):
    gamma = _U(SPLITMIX_GAMMA)
    x = key + gamma
    a = _mix64(x)
    b = _mix64(x + gamma)
    # first output: initial slot in [0, s0)
    r = a + b
    b ^= a
    a = _rotl_u(a, 24) ^ b ^ (b << _U(16))
    b = _rotl_u(b, 37)
    slot = np.int64(_mulhi(r, _U(s0)))
    group = np.int64(0)
    label = slot
    for lvl in range(top + 1):
        r = a + b
        b ^= a
        a = _rotl_u(a, 24) ^ b ^ (b << _U(16))
        b = _rotl_u(b, 37)
        if lvl < top:
            size = 2 * s0
        elif group < ptr:
            size = step + 1
        else:
            size = step
        hit = _jump_walk_nb(r, np.int64(s0 - 1), size)
        if hit >= s0:
            slot = hit
            label = (hit << lvl) + group
        if lvl < top and slot >= s0:
            group += np.int64(1) << lvl
            slot -= s0
    return label


@numba.njit(cache=True)
def _linear_many(keys, s0, top, step, ptr, out):
    for i in range(keys.shape[0]):
        out[i] = _linear_one(keys[i], s0, top, step, ptr)


def mix64_array(keys: np.ndarray) -> np.ndarray:
    ks = np.ascontiguousarray(keys, dtype=np.uint64)
    out = np.empty_like(ks)
    _mix64_many(ks, out)
    return out


def jump_hash_array(keys: np.ndarray, m: int) -> np.ndarray:
    if m < 1:
        raise ValueError("jump_hash needs at least one bucket")
    ks = np.ascontiguousarray(keys, dtype=np.uint64)
    out = np.empty(ks.shape[0], dtype=np.int64)
    _jump_many(ks, m, out)
    return out


def linear_hash_array(keys: np.ndarray, state: LinearHashState) -> np.ndarray:
    ks = np.ascontiguousarray(keys, dtype=np.uint64)
    out = np.empty(ks.shape[0], dtype=np.int64)
    _linear_many(ks, state.s0, state.level, state.group_step, state.group_pointer, out)
    return out


# -- common placement interface -----------------------------------------


class PlacementStrategy:
    """hash -> bucket under a mutable bucket count."""

    name = "abstract"
    supports_shrink = True

    def num_buckets(self) -> int:
        raise NotImplementedError

    def bucket(self, h: int) -> int:
        raise NotImplementedError

    def buckets(self, hashes: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grow(self) -> None:
        raise NotImplementedError

    def shrink(self) -> None:
        raise NotImplementedError

    def grow_to(self, m: int) -> "PlacementStrategy":
        while self.num_buckets() < m:
            self.grow()
        return self


class RoundStrategy(PlacementStrategy):
    name = "round"

    def __init__(self, s0: int) -> None:
        self.mapper = RoundMapper(s0)

    def num_buckets(self) -> int:
        return self.mapper.m

    def bucket(self, h: int) -> int:
        return self.mapper.find_bucket(h)

    def buckets(self, hashes: np.ndarray) -> np.ndarray:
        return self.mapper.find_buckets(hashes)

    def grow(self) -> None:
        self.mapper.new_bucket()

    def shrink(self) -> None:
        self.mapper.free_bucket()

    def grow_to(self, m: int) -> "RoundStrategy":
        if m > self.mapper.m:
            self.mapper = RoundMapper.at(self.mapper.s0, m)
        return self


class JumpStrategy(PlacementStrategy):
    name = "jump"

    def __init__(self, m: int = 1) -> None:
        if m < 1:
            raise ValueError("need at least one bucket")
        self.m = m

    def num_buckets(self) -> int:
        return self.m

    def bucket(self, h: int) -> int:
        return jump_hash(h, self.m)

    def buckets(self, hashes: np.ndarray) -> np.ndarray:
        return jump_hash_array(hashes, self.m)

    def grow(self) -> None:
        self.m += 1

    def grow_to(self, m: int) -> "JumpStrategy":
        self.m = max(self.m, m)
        return self

    def shrink(self) -> None:
        if self.m <= 1:
            raise ValueError("cannot shrink below one bucket")
        self.m -= 1


class LinearStrategy(PlacementStrategy):
    name = "linear"

    def __init__(self, s0: int) -> None:
        self.state = LinearHashState(s0)

    def num_buckets(self) -> int:
        return self.state.m

    def bucket(self, h: int) -> int:
        return linear_hash(h, self.state)

    def buckets(self, hashes: np.ndarray) -> np.ndarray:
        return linear_hash_array(hashes, self.state)

    def grow(self) -> None:
        self.state = linear_grow(self.state)

    def shrink(self) -> None:
        self.state = linear_shrink(self.state)

    def grow_to(self, m: int) -> "LinearStrategy":
        if m > self.state.m:
            s0 = self.state.s0
            level = (m // s0).bit_length() - 1
            self.state = LinearHashState(s0, level, m - (s0 << level))
        return self


def make_strategy(name: str, s0: int = 1) -> PlacementStrategy:
    """Strategy at its initial bucket count (``s0``; jump starts at 1)."""
    if name == "round":
        return RoundStrategy(s0)
    if name == "jump":
        return JumpStrategy()
    if name == "linear":
        return LinearStrategy(s0)
    raise ValueError(f"unknown strategy {name!r}")
