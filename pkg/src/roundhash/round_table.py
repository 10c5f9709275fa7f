"""External-memory hash table over round-hashing with an in-memory stash.

Every key ``x`` (a nonzero 64-bit integer) has a home bucket
``findBucket(mix64(x))`` and lives either in that bucket's block or, when the
block is full, in ``stash[home]``.  Lookups read at most one block.  The
table keeps ``numBuckets() >= ceil(n / (B (1 - eps)))``; crossing that line
calls ``newBucket`` and re-homes the affected keys with :meth:`_distribute`
(``2z + 1`` block transfers for a group of ``z``).  Deletes shrink with a
one-bucket hysteresis.

With ``external_stash`` enabled, every stash key also has a copy stored in
spare slots of the blocks (see :class:`StashMirror`).
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numba
import numpy as np

from roundhash.baselines import _mix64, mix64
from roundhash.blockstore import (
    BlockStore,
    FileBlockStore,
    FileHeader,
    MemoryBlockStore,
)
from roundhash.round_mapping import _CTZ_TABLE, MapperState, RoundMapper, _arc_of, _bucket_of_arc

__all__ = ["TableConfig", "RoundTable", "StashMirror", "OpStats", "AuditError"]

MAX_KEY = (1 << 64) - 1


def _as_fraction(value) -> Fraction:
    if isinstance(value, float):
        # 0.1 means one tenth, not the nearest binary double
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class TableConfig:
    """Block capacity ``B``, space slack ``epsilon`` (exact) and slack parameter ``s0``."""

    B: int
    epsilon: Fraction = Fraction(0)
    s0: int = 1
    external_stash: bool = False
    #: deferred mirror operations performed per update (defaults to ``s0``)
    mirror_budget: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "epsilon", _as_fraction(self.epsilon))
        if self.B < 1:
            raise ValueError("B must be at least 1")
        if not 0 <= self.epsilon < 1:
            raise ValueError("epsilon must be in [0, 1)")
        if self.s0 < 1:
            raise ValueError("s0 must be at least 1")
        if self.epsilon.numerator >= 1 << 32 or self.epsilon.denominator >= 1 << 32:
            raise ValueError("epsilon numerator/denominator must fit in 32 bits")

    @property
    def budget(self) -> int:
        return self.s0 if self.mirror_budget is None else self.mirror_budget

    def blocks_needed(self, n: int) -> int:
        """``ceil(n / (B (1 - eps)))`` in exact integer arithmetic."""
        num, den = self.epsilon.numerator, self.epsilon.denominator
        return -(-(n * den) // (self.B * (den - num)))

    def max_keys(self, m: int) -> int:
        """Largest ``n`` with ``blocks_needed(n) <= m``."""
        num, den = self.epsilon.numerator, self.epsilon.denominator
        return (m * self.B * (den - num)) // den


@dataclass
class OpStats:
    """Block I/O charged to one public operation."""

    kind: str
    reads: int = 0
    writes: int = 0
    blocks: int = 0
    distributes: list[tuple[int, int]] = field(default_factory=list)

    @property
    def transfers(self) -> int:
        return self.reads + self.writes


class AuditError(AssertionError):
    pass


# -- bulk placement kernel ------------------------------------------------


@numba.njit(cache=True)
def _homes_kernel(keys, out, params, magic, sh1, sh2, table):
    s0, s, p, q, g, w = params[0], params[1], params[2], params[3], params[4], params[5]
    for i in range(keys.shape[0]):
        j = _arc_of(_mix64(keys[i]), s0, s, p, w, magic, sh1, sh2)
        out[i] = _bucket_of_arc(j, s0, s, p, q, g, magic, sh1, sh2, table)


@numba.njit(cache=True)
def _insert_run(keys, buckets, stashed, slots, counts, cap, overflow, n, k, peak_from, peak):
    """Algorithm-2 inserts of distinct keys, none of which needs a grow.

    ``stashed[i]`` marks keys already in the stash.  Keys that find their
    block full are listed in ``overflow`` for the caller to stash, in order.
    Returns (overflow count, reads, writes, new n, peak).
    """
    spilled = 0
    reads = 0
    writes = 0
    for i in range(keys.shape[0]):
        if stashed[i]:
            continue
        b = buckets[i]
        c = counts[b]
        x = keys[i]
        reads += 1
        dup = False
        for j in range(c):
            if slots[b, j] == x:
                dup = True
                break
        if dup:
            continue
        n += 1
        if c < cap:
            slots[b, c] = x
            counts[b] = c + 1
            writes += 1
        else:
            overflow[spilled] = i
            spilled += 1
            k += 1
        if peak_from >= 0 and n >= peak_from:
            r = k / n
            if r > peak:
                peak = r
    return spilled, reads, writes, n, peak


@numba.njit(cache=True, inline="always")
def _home_of(x, params, magic, sh1, sh2, table):
    s0, s, p, q, g, w = params[0], params[1], params[2], params[3], params[4], params[5]
    j = _arc_of(_mix64(x), s0, s, p, w, magic, sh1, sh2)
    return _bucket_of_arc(j, s0, s, p, q, g, magic, sh1, sh2, table)


@numba.njit(cache=True)
def _distribute_run(chain, slots, counts, cap, params, magic, sh1, sh2, table,
                    st_keys, st_owner, spill_keys, spill_owner):
    """In-memory twin of ``RoundTable._distribute`` for tables without a mirror.

    Stash keys of the chain come in ``st_keys`` (ascending within each owner)
    with ``st_owner`` = chain position; on return the owner is the new chain
    position, or -1 once the key is in a block.  Block keys that overflow are
    appended to ``spill_*``.  Returns the spill count, or -1 if a key maps
    outside its group.
    """
    z = chain.shape[0] - 1
    tbuf = np.empty(cap, dtype=np.uint64)
    sbuf = np.empty(cap, dtype=np.uint64)
    tlen = 0
    spilled = 0
    for k in range(z - 1, -1, -1):
        sb = chain[k]
        tb = chain[k + 1]
        slen = 0
        for j in range(counts[sb]):
            x = slots[sb, j]
            h = _home_of(x, params, magic, sh1, sh2, table)
            if h == tb:
                if tlen < cap:
                    tbuf[tlen] = x
                    tlen += 1
                else:
                    spill_keys[spilled] = x
                    spill_owner[spilled] = k + 1
                    spilled += 1
            elif h == sb:
                sbuf[slen] = x
                slen += 1
            else:
                return -1
        for j in range(st_keys.shape[0]):
            if st_owner[j] == k:
                h = _home_of(st_keys[j], params, magic, sh1, sh2, table)
                if h == tb:
                    if tlen < cap:
                        tbuf[tlen] = st_keys[j]
                        tlen += 1
                        st_owner[j] = -1
                    else:
                        st_owner[j] = k + 1
                elif h != sb:
                    return -1
        for j in range(st_keys.shape[0]):
            if tlen >= cap:
                break
            if st_owner[j] == k + 1:
                tbuf[tlen] = st_keys[j]
                tlen += 1
                st_owner[j] = -1
        slots[tb, :tlen] = tbuf[:tlen]
        slots[tb, tlen:] = 0
        counts[tb] = tlen
        tbuf, sbuf = sbuf, tbuf
        tlen = slen
    for j in range(st_keys.shape[0]):
        if tlen >= cap:
            break
        if st_owner[j] == 0:
            tbuf[tlen] = st_keys[j]
            tlen += 1
            st_owner[j] = -1
    b0 = chain[0]
    slots[b0, :tlen] = tbuf[:tlen]
    slots[b0, tlen:] = 0
    counts[b0] = tlen
    return spilled


class _Buffer:
    """One block held in memory during a redistribution pass."""

    __slots__ = ("bucket", "legit", "copies")

    def __init__(self, bucket: int, legit: np.ndarray, copies: list[int]) -> None:
        self.bucket = bucket
        self.legit = legit
        self.copies = copies

    def contents(self) -> np.ndarray:
        if not self.copies:
            return self.legit
        return np.concatenate([self.legit, np.array(self.copies, dtype=np.uint64)])


class RoundTable:
    """Set of 64-bit keys stored in ``B``-key blocks plus an in-memory stash."""

    def __init__(self, config: TableConfig, store: BlockStore | None = None) -> None:
        self.config = config
        self.mapper = RoundMapper(config.s0)
        self.store = store if store is not None else MemoryBlockStore(config.B)
        if self.store.B != config.B:
            raise ValueError("store block size does not match the config")
        if self.store.num_blocks == 0:
            for _ in range(config.s0):
                self.store.append_block()
        self.n = 0
        self.stash: dict[int, set[int]] = {}
        self.stash_size = 0
        self._flagged = np.zeros(max(64, 2 * config.s0), dtype=np.bool_)
        self.grows = 0
        self.shrinks = 0
        self.peak_from: int | None = None
        self.peak_ratio = 0.0
        self.track_io = False
        self.last_op: OpStats | None = None
        self._op: OpStats | None = None
        self._held: tuple[int, np.ndarray] | None = None
        self.mirror = StashMirror(self) if config.external_stash else None

    # -- persistence --------------------------------------------------------

    @classmethod
    def create_file(cls, path: str | Path, config: TableConfig) -> "RoundTable":
        store = FileBlockStore(path, config.B, create=True)
        table = cls(config, store)
        table.flush()
        return table

    @classmethod
    def open_file(cls, path: str | Path, *, mirror_budget: int | None = None) -> "RoundTable":
        store = FileBlockStore.open(path)
        header = store.read_header()
        s0, m, s, p, q = header.mapper
        pairs = store.read_trailer()
        config = TableConfig(
            header.B, header.epsilon, header.s0,
            external_stash=pairs is None, mirror_budget=mirror_budget,
        )
        table = cls(config, store)
        table.mapper = RoundMapper.from_state(MapperState(s0, m, s, p, q))
        table.n = header.n
        if pairs is None:
            table.mirror.rebuild()
        else:
            for bucket, key in pairs:
                table._stash_add(bucket, key)
        return table

    def flush(self) -> None:
        """Write header, mapper state and stash trailer (file stores only)."""
        if self.mirror is not None:
            self.mirror.drain(None)
        if not isinstance(self.store, FileBlockStore):
            return
        cfg = self.config
        st = self.mapper.state()
        self.store.write_header(
            FileHeader(cfg.B, cfg.s0, cfg.epsilon, self.n, (st.s0, st.m, st.s, st.p, st.q))
        )
        if self.mirror is not None:
            self.store.write_trailer(None)
        else:
            self.store.write_trailer(
                [(b, k) for b, keys in sorted(self.stash.items()) for k in sorted(keys)]
            )
        self.store.flush()

    def close(self) -> None:
        self.flush()
        self.store.close()

    def __enter__(self) -> "RoundTable":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- hashing -------------------------------------------------------------

    def home(self, x: int) -> int:
        return self.mapper.find_bucket(mix64(x))

    def homes(self, keys: np.ndarray) -> np.ndarray:
        out = np.empty(len(keys), dtype=np.int64)
        if len(keys):
            mp = self.mapper
            r = mp._recip
            _homes_kernel(np.ascontiguousarray(keys, dtype=np.uint64), out, mp._params, r.magic, r.sh1, r.sh2, _CTZ_TABLE)
        return out

    @staticmethod
    def _check_key(x: int) -> int:
        x = int(x)
        if not 0 < x <= MAX_KEY:
            raise ValueError("keys must be nonzero 64-bit unsigned integers")
        return x

    # -- stash bookkeeping ---------------------------------------------------

    def num_buckets(self) -> int:
        return self.mapper.m

    def _cover_flags(self, b: int) -> None:
        if b >= len(self._flagged):
            grown = np.zeros(max(b + 1, 2 * len(self._flagged)), dtype=np.bool_)
            grown[: len(self._flagged)] = self._flagged
            self._flagged = grown

    def _stash_bucket(self, b: int) -> set[int]:
        bucket = self.stash.get(b)
        if bucket is None:
            bucket = self.stash[b] = set()
            self._cover_flags(b)
            self._flagged[b] = True
        return bucket

    def _stash_add(self, b: int, x: int) -> None:
        self._stash_bucket(b).add(x)
        self.stash_size += 1

    def _stash_discard(self, b: int, x: int) -> None:
        bucket = self.stash[b]
        bucket.remove(x)
        self.stash_size -= 1
        if not bucket:
            del self.stash[b]
            self._flagged[b] = False

    def _stash_take(self, b: int) -> np.ndarray:
        """Remove and return stash[b], in ascending key order."""
        bucket = self.stash.pop(b, None)
        if not bucket:
            return np.empty(0, dtype=np.uint64)
        self._flagged[b] = False
        self.stash_size -= len(bucket)
        return np.sort(np.fromiter(bucket, dtype=np.uint64, count=len(bucket)))

    def _stash_put(self, b: int, keys: np.ndarray) -> None:
        if len(keys):
            bucket = self._stash_bucket(b)
            before = len(bucket)
            bucket.update(keys.tolist())
            self.stash_size += len(bucket) - before

    def stash_keys(self) -> set[int]:
        return {k for keys in self.stash.values() for k in keys}

    def _observe(self) -> None:
        if self.peak_from is not None and self.n >= self.peak_from and self.n:
            ratio = self.stash_size / self.n
            if ratio > self.peak_ratio:
                self.peak_ratio = ratio

    def track_peak(self, n_min: int) -> None:
        """Record max stash/n over every state with ``n >= n_min`` from now on."""
        self.peak_from = n_min
        self.peak_ratio = 0.0
        self._observe()

    # -- I/O accounting -------------------------------------------------------

    def _begin(self, kind: str) -> None:
        if self.track_io:
            self._op = OpStats(kind)
            self._io_start = (self.store.reads, self.store.writes)
            self.store.touched = set()

    def _end(self) -> None:
        if self._op is not None:
            r0, w0 = self._io_start
            self._op.reads = self.store.reads - r0
            self._op.writes = self.store.writes - w0
            self._op.blocks = len(self.store.touched)
            self.store.touched = None
            self.last_op, self._op = self._op, None

    # -- public operations ----------------------------------------------------

    def lookup(self, x: int) -> bool:
        x = self._check_key(x)
        self._begin("lookup")
        try:
            return self._lookup(x)
        finally:
            self._end()

    def __contains__(self, x: int) -> bool:
        return self.lookup(x)

    def __len__(self) -> int:
        return self.n

    def _lookup(self, x: int) -> bool:
        b = self.home(x)
        if x in self.stash.get(b, ()):
            return True
        keys = self.store.read(b)
        self._held = (b, keys)
        return bool((keys == x).any())

    def insert(self, x: int) -> bool:
        x = self._check_key(x)
        self._begin("insert")
        try:
            self._held = None
            if self._lookup(x):
                return False
            self.n += 1
            # more than one step only when B (1 - eps) < 1
            while self.config.blocks_needed(self.n) > self.mapper.m:
                self._grow()
            self._place(x)
            if self.mirror is not None:
                self.mirror.drain(self.config.budget)
            self._observe()
            return True
        finally:
            self._held = None
            self._end()

    def delete(self, x: int) -> bool:
        x = self._check_key(x)
        self._begin("delete")
        try:
            b = self.home(x)
            if x in self.stash.get(b, ()):
                self._stash_discard(b, x)
                if self.mirror is not None:
                    self.mirror.release(x)
            else:
                keys = self.store.read(b)
                hit = keys == x
                if not hit.any():
                    return False
                self.store.write(b, keys[~hit])
            self.n -= 1
            while self._should_shrink():
                self._shrink()
            if self.mirror is not None:
                self.mirror.drain(self.config.budget)
            self._observe()
            return True
        finally:
            self._end()

    def _should_shrink(self) -> bool:
        m = self.mapper.m
        return self.n > 0 and m > self.config.s0 and self.config.blocks_needed(self.n) < m - 1

    def insert_many(self, keys) -> int:
        """Insert keys in order; same result and I/O counts as repeated :meth:`insert`."""
        keys = np.ascontiguousarray(keys, dtype=np.uint64)
        if len(keys) and not keys.all():
            raise ValueError("keys must be nonzero 64-bit unsigned integers")
        store = self.store
        if self.mirror is not None or self.track_io or not isinstance(store, MemoryBlockStore):
            return sum(self.insert(int(k)) for k in keys)
        n_start = self.n
        peak_from = -1 if self.peak_from is None else self.peak_from
        i = 0
        while i < len(keys):
            room = self.config.max_keys(self.mapper.m) - self.n
            if room <= 0:
                self.insert(int(keys[i]))
                i += 1
                continue
            chunk = keys[i : i + room]
            i += len(chunk)
            if len(np.unique(chunk)) != len(chunk):
                for x in chunk.tolist():
                    self.insert(x)
                continue
            buckets = self.homes(chunk)
            stashed = self._flagged[buckets]
            if stashed.any():
                stash = self.stash
                for j in np.flatnonzero(stashed).tolist():
                    stashed[j] = int(chunk[j]) in stash[int(buckets[j])]
            overflow = np.empty(len(chunk), dtype=np.int64)
            spilled, reads, writes, self.n, self.peak_ratio = _insert_run(
                chunk, buckets, stashed, store.slots, store.counts, self.config.B,
                overflow, self.n, self.stash_size, peak_from, self.peak_ratio,
            )
            store.reads += reads
            store.writes += writes
            for j in overflow[:spilled].tolist():
                self._stash_add(int(buckets[j]), int(chunk[j]))
        return self.n - n_start

    # -- placement ------------------------------------------------------------

    def _place(self, x: int) -> None:
        b = self.home(x)
        held = self._held
        keys = held[1] if held is not None and held[0] == b else self.store.read(b)
        if self.mirror is None:
            if len(keys) < self.config.B:
                self.store.write(b, np.append(keys, np.uint64(x)))
            else:
                self._stash_add(b, x)
            return
        buf = self.mirror.split(b, keys)
        if len(buf.legit) < self.config.B:
            self.mirror.claim(buf, [x])
            evicted = self._make_room(buf, 1)
            buf.legit = np.append(buf.legit, np.uint64(x))
            self.store.write(b, buf.contents())
            for y in evicted:
                self.mirror.place(y)
        else:
            self._stash_add(b, x)
            self.mirror.place(x)

    def _make_room(self, buf: _Buffer, k: int) -> list[int]:
        """Evict mirror copies so ``k`` more legit keys fit; returns them detached."""
        over = len(buf.legit) + len(buf.copies) + k - self.config.B
        evicted: list[int] = []
        while over > 0 and buf.copies:
            y = buf.copies.pop()
            self.mirror.forget(y)
            evicted.append(y)
            over -= 1
        return evicted

    def _fill(self, buf: _Buffer, keys: np.ndarray) -> np.ndarray:
        """Add as many legit keys as fit; returns the ones that did not."""
        if len(keys) == 0:
            return keys
        fit = min(len(keys), self.config.B - len(buf.legit))
        if fit <= 0:
            return keys
        if self.mirror is not None:
            self.mirror.claim(buf, keys[:fit])
            for y in self._make_room(buf, fit):
                self.mirror.defer_place(y)
        buf.legit = np.concatenate([buf.legit, keys[:fit]])
        return keys[fit:]

    def _load(self, b: int) -> _Buffer:
        keys = self.store.read(b)
        if self.mirror is None:
            return _Buffer(b, keys, [])
        return self.mirror.split(b, keys)

    def _pull_stash(self, buf: _Buffer) -> None:
        """Move stash[b] keys into block b while it has room."""
        if buf.bucket not in self.stash:
            return
        if len(buf.legit) >= self.config.B:
            return
        keys = self._stash_take(buf.bucket)
        rest = self._fill(buf, keys)
        self._stash_put(buf.bucket, rest)
        if self.mirror is not None:
            for y in keys[: len(keys) - len(rest)]:
                self.mirror.promoted(int(y), buf)

    def _move_into(self, target: _Buffer, keys: np.ndarray, from_stash: bool) -> None:
        rest = self._fill(target, keys)
        if self.mirror is not None:
            moved = keys[: len(keys) - len(rest)]
            if from_stash:
                for y in moved:
                    self.mirror.promoted(int(y), target)
        self._stash_put(target.bucket, rest)
        if self.mirror is not None and not from_stash:
            for y in rest:
                self.mirror.defer_place(int(y))

    def _write(self, buf: _Buffer) -> None:
        self.store.write(buf.bucket, buf.contents())

    # -- growth and shrinkage -------------------------------------------------

    def _grow(self) -> None:
        group = self.mapper.new_bucket()
        new = self.store.append_block()
        self._cover_flags(new)
        if new != self.mapper.m - 1:
            raise AssertionError("block numbering out of step with the mapper")
        self.grows += 1
        if self._held is not None and self._held[0] in group:
            self._held = None
        self._distribute(group + [new])

    def _shrink(self) -> None:
        chain = self.mapper.free_bucket()
        self.shrinks += 1
        self._held = None
        self._distribute_reverse(chain)
        self.store.drop_last_block()

    def _distribute(self, chain: list[int]) -> None:
        """Re-home keys after ``newBucket``: keys only move from ``chain[k]`` to ``chain[k+1]``."""
        if self.mirror is None and self._op is None and isinstance(self.store, MemoryBlockStore):
            self._distribute_fast(chain)
            return
        start = self.store.transfers
        z = len(chain) - 1
        target = _Buffer(chain[z], np.empty(0, dtype=np.uint64), [])
        for k in range(z - 1, -1, -1):
            source = self._load(chain[k])
            self._shift(source, target)
            self._pull_stash(target)
            self._write(target)
            target = source
        self._pull_stash(target)
        self._write(target)
        self._log_distribute(z, start)

    def _distribute_fast(self, chain: list[int]) -> None:
        store = self.store
        parts, owners = [], []
        for pos, b in enumerate(chain):
            keys = self._stash_take(b)
            parts.append(keys)
            owners.append(np.full(len(keys), pos, dtype=np.int64))
        st_keys = np.concatenate(parts)
        st_owner = np.concatenate(owners)
        z = len(chain) - 1
        spill_keys = np.empty(z * self.config.B, dtype=np.uint64)
        spill_owner = np.empty(z * self.config.B, dtype=np.int64)
        r = self.mapper._recip
        spilled = _distribute_run(
            np.array(chain, dtype=np.int64), store.slots, store.counts, self.config.B,
            self.mapper._params, r.magic, r.sh1, r.sh2, _CTZ_TABLE,
            st_keys, st_owner, spill_keys, spill_owner,
        )
        if spilled < 0:
            raise AssertionError("a key left its group during redistribution")
        store.reads += z
        store.writes += z + 1
        for keys, owner in ((st_keys, st_owner), (spill_keys[:spilled], spill_owner[:spilled])):
            for pos in np.unique(owner).tolist():
                if pos >= 0:
                    self._stash_put(chain[pos], keys[owner == pos])

    def _distribute_reverse(self, chain: list[int]) -> None:
        """Re-home keys after ``freeBucket``: keys move from ``chain[k+1]`` back to ``chain[k]``."""
        start = self.store.transfers
        target = self._load(chain[0])
        for k in range(len(chain) - 1):
            source = self._load(chain[k + 1])
            self._shift(source, target)
            self._pull_stash(target)
            self._write(target)
            target = source
        released = target
        if len(released.legit) or self.stash.get(released.bucket):
            raise AssertionError("released bucket still owns keys")
        if self.mirror is not None:
            for y in released.copies:
                self.mirror.forget(y)
                self.mirror.defer_place(y)
        self._log_distribute(len(chain) - 1, start)

    def _shift(self, source: _Buffer, target: _Buffer) -> None:
        """Move every key of ``source`` (block and stash) whose home is ``target``."""
        homes = self.homes(source.legit)
        go = homes == target.bucket
        if not np.all(go | (homes == source.bucket)):
            raise AssertionError("a key left its group during redistribution")
        moving = source.legit[go]
        source.legit = source.legit[~go]
        self._move_into(target, moving, from_stash=False)
        bucket = self.stash.get(source.bucket)
        if bucket:
            stashed = np.sort(np.fromiter(bucket, dtype=np.uint64, count=len(bucket)))
            shomes = self.homes(stashed)
            sgo = shomes == target.bucket
            if not np.all(sgo | (shomes == source.bucket)):
                raise AssertionError("a stash key left its group during redistribution")
            if sgo.any():
                moving = stashed[sgo]
                if len(moving) == len(bucket):
                    self._stash_take(source.bucket)
                else:
                    bucket.difference_update(moving.tolist())
                    self.stash_size -= len(moving)
                self._move_into(target, moving, from_stash=True)

    def _log_distribute(self, z: int, start: int) -> None:
        if self._op is not None:
            self._op.distributes.append((z, self.store.transfers - start))

    # -- auditing -------------------------------------------------------------

    def audit(self) -> None:
        """Full scan: placement, counts and (when enabled) mirror consistency."""
        B = self.config.B
        m = self.mapper.m
        if self.store.num_blocks != m:
            raise AuditError(f"{self.store.num_blocks} blocks for {m} buckets")
        need = self.config.blocks_needed(self.n)
        if m < need or (self.n > 0 and m > max(self.config.s0, need + 1)):
            raise AuditError(f"{m} buckets outside the band for n={self.n}")
        seen = 0
        copies_found: dict[int, int] = {}
        for b in range(m):
            keys = self.store.peek(b)
            if len(keys) > B:
                raise AuditError(f"block {b} over capacity")
            if len(np.unique(keys)) != len(keys):
                raise AuditError(f"block {b} holds a key twice")
            homes = self.homes(keys)
            for x, h in zip(keys.tolist(), homes.tolist()):
                if h == b:
                    seen += 1
                    if x in self.stash.get(b, ()):
                        raise AuditError(f"key {x} both in block {b} and the stash")
                elif self.mirror is not None and self.mirror.loc.get(x) == b:
                    copies_found[x] = b
                else:
                    raise AuditError(f"key {x} in block {b} but belongs to {h}")
        for b, keys in self.stash.items():
            if not keys:
                raise AuditError(f"empty stash entry for bucket {b}")
            arr = np.fromiter(keys, dtype=np.uint64, count=len(keys))
            if not np.all(self.homes(arr) == b):
                raise AuditError(f"stash[{b}] holds a key of another bucket")
            if not self._flagged[b]:
                raise AuditError(f"stash flag missing for bucket {b}")
        if self.stash_size != sum(len(v) for v in self.stash.values()):
            raise AuditError("stash size counter out of date")
        if seen + self.stash_size != self.n:
            raise AuditError(f"found {seen} + {self.stash_size} keys, expected {self.n}")
        if self.mirror is not None:
            self.mirror.audit(copies_found)

    def keys(self) -> np.ndarray:
        """Every stored key (uncharged scan)."""
        parts = []
        for b in range(self.mapper.m):
            keys = self.store.peek(b)
            if self.mirror is not None and len(keys):
                keys = keys[self.homes(keys) == b]
            parts.append(keys)
        parts.append(np.fromiter(self.stash_keys(), dtype=np.uint64))
        return np.concatenate(parts) if parts else np.empty(0, dtype=np.uint64)


class StashMirror:
    """External copy of the stash kept in the spare slots of the blocks.

    The copies form a virtual array: ``order`` lists the mirrored keys and
    ``loc`` says which block holds each copy.  New copies go to the block of
    the most recent insertion if it has a free slot, otherwise the scan moves
    on to higher-numbered blocks (wrapping around).  Removing a copy moves
    the last entry of the virtual array into the freed slot.

    A copy never sits in its key's home block: if it would, the key is stored
    there as a regular key instead and leaves the stash.  That makes the
    incorrect-hash test exact, so the stash can be rebuilt from the blocks.

    Copy work caused by a redistribution is queued and performed a few
    operations at a time (``budget`` per update) by :meth:`drain`.
    """

    def __init__(self, table: RoundTable) -> None:
        self.table = table
        self.order: list[int] = []
        self.pos: dict[int, int] = {}
        self.loc: dict[int, int] = {}
        self.cursor = 0
        self.pending: OrderedDict[int, None] = OrderedDict()

    # -- in-memory bookkeeping (no I/O) ---------------------------------------

    def split(self, b: int, keys: np.ndarray) -> _Buffer:
        loc = self.loc
        if not loc or len(keys) == 0:
            return _Buffer(b, keys, [])
        mask = np.fromiter((loc.get(k) == b for k in keys.tolist()), dtype=np.bool_, count=len(keys))
        return _Buffer(b, keys[~mask], keys[mask].tolist())

    def forget(self, y: int) -> None:
        """Drop ``y``'s copy from the virtual array (caller rewrites its block)."""
        i = self.pos.pop(y)
        last = self.order.pop()
        if last != y:
            self.order[i] = last
            self.pos[last] = i
        del self.loc[y]

    def claim(self, buf: _Buffer, keys) -> None:
        """Drop stale copies of ``keys`` that sit in the block they are joining."""
        if not buf.copies:
            return
        for y in set(buf.copies).intersection(int(k) for k in keys):
            buf.copies.remove(y)
            self.forget(y)
            self.pending.pop(y, None)

    def defer_place(self, y: int) -> None:
        self.pending[y] = None

    def promoted(self, y: int, buf: _Buffer) -> None:
        """``y`` left the stash for block ``buf``; its copy is now redundant."""
        self.pending.pop(y, None)
        where = self.loc.get(y)
        if where is None:
            return
        if where == buf.bucket:
            buf.copies.remove(y)
            self.forget(y)
        else:
            self.defer_place(y)

    # -- operations with I/O --------------------------------------------------

    def place(self, y: int) -> None:
        """Store a copy of stash key ``y`` in the first block with a free slot."""
        t = self.table
        m = t.mapper.m
        B = t.config.B
        home = t.home(y)
        if y not in t.stash.get(home, ()) or y in self.loc:
            # an evicted copy whose key already left the stash, or a key that
            # came back before its old copy was released: nothing to write
            self.pending.pop(y, None)
            return
        c = self.cursor % m
        for _ in range(m):
            keys = t.store.read(c)
            if len(keys) < B:
                if c == home:
                    # free slot in its own block: store it for real
                    t._stash_discard(home, y)
                else:
                    self.loc[y] = c
                    self.pos[y] = len(self.order)
                    self.order.append(y)
                t.store.write(c, np.append(keys, np.uint64(y)))
                self.cursor = c
                return
            c = (c + 1) % m
        if not self.pending:
            raise RuntimeError("no free slot left for the stash copy")
        # stale copies waiting for a deferred release hold the spare slots
        self.pending.pop(y, None)
        self.drain(None)
        self.place(y)

    def release(self, y: int) -> None:
        """``y`` left the stash: delete its copy, refilling the hole from the end."""
        self.pending.pop(y, None)
        if y not in self.loc:
            return
        t = self.table
        hole = self.loc[y]
        last = self.order[-1]
        if last == y or self.loc[last] == hole:
            keys = t.store.read(hole)
            t.store.write(hole, keys[keys != y])
            self.forget(y)
            return
        src = self.loc[last]
        hole_keys = t.store.read(hole)
        src_keys = t.store.read(src)
        hole_keys = hole_keys[hole_keys != y]
        src_keys = src_keys[src_keys != last]
        self.forget(y)
        if t.home(last) != hole:
            # ``last`` now occupies y's index; only its block changes
            self.loc[last] = hole
            hole_keys = np.append(hole_keys, np.uint64(last))
        else:
            # its own block: store it for real (or drop a stale copy)
            self.forget(last)
            if last in t.stash.get(hole, ()):
                t._stash_discard(hole, last)
                hole_keys = np.append(hole_keys, np.uint64(last))
            else:
                self.pending.pop(last, None)
        t.store.write(hole, hole_keys)
        t.store.write(src, src_keys)

    def drain(self, budget: int | None) -> None:
        """Perform up to ``budget`` queued copy operations (all when ``None``)."""
        t = self.table
        done = 0
        while self.pending and (budget is None or done < budget):
            y, _ = self.pending.popitem(last=False)
            in_stash = y in t.stash.get(t.home(y), ())
            if in_stash and y not in self.loc:
                self.place(y)
            elif not in_stash and y in self.loc:
                self.release(y)
            done += 1

    def rebuild(self) -> None:
        """Recover the stash from copies found by the incorrect-hash test."""
        t = self.table
        for b in range(t.mapper.m):
            keys = t.store.peek(b)
            if len(keys) == 0:
                continue
            homes = t.homes(keys)
            for x, h in zip(keys[homes != b].tolist(), homes[homes != b].tolist()):
                t._stash_add(h, x)
                self.loc[x] = b
                self.pos[x] = len(self.order)
                self.order.append(x)

    def audit(self, copies_found: dict[int, int]) -> None:
        if self.pending:
            raise AuditError(f"{len(self.pending)} mirror operations still queued")
        stash = self.table.stash_keys()
        if set(self.order) != stash:
            raise AuditError("mirror contents differ from the in-memory stash")
        if copies_found != self.loc:
            raise AuditError("mirror locations differ from the blocks")
        if any(self.order[i] != k or self.pos[k] != i for i, k in enumerate(self.order)):
            raise AuditError("virtual array index out of date")
