"""Fixed-capacity block arrays with block-transfer accounting.

A block holds up to ``B`` nonzero 64-bit keys (zero marks an unused slot).
Every :meth:`BlockStore.read` and :meth:`BlockStore.write` is one block
transfer and bumps the matching counter; :meth:`peek` is an uncharged read
for audits.

File layout (little-endian)::

    header   32 bytes   "RNDT", version u32, B u32, s0 u32,
                        eps numerator u32, eps denominator u32, n u64
    mapper   40 bytes   s0, m, s, p, q as int64
    blocks   numBuckets records of (count u32, B x u64 slots)
    trailer  u64 count, then count (bucket u64, key u64) pairs
             count == 2**64-1 means the stash is mirrored inside the blocks
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

__all__ = ["BlockStore", "MemoryBlockStore", "FileBlockStore", "FileHeader", "MIRRORED"]

MAGIC = b"RNDT"
VERSION = 1
MIRRORED = (1 << 64) - 1

_HEADER = struct.Struct("<4sIIIIIQ")
_MAPPER = struct.Struct("<5q")
_COUNT = struct.Struct("<I")
_U64 = struct.Struct("<Q")
DATA_OFFSET = _HEADER.size + _MAPPER.size


class BlockStore:
    """Indexed blocks ``0 .. num_blocks-1`` with read/write transfer counters."""

    def __init__(self, B: int) -> None:
        if B < 1:
            raise ValueError("block capacity must be positive")
        self.B = B
        self.reads = 0
        self.writes = 0
        #: when a set, every charged read/write records its block index here
        self.touched: set[int] | None = None

    @property
    def transfers(self) -> int:
        return self.reads + self.writes

    def reset_counters(self) -> None:
        self.reads = 0
        self.writes = 0

    def read(self, b: int) -> np.ndarray:
        self._check(b)
        self.reads += 1
        if self.touched is not None:
            self.touched.add(b)
        return self._load(b)

    def write(self, b: int, keys: np.ndarray) -> None:
        self._check(b)
        if len(keys) > self.B:
            raise ValueError(f"block {b} would hold {len(keys)} > {self.B} keys")
        self.writes += 1
        if self.touched is not None:
            self.touched.add(b)
        self._store(b, np.asarray(keys, dtype=np.uint64))

    def peek(self, b: int) -> np.ndarray:
        self._check(b)
        return self._load(b)

    def _check(self, b: int) -> None:
        if not 0 <= b < self.num_blocks:
            raise IndexError(f"block {b} outside [0, {self.num_blocks})")

    # subclasses
    num_blocks: int

    def append_block(self) -> int:
        raise NotImplementedError

    def drop_last_block(self) -> None:
        raise NotImplementedError

    def _load(self, b: int) -> np.ndarray:
        raise NotImplementedError

    def _store(self, b: int, keys: np.ndarray) -> None:
        raise NotImplementedError

    def flush(self) -> None:
        pass

    def close(self) -> None:
        pass


class MemoryBlockStore(BlockStore):
    """Blocks in one growable ``(capacity, B)`` array plus a count vector."""

    def __init__(self, B: int, num_blocks: int = 0) -> None:
        super().__init__(B)
        cap = max(16, num_blocks)
        self.slots = np.zeros((cap, B), dtype=np.uint64)
        self.counts = np.zeros(cap, dtype=np.int64)
        self.num_blocks = num_blocks

    def append_block(self) -> int:
        if self.num_blocks == len(self.counts):
            cap = 2 * len(self.counts)
            slots = np.zeros((cap, self.B), dtype=np.uint64)
            slots[: self.num_blocks] = self.slots[: self.num_blocks]
            counts = np.zeros(cap, dtype=np.int64)
            counts[: self.num_blocks] = self.counts[: self.num_blocks]
            self.slots, self.counts = slots, counts
        b = self.num_blocks
        self.slots[b] = 0
        self.counts[b] = 0
        self.num_blocks += 1
        return b

    def drop_last_block(self) -> None:
        if self.num_blocks == 0:
            raise IndexError("no block to drop")
        self.num_blocks -= 1

    def _load(self, b: int) -> np.ndarray:
        return self.slots[b, : self.counts[b]].copy()

    def _store(self, b: int, keys: np.ndarray) -> None:
        c = len(keys)
        self.slots[b, :c] = keys
        self.slots[b, c:] = 0
        self.counts[b] = c


@dataclass(frozen=True)
class FileHeader:
    B: int
    s0: int
    epsilon: Fraction
    n: int
    mapper: tuple[int, int, int, int, int]


class FileBlockStore(BlockStore):
    """Blocks stored as fixed-size records in a single file (see module doc)."""

    def __init__(self, path: str | os.PathLike, B: int, *, create: bool) -> None:
        super().__init__(B)
        self.path = Path(path)
        self.record = _COUNT.size + 8 * B
        flags = os.O_RDWR | (os.O_CREAT | os.O_TRUNC if create else 0)
        self.fd = os.open(self.path, flags, 0o644)
        if create:
            self.num_blocks = 0
            os.pwrite(self.fd, bytes(DATA_OFFSET), 0)
        else:
            header = self.read_header()
            if header.B != B:
                raise ValueError(f"file has B={header.B}, expected {B}")
            self.num_blocks = header.mapper[1]

    @classmethod
    def open(cls, path: str | os.PathLike) -> "FileBlockStore":
        with open(path, "rb") as fh:
            raw = fh.read(_HEADER.size)
        if len(raw) < _HEADER.size or raw[:4] != MAGIC:
            raise ValueError(f"{path} is not a round-table file")
        B = _HEADER.unpack(raw)[2]
        return cls(path, B, create=False)

    # -- header / trailer ----------------------------------------------------

    def write_header(self, header: FileHeader) -> None:
        eps = header.epsilon
        raw = _HEADER.pack(
            MAGIC, VERSION, header.B, header.s0, eps.numerator, eps.denominator, header.n
        ) + _MAPPER.pack(*header.mapper)
        os.pwrite(self.fd, raw, 0)

    def read_header(self) -> FileHeader:
        raw = os.pread(self.fd, DATA_OFFSET, 0)
        if len(raw) < DATA_OFFSET:
            raise ValueError("truncated header")
        magic, version, B, s0, num, den, n = _HEADER.unpack_from(raw)
        if magic != MAGIC:
            raise ValueError("bad magic")
        if version != VERSION:
            raise ValueError(f"unsupported version {version}")
        mapper = _MAPPER.unpack_from(raw, _HEADER.size)
        return FileHeader(B, s0, Fraction(num, den), n, mapper)

    def _trailer_offset(self) -> int:
        return DATA_OFFSET + self.num_blocks * self.record

    def write_trailer(self, pairs: list[tuple[int, int]] | None) -> None:
        """Persist stash pairs; ``None`` records that the stash lives in the blocks."""
        off = self._trailer_offset()
        if pairs is None:
            raw = _U64.pack(MIRRORED)
        else:
            arr = np.asarray(pairs, dtype="<u8").reshape(-1, 2)
            raw = _U64.pack(len(arr)) + arr.tobytes()
        os.pwrite(self.fd, raw, off)
        os.ftruncate(self.fd, off + len(raw))

    def read_trailer(self) -> list[tuple[int, int]] | None:
        off = self._trailer_offset()
        raw = os.pread(self.fd, 8, off)
        if len(raw) < 8:
            raise ValueError("missing stash trailer")
        (count,) = _U64.unpack(raw)
        if count == MIRRORED:
            return None
        body = os.pread(self.fd, 16 * count, off + 8)
        arr = np.frombuffer(body, dtype="<u8").reshape(-1, 2)
        return [(int(b), int(k)) for b, k in arr]

    # -- blocks -------------------------------------------------------------

    def _offset(self, b: int) -> int:
        return DATA_OFFSET + b * self.record

    def append_block(self) -> int:
        b = self.num_blocks
        os.pwrite(self.fd, bytes(self.record), self._offset(b))
        self.num_blocks += 1
        return b

    def drop_last_block(self) -> None:
        if self.num_blocks == 0:
            raise IndexError("no block to drop")
        self.num_blocks -= 1
        os.ftruncate(self.fd, self._offset(self.num_blocks))

    def _load(self, b: int) -> np.ndarray:
        raw = os.pread(self.fd, self.record, self._offset(b))
        (count,) = _COUNT.unpack_from(raw)
        return np.frombuffer(raw, dtype="<u8", count=count, offset=_COUNT.size).astype(np.uint64)

    def _store(self, b: int, keys: np.ndarray) -> None:
        body = np.zeros(self.B, dtype="<u8")
        body[: len(keys)] = keys
        os.pwrite(self.fd, _COUNT.pack(len(keys)) + body.tobytes(), self._offset(b))

    def flush(self) -> None:
        os.fsync(self.fd)

    def close(self) -> None:
        if self.fd >= 0:
            os.close(self.fd)
            self.fd = -1
