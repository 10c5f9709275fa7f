"""Reference models used to audit :class:`~roundhash.round_mapping.RoundMapper`.

``PermutationOracle`` materialises the arc -> bucket sequence by literally
running the skip-and-insert construction: starting from ``0 .. s0-1``, each
new bucket number is placed after skipping ``s`` existing entries, and when
the scan runs off the end it restarts from the front with the next step.

``RationalArcModel`` gives the exact arc geometry for the same state: the
entries already rebuilt during the current step are short arcs of integer
weight ``s`` and the rest are long arcs of weight ``s + 1``.

Both are slow by design (plain Python integers, no reciprocals).
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np

__all__ = ["PermutationOracle", "RationalArcModel"]


class PermutationOracle:
    """Explicit arc-order sequence of bucket numbers.

    Internally a two-part buffer: ``done`` holds the sequence rebuilt during
    the current step (scan already passed it), ``old`` the previous step's
    sequence with a read pointer.  The logical sequence is
    ``done + old[ptr:]``, so an insertion is O(1) amortised instead of a
    list insert.
    """

    def __init__(self, s0: int) -> None:
        if s0 < 1:
            raise ValueError("s0 must be a positive integer")
        self.s0 = s0
        self.s = 2 * s0 - 1
        # the initial arcs count as already scanned, so the first insert
        # restarts the scan and wraps the step to s0
        self._old = np.empty(0, dtype=np.int64)
        self._ptr = 0
        self._done = np.arange(max(16, 2 * s0), dtype=np.int64)
        self._n_done = s0
        self.m = s0

    # -- construction ------------------------------------------------------

    def new_bucket(self) -> int:
        """Insert bucket ``m`` at the skip position; returns its arc index."""
        if self._ptr == len(self._old):
            # end of scan: restart from the front with the next step
            self._old = self.seq()
            self._ptr = 0
            self._n_done = 0
            self.s = self.s0 if self.s == 2 * self.s0 - 1 else self.s + 1
        s = self.s
        if len(self._old) - self._ptr < s:
            raise RuntimeError("scan ended inside a group")
        need = self._n_done + s + 1
        if need > len(self._done):
            grown = np.empty(max(need, 2 * len(self._done)), dtype=np.int64)
            grown[: self._n_done] = self._done[: self._n_done]
            self._done = grown
        self._done[self._n_done : self._n_done + s] = self._old[self._ptr : self._ptr + s]
        self._done[self._n_done + s] = self.m
        self._ptr += s
        self._n_done += s + 1
        self.m += 1
        return self._n_done - 1

    def grow_to(self, m: int) -> "PermutationOracle":
        while self.m < m:
            self.new_bucket()
        return self

    # -- reads ---------------------------------------------------------------

    @property
    def rebuilt(self) -> int:
        """Number of leading entries already passed by the current scan."""
        return self._n_done

    def parts(self) -> tuple[np.ndarray, np.ndarray]:
        """(rebuilt prefix, untouched suffix) views; their concatenation is the sequence."""
        return self._done[: self._n_done], self._old[self._ptr :]

    def seq(self) -> np.ndarray:
        head, tail = self.parts()
        return np.concatenate([head, tail])

    def bucket_at(self, j: int) -> int:
        if not 0 <= j < self.m:
            raise IndexError(f"arc {j} outside [0, {self.m})")
        if j < self._n_done:
            return int(self._done[j])
        return int(self._old[self._ptr + j - self._n_done])

    def arc_model(self) -> "RationalArcModel":
        return RationalArcModel.from_oracle(self)

    def arc_of_fraction(self, numerator: int, denominator: int) -> int:
        return self.arc_model().arc_of_fraction(numerator, denominator)

    def copy(self) -> "PermutationOracle":
        twin = PermutationOracle.__new__(PermutationOracle)
        twin.__dict__.update(self.__dict__)
        twin._old = self._old.copy()
        twin._done = self._done.copy()
        return twin

    def __len__(self) -> int:
        return self.m

    def __repr__(self) -> str:
        return f"PermutationOracle(s0={self.s0}, m={self.m}, s={self.s})"


@dataclass(frozen=True)
class RationalArcModel:
    """Arc boundaries as integers over a common denominator ``total``.

    Arc ``j`` covers ``[starts[j] / total, starts[j + 1] / total)`` of the
    unit circumference.
    """

    starts: tuple[int, ...]
    total: int

    @classmethod
    def from_weights(cls, weights: list[int]) -> "RationalArcModel":
        starts = [0]
        for w in weights:
            starts.append(starts[-1] + w)
        return cls(tuple(starts), starts[-1])

    @classmethod
    def from_oracle(cls, oracle: PermutationOracle) -> "RationalArcModel":
        s = oracle.s
        short = oracle.rebuilt
        if short == 0:
            # nothing rebuilt yet this step: every arc has the same length
            weights = [1] * oracle.m
        else:
            weights = [s] * short + [s + 1] * (oracle.m - short)
        return cls.from_weights(weights)

    @property
    def count(self) -> int:
        return len(self.starts) - 1

    def length(self, j: int) -> tuple[int, int]:
        """Length of arc ``j`` as (numerator, denominator)."""
        return self.starts[j + 1] - self.starts[j], self.total

    def arc_of_fraction(self, numerator: int, denominator: int) -> int:
        """Arc containing the point ``numerator / denominator`` of the circle."""
        if denominator <= 0 or not 0 <= numerator < denominator:
            raise ValueError("need 0 <= numerator < denominator")
        # largest j with starts[j] <= numerator * total / denominator
        return bisect.bisect_right(self.starts, numerator * self.total // denominator) - 1
