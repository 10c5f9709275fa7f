"""Closed-form stash-size estimates for block tables.

All fractions are per stored key (stash size divided by ``n``).

``expected_overflow(B, delta)`` is the expected number of keys that spill
out of a ``B``-slot block whose expected load is ``B (1 - delta)``, using a
normal approximation of the block occupancy.  ``math.erfc`` supplies the
complementary error function.

``round_stash_bound`` bounds the extra stash caused by round-hashing's
unequal arcs: during the first step of a round, ``c - s0 q`` long arcs
receive ``n/c`` keys each, and the worst ``q/c`` maximises their overflow.

``predicted_stash_fraction`` combines the two into the estimate shown next to
measured stash sizes:

* ``s0 * eps <= 1``: round-hashing bound plus the uniform-hash overflow.
* ``s0 * eps > 1``: uniform-hash overflow of the most loaded arcs, whose load
  is ``(1 - eps)(1 + 1/s0)``, i.e. slack ``eps - (1 - eps)/s0``.
"""

from __future__ import annotations

import math

__all__ = [
    "expected_overflow",
    "uniform_stash_fraction",
    "worst_round_ratio",
    "round_stash_bound",
    "round_stash_fraction",
    "simplified_round_stash",
    "effective_slack",
    "predicted_stash_fraction",
    "format_percent",
]


def expected_overflow(B: int, delta: float) -> float:
    """Expected keys beyond capacity ``B`` when a block expects ``B (1 - delta)``."""
    if B < 1:
        raise ValueError("B must be at least 1")
    if not delta < 1:
        raise ValueError("delta must be below 1")
    load = B * (1 - delta)
    head = math.sqrt(load) * math.exp(-0.5 * B * delta * delta / (1 - delta)) / math.sqrt(2 * math.pi)
    tail = 0.5 * delta * B * math.erfc(math.sqrt(B) * delta / math.sqrt(2 * (1 - delta)))
    return max(head - tail, 0.0)


def uniform_stash_fraction(B: int, epsilon: float, *, refined: bool = False, exact: bool = True) -> float:
    """Stash fraction of an ideal (uniform) hash at utilization ``1 - epsilon``.

    ``exact`` divides the full overflow expression by the expected block load.
    Otherwise the leading-term bound is returned, or with ``refined`` the
    sharper bound that is valid once ``epsilon**2 * B >= 4``.
    """
    if not 0 <= epsilon < 1:
        raise ValueError("epsilon must be in [0, 1)")
    if exact and not refined:
        return expected_overflow(B, epsilon) / (B * (1 - epsilon))
    decay = math.exp(-0.5 * B * epsilon * epsilon / (1 - epsilon))
    if refined and epsilon * epsilon * B >= 4:
        return math.sqrt(1 - epsilon) * decay / (epsilon * epsilon * B * math.sqrt(2 * math.pi * B))
    return decay / math.sqrt(2 * math.pi * B * (1 - epsilon))


def worst_round_ratio(epsilon: float, s0: int) -> float:
    """The ``q/c`` at which the round-hashing overflow peaks."""
    return math.sqrt((1 + 1 / s0) * (1 + epsilon)) - 1


def round_stash_fraction(epsilon: float, s0: int) -> float:
    """Extra stash per key caused by unequal arcs.

    Zero once ``s0 * epsilon >= 1``: the longest arcs then expect at most
    ``B`` keys and the expression no longer describes an overflow.
    """
    if s0 < 1:
        raise ValueError("s0 must be at least 1")
    if s0 * epsilon >= 1:
        return 0.0
    value = (1 - epsilon) * (1 + epsilon * s0 - 2 * s0 * worst_round_ratio(epsilon, s0))
    return max(value, 0.0)


def round_stash_bound(n: float, epsilon: float, s0: int) -> float:
    """Expected extra stash keys for ``n`` keys."""
    return n * round_stash_fraction(epsilon, s0)


def simplified_round_stash(n: float, epsilon: float, s0: int) -> float:
    """Small-``epsilon``, large-``s0`` approximation ``n (1-eps)(1-s0 eps)^2 / (4 s0)``."""
    return n * (1 - epsilon) * (1 - s0 * epsilon) ** 2 / (4 * s0)


def effective_slack(epsilon: float, s0: int) -> float:
    """Slack left on the most loaded arcs, whose share is ``1 + 1/s0`` times average."""
    return epsilon - (1 - epsilon) / s0


def predicted_stash_fraction(B: int, epsilon: float, s0: int) -> float:
    """Estimated worst stash fraction of a round-hashing table."""
    if s0 * epsilon <= 1:
        return round_stash_fraction(epsilon, s0) + uniform_stash_fraction(B, epsilon)
    return uniform_stash_fraction(B, effective_slack(epsilon, s0))


def format_percent(fraction: float) -> str:
    """Percent with one decimal from 1% up and one significant digit below."""
    pct = 100 * fraction
    if pct >= 1:
        text = f"{pct:.1f}"
        return text[:-2] if text.endswith(".0") else text
    return f"{pct:.1g}"
