"""Standalone building blocks with exact or analytic companions.

Each piece of the full counting protocol (epidemic spread, the leader-driven
phase clock, leader-initiated floor/ceiling averaging, the rounding rule,
and random-code collisions) is simulated here in isolation, next to an
independent exact computation it can be checked against: a closed-form
expected interaction count for epidemics, a Fraction-valued potential for
averaging, exhaustive verification for rounding, and a union bound plus a
Monte Carlo estimator for code collisions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import RandomSource
from .protocol import averaging_step, size_estimate


@dataclass(frozen=True)
class PhaseClockParams:
    """Phase clock constants; defaults give 1184 phases.

    num_phases = max(8 * epsilon_l, 32 * beta_l) and
    beta_u = 4 * num_phases * (epsilon_u + 2); with the defaults the clock
    completes between beta_l*ln(n) and beta_u*ln(n) parallel time w.h.p.
    """

    beta_l: float = 37.0
    epsilon_l: float = 1.0
    epsilon_u: float = 1.0

    @property
    def num_phases(self) -> int:
        return int(max(8 * self.epsilon_l, 32 * self.beta_l))

    @property
    def beta_u(self) -> float:
        return 4 * self.num_phases * (self.epsilon_u + 2)


def epidemic_run(n: int, src: RandomSource) -> int:
    """Simulate one-infected-to-all; returns total interactions used."""
    if n < 2:
        raise ValueError("need n >= 2")
    from ._kernels import epidemic_kernel

    return int(epidemic_kernel(n, src.kernel_seed()))


def epidemic_expected_interactions_exact(n: int) -> Fraction:
    """Exact expected interactions: sum_{k=1}^{n-1} n(n-1) / (k(n-k)).

    Each interaction infects someone with probability k(n-k)/(n(n-1)), so
    the stage expectations are exact geometric means; their sum is the
    quantity the simulated mean must match.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    return sum(
        (Fraction(n * (n - 1), k * (n - k)) for k in range(1, n)),
        Fraction(0),
    )


def phase_clock_run(
    n: int,
    src: RandomSource,
    params: PhaseClockParams | None = None,
    num_phases: int | None = None,
) -> int:
    """One leader plus n-1 followers running only the phase rules.

    Returns the interactions until the leader's phase reaches the target
    (``num_phases`` overrides the value derived from ``params``).
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if num_phases is None:
        num_phases = (params or PhaseClockParams()).num_phases
    if num_phases < 1:
        raise ValueError("need num_phases >= 1")
    from ._kernels import phase_clock_kernel

    return int(phase_clock_kernel(n, num_phases, src.kernel_seed()))


@dataclass
class AveragingRun:
    """Result of an isolated averaging run (leader M, followers 0).

    ``phi_numerators`` holds n * potential after each interaction when
    recorded; ``first_within_radius`` is the first interaction index after
    which every value sat within [M/n - radius, M/n + radius] (0 when that
    held initially, -1 if never before termination).
    """

    n: int
    M: int
    interactions: int
    final_aves: np.ndarray
    radius: int
    first_within_radius: int
    pair_sum_violations: int
    potential_increases: int
    phi_numerators: np.ndarray | None = None
    ave_history: list[list[int]] | None = None

    @property
    def first_within_parallel_time(self) -> Fraction | None:
        if self.first_within_radius < 0:
            return None
        return Fraction(self.first_within_radius, self.n)


def averaging_isolated_run(
    n: int,
    M: int,
    src: RandomSource,
    radius: int | None = None,
    record_phi: bool = False,
    record_aves: bool = False,
) -> AveragingRun:
    """Run only the averaging rule until every value is floor/ceil of M/n.

    The compiled loop verifies, on every interaction, that the pair sum is
    preserved and that the distance-to-mean potential does not increase;
    violations are counted in the result.  ``record_aves`` switches to a
    plain-Python reference loop that additionally keeps the full value
    history (small n only) for cross-checking against :func:`potential_phi`.
    """
    if n < 2 or M < 1:
        raise ValueError("need n >= 2 and M >= 1")
    if radius is None:
        radius = n
    if record_aves:
        return _averaging_reference_run(n, M, src, radius)
    if n * M >= 1 << 61:
        raise ValueError("n * M too large for the compiled averaging loop")
    from ._kernels import averaging_kernel

    interactions, first_inside, sum_viol, phi_inc, aves, phi_trace = averaging_kernel(
        n, M, radius, src.kernel_seed(), record_phi
    )
    return AveragingRun(
        n=n,
        M=M,
        interactions=int(interactions),
        final_aves=aves,
        radius=radius,
        first_within_radius=int(first_inside),
        pair_sum_violations=int(sum_viol),
        potential_increases=int(phi_inc),
        phi_numerators=phi_trace if record_phi else None,
    )


def _averaging_reference_run(n: int, M: int, src: RandomSource, radius: int) -> AveragingRun:
    """Slow exact-arithmetic reference used by the invariant cross-checks."""
    from .engine import schedule_next

    aves = [0] * n
    aves[0] = M
    floor_share, rem = divmod(M, n)
    ceil_share = floor_share + (1 if rem else 0)
    lo = math.ceil(Fraction(M, n) - radius)
    hi = math.floor(Fraction(M, n) + radius)
    history = [list(aves)]
    phi_numers = []
    first_inside = 0 if all(lo <= v <= hi for v in aves) else -1
    interactions = 0
    while not all(floor_share <= v <= ceil_share for v in aves):
        r, s = schedule_next(src, n)
        aves[r], aves[s] = averaging_step(aves[r], aves[s])
        interactions += 1
        history.append(list(aves))
        phi_numers.append(sum(abs(n * v - M) for v in aves))
        if first_inside < 0 and all(lo <= v <= hi for v in aves):
            first_inside = interactions
    phi_arr = np.array(phi_numers, dtype=object)
    increases = sum(
        1 for prev, cur in zip(phi_numers, phi_numers[1:]) if cur > prev
    )
    return AveragingRun(
        n=n,
        M=M,
        interactions=interactions,
        final_aves=np.array(aves, dtype=object),
        radius=radius,
        first_within_radius=first_inside,
        pair_sum_violations=sum(1 for st in history if sum(st) != M),
        potential_increases=increases,
        phi_numerators=phi_arr,
        ave_history=history,
    )


def potential_phi(aves: Sequence[int], M: int, n: int) -> Fraction:
    """Exact distance-to-mean potential: sum_i |ave_i - M/n|."""
    if len(aves) != n:
        raise ValueError(f"expected {n} values, got {len(aves)}")
    target = Fraction(M, n)
    return sum((abs(Fraction(v) - target) for v in aves), Fraction(0))


def rounding_check(n_max: int, c: int, m_coeff: int = 3) -> bool:
    """Exhaustively verify the rounding rule over n in [2, n_max].

    With M = m_coeff * n^(c+2), checks that the rounded ratio M/x recovers n
    for every integer x within n^c of M/n.  True iff there is no
    counterexample; m_coeff=2 violates the rule's premise and is expected to
    fail for some n, showing the bound is not vacuous.
    """
    if n_max < 2 or c not in (0, 1, 2):
        raise ValueError("need n_max >= 2 and c in {0, 1, 2}")
    for n in range(2, n_max + 1):
        M = m_coeff * n ** (c + 2)
        share = Fraction(M, n)
        x_lo = math.ceil(share - n**c)
        x_hi = math.floor(share + n**c)
        for x in range(max(1, x_lo), x_hi + 1):
            if size_estimate(M, x) != n:
                return False
    return True


def birthday_collision_bound(n: int, code_len: int) -> float:
    """Union bound on any two of n uniform codes of code_len bits colliding:
    n(n-1) / 2^(code_len+1)."""
    if n < 2 or code_len < 1:
        raise ValueError("need n >= 2 and code_len >= 1")
    return n * (n - 1) / 2.0 ** (code_len + 1)


def birthday_collision_rate(
    n: int, code_len: int, trials: int, src: RandomSource
) -> float:
    """Monte Carlo companion: empirical frequency of a duplicate among n
    uniform codes, over the given number of trials."""
    if code_len > 62:
        raise ValueError("Monte Carlo estimator supports code_len <= 62")
    gen = src._gen
    collisions = 0
    chunk = max(1, (1 << 22) // n)
    remaining = trials
    while remaining:
        rows = min(chunk, remaining)
        codes = gen.integers(0, 1 << code_len, size=(rows, n), dtype=np.int64)
        codes.sort(axis=1)
        collisions += int((np.diff(codes, axis=1) == 0).any(axis=1).sum())
        remaining -= rows
    return collisions / trials
