"""Compiled inner loops for the isolated building-block simulations.

These loops are pure int64 state (no variable-length codes), so they compile
cleanly with numba and run millions of interactions per second, which the
statistical checks need.  Each kernel seeds its own legacy numpy RNG, so a
kernel call is deterministic in its seed argument.

The averaging kernel checks its two invariants (pair-sum preservation and a
nonincreasing distance-to-mean potential) on every single interaction and
reports violation counts, since post-hoc checking of full traces at large n
would not fit in memory.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def epidemic_kernel(n: int, seed: int) -> int:
    """Interactions until a one-agent infection covers the population.

    Receiver adopts the sender's infection; pairs are uniform ordered pairs
    of distinct agents.
    """
    np.random.seed(seed)
    infected = np.zeros(n, np.bool_)
    infected[0] = True
    num_infected = 1
    interactions = 0
    while num_infected < n:
        r = np.random.randint(0, n)
        s = np.random.randint(0, n - 1)
        if s >= r:
            s += 1
        interactions += 1
        if infected[s] and not infected[r]:
            infected[r] = True
            num_infected += 1
    return interactions


@njit(cache=True)
def phase_clock_kernel(n: int, num_phases: int, seed: int) -> int:
    """Interactions until the designated leader (index 0) completes
    num_phases increments from the shared starting phase.

    Leader increments on meeting its own phase; followers copy any higher
    phase they receive.
    """
    np.random.seed(seed)
    phase = np.zeros(n, np.int64)
    interactions = 0
    while phase[0] < num_phases:
        r = np.random.randint(0, n)
        s = np.random.randint(0, n - 1)
        if s >= r:
            s += 1
        interactions += 1
        if r == 0:
            if phase[0] == phase[s]:
                phase[0] += 1
        elif phase[r] < phase[s]:
            phase[r] = phase[s]
    return interactions


@njit(cache=True)
def averaging_kernel(
    n: int,
    M: int,
    radius: int,
    seed: int,
    record_phi: bool,
):
    """Floor/ceiling averaging from (leader=M, followers=0) to termination.

    Terminates when every value is floor(M/n) or ceil(M/n).  Returns
    (interactions, first interaction index with all values within
    [M/n - radius, M/n + radius] or -1, pair-sum violations, potential
    increases, final values, per-interaction potential numerators).

    The potential is sum_i |ave_i - M/n|; tracked as its numerator over n
    (an exact integer) and updated from the two touched agents only.
    """
    np.random.seed(seed)
    ave = np.zeros(n, np.int64)
    ave[0] = M
    floor_share = M // n
    ceil_share = floor_share + (1 if M % n else 0)
    # integer bounds of the real interval [M/n - radius, M/n + radius]
    lo = -((-(M - radius * n)) // n)  # ceil((M - radius*n) / n)
    hi = (M + radius * n) // n
    num_settled = 0
    num_inside = 0
    phi_numer = np.int64(0)  # sum_i |n*ave_i - M|, i.e. potential * n
    for i in range(n):
        if floor_share <= ave[i] <= ceil_share:
            num_settled += 1
        if lo <= ave[i] <= hi:
            num_inside += 1
        d = n * ave[i] - M
        phi_numer += d if d >= 0 else -d

    cap = 1 << 16
    phi_trace = np.empty(cap if record_phi else 0, np.int64)
    interactions = 0
    first_inside = np.int64(0) if num_inside == n else np.int64(-1)
    sum_violations = 0
    phi_increases = 0

    while num_settled < n:
        r = np.random.randint(0, n)
        s = np.random.randint(0, n - 1)
        if s >= r:
            s += 1
        a = ave[r]
        b = ave[s]
        total = a + b
        floor_half = total >> 1
        new_r = total - floor_half
        new_s = floor_half
        interactions += 1
        if new_r + new_s != total:
            sum_violations += 1
        # settled / inside bookkeeping for the two touched agents
        old_settled = (floor_share <= a <= ceil_share) + (floor_share <= b <= ceil_share)
        new_settled = (floor_share <= new_r <= ceil_share) + (floor_share <= new_s <= ceil_share)
        num_settled += new_settled - old_settled
        old_inside = (lo <= a <= hi) + (lo <= b <= hi)
        new_inside = (lo <= new_r <= hi) + (lo <= new_s <= hi)
        num_inside += new_inside - old_inside
        # potential delta from the two touched agents, exact integers
        d1 = n * a - M
        d2 = n * b - M
        d3 = n * new_r - M
        d4 = n * new_s - M
        delta = (abs(d3) + abs(d4)) - (abs(d1) + abs(d2))
        if delta > 0:
            phi_increases += 1
        phi_numer += delta
        ave[r] = new_r
        ave[s] = new_s
        if first_inside < 0 and num_inside == n:
            first_inside = interactions
        if record_phi:
            if interactions > cap:
                new_cap = cap * 2
                grown = np.empty(new_cap, np.int64)
                grown[:cap] = phi_trace
                phi_trace = grown
                cap = new_cap
            phi_trace[interactions - 1] = phi_numer

    if record_phi:
        phi_trace = phi_trace[:interactions]
    return interactions, first_inside, sum_violations, phi_increases, ave, phi_trace
