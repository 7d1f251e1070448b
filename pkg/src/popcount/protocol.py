"""Agent state machine for leaderless exact size counting.

One interaction updates a receiver ``rec`` against a sender ``sen`` through
four sequential stages: code growth (unique IDs), leader election by
lexicographically greatest leader code, pairwise integer averaging, and a
leader-driven phase clock that gates writes to the reported ``count``.
Averaging is the only stage that also mutates the sender.

All integers are Python ints (arbitrary precision): the scale constant ``M``
grows like 2^(3 * level) and routinely exceeds 64 bits.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .core import EMPTY, BitString, RandomSource, append, lex_precedes

DEFAULT_MAX_PHASE = 1184


class LevelSchedule(enum.Enum):
    """Growth rule applied when two agents with identical codes meet."""

    DOUBLE = "double"
    INCREMENT = "increment"
    SQUARE = "square"

    def grow(self, level: int) -> int:
        """Number of bits to append to a code of the given length."""
        if self is LevelSchedule.DOUBLE:
            return max(1, level)
        if self is LevelSchedule.INCREMENT:
            return 1
        return max(1, level * level - level)


@dataclass(frozen=True)
class ProtocolParams:
    max_phase: int = DEFAULT_MAX_PHASE
    schedule: LevelSchedule = LevelSchedule.DOUBLE

    def __post_init__(self):
        if self.max_phase < 1:
            raise ValueError("max_phase must be >= 1")


@dataclass(eq=True)
class AgentState:
    """One agent's full record.

    C is the agent's own code, LC the leader code it currently backs
    (|LC| = 2|C| for a leader, with C a prefix of LC).  ``ave`` holds the
    averaging tokens, ``M`` the per-epoch token total, ``count`` the reported
    population size, ``phase`` the timer position in [1, max_phase].
    """

    __slots__ = ("C", "LC", "is_leader", "M", "ave", "count", "phase")

    C: BitString
    LC: BitString
    is_leader: bool
    M: int
    ave: int
    count: int
    phase: int

    @classmethod
    def initial(cls) -> "AgentState":
        return cls(C=EMPTY, LC=EMPTY, is_leader=True, M=1, ave=1, count=1, phase=1)

    def copy(self) -> "AgentState":
        return AgentState(self.C, self.LC, self.is_leader, self.M, self.ave, self.count, self.phase)


def set_new_leader_code(rec: AgentState, new_lc: BitString) -> AgentState:
    """Install a leader code and restart the averaging/timer epoch.

    M becomes 3 * 2^(3 * |new_lc| / 2), a pure function of the installed
    leader code, so all agents sharing an LC share the same M.  The leader
    holds the whole token pool; followers restart empty.
    """
    if new_lc.length < 2 or new_lc.length % 2:
        raise ValueError(f"leader code length must be even and >= 2, got {new_lc.length}")
    rec.LC = new_lc
    rec.phase = 1
    rec.M = 3 << (3 * (new_lc.length // 2))
    rec.ave = rec.M if rec.is_leader else 0
    return rec


def extend_code(rec: AgentState, num_bits: int, src: RandomSource) -> AgentState:
    """Grow the receiver's code by ``num_bits`` random bits.

    A leader first extends its leader code by twice as many fresh bits
    (restarting the epoch), then takes its own new code bits from the slice
    of the new leader code just past its old code, keeping C a prefix of LC.
    A follower just appends fresh random bits to C.
    """
    if num_bits < 1:
        raise ValueError("num_bits must be >= 1")
    if rec.is_leader:
        new_lc = append(rec.LC, src.rand_bits(2 * num_bits))
        old_len = rec.C.length
        set_new_leader_code(rec, new_lc)
        rec.C = append(rec.C, new_lc[old_len : old_len + num_bits])
    else:
        rec.C = append(rec.C, src.rand_bits(num_bits))
    return rec


def unique_id_step(
    rec: AgentState,
    sen_C: BitString,
    src: RandomSource,
    schedule: LevelSchedule = LevelSchedule.DOUBLE,
) -> AgentState:
    """Catch up to the sender's code length, then escape a shared code.

    If still identical after catching up, the code grows by
    ``schedule.grow(|C|)`` bits (doubling by default), starting a new level.
    """
    rec_C = rec.C
    if rec_C.length < sen_C.length:
        extend_code(rec, sen_C.length - rec_C.length, src)
        rec_C = rec.C
    if rec_C.value == sen_C.value and rec_C.length == sen_C.length:
        extend_code(rec, schedule.grow(rec_C.length), src)
    return rec


def elect_leader_step(rec: AgentState, sen_LC: BitString) -> AgentState:
    """Adopt the winning leader code seen on the sender, if any.

    A strictly larger common-length prefix defeats the receiver (who drops
    out of leadership and adopts).  A follower also adopts a strictly longer
    leader code with an equal prefix, so leader-code lengths equalize; a
    *leader* with the shorter code keeps its own, since it may still grow
    into the lexicographic winner.
    """
    rec_LC = rec.LC
    if rec_LC.value == sen_LC.value and rec_LC.length == sen_LC.length:
        return rec
    if lex_precedes(rec_LC, sen_LC):
        rec.is_leader = False
        set_new_leader_code(rec, sen_LC)
    if not rec.is_leader and rec.LC.length < sen_LC.length:
        set_new_leader_code(rec, sen_LC)
    return rec


def averaging_step(rec_ave: int, sen_ave: int) -> tuple[int, int]:
    """Split the pair total as (ceiling half, floor half); the sum is exact."""
    total = rec_ave + sen_ave
    floor_half = total >> 1
    return total - floor_half, floor_half


def size_estimate(M: int, ave: int) -> int | None:
    """M / ave rounded to nearest, in exact integer arithmetic.

    Returns None when ``ave`` is 0 (a follower that has not yet received
    tokens this epoch), which callers treat as "skip".
    """
    if ave == 0:
        return None
    return (2 * M + ave) // (2 * ave)


def timer_step(rec: AgentState, sen_phase: int, params: ProtocolParams) -> AgentState:
    """Advance the phase clock and, once it completes, publish the count.

    The leader increments its phase on meeting an agent at the same phase;
    followers catch up to higher phases epidemically.  The count is written
    only at the final phase, only when it changes, and only when M is large
    enough (M >= 3 * newCount^3) for the estimate to be trustworthy.
    """
    max_phase = params.max_phase
    phase = rec.phase
    if rec.is_leader:
        if phase == sen_phase and phase < max_phase:
            rec.phase = phase + 1
    elif phase < sen_phase:
        rec.phase = sen_phase
    if rec.phase == max_phase:
        new_count = size_estimate(rec.M, rec.ave)
        if (
            new_count is not None
            and rec.count != new_count
            and rec.M >= 3 * new_count * new_count * new_count
        ):
            rec.count = new_count
    return rec


def interact(
    rec: AgentState,
    sen: AgentState,
    src: RandomSource,
    params: ProtocolParams,
) -> tuple[AgentState, AgentState]:
    """One full interaction: receiver update pipeline, then shared averaging.

    Stage order matters: code growth and leader election first (mutating the
    receiver only), then -- iff the receiver's *updated* leader code matches
    the sender's pre-interaction one -- averaging (mutating both) and the
    timer.  Restarts under different leaders therefore stay separate.
    """
    sen_C = sen.C
    sen_LC = sen.LC
    sen_phase = sen.phase
    unique_id_step(rec, sen_C, src, params.schedule)
    elect_leader_step(rec, sen_LC)
    rec_LC = rec.LC
    if rec_LC.value == sen_LC.value and rec_LC.length == sen_LC.length:
        rec.ave, sen.ave = averaging_step(rec.ave, sen.ave)
        timer_step(rec, sen_phase, params)
    return rec, sen
