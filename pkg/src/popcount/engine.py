"""Population container, uniform pair scheduler, run loop, and metrics.

A run applies uniformly random ordered interactions to a fixed population
until a stop condition fires.  Parallel time is interactions / n.  The loop
records count writes and level transitions (both rare) rather than a full
interaction log, unless a full trace is requested.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .core import RandomSource
from .protocol import (
    AgentState,
    ProtocolParams,
    elect_leader_step,
    unique_id_step,
)

STOP_INTERACTIONS = "interactions"
STOP_ALL_COUNT_CORRECT = "correct"
STOP_OUTPUT_STABLE = "stable"
_STOPS = (STOP_INTERACTIONS, STOP_ALL_COUNT_CORRECT, STOP_OUTPUT_STABLE)

# How often (in interactions) the engine samples agent memory footprints and,
# once all counts are correct, re-evaluates the stability predicate.
_BITS_SAMPLE_MASK = 63


@dataclass
class Population:
    agents: list[AgentState]
    interaction_counter: int = 0

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def parallel_time(self) -> Fraction:
        return Fraction(self.interaction_counter, self.n)


@dataclass(frozen=True)
class SimConfig:
    n: int
    seed: int
    params: ProtocolParams = ProtocolParams()
    stop: str = STOP_OUTPUT_STABLE
    max_interactions: int | None = None
    record_trace: bool = False

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("population size must be >= 2")
        if self.stop not in _STOPS:
            raise ValueError(f"unknown stop condition {self.stop!r}")
        if self.stop == STOP_INTERACTIONS and self.max_interactions is None:
            raise ValueError("stop='interactions' requires max_interactions")
        if self.max_interactions is not None and self.max_interactions < 1:
            raise ValueError("max_interactions must be >= 1")


@dataclass
class RunSummary:
    n: int
    interactions: int
    stop_reason: str
    final_counts_correct: bool
    convergence_parallel_time: Fraction | None
    stabilization_parallel_time: Fraction | None
    final_level: int
    max_code_len: int
    max_agent_bits: int
    leader_count_final: int

    @property
    def parallel_time(self) -> Fraction:
        return Fraction(self.interactions, self.n)


@dataclass
class RunTrace:
    count_writes: list[tuple[int, int, int, int]]
    level_transitions: list[tuple[int, int]]
    summary: RunSummary
    interaction_log: list[tuple[int, int]] | None = None
    population: Population | None = None


def schedule_next(src: RandomSource, n: int) -> tuple[int, int]:
    """Uniform ordered pair of distinct agent indices (receiver, sender)."""
    if n < 2:
        raise ValueError("need at least two agents")
    r = src.rand_below(n)
    s = src.rand_below(n - 1)
    if s >= r:
        s += 1
    return r, s


def agent_bits(a: AgentState) -> int:
    """Memory footprint in bits: both codes, the integer fields, the flag."""
    return (
        a.C.length
        + a.LC.length
        + a.M.bit_length()
        + a.ave.bit_length()
        + a.count.bit_length()
        + 1
        + a.phase.bit_length()
    )


def is_output_stable(pop: Population, params: ProtocolParams) -> bool:
    """Sufficient condition for no reachable configuration changing any count.

    All codes pairwise distinct and equal-length, one shared leader code held
    by exactly one leader, every phase finished, every token count settled at
    floor/ceil of M/n, and every count already equal to n.  Under these no
    transition can alter codes, leadership, phases, or counts.
    """
    agents = pop.agents
    n = len(agents)
    first = agents[0]
    lc = first.LC
    code_len = first.C.length
    if lc.length == 0:
        return False
    M = first.M
    floor_share = M // n
    ceil_share = floor_share + (1 if M % n else 0)
    leaders = 0
    seen = set()
    for a in agents:
        if a.C.length != code_len or a.LC != lc:
            return False
        if a.phase != params.max_phase or a.count != n:
            return False
        if a.ave != floor_share and a.ave != ceil_share:
            return False
        leaders += a.is_leader
        seen.add(a.C.value)
    return leaders == 1 and len(seen) == n


def convergence_time(trace: RunTrace, n: int) -> Fraction | None:
    """Parallel time of the final count write, for a run that stabilized.

    None when the trace did not reach an output-stable state (convergence is
    only known in hindsight) or contains no writes.
    """
    if trace.summary.stabilization_parallel_time is None:
        return None
    if not trace.count_writes:
        return None
    return Fraction(trace.count_writes[-1][0], n)


def run(config: SimConfig) -> RunTrace:
    """Simulate one population to its stop condition; deterministic in seed.

    The pair sequence and all protocol coin flips derive from two independent
    child streams of the config seed.  Pair draws are buffered in blocks for
    speed; per draw the receiver is uniform in [0, n) and the sender uniform
    over the remaining n - 1 indices, exactly as in :func:`schedule_next`.
    """
    n = config.n
    params = config.params
    schedule = params.schedule
    max_phase = params.max_phase
    root = RandomSource(config.seed)
    pair_gen = root.child(0)._gen
    bits_src = root.child(1)

    agents = [AgentState.initial() for _ in range(n)]
    count_writes: list[tuple[int, int, int, int]] = []
    level_transitions: list[tuple[int, int]] = []
    interaction_log: list[tuple[int, int]] | None = [] if config.record_trace else None

    limit = config.max_interactions
    stop = config.stop
    want_stable = stop == STOP_OUTPUT_STABLE
    want_correct = stop == STOP_ALL_COUNT_CORRECT

    ic = 0
    num_correct = 0  # agents whose count field equals n right now
    max_level = 0
    max_bits = agent_bits(agents[0])
    stable_at: int | None = None
    stop_reason = STOP_INTERACTIONS
    pop = Population(agents)
    next_stable_check = 0
    done = False
    buf = 4096

    while not done:
        if limit is not None and limit - ic < buf:
            block = limit - ic
            if block == 0:
                break
        else:
            block = buf
        recv = pair_gen.integers(0, n, size=block)
        send = pair_gen.integers(0, n - 1, size=block)
        send = send + (send >= recv)
        recv_l = recv.tolist()
        send_l = send.tolist()
        # The body below is the pipeline of unique_id_step, elect_leader_step,
        # averaging_step and timer_step with their no-op fast paths decided
        # inline; the step functions are only entered when they would actually
        # change state, and consume random bits exactly as the plain pipeline
        # would (tests cross-check this against composing the steps directly).
        for j in range(block):
            a = recv_l[j]
            b = send_l[j]
            rec = agents[a]
            sen = agents[b]
            if interaction_log is not None:
                interaction_log.append((a, b))
            sen_C = sen.C
            sen_LC = sen.LC
            sen_phase = sen.phase
            rec_C = rec.C
            if rec_C.length < sen_C.length or (
                rec_C.value == sen_C.value and rec_C.length == sen_C.length
            ):
                unique_id_step(rec, sen_C, bits_src, schedule)
                if rec.C.length > max_level:
                    max_level = rec.C.length
                    level_transitions.append((ic + 1, max_level))
                bits = agent_bits(rec)
                if bits > max_bits:
                    max_bits = bits
            rec_LC = rec.LC
            if rec_LC.value != sen_LC.value or rec_LC.length != sen_LC.length:
                elect_leader_step(rec, sen_LC)
                rec_LC = rec.LC
            ic += 1
            if rec_LC.value == sen_LC.value and rec_LC.length == sen_LC.length:
                rec_ave = rec.ave
                sen_ave = sen.ave
                if rec_ave != sen_ave:
                    total = rec_ave + sen_ave
                    sen_ave = total >> 1
                    rec_ave = total - sen_ave
                    rec.ave = rec_ave
                    sen.ave = sen_ave
                phase = rec.phase
                if rec.is_leader:
                    if phase == sen_phase and phase < max_phase:
                        rec.phase = phase = phase + 1
                elif phase < sen_phase:
                    rec.phase = phase = sen_phase
                if phase == max_phase and rec_ave:
                    M = rec.M
                    new_count = (2 * M + rec_ave) // (2 * rec_ave)
                    if rec.count != new_count and M >= 3 * new_count**3:
                        old_count = rec.count
                        rec.count = new_count
                        count_writes.append((ic, a, old_count, new_count))
                        if new_count == n:
                            num_correct += 1
                        if old_count == n:
                            num_correct -= 1
                        bits = agent_bits(rec)
                        if bits > max_bits:
                            max_bits = bits
            if not ic & _BITS_SAMPLE_MASK:
                bits = agent_bits(rec)
                if bits > max_bits:
                    max_bits = bits

            if num_correct == n:
                if want_correct:
                    stop_reason = STOP_ALL_COUNT_CORRECT
                    done = True
                    break
                if want_stable and ic >= next_stable_check:
                    next_stable_check = ic + n
                    if is_output_stable(pop, params):
                        stable_at = ic
                        stop_reason = STOP_OUTPUT_STABLE
                        done = True
                        break
        if limit is not None and ic >= limit:
            break

    pop.interaction_counter = ic
    for a in agents:
        bits = agent_bits(a)
        if bits > max_bits:
            max_bits = bits

    # A run stopped by its interaction cap may still happen to sit in a
    # stable configuration; for the other stop modes stability is known.
    if stable_at is None and stop == STOP_INTERACTIONS and is_output_stable(pop, params):
        stable_at = ic

    summary = RunSummary(
        n=n,
        interactions=ic,
        stop_reason=stop_reason if done or stop == STOP_INTERACTIONS else "limit",
        final_counts_correct=num_correct == n,
        convergence_parallel_time=None,
        stabilization_parallel_time=Fraction(stable_at, n) if stable_at is not None else None,
        final_level=max(a.C.length for a in agents),
        max_code_len=max(a.LC.length for a in agents),
        max_agent_bits=max_bits,
        leader_count_final=sum(a.is_leader for a in agents),
    )
    trace = RunTrace(
        count_writes=count_writes,
        level_transitions=level_transitions,
        summary=summary,
        interaction_log=interaction_log,
        population=pop,
    )
    summary.convergence_parallel_time = convergence_time(trace, n)
    return trace
