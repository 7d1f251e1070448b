"""Seedable simulator for uniform population protocols that count their own
population size exactly, plus isolated implementations of the building
blocks (epidemic, phase clock, leader-driven averaging) with exact
companions for checking them."""

from .core import EMPTY, BitString, RandomSource, append, lex_precedes, rand_bits
from .protocol import (
    AgentState,
    LevelSchedule,
    ProtocolParams,
    averaging_step,
    elect_leader_step,
    extend_code,
    interact,
    set_new_leader_code,
    size_estimate,
    timer_step,
    unique_id_step,
)
from .engine import (
    Population,
    RunSummary,
    RunTrace,
    SimConfig,
    agent_bits,
    convergence_time,
    is_output_stable,
    run,
    schedule_next,
)
from . import primitives

__all__ = [
    "EMPTY",
    "BitString",
    "RandomSource",
    "append",
    "lex_precedes",
    "rand_bits",
    "AgentState",
    "LevelSchedule",
    "ProtocolParams",
    "averaging_step",
    "elect_leader_step",
    "extend_code",
    "interact",
    "set_new_leader_code",
    "size_estimate",
    "timer_step",
    "unique_id_step",
    "Population",
    "RunSummary",
    "RunTrace",
    "SimConfig",
    "agent_bits",
    "convergence_time",
    "is_output_stable",
    "run",
    "schedule_next",
    "primitives",
]
