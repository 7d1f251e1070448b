"""Command-line harness: single runs, sweeps to CSV, and check batteries.

Machine-readable results go to stdout (or the --out file); progress and
telemetry go to stderr.  Every sweep row's seed is derived from
(master_seed, n, trial), so any row can be reproduced with ``run --seed``.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import os
import statistics
import sys
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import RandomSource
from .engine import (
    STOP_ALL_COUNT_CORRECT,
    STOP_INTERACTIONS,
    STOP_OUTPUT_STABLE,
    SimConfig,
    run,
)
from .protocol import DEFAULT_MAX_PHASE, LevelSchedule, ProtocolParams
from . import primitives

CSV_HEADER = (
    "n,trial,seed,schedule,max_phase,stop,interactions,parallel_time,"
    "final_level,max_code_len,max_agent_bits,leader_count,correct"
)

_STOP_ALIASES = {
    "correct": STOP_ALL_COUNT_CORRECT,
    "stable": STOP_OUTPUT_STABLE,
    "interactions": STOP_INTERACTIONS,
}


@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep: a grid of population sizes times seeded trials."""

    n_values: tuple[int, ...]
    trials_per_n: int
    master_seed: int
    schedule: str = "double"
    max_phase: int = DEFAULT_MAX_PHASE
    stop: str = "correct"
    max_interactions: int | None = None
    output_path: str = "-"

    def __post_init__(self):
        if self.trials_per_n < 1:
            raise ValueError("trials_per_n must be >= 1")
        if any(n < 2 for n in self.n_values) or not self.n_values:
            raise ValueError("n_values must be nonempty, all >= 2")


def trial_seed(master_seed: int, n: int, trial: int) -> int:
    """Integer seed for one (n, trial) cell, reusable directly via --seed."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(n, trial))
    return int(seq.generate_state(1, np.uint64)[0])


def _frac(x: Fraction | None) -> float | None:
    return None if x is None else float(x)


def _run_summary_dict(config: SimConfig, trace) -> dict:
    s = trace.summary
    return {
        "n": s.n,
        "seed": config.seed,
        "schedule": config.params.schedule.value,
        "max_phase": config.params.max_phase,
        "stop": config.stop,
        "stop_reason": s.stop_reason,
        "interactions": s.interactions,
        "parallel_time": float(s.parallel_time),
        "final_counts_correct": s.final_counts_correct,
        "convergence_parallel_time": _frac(s.convergence_parallel_time),
        "stabilization_parallel_time": _frac(s.stabilization_parallel_time),
        "final_level": s.final_level,
        "max_code_len": s.max_code_len,
        "max_agent_bits": s.max_agent_bits,
        "leader_count_final": s.leader_count_final,
    }


def _make_config(n, seed, schedule, max_phase, stop, max_interactions, record_trace=False):
    return SimConfig(
        n=n,
        seed=seed,
        params=ProtocolParams(max_phase=max_phase, schedule=LevelSchedule(schedule)),
        stop=_STOP_ALIASES[stop],
        max_interactions=max_interactions,
        record_trace=record_trace,
    )


def cmd_run(args) -> int:
    config = _make_config(
        args.n, args.seed, args.schedule, args.max_phase, args.stop, args.max_interactions
    )
    trace = run(config)
    if args.trace:
        with open(args.trace, "w") as fh:
            for ic, agent, old, new in trace.count_writes:
                fh.write(
                    json.dumps(
                        {"interaction": ic, "agent": agent, "old_count": old, "new_count": new},
                        sort_keys=True,
                    )
                    + "\n"
                )
    print(json.dumps(_run_summary_dict(config, trace), sort_keys=True))
    if trace.summary.stop_reason == "limit":
        return 1
    if args.stop != "interactions" and not trace.summary.final_counts_correct:
        return 1
    return 0


def _sweep_cell(task):
    n, trial, seed, schedule, max_phase, stop, max_interactions = task
    config = _make_config(n, seed, schedule, max_phase, stop, max_interactions)
    s = run(config).summary
    return (
        f"{n},{trial},{seed},{schedule},{max_phase},{stop},"
        f"{s.interactions},{float(s.parallel_time)!r},{s.final_level},"
        f"{s.max_code_len},{s.max_agent_bits},{s.leader_count_final},"
        f"{str(s.final_counts_correct).lower()}"
    )


def run_sweep(spec: ExperimentSpec, jobs: int = 1) -> list[str]:
    """Execute a sweep; returns CSV rows in (n, trial) order regardless of
    execution order."""
    tasks = [
        (
            n,
            trial,
            trial_seed(spec.master_seed, n, trial),
            spec.schedule,
            spec.max_phase,
            spec.stop,
            spec.max_interactions,
        )
        for n in spec.n_values
        for trial in range(spec.trials_per_n)
    ]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_cell, tasks))
    else:
        rows = []
        for i, task in enumerate(tasks):
            rows.append(_sweep_cell(task))
            print(f"sweep {i + 1}/{len(tasks)} done (n={task[0]})", file=sys.stderr)
    return rows


def cmd_sweep(args) -> int:
    spec = ExperimentSpec(
        n_values=tuple(args.n_values),
        trials_per_n=args.trials,
        master_seed=args.seed,
        schedule=args.schedule,
        max_phase=args.max_phase,
        stop=args.stop,
        max_interactions=args.max_interactions,
        output_path=args.out,
    )
    jobs = args.jobs or os.cpu_count() or 1
    rows = run_sweep(spec, jobs=jobs)
    text = "\n".join([CSV_HEADER] + rows) + "\n"
    if spec.output_path == "-":
        sys.stdout.write(text)
    else:
        try:
            with open(spec.output_path, "w") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"error: cannot write {spec.output_path}: {exc}", file=sys.stderr)
            return 2
        meta = {
            "n_values": list(spec.n_values),
            "trials_per_n": spec.trials_per_n,
            "master_seed": spec.master_seed,
            "schedule": spec.schedule,
            "max_phase": spec.max_phase,
            "stop": spec.stop,
            "max_interactions": spec.max_interactions,
        }
        with open(spec.output_path + ".meta.json", "w") as fh:
            json.dump(meta, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return 0


def _report(name: str, ok: bool, detail: str) -> bool:
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return ok


def check_rounding() -> bool:
    ok1 = primitives.rounding_check(200, 0)
    ok2 = primitives.rounding_check(200, 1)
    perturbed_fails = not primitives.rounding_check(200, 0, m_coeff=2)
    ok = ok1 and ok2 and perturbed_fails
    return _report(
        "rounding",
        ok,
        f"c=0 exhaustive to n=200: {ok1}; c=1: {ok2}; "
        f"weakened coefficient finds counterexample: {perturbed_fails}",
    )


def check_epidemic(seed: int) -> bool:
    src = RandomSource(seed)
    ok = True
    details = []
    for n in (2, 3, 4, 8, 16):
        trials = 4000
        samples = [primitives.epidemic_run(n, src) for _ in range(trials)]
        exact = float(primitives.epidemic_expected_interactions_exact(n))
        mean = statistics.fmean(samples)
        se = statistics.stdev(samples) / math.sqrt(trials)
        cell = abs(mean - exact) <= 3 * se
        ok &= cell
        details.append(f"n={n} mean {mean:.2f} vs exact {exact:.2f} (3se={3 * se:.2f})")
    for n in (100, 1000, 10000):
        trials = 300
        mean_pt = statistics.fmean(primitives.epidemic_run(n, src) / n for _ in range(trials))
        cell = mean_pt <= 4 * math.log(n)
        ok &= cell
        details.append(f"n={n} mean time {mean_pt:.2f} <= {4 * math.log(n):.2f}")
    return _report("epidemic", ok, "; ".join(details))


def check_phase_clock(seed: int) -> bool:
    src = RandomSource(seed)
    n, trials = 1000, 60
    params = primitives.PhaseClockParams()
    lo = params.beta_l * math.log(n)
    hi = params.beta_u * math.log(n)
    times = [primitives.phase_clock_run(n, src, params) / n for _ in range(trials)]
    inside = sum(lo <= t <= hi for t in times) / trials
    ok = inside >= 0.95 and min(times) >= lo
    return _report(
        "phase-clock",
        ok,
        f"n={n}, {trials} trials: {inside:.0%} within [{lo:.0f}, {hi:.0f}] time, "
        f"min {min(times):.0f}",
    )


def check_averaging(seed: int) -> bool:
    src = RandomSource(seed)
    ok = True
    details = []
    for n, trials in ((10, 100), (100, 50)):
        M = 3 * n**3
        deadline = math.log(4 * M * M)
        within = 0
        for _ in range(trials):
            res = primitives.averaging_isolated_run(n, M, src, radius=n)
            if res.pair_sum_violations or res.potential_increases:
                ok = False
            if int(res.final_aves.sum()) != M:
                ok = False
            t = res.first_within_parallel_time
            within += t is not None and t <= deadline
        frac = within / trials
        ok &= frac >= 0.95
        details.append(f"n={n}: invariants clean, {frac:.0%} within-interval by ln(4M^2)")
    return _report("averaging", ok, "; ".join(details))


def check_birthday(seed: int) -> bool:
    src = RandomSource(seed)
    n = 100
    long_len = math.ceil(3 * math.log2(n))
    bound = primitives.birthday_collision_bound(n, long_len)
    rate = primitives.birthday_collision_rate(n, long_len, 200_000, src)
    close = abs(rate - bound) <= 0.25 * bound
    short_len = math.ceil(2 * math.log2(n))
    short_rate = primitives.birthday_collision_rate(n, short_len, 50_000, src)
    modest = short_rate <= 1 / math.e + 0.05
    ok = close and modest
    return _report(
        "birthday",
        ok,
        f"len={long_len}: rate {rate:.5f} vs bound {bound:.5f}; "
        f"len={short_len}: rate {short_rate:.3f} <= 1/e + 0.05",
    )


def cmd_check(args) -> int:
    batteries = {
        "rounding": lambda: check_rounding(),
        "epidemic": lambda: check_epidemic(args.seed),
        "phase-clock": lambda: check_phase_clock(args.seed),
        "averaging": lambda: check_averaging(args.seed),
        "birthday": lambda: check_birthday(args.seed),
    }
    names = list(batteries) if args.which == "all" else [args.which]
    ok = True
    for name in names:
        ok &= batteries[name]()
    return 0 if ok else 1


def _apply_config_file(parser, args):
    """Values from --config fill in any flag the command line left unset."""
    if not getattr(args, "config", None):
        return
    with open(args.config) as fh:
        data = json.load(fh)
    aliases = {"trials_per_n": "trials", "master_seed": "seed", "output_path": "out"}
    for key, value in data.items():
        dest = aliases.get(key, key)
        if getattr(args, dest, None) is None:
            setattr(args, dest, value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="popcount",
        description="Simulate leaderless exact population-size counting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--schedule", choices=[s.value for s in LevelSchedule], default=None)
        p.add_argument("--max-phase", type=int, default=None)
        p.add_argument(
            "--stop", choices=["correct", "stable", "interactions"], default=None
        )
        p.add_argument("--max-interactions", type=int, default=None)
        p.add_argument("--config", help="JSON config; flags take precedence")

    p_run = sub.add_parser("run", help="one simulation, JSON summary on stdout")
    p_run.add_argument("--n", type=int, required=True)
    p_run.add_argument("--seed", type=int, required=True)
    p_run.add_argument("--trace", help="write count-write events as JSON lines")
    common(p_run)

    p_sweep = sub.add_parser("sweep", help="grid of runs, CSV out")
    p_sweep.add_argument("--n-values", help="comma-separated population sizes")
    p_sweep.add_argument("--trials", type=int, default=None)
    p_sweep.add_argument("--seed", type=int, default=None, help="master seed")
    p_sweep.add_argument("--out", default=None, help="CSV path, '-' for stdout")
    p_sweep.add_argument("--jobs", type=int, default=None)
    common(p_sweep)

    p_check = sub.add_parser("check", help="statistical batteries for the building blocks")
    p_check.add_argument(
        "which",
        choices=["epidemic", "phase-clock", "rounding", "averaging", "birthday", "all"],
    )
    p_check.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            _apply_config_file(parser, args)
            _fill_run_defaults(args)
            return cmd_run(args)
        if args.command == "sweep":
            _apply_config_file(parser, args)
            _fill_sweep_defaults(parser, args)
            return cmd_sweep(args)
        return cmd_check(args)
    except (ValueError, OSError) as exc:
        parser.exit(2, f"error: {exc}\n")


def _fill_run_defaults(args):
    args.schedule = args.schedule or "double"
    args.max_phase = DEFAULT_MAX_PHASE if args.max_phase is None else args.max_phase
    args.stop = args.stop or "stable"


def _fill_sweep_defaults(parser, args):
    if isinstance(args.n_values, str):
        args.n_values = [int(x) for x in args.n_values.split(",")]
    if not args.n_values:
        parser.error("sweep requires --n-values (or n_values in --config)")
    if args.seed is None:
        parser.error("sweep requires --seed (or master_seed in --config)")
    args.trials = 1 if args.trials is None else args.trials
    args.schedule = args.schedule or "double"
    args.max_phase = DEFAULT_MAX_PHASE if args.max_phase is None else args.max_phase
    args.stop = args.stop or "correct"
    args.out = args.out or "-"


if __name__ == "__main__":
    raise SystemExit(main())
