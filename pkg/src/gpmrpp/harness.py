"""Experiment drivers: per-instance optimisation, generalisation and leaf-multiplier stress.

Every trial draws its workspace and robot placement from sub-streams of
the experiment seed, so records are reproducible bit-for-bit.  Wall-clock
times are only recorded when asked for, since they would break that.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

from . import rng as rngs
from .evolution import EvolutionResult, GPConfig, evolve
from .program import Function, FunctionKind, Program, Terminal, TerminalKind
from .simulator import EpisodeResult, run_episode
from .workspace import GeneratorParams, ProblemInstance, generate_problem

log = logging.getLogger(__name__)

MODES = ("per-instance", "generalize", "stress")
DEFAULT_MULTIPLIERS = (0.25, 0.5, 1.0, 1.5)
FULL_TRAIN_SEED_DEPTHS = (4, 10)
FULL_TEST_SEED_DEPTHS = (4, 9)
DESK_SEED_DEPTHS = (4, 6)

RECORD_HEADER = (
    "trial", "x_key", "nodes", "leaves", "robots", "gp_solved", "gp_steps",
    "baseline_solved", "baseline_steps", "generations", "wall_ms",
)
SUMMARY_HEADER = ("x_key", "n", "mean_steps", "std_steps", "gp_solved_frac", "baseline_solved_frac")

GREEDY_PROGRAM = Program(
    Function(FunctionKind.RobotAtDestination, Terminal(TerminalKind.Stay), Terminal(TerminalKind.MoveTowardObjective))
)


@dataclass(frozen=True)
class ExperimentSpec:
    mode: str = "per-instance"
    trials: int = 20
    seed_depth_range: tuple[int, int] = DESK_SEED_DEPTHS
    test_seed_depth_range: tuple[int, int] = DESK_SEED_DEPTHS
    max_branching: int = 4
    fitness_set_size: int = 5
    test_count: int = 20
    leaf_multipliers: tuple[float, ...] = DEFAULT_MULTIPLIERS
    gp: GPConfig = field(default_factory=GPConfig.desk_scale)
    rng_seed: int = 0
    record_wall_time: bool = False

    def validate(self) -> "ExperimentSpec":
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if self.trials < 1 or self.test_count < 1 or self.fitness_set_size < 1:
            raise ValueError("trials, test_count and fitness_set_size must be >= 1")
        for lo, hi in (self.seed_depth_range, self.test_seed_depth_range):
            if lo < 1 or lo > hi:
                raise ValueError(f"seed depth range [{lo}, {hi}] is empty or below 1")
        if self.max_branching < 1:
            raise ValueError("max_branching must be >= 1")
        if not self.leaf_multipliers or any(m <= 0 for m in self.leaf_multipliers):
            raise ValueError("leaf multipliers must be positive")
        self.gp.validate()
        return self


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    x_key: str
    node_count: int
    leaf_count: int
    robot_count: int
    gp_solved: bool
    gp_steps: int  # step cap when unsolved
    baseline_solved: bool
    baseline_steps: int
    generations_used: int
    wall_ms: int = 0

    def row(self) -> list:
        return [
            self.trial, self.x_key, self.node_count, self.leaf_count, self.robot_count,
            int(self.gp_solved), self.gp_steps, int(self.baseline_solved), self.baseline_steps,
            self.generations_used, self.wall_ms,
        ]


@dataclass
class GeneralizeResult:
    train_records: list
    test_records: list
    found: bool
    program: Optional[Program]


def greedy_baseline(problem: ProblemInstance, step_cap: Optional[int] = None) -> EpisodeResult:
    """Walk every robot along its shortest path, waiting whenever the next node is taken.

    Not a complete planner: it deadlocks whenever two robots must swap order.
    """
    return run_episode(problem, GREEDY_PROGRAM, step_cap)


def _multiplier_key(m: float) -> str:
    return format(m, "g")


def _instance(spec: ExperimentSpec, trial: int, depth_range, tree_key: int, place_key: int, **robot_rule) -> ProblemInstance:
    depth_rng = rngs.substream(spec.rng_seed, rngs.TRIAL_SEED_DEPTH, tree_key, trial)
    params = GeneratorParams(seed_depth=depth_rng.randint(*depth_range), max_branching=spec.max_branching, **robot_rule)
    return generate_problem(
        params,
        rngs.substream(spec.rng_seed, tree_key, trial),
        rngs.substream(spec.rng_seed, place_key, trial),
        label=f"trial-{trial}",
    )


def _generations_used(result: EvolutionResult, gp: GPConfig) -> int:
    return result.best_found_at if result.found else gp.runs * gp.generations


def _evaluate(problem: ProblemInstance, program: Optional[Program], comm_radius: int) -> tuple[bool, int]:
    if program is None:
        return False, problem.step_cap
    res = run_episode(problem, program, comm_radius=comm_radius)
    return res.solved, res.steps_used


def _solve_instance(spec: ExperimentSpec, trial: int, x_key: str, problem: ProblemInstance) -> TrialRecord:
    started = time.perf_counter()
    gp = replace(spec.gp, rng_seed=rngs.derive_seed(spec.rng_seed, rngs.GP, trial))
    result = evolve(gp, [problem])
    gp_solved, gp_steps = _evaluate(problem, result.best, gp.comm_radius)
    base = greedy_baseline(problem)
    wall = round((time.perf_counter() - started) * 1000) if spec.record_wall_time else 0
    log.info("trial %d x=%s N=%d R=%d gp_solved=%s", trial, x_key, problem.workspace.node_count, problem.robot_count, gp_solved)
    return TrialRecord(
        trial=trial,
        x_key=x_key,
        node_count=problem.workspace.node_count,
        leaf_count=problem.workspace.leaf_count,
        robot_count=problem.robot_count,
        gp_solved=gp_solved,
        gp_steps=gp_steps,
        baseline_solved=base.solved,
        baseline_steps=base.steps_used,
        generations_used=_generations_used(result, gp),
        wall_ms=wall,
    )


def run_per_instance(spec: ExperimentSpec) -> list[TrialRecord]:
    """Evolve a program for each random instance on its own; ``|R| = leaves - 1``."""
    spec.validate()
    records = []
    for trial in range(spec.trials):
        problem = _instance(spec, trial, spec.seed_depth_range, rngs.TREE, rngs.PLACEMENT)
        records.append(_solve_instance(spec, trial, str(problem.robot_count), problem))
    return records


def run_stress(spec: ExperimentSpec) -> list[TrialRecord]:
    """Per-instance evolution with ``|R| = floor(l_m * leaves)`` for each multiplier."""
    spec.validate()
    records = []
    for m in spec.leaf_multipliers:
        key = _multiplier_key(m)
        for trial in range(spec.trials):
            problem = _instance(
                spec, trial, spec.seed_depth_range, rngs.TREE, rngs.PLACEMENT,
                robot_count_rule="leaf-multiplier", leaf_multiplier=Fraction(str(m)),
            )
            records.append(_solve_instance(spec, trial, key, problem))
    return records


def generalize_sets(spec: ExperimentSpec) -> tuple[list[ProblemInstance], list[ProblemInstance]]:
    """Training and test instances from disjoint sub-streams; no test instance repeats a training one."""
    train = [_instance(spec, i, spec.seed_depth_range, rngs.TREE, rngs.PLACEMENT) for i in range(spec.fitness_set_size)]
    test = []
    for i in range(spec.test_count):
        attempt = 0
        while True:
            key = i if attempt == 0 else i + attempt * spec.test_count
            candidate = _instance(spec, key, spec.test_seed_depth_range, rngs.TEST_TREE, rngs.TEST_PLACEMENT)
            if not any(candidate.same_instance(x) for x in train):
                break
            attempt += 1
        test.append(replace(candidate, label=f"test-{i}"))
    return train, test


def run_generalize(spec: ExperimentSpec) -> GeneralizeResult:
    """Evolve once on ``|X|`` training instances, then replay the result on fresh test instances.

    When no program solves every training instance, the fittest program is
    replayed instead and the result is flagged as not found.
    """
    spec.validate()
    train, test = generalize_sets(spec)
    started = time.perf_counter()
    gp = replace(spec.gp, rng_seed=rngs.derive_seed(spec.rng_seed, rngs.GP))
    result = evolve(gp, train)
    if not result.found:
        log.warning("no general program found; replaying the fittest program (F=%s)", result.fittest_fitness)
    program = result.best if result.found else result.fittest
    used = _generations_used(result, gp)

    def record(i: int, problem: ProblemInstance) -> TrialRecord:
        solved, steps = _evaluate(problem, program, gp.comm_radius)
        base = greedy_baseline(problem)
        return TrialRecord(
            trial=i,
            x_key=str(problem.robot_count),
            node_count=problem.workspace.node_count,
            leaf_count=problem.workspace.leaf_count,
            robot_count=problem.robot_count,
            gp_solved=solved,
            gp_steps=steps,
            baseline_solved=base.solved,
            baseline_steps=base.steps_used,
            generations_used=used,
        )

    train_records = [record(i, p) for i, p in enumerate(train)]
    test_records = [record(i, p) for i, p in enumerate(test)]
    if spec.record_wall_time:
        wall = round((time.perf_counter() - started) * 1000)
        train_records = [replace(r, wall_ms=wall) for r in train_records]
    return GeneralizeResult(train_records, test_records, result.found, program)


def _x_order(key: str):
    try:
        return (0, float(key), key)
    except ValueError:
        return (1, 0.0, key)


@dataclass(frozen=True)
class SummaryRow:
    x_key: str
    n: int
    mean_steps: float
    std_steps: float
    gp_solved_frac: float
    baseline_solved_frac: float

    def row(self) -> list:
        return [self.x_key, self.n, repr(self.mean_steps), repr(self.std_steps),
                repr(self.gp_solved_frac), repr(self.baseline_solved_frac)]


def aggregate(records: Sequence[TrialRecord]) -> list[SummaryRow]:
    """Group by ``x_key``; mean and population standard deviation of GP steps, plus solve fractions."""
    if not records:
        raise ValueError("no records to aggregate")
    groups: dict[str, list[TrialRecord]] = {}
    for r in records:
        groups.setdefault(r.x_key, []).append(r)
    rows = []
    for key in sorted(groups, key=_x_order):
        group = groups[key]
        n = len(group)
        steps = [r.gp_steps for r in group]
        mean = math.fsum(steps) / n
        std = math.sqrt(math.fsum((s - mean) ** 2 for s in steps) / n)
        rows.append(
            SummaryRow(
                x_key=key,
                n=n,
                mean_steps=mean,
                std_steps=std,
                gp_solved_frac=sum(r.gp_solved for r in group) / n,
                baseline_solved_frac=sum(r.baseline_solved for r in group) / n,
            )
        )
    return rows


def records_csv(records: Sequence[TrialRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RECORD_HEADER)
    for r in records:
        writer.writerow(r.row())
    return buf.getvalue()


def summary_csv(rows: Sequence[SummaryRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    for r in rows:
        writer.writerow(r.row())
    return buf.getvalue()


def run_experiment(spec: ExperimentSpec) -> list[TrialRecord]:
    """Dispatch on ``spec.mode``; generalisation returns its test records."""
    spec.validate()
    if spec.mode == "per-instance":
        return run_per_instance(spec)
    if spec.mode == "stress":
        return run_stress(spec)
    return run_generalize(spec).test_records
