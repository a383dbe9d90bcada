"""Command-line entry point: ``gpmrpp {gen,train,run,experiment,scenarios}``.

Exit status is 0 on success, 2 on usage or validation errors and 1 on
runtime failures.  ``--seed`` (or ``GPMRPP_SEED``) makes every randomised command
reproducible; without one a seed is drawn and printed.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from . import rng as rngs
from .evolution import GPConfig, evolve, history_csv
from .harness import (
    DEFAULT_MULTIPLIERS,
    DESK_SEED_DEPTHS,
    FULL_TEST_SEED_DEPTHS,
    FULL_TRAIN_SEED_DEPTHS,
    MODES,
    ExperimentSpec,
    aggregate,
    records_csv,
    run_generalize,
    run_per_instance,
    run_stress,
    summary_csv,
)
from .program import INIT_METHODS, ProgramParseError, parse_program
from .simulator import format_trace, run_episode
from .workspace import (
    GeneratorParams,
    ProblemError,
    canonical_scenarios,
    generate_problem,
    load_problem,
    problems_from,
    save_problem,
)

log = logging.getLogger("gpmrpp")

SEED_ENV = "GPMRPP_SEED"


class UsageError(Exception):
    pass


def parse_robot_rule(text: str) -> dict:
    """``leaves-minus-one``, ``leaf-multiplier:X`` or ``explicit:K`` as GeneratorParams keywords."""
    name, _, arg = text.partition(":")
    try:
        if name == "leaves-minus-one" and not arg:
            return {"robot_count_rule": name}
        if name == "leaf-multiplier" and arg:
            m = Fraction(arg)
            if m <= 0:
                raise UsageError("leaf multiplier must be positive")
            return {"robot_count_rule": name, "leaf_multiplier": m}
        if name == "explicit" and arg:
            k = int(arg)
            if k < 1:
                raise UsageError("explicit robot count needs at least 1 robot")
            return {"robot_count_rule": name, "explicit_count": k}
    except ValueError:
        raise UsageError(f"bad robot rule argument in {text!r}") from None
    raise UsageError(f"unknown robot rule {text!r}; use leaves-minus-one, leaf-multiplier:X or explicit:K")


def _depth_range(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition(",")
    try:
        pair = (int(lo), int(hi)) if sep else (int(lo), int(lo))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}") from None
    return pair


def _multipliers(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_gp_flags(p: argparse.ArgumentParser) -> None:
    desk = GPConfig.desk_scale()
    g = p.add_argument_group("GP settings")
    g.add_argument("--population", type=int, default=None, help=f"population size (default {desk.population_size})")
    g.add_argument("--generations", type=int, default=None, help=f"generations per run (default {desk.generations})")
    g.add_argument("--runs", type=int, default=None, help=f"independent runs (default {desk.runs})")
    g.add_argument("--pa", type=float, default=desk.p_a, help="reproduction rate (default %(default)s)")
    g.add_argument("--pc", type=float, default=desk.p_c, help="crossover rate (default %(default)s)")
    g.add_argument("--pm", type=float, default=desk.p_m, help="mutation rate (default %(default)s)")
    g.add_argument("--init-depth", type=int, default=desk.init_max_depth, help="initial tree depth (default %(default)s)")
    g.add_argument("--max-depth", type=int, default=desk.max_depth, help="maximum tree depth (default %(default)s)")
    g.add_argument("--init-method", choices=INIT_METHODS, default=desk.init_method)
    g.add_argument("--comm-radius", type=int, default=desk.comm_radius, help="network radius in edges (default %(default)s)")
    g.add_argument("--full-scale", action="store_true", help="population 2000, 400 generations, 5 runs, wide seed depths (days)")


def _gp_config(args, seed: int) -> GPConfig:
    base = GPConfig() if args.full_scale else GPConfig.desk_scale()
    overrides = {
        "p_a": args.pa, "p_c": args.pc, "p_m": args.pm,
        "init_max_depth": args.init_depth, "max_depth": args.max_depth,
        "init_method": args.init_method, "comm_radius": args.comm_radius,
        "rng_seed": seed,
    }
    for flag, name in (("population", "population_size"), ("generations", "generations"), ("runs", "runs")):
        if getattr(args, flag) is not None:
            overrides[name] = getattr(args, flag)
    config = replace(base, **overrides)
    try:
        return config.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    seed = rngs.fresh_seed()
    print(f"seed={seed}")
    return seed


def cmd_gen(args, seed: int) -> int:
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    try:
        rule = parse_robot_rule(args.robots)
        params = GeneratorParams(seed_depth=args.seed_depth, max_branching=args.branching, **rule)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    width = len(str(args.count - 1))
    for i in range(args.count):
        label = f"problem-{i:0{width}d}"
        problem = generate_problem(
            params, rngs.substream(seed, rngs.TREE, i), rngs.substream(seed, rngs.PLACEMENT, i), label
        )
        save_problem(problem, out / f"{label}.txt")
        ws = problem.workspace
        print(f"{label} nodes={ws.node_count} leaves={ws.leaf_count} robots={problem.robot_count}")
    return 0


def cmd_train(args, seed: int) -> int:
    config = _gp_config(args, rngs.derive_seed(seed, rngs.GP))
    problems = problems_from(args.problems)
    if not problems:
        raise UsageError("no problem files found")
    result = evolve(config, problems)
    if args.history:
        Path(args.history).write_text(history_csv(result.history), encoding="utf-8", newline="\n")
    if not result.found:
        print(f"no program solved every example; best fitness {result.fittest_fitness}")
        if args.out and result.fittest is not None:
            Path(args.out).write_text(f"# unsolved F={result.fittest_fitness}\n{result.fittest.text}\n", encoding="utf-8")
        return 1
    text = result.best.text
    if args.out:
        Path(args.out).write_text(f"# tau_b={int(result.best_total)}\n{text}\n", encoding="utf-8")
    print(f"tau_b={int(result.best_total)}")
    print(text)
    return 0


def cmd_run(args, seed: int) -> int:
    try:
        program = parse_program(Path(args.program).read_text(encoding="utf-8"))
    except ProgramParseError as exc:
        raise UsageError(f"{args.program}: {exc}") from None
    problem = load_problem(args.problem)
    cap = problem.step_cap if args.cap is None else args.cap
    if cap < 0:
        raise UsageError("--cap must be >= 0")
    if args.trace:
        for line in format_trace(problem, program, cap, args.comm_radius):
            print(line)
    res = run_episode(problem, program, cap, args.comm_radius)
    print(f"solved={'true' if res.solved else 'false'} steps={res.steps_used}")
    return 0


def cmd_experiment(args, seed: int) -> int:
    config = _gp_config(args, 0)
    if args.full_scale:
        train_range, test_range, trials, tests = FULL_TRAIN_SEED_DEPTHS, FULL_TEST_SEED_DEPTHS, 100, 100
    else:
        train_range, test_range, trials, tests = DESK_SEED_DEPTHS, DESK_SEED_DEPTHS, 20, 20
    spec = ExperimentSpec(
        mode=args.mode,
        trials=args.trials if args.trials is not None else trials,
        seed_depth_range=args.seed_depths or train_range,
        test_seed_depth_range=args.test_seed_depths or test_range,
        max_branching=args.branching,
        fitness_set_size=args.fitness_set_size,
        test_count=args.test_count if args.test_count is not None else tests,
        leaf_multipliers=args.multipliers,
        gp=config,
        rng_seed=seed,
        record_wall_time=args.wall_time,
    )
    try:
        spec.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if spec.mode == "per-instance":
        records = run_per_instance(spec)
    elif spec.mode == "stress":
        records = run_stress(spec)
    else:
        outcome = run_generalize(spec)
        if not outcome.found:
            print("no general program found; test results use the fittest program")
        records = outcome.test_records
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = aggregate(records)
    (out / "records.csv").write_text(records_csv(records), encoding="utf-8", newline="\n")
    (out / "summary.csv").write_text(summary_csv(rows), encoding="utf-8", newline="\n")
    for r in rows:
        print(f"x={r.x_key} n={r.n} gp_solved={r.gp_solved_frac:.2f} baseline_solved={r.baseline_solved_frac:.2f} mean_steps={r.mean_steps:.1f}")
    return 0


def cmd_scenarios(args, seed: int) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for problem in canonical_scenarios():
        save_problem(problem, out / f"{problem.label}.txt")
        print(problem.label)
    return 0


_SEEDED = (cmd_gen, cmd_train, cmd_experiment)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpmrpp", description="Evolve navigation programs for robots on tree workspaces.")
    parser.add_argument("--seed", type=int, default=None, help=f"master seed (default ${SEED_ENV}, else random)")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate random problem files")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed-depth", type=int, default=4)
    p.add_argument("--branching", type=int, default=4)
    p.add_argument("--robots", default="leaves-minus-one", help="leaves-minus-one | leaf-multiplier:X | explicit:K")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="evolve a program on problem files")
    p.add_argument("problems", nargs="+", help="problem files or directories")
    p.add_argument("--out", help="program output file")
    p.add_argument("--history", help="per-generation history CSV")
    _add_gp_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("run", help="run a program on a problem")
    p.add_argument("program")
    p.add_argument("problem")
    p.add_argument("--cap", type=int, default=None, help="step cap (default |N|^2 |R|^2)")
    p.add_argument("--trace", action="store_true")
    p.add_argument("--comm-radius", type=int, default=2)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("experiment", help="run an experiment and write records.csv and summary.csv")
    p.add_argument("--mode", choices=MODES, required=True)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed-depths", type=_depth_range, default=None, help="LO,HI for training instances")
    p.add_argument("--test-seed-depths", type=_depth_range, default=None, help="LO,HI for test instances")
    p.add_argument("--branching", type=int, default=4)
    p.add_argument("--fitness-set-size", type=int, default=5)
    p.add_argument("--test-count", type=int, default=None)
    p.add_argument("--multipliers", type=_multipliers, default=DEFAULT_MULTIPLIERS)
    p.add_argument("--wall-time", action="store_true", help="record wall-clock times (breaks byte-identical output)")
    p.add_argument("--out", default=".")
    _add_gp_flags(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("scenarios", help="write the three swap fixtures as problem files")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_scenarios)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        seed = _resolve_seed(args) if args.func in _SEEDED else 0
        return args.func(args, seed)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ProblemError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
