"""Generational GP over navigation programs.

Fitness of a program on a fitness set is the sum over examples of 0 when
the example is solved and of the squared tree distances of the robots to
their goals otherwise; lower is better.  Across the whole execution the
engine keeps the all-solving program with the smallest total step count
and uses that total as an evaluation budget for every later program.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .kernel import run_compiled
from .program import (
    DEFAULT_MAX_DEPTH,
    INIT_METHODS,
    Function,
    Program,
    grow_subtree,
    node_depth,
    random_program,
    replace_at,
)
from .workspace import ProblemInstance

log = logging.getLogger(__name__)

INF = math.inf


@dataclass(frozen=True)
class GPConfig:
    """GP settings.  Defaults are the full-size values; see :meth:`desk_scale`."""

    population_size: int = 2000
    runs: int = 5
    generations: int = 400
    p_a: float = 0.1
    p_c: float = 0.8
    p_m: float = 0.1
    init_max_depth: int = 2
    max_depth: int = DEFAULT_MAX_DEPTH
    comm_radius: int = 2
    rng_seed: int = 0
    init_method: str = "grow"
    operator_attempts: int = 10

    @classmethod
    def desk_scale(cls, **overrides) -> "GPConfig":
        return cls(**{"population_size": 300, "generations": 60, "runs": 2, **overrides})

    def validate(self) -> "GPConfig":
        for name in ("population_size", "runs", "generations", "init_max_depth", "max_depth", "comm_radius"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("p_a", "p_c", "p_m"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if abs(self.p_a + self.p_c + self.p_m - 1.0) > 1e-12:
            raise ValueError(
                f"p_a + p_c + p_m must equal 1, got {self.p_a} + {self.p_c} + {self.p_m}"
            )
        if self.init_max_depth > self.max_depth:
            raise ValueError("init_max_depth cannot exceed max_depth")
        if self.init_method not in INIT_METHODS:
            raise ValueError(f"init_method must be one of {INIT_METHODS}")
        return self

    def offspring_counts(self) -> tuple[int, int, int]:
        """``(reproduced, crossed, mutated)`` per generation, summing to the population size."""
        size = self.population_size
        n_c = math.floor(self.p_c * size + 0.5)
        n_m = math.floor(self.p_m * size + 0.5)
        while n_c + n_m > size:
            if n_m > 0:
                n_m -= 1
            else:
                n_c -= 1
        return size - n_c - n_m, n_c, n_m


@dataclass(frozen=True)
class EvaluationResult:
    fitness: int
    per_example_steps: tuple
    all_solved: bool
    total_steps: int
    per_example_fitness: tuple = ()


def unsolved_penalty(problem: ProblemInstance, positions: Sequence[int]) -> int:
    """Sum of squared tree distances from ``positions`` to the robots' goals."""
    ws = problem.workspace
    return sum(ws.distance(p, r.goal) ** 2 for p, r in zip(positions, problem.robots))


def compute_fitness(
    program: Program,
    fitness_set: Sequence[ProblemInstance],
    budget: float = INF,
    comm_radius: int = 2,
) -> EvaluationResult:
    """Run ``program`` on each example in order under a shared step ``budget``.

    Each example is capped at ``|N|^2 |R|^2`` steps and at whatever is left
    of the budget.  Once the budget is spent the remaining examples are not
    run; they are scored from the robots' start positions.
    """
    used = 0
    steps, fits = [], []
    for problem in fitness_set:
        if used >= budget:
            positions = problem.starts
            solved = all(s == g for s, g in zip(positions, problem.goals))
            taken = 0
        else:
            cap = problem.step_cap if budget == INF else min(problem.step_cap, int(budget) - used)
            solved, taken, positions = run_compiled(problem, program, cap, comm_radius)
        used += taken
        steps.append(taken)
        fits.append(0 if solved else unsolved_penalty(problem, positions))
    fitness = sum(fits)
    return EvaluationResult(fitness, tuple(steps), fitness == 0, used, tuple(fits))


def selection_weights(fitnesses: Sequence[float]) -> list[float]:
    """Fitness-proportionate probabilities ``b_k / sum(b)`` with ``b_k = 1 / (1 + F_k)``."""
    if not fitnesses:
        raise ValueError("need at least one fitness value")
    betas = [1.0 / (1.0 + f) for f in fitnesses]
    total = math.fsum(betas)
    return [b / total for b in betas]


def copy_program(program: Program) -> Program:
    # nodes are immutable, so a fresh wrapper is a full structural copy
    return Program(program.root)


def asexual_reproduction(
    population: Sequence[Program], weights: Sequence[float], count: int, rng: random.Random
) -> list[Program]:
    if count <= 0:
        return []
    return [copy_program(p) for p in rng.choices(population, weights=weights, k=count)]


def try_crossover(
    parent_a: Program,
    parent_b: Program,
    rng: random.Random,
    max_depth: int = DEFAULT_MAX_DEPTH,
    attempts: int = 10,
) -> Optional[tuple[Program, Program]]:
    """Subtree crossover at uniformly chosen nodes; ``None`` when no valid pair was found."""
    nodes_a = parent_a.nodes()
    nodes_b = parent_b.nodes()
    for _ in range(attempts):
        path_a, sub_a = nodes_a[rng.randrange(len(nodes_a))]
        path_b, sub_b = nodes_b[rng.randrange(len(nodes_b))]
        child_a = replace_at(parent_a.root, path_a, sub_b)
        child_b = replace_at(parent_b.root, path_b, sub_a)
        if isinstance(child_a, Function) and isinstance(child_b, Function):
            if node_depth(child_a) <= max_depth and node_depth(child_b) <= max_depth:
                return Program(child_a), Program(child_b)
    return None


def crossover(
    parent_a: Program,
    parent_b: Program,
    rng: random.Random,
    max_depth: int = DEFAULT_MAX_DEPTH,
    attempts: int = 10,
) -> tuple[Program, Program]:
    children = try_crossover(parent_a, parent_b, rng, max_depth, attempts)
    if children is None:
        return copy_program(parent_a), copy_program(parent_b)
    return children


def try_mutate(
    parent: Program,
    rng: random.Random,
    init_max_depth: int = 2,
    max_depth: int = DEFAULT_MAX_DEPTH,
    attempts: int = 10,
) -> Optional[Program]:
    """Replace a uniformly chosen subtree with a freshly grown one; ``None`` on repeated depth violations."""
    nodes = parent.nodes()
    for _ in range(attempts):
        path, _old = nodes[rng.randrange(len(nodes))]
        sub = grow_subtree(init_max_depth, rng, function_root=not path)
        root = replace_at(parent.root, path, sub)
        if isinstance(root, Function) and node_depth(root) <= max_depth:
            return Program(root)
    return None


def mutate(
    parent: Program,
    rng: random.Random,
    init_max_depth: int = 2,
    max_depth: int = DEFAULT_MAX_DEPTH,
    attempts: int = 10,
) -> Program:
    child = try_mutate(parent, rng, init_max_depth, max_depth, attempts)
    return copy_program(parent) if child is None else child


@dataclass(frozen=True)
class GenerationStats:
    run: int
    generation: int
    best_fitness: int
    mean_fitness: float
    tau_b: float
    solved_count: int


HISTORY_HEADER = ("run", "generation", "best_fitness", "mean_fitness", "tau_b", "solved_count")


@dataclass
class EvolutionResult:
    best: Optional[Program]
    best_total: float
    history: list = field(default_factory=list)
    fittest: Optional[Program] = None
    fittest_fitness: float = INF
    best_found_at: int = 0  # global generation index (1-based) of the last improvement, 0 if none

    @property
    def found(self) -> bool:
        return self.best is not None


GenerationHook = Callable[[int, int, list, list, "EvolutionResult"], None]


def evolve(
    config: GPConfig,
    fitness_set: Sequence[ProblemInstance],
    rng: Optional[random.Random] = None,
    on_generation: Optional[GenerationHook] = None,
) -> EvolutionResult:
    """Run ``config.runs`` independent runs of ``config.generations`` generations each.

    Every generation is evaluated against the budget in force when the
    generation started; record updates are then applied in population order
    with a strict ``<`` so the first program to reach a total keeps it.
    ``on_generation(run, generation, population, results, state)`` is called
    after each generation's updates.
    """
    config.validate()
    if not fitness_set:
        raise ValueError("fitness set is empty")
    if rng is None:
        rng = random.Random(config.rng_seed)
    fitness_set = list(fitness_set)
    n_a, n_c, n_m = config.offspring_counts()
    state = EvolutionResult(best=None, best_total=INF)
    cache: dict[str, EvaluationResult] = {}
    global_gen = 0

    for run in range(1, config.runs + 1):
        population = [random_program(config.init_max_depth, rng, config.init_method) for _ in range(config.population_size)]
        for gen in range(1, config.generations + 1):
            global_gen += 1
            budget = state.best_total
            results = []
            for program in population:
                key = program.text
                res = cache.get(key)
                if res is None:
                    res = compute_fitness(program, fitness_set, budget, config.comm_radius)
                    cache[key] = res
                results.append(res)

            improved = False
            for program, res in zip(population, results):
                if res.all_solved and res.total_steps < state.best_total:
                    state.best_total = res.total_steps
                    state.best = program
                    state.best_found_at = global_gen
                    improved = True
                if res.fitness < state.fittest_fitness:
                    state.fittest_fitness = res.fitness
                    state.fittest = program
            if improved:
                cache.clear()

            fits = [r.fitness for r in results]
            state.history.append(
                GenerationStats(
                    run=run,
                    generation=gen,
                    best_fitness=min(fits),
                    mean_fitness=math.fsum(fits) / len(fits),
                    tau_b=state.best_total,
                    solved_count=sum(1 for r in results if r.all_solved),
                )
            )
            log.debug("run %d gen %d best F=%d tau_B=%s", run, gen, min(fits), state.best_total)
            if on_generation is not None:
                on_generation(run, gen, population, results, state)
            if gen == config.generations:
                break  # offspring of the last generation would never be evaluated
            population = _next_generation(population, fits, config, (n_a, n_c, n_m), rng)

    return state


def _next_generation(
    population: list[Program],
    fits: list[int],
    config: GPConfig,
    counts: tuple[int, int, int],
    rng: random.Random,
) -> list[Program]:
    n_a, n_c, n_m = counts
    weights = selection_weights(fits)
    nxt = asexual_reproduction(population, weights, n_a, rng)

    crossed: list[Program] = []
    for _ in range((n_c + 1) // 2):
        a, b = rng.choices(population, weights=weights, k=2)
        crossed.extend(crossover(a, b, rng, config.max_depth, config.operator_attempts))
    if len(crossed) > n_c:
        crossed.pop(-1 if rng.random() < 0.5 else -2)
    nxt.extend(crossed)

    for parent in rng.choices(population, weights=weights, k=n_m) if n_m else ():
        nxt.append(mutate(parent, rng, config.init_max_depth, config.max_depth, config.operator_attempts))
    return nxt


def format_tau(tau: float) -> str:
    return "inf" if tau == INF else str(int(tau))


def history_csv(history: Sequence[GenerationStats]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HISTORY_HEADER)
    for h in history:
        writer.writerow(
            [h.run, h.generation, h.best_fitness, repr(float(h.mean_fitness)), format_tau(h.tau_b), h.solved_count]
        )
    return buf.getvalue()
