"""Time-stepped execution of a navigation program on a problem instance.

Every robot runs the same program once per step, in ascending id order,
and sees the moves already made by lower-id robots in that step.  This
module is the readable reference; :mod:`gpmrpp.kernel` runs the same rules
compiled and is what fitness evaluation uses.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

from .program import Function, FunctionKind, Program, TerminalKind
from .workspace import ProblemInstance, nearest_branch, tree_path

DEFAULT_COMM_RADIUS = 2


@dataclass
class RobotState:
    id: int
    position: int
    goal: int
    branch_target: Optional[int] = None
    visited: set = field(default_factory=set)
    has_visited_goal: bool = False
    path_cache: Optional[list] = None

    @property
    def target(self) -> int:
        return self.goal if self.branch_target is None else self.branch_target


@dataclass
class SimulationState:
    problem: ProblemInstance
    robots: list
    t: int = 0
    comm_radius: int = DEFAULT_COMM_RADIUS
    edges_used_this_step: set = field(default_factory=set)
    occupancy: list = field(default_factory=list)

    @property
    def workspace(self):
        return self.problem.workspace

    @property
    def positions(self) -> list[int]:
        return [r.position for r in self.robots]

    @property
    def solved(self) -> bool:
        return all(r.has_visited_goal for r in self.robots)

    def path(self, robot: int) -> list[int]:
        """Current path of ``robot``: toward its branch target if set, else toward its goal."""
        r = self.robots[robot]
        if r.path_cache is None:
            r.path_cache = tree_path(self.workspace, r.position, r.target)
        return r.path_cache


@dataclass(frozen=True)
class EpisodeResult:
    solved: bool
    steps_used: int
    final_positions: tuple


def init_state(problem: ProblemInstance, comm_radius: int = DEFAULT_COMM_RADIUS) -> SimulationState:
    occupancy: list = [None] * problem.workspace.node_count
    robots = []
    for spec in problem.robots:
        robots.append(
            RobotState(
                id=spec.id,
                position=spec.start,
                goal=spec.goal,
                visited={spec.start},
                has_visited_goal=spec.start == spec.goal,
            )
        )
        occupancy[spec.start] = spec.id
    return SimulationState(problem, robots, 0, comm_radius, set(), occupancy)


def comm_network(state: SimulationState, robot: int) -> set[int]:
    """Robots other than ``robot`` within ``comm_radius`` edges of it."""
    dist = state.workspace.distances_from(state.robots[robot].position)
    rho = state.comm_radius
    return {r.id for r in state.robots if r.id != robot and dist[r.position] <= rho}


def _set_branch(state: SimulationState, robot: int, node: int) -> None:
    r = state.robots[robot]
    r.branch_target = node
    r.path_cache = None


def eval_condition(state: SimulationState, robot: int, kind: FunctionKind) -> bool:
    me = state.robots[robot]
    pos = me.position

    if kind == FunctionKind.TwoRobotsOnEachOthersPath:
        my_path = state.path(robot)
        for j in sorted(comm_network(state, robot)):
            other = state.robots[j]
            if pos in state.path(j) and other.position in my_path:
                target = nearest_branch(state.workspace, pos)
                if target is None:
                    return False
                _set_branch(state, robot, target)
                _set_branch(state, j, target)
                return True
        return False

    if kind == FunctionKind.NeighborIsSurrounded:
        adjacency = state.workspace.adjacency
        occ = state.occupancy
        for nb in adjacency[pos]:
            if occ[nb] is not None and all(occ[x] is not None for x in adjacency[nb]):
                return True
        return False

    if kind == FunctionKind.RobotAtBranch:
        return me.branch_target is not None and pos == me.branch_target

    if kind == FunctionKind.RobotAtDestination:
        return pos == me.goal

    if kind == FunctionKind.RobotMovingToBranch:
        return me.branch_target is not None and pos != me.branch_target

    if kind == FunctionKind.NeighborOnPathIsFree:
        path = state.path(robot)
        return bool(path) and state.occupancy[path[0]] is None

    if kind == FunctionKind.RobotIsSolved:
        return me.has_visited_goal

    if kind == FunctionKind.OnPathOfRobotInNetwork:
        return any(pos in state.path(j) for j in comm_network(state, robot))

    if kind == FunctionKind.RobotInNetworkMovingToBranch:
        for j in comm_network(state, robot):
            other = state.robots[j]
            if other.branch_target is not None and other.position != other.branch_target:
                return True
        return False

    raise ValueError(f"unknown condition {kind!r}")


def apply_terminal(state: SimulationState, robot: int, kind: TerminalKind) -> int:
    """Execute one action for ``robot``; returns its position afterwards."""
    me = state.robots[robot]
    pos = me.position
    candidate = None

    if kind == TerminalKind.MoveTowardBranch:
        if me.branch_target is not None and me.branch_target != pos:
            candidate = tree_path(state.workspace, pos, me.branch_target)[0]
    elif kind == TerminalKind.MoveToFreeNeighbor:
        for nb in state.workspace.adjacency[pos]:
            if state.occupancy[nb] is None and nb not in me.visited:
                candidate = nb
                break
    elif kind == TerminalKind.MoveTowardObjective:
        path = state.path(robot)
        if path:
            candidate = path[0]
    elif kind != TerminalKind.Stay:
        raise ValueError(f"unknown action {kind!r}")

    if candidate is None or state.occupancy[candidate] is not None:
        return pos
    edge = (pos, candidate) if pos < candidate else (candidate, pos)
    if edge in state.edges_used_this_step:
        return pos

    state.occupancy[pos] = None
    state.occupancy[candidate] = robot
    state.edges_used_this_step.add(edge)
    me.position = candidate
    me.visited.add(candidate)
    if candidate == me.goal:
        me.has_visited_goal = True
    if me.branch_target == pos:
        me.branch_target = None
    me.path_cache = None
    return candidate


def decide(state: SimulationState, robot: int, program: Program) -> TerminalKind:
    node = program.root
    while isinstance(node, Function):
        node = node.on_true if eval_condition(state, robot, node.kind) else node.on_false
    return node.kind


def step_world(
    state: SimulationState,
    program: Program,
    on_terminal: Optional[Callable[[int, TerminalKind], None]] = None,
) -> SimulationState:
    """Advance one time step in place and return ``state``."""
    state.edges_used_this_step.clear()
    for robot in range(len(state.robots)):
        kind = decide(state, robot, program)
        if on_terminal is not None:
            on_terminal(robot, kind)
        apply_terminal(state, robot, kind)
    state.t += 1
    return state


def iter_episode(
    problem: ProblemInstance,
    program: Program,
    step_cap: int,
    comm_radius: int = DEFAULT_COMM_RADIUS,
) -> Iterator[SimulationState]:
    """Yield the state at t=0 and after every step until solved or ``step_cap``."""
    state = init_state(problem, comm_radius)
    yield state
    while not state.solved and state.t < step_cap:
        step_world(state, program)
        yield state


def run_episode_reference(
    problem: ProblemInstance,
    program: Program,
    step_cap: int,
    comm_radius: int = DEFAULT_COMM_RADIUS,
) -> EpisodeResult:
    """Step-by-step episode with no shortcuts; cost grows with ``step_cap``."""
    for state in iter_episode(problem, program, step_cap, comm_radius):
        pass
    solved = state.solved
    return EpisodeResult(solved, state.t if solved else step_cap, tuple(state.positions))


def run_episode(
    problem: ProblemInstance,
    program: Program,
    step_cap: Optional[int] = None,
    comm_radius: int = DEFAULT_COMM_RADIUS,
) -> EpisodeResult:
    """Run until every robot has visited its goal or ``step_cap`` steps elapse.

    ``step_cap`` defaults to the problem's ``|N|^2 |R|^2``.  Uses the
    compiled kernel, which fast-forwards provably periodic unsolved runs.
    """
    from .kernel import run_compiled

    if step_cap is None:
        step_cap = problem.step_cap
    solved, steps, final = run_compiled(problem, program, step_cap, comm_radius)
    return EpisodeResult(solved, steps, final)


def format_trace(problem: ProblemInstance, program: Program, step_cap: int, comm_radius: int = DEFAULT_COMM_RADIUS) -> Iterator[str]:
    for state in iter_episode(problem, program, step_cap, comm_radius):
        yield f"t={state.t} " + " ".join(f"robot {r.id} {r.position}" for r in state.robots)
