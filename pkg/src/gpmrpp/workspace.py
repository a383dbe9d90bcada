"""Tree workspaces, problem instances and the random tree generator."""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional, Sequence


class ProblemError(ValueError):
    """An invalid workspace or problem instance."""


@dataclass(frozen=True)
class Workspace:
    """Immutable tree of unit-length undirected edges on nodes ``0..node_count-1``.

    Build through :meth:`from_edges`, which validates the tree property and
    derives adjacency, branch nodes (degree >= 3) and leaves (degree 1).
    """

    node_count: int
    edges: frozenset
    adjacency: tuple
    branch_nodes: tuple
    leaf_nodes: tuple
    _toward: dict = field(default_factory=dict, compare=False, repr=False, hash=False)
    _dist: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    @classmethod
    def from_edges(cls, node_count: int, edges: Iterable[tuple[int, int]]) -> "Workspace":
        if node_count < 1:
            raise ProblemError("a workspace needs at least one node")
        norm = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < node_count and 0 <= v < node_count):
                raise ProblemError(f"edge {u}-{v} references a node outside 0..{node_count - 1}")
            if u == v:
                raise ProblemError(f"self-loop at node {u}")
            e = (u, v) if u < v else (v, u)
            if e in norm:
                raise ProblemError(f"duplicate edge {e[0]}-{e[1]}")
            norm.add(e)
        if len(norm) != node_count - 1:
            raise ProblemError(f"a tree on {node_count} nodes has {node_count - 1} edges, got {len(norm)}")
        adj: list[list[int]] = [[] for _ in range(node_count)]
        for u, v in norm:
            adj[u].append(v)
            adj[v].append(u)
        # n-1 edges + connected => acyclic
        seen = [False] * node_count
        seen[0] = True
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
        if not all(seen):
            raise ProblemError("workspace graph is not connected")
        adjacency = tuple(tuple(sorted(a)) for a in adj)
        return cls(
            node_count=node_count,
            edges=frozenset(norm),
            adjacency=adjacency,
            branch_nodes=tuple(u for u in range(node_count) if len(adjacency[u]) >= 3),
            leaf_nodes=tuple(u for u in range(node_count) if len(adjacency[u]) == 1),
        )

    @property
    def leaf_count(self) -> int:
        return len(self.leaf_nodes)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def next_hops_toward(self, target: int) -> list[int]:
        """``hops[u]`` is the neighbour of ``u`` one step closer to ``target`` (``-1`` at the target)."""
        hops = self._toward.get(target)
        if hops is None:
            hops = [-1] * self.node_count
            seen = [False] * self.node_count
            seen[target] = True
            queue = deque([target])
            while queue:
                u = queue.popleft()
                for v in self.adjacency[u]:
                    if not seen[v]:
                        seen[v] = True
                        hops[v] = u
                        queue.append(v)
            self._toward[target] = hops
        return hops

    def distances_from(self, source: int) -> list[int]:
        dist = self._dist.get(source)
        if dist is None:
            dist = [-1] * self.node_count
            dist[source] = 0
            queue = deque([source])
            while queue:
                u = queue.popleft()
                for v in self.adjacency[u]:
                    if dist[v] < 0:
                        dist[v] = dist[u] + 1
                        queue.append(v)
            self._dist[source] = dist
        return dist

    def distance(self, a: int, b: int) -> int:
        return self.distances_from(a)[b]


def tree_path(workspace: Workspace, start: int, end: int) -> list[int]:
    """Nodes on the unique path from ``start`` to ``end``, excluding ``start``, including ``end``."""
    hops = workspace.next_hops_toward(end)
    path = []
    u = start
    while u != end:
        u = hops[u]
        path.append(u)
    return path


def nearest_branch(workspace: Workspace, start: int) -> Optional[int]:
    """Closest branch node to ``start`` (lowest id on ties), or ``None`` if the tree has none."""
    if not workspace.branch_nodes:
        return None
    dist = workspace.distances_from(start)
    return min(workspace.branch_nodes, key=lambda b: (dist[b], b))


@dataclass(frozen=True)
class RobotSpec:
    id: int
    start: int
    goal: int


@dataclass(frozen=True)
class ProblemInstance:
    workspace: Workspace
    robots: tuple
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "robots", tuple(self.robots))
        n = self.workspace.node_count
        if not self.robots:
            raise ProblemError("a problem needs at least one robot")
        if len(self.robots) > n - 2:
            raise ProblemError(
                f"{len(self.robots)} robots on {n} nodes: at least two nodes must stay free"
            )
        for i, r in enumerate(self.robots):
            if r.id != i:
                raise ProblemError(f"robot ids must be 0..{len(self.robots) - 1} in order, got {r.id} at {i}")
            for what, node in (("start", r.start), ("goal", r.goal)):
                if not 0 <= node < n:
                    raise ProblemError(f"robot {r.id} {what} {node} is not a node")
        if len({r.start for r in self.robots}) != len(self.robots):
            raise ProblemError("robot starts must be pairwise distinct")
        if len({r.goal for r in self.robots}) != len(self.robots):
            raise ProblemError("robot goals must be pairwise distinct")

    @property
    def robot_count(self) -> int:
        return len(self.robots)

    @property
    def step_cap(self) -> int:
        """Per-example cap ``|N|^2 * |R|^2``."""
        return self.workspace.node_count ** 2 * len(self.robots) ** 2

    @property
    def starts(self) -> list[int]:
        return [r.start for r in self.robots]

    @property
    def goals(self) -> list[int]:
        return [r.goal for r in self.robots]

    @cached_property
    def compiled(self):
        from .kernel import compile_problem

        return compile_problem(self)

    def same_instance(self, other: "ProblemInstance") -> bool:
        """Structural equality ignoring the label."""
        return self.workspace == other.workspace and self.robots == other.robots


# ---------------------------------------------------------------------------
# generation


ROBOT_RULES = ("leaves-minus-one", "leaf-multiplier", "explicit")


@dataclass(frozen=True)
class GeneratorParams:
    seed_depth: int
    max_branching: int = 4
    rng_seed: int = 0
    leaf_multiplier: Optional[Fraction] = None
    robot_count_rule: str = "leaves-minus-one"
    explicit_count: Optional[int] = None

    def __post_init__(self):
        if self.seed_depth < 0:
            raise ValueError("seed_depth must be >= 0")
        if self.max_branching < 1:
            raise ValueError("max_branching must be >= 1")
        if self.robot_count_rule not in ROBOT_RULES:
            raise ValueError(f"unknown robot count rule {self.robot_count_rule!r}")
        if self.robot_count_rule == "leaf-multiplier":
            if self.leaf_multiplier is None or Fraction(self.leaf_multiplier) <= 0:
                raise ValueError("leaf-multiplier rule needs a positive leaf_multiplier")
        if self.robot_count_rule == "explicit":
            if self.explicit_count is None or self.explicit_count < 1:
                raise ValueError("explicit rule needs at least 1 robot")

    def robot_count(self, workspace: Workspace) -> int:
        """Robot count for ``workspace`` under this rule, clamped to ``node_count - 2`` and floored at 1."""
        leaves, n = workspace.leaf_count, workspace.node_count
        if self.robot_count_rule == "explicit":
            return self.explicit_count
        if self.robot_count_rule == "leaves-minus-one":
            raw = leaves - 1
        else:
            raw = int(Fraction(str(self.leaf_multiplier)) * leaves)
        return max(1, min(raw, n - 2))

    def accepts(self, workspace: Workspace) -> bool:
        """Degenerate-tree filter: enough free nodes and, for leaf-based rules, at least two leaves."""
        if self.robot_count_rule != "explicit" and workspace.leaf_count < 2:
            return False
        return workspace.node_count >= self.robot_count(workspace) + 2


def generate_mst(params: GeneratorParams, rng: Optional[random.Random] = None) -> Workspace:
    """Recursive random tree: each call with depth budget > 0 draws ``n ~ U{0..b}`` children.

    Node ids follow creation (pre-order) order with the root at 0.  A call
    with depth budget 0 returns immediately without drawing.
    """
    if rng is None:
        rng = random.Random(params.rng_seed)
    b = params.max_branching
    edges: list[tuple[int, int]] = []
    count = 1

    def grow(node: int, depth_left: int) -> None:
        nonlocal count
        if depth_left <= 0:
            return
        for _ in range(rng.randint(0, b)):
            child = count
            count += 1
            grow(child, depth_left - 1)
            edges.append((node, child))

    grow(0, params.seed_depth)
    return Workspace.from_edges(count, edges)


def build_problem(workspace: Workspace, robot_count: int, rng: random.Random, label: str = "") -> ProblemInstance:
    """Place robots with distinct random starts and, independently, distinct random goals."""
    n = workspace.node_count
    if robot_count < 1:
        raise ProblemError("robot_count must be >= 1")
    if robot_count > n - 2:
        raise ProblemError(f"{robot_count} robots need at least {robot_count + 2} nodes, tree has {n}")
    starts = rng.sample(range(n), robot_count)
    goals = rng.sample(range(n), robot_count)
    robots = tuple(RobotSpec(i, s, g) for i, (s, g) in enumerate(zip(starts, goals)))
    return ProblemInstance(workspace, robots, label)


def generate_problem(
    params: GeneratorParams,
    tree_rng: random.Random,
    placement_rng: random.Random,
    label: str = "",
    max_attempts: int = 10_000,
) -> ProblemInstance:
    """Generate a tree (regenerating degenerate ones) and populate it per ``params``."""
    for _ in range(max_attempts):
        ws = generate_mst(params, tree_rng)
        if params.accepts(ws):
            return build_problem(ws, params.robot_count(ws), placement_rng, label)
    raise ProblemError(f"no acceptable tree after {max_attempts} attempts for {params}")


# ---------------------------------------------------------------------------
# swap fixtures


def canonical_scenarios() -> list[ProblemInstance]:
    """The three situations that force two robots to swap order around a branch node.

    Robot 0 plays r_A and robot 1 plays r_B in each fixture.
    """
    # chain 0-1-2-3 with a spur 4 on node 1
    t_shape = Workspace.from_edges(5, [(0, 1), (1, 2), (2, 3), (1, 4)])
    head_on = ProblemInstance(t_shape, (RobotSpec(0, 0, 3), RobotSpec(1, 2, 0)), "swap-1-head-on")
    goal_on_path = ProblemInstance(t_shape, (RobotSpec(0, 0, 3), RobotSpec(1, 1, 2)), "swap-2-goal-on-path")
    # hub 1 with leaves 0, 4 and a chain 2-3 that forks into 5 and 6;
    # five nodes cannot hold four robots with two nodes free, hence the fork
    hub = Workspace.from_edges(7, [(0, 1), (1, 2), (1, 4), (2, 3), (3, 5), (3, 6)])
    surrounded = ProblemInstance(
        hub,
        (RobotSpec(0, 0, 3), RobotSpec(1, 1, 1), RobotSpec(2, 2, 5), RobotSpec(3, 4, 4)),
        "swap-3-surrounded",
    )
    return [head_on, goal_on_path, surrounded]


# ---------------------------------------------------------------------------
# problem files


def format_problem(problem: ProblemInstance) -> str:
    ws = problem.workspace
    lines = []
    if problem.label:
        lines.append(f"# label: {problem.label}")
    lines.append(f"nodes {ws.node_count}")
    lines.extend(f"edge {u} {v}" for u, v in ws.sorted_edges())
    lines.extend(f"robot {r.id} {r.start} {r.goal}" for r in problem.robots)
    return "\n".join(lines) + "\n"


def parse_problem(text: str, label: str = "") -> ProblemInstance:
    node_count = None
    edges = []
    robots = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("label:") and not label:
                label = body[len("label:"):].strip()
            continue
        parts = line.split()
        try:
            if parts[0] == "nodes" and len(parts) == 2:
                if node_count is not None:
                    raise ProblemError("duplicate 'nodes' line")
                node_count = int(parts[1])
            elif parts[0] == "edge" and len(parts) == 3:
                edges.append((int(parts[1]), int(parts[2])))
            elif parts[0] == "robot" and len(parts) == 4:
                robots.append(RobotSpec(int(parts[1]), int(parts[2]), int(parts[3])))
            else:
                raise ProblemError(f"unrecognised line {line!r}")
            if parts[0] != "nodes" and node_count is None:
                raise ProblemError("'nodes' line must come first")
        except (ProblemError, ValueError) as exc:
            raise ProblemError(f"line {lineno}: {exc}") from None
    if node_count is None:
        raise ProblemError("missing 'nodes' line")
    return ProblemInstance(Workspace.from_edges(node_count, edges), tuple(robots), label)


def save_problem(problem: ProblemInstance, path) -> None:
    Path(path).write_text(format_problem(problem), encoding="utf-8", newline="\n")


def load_problem(path) -> ProblemInstance:
    path = Path(path)
    problem = parse_problem(path.read_text(encoding="utf-8"))
    if not problem.label:
        problem = ProblemInstance(problem.workspace, problem.robots, path.stem)
    return problem


def problems_from(paths: Sequence) -> list[ProblemInstance]:
    """Load problem files; directories contribute their ``*.txt`` files in name order."""
    out = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            out.extend(load_problem(f) for f in sorted(p.glob("*.txt")))
        else:
            out.append(load_problem(p))
    return out
