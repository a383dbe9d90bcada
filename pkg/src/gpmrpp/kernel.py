"""Compiled episode runner used for fitness evaluation.

Same rules as :mod:`gpmrpp.simulator`, on flat arrays.  Path queries use
an Euler tour of the tree rooted at node 0: ``u`` is an ancestor of ``v``
iff ``tin[u] <= tin[v] < tout[u]``.

Unsolved runs are fast-forwarded.  The step function is a pure map on
``(positions, branch targets, visited sets)``; visited sets only grow, so
two states with equal positions, branch targets and visited *totals* are
equal.  Brent's cycle finder on that key detects the first repeat, after
which the run is periodic and its state at the cap is computed from the
period instead of by stepping to the cap.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .program import Program
from .workspace import ProblemInstance

_N_FUNCTIONS = 9


@dataclass
class CompiledProblem:
    node_count: int
    adj_ptr: np.ndarray
    adj_idx: np.ndarray
    parent: np.ndarray
    tin: np.ndarray
    tout: np.ndarray
    near_branch: np.ndarray
    starts: np.ndarray
    goals: np.ndarray
    _balls: dict = field(default_factory=dict, repr=False)

    def ball(self, radius: int) -> tuple[np.ndarray, np.ndarray]:
        """CSR lists of the nodes within ``radius`` edges of each node, excluding itself."""
        hit = self._balls.get(radius)
        if hit is None:
            ptr = [0]
            idx: list[int] = []
            for src in range(self.node_count):
                seen = {src: 0}
                queue = deque([src])
                while queue:
                    u = queue.popleft()
                    if seen[u] == radius:
                        continue
                    for k in range(self.adj_ptr[u], self.adj_ptr[u + 1]):
                        v = int(self.adj_idx[k])
                        if v not in seen:
                            seen[v] = seen[u] + 1
                            idx.append(v)
                            queue.append(v)
                ptr.append(len(idx))
            hit = (np.asarray(ptr, dtype=np.int64), np.asarray(idx, dtype=np.int64))
            self._balls[radius] = hit
        return hit


def compile_problem(problem: ProblemInstance) -> CompiledProblem:
    ws = problem.workspace
    n = ws.node_count
    adj_ptr = np.zeros(n + 1, dtype=np.int64)
    adj_idx = []
    for u in range(n):
        adj_idx.extend(ws.adjacency[u])
        adj_ptr[u + 1] = len(adj_idx)

    parent = np.full(n, -1, dtype=np.int64)
    tin = np.zeros(n, dtype=np.int64)
    tout = np.zeros(n, dtype=np.int64)
    clock = 0
    stack = [(0, -1, False)]
    while stack:
        u, p, done = stack.pop()
        if done:
            tout[u] = clock
            continue
        parent[u] = p
        tin[u] = clock
        clock += 1
        stack.append((u, p, True))
        for v in reversed(ws.adjacency[u]):
            if v != p:
                stack.append((v, u, False))

    near = np.full(n, -1, dtype=np.int64)
    if ws.branch_nodes:
        # multi-source layered BFS; a node inherits the smallest label among
        # its neighbours one layer closer
        dist = [-1] * n
        layer = list(ws.branch_nodes)
        for b in layer:
            dist[b] = 0
            near[b] = b
        d = 0
        while layer:
            d += 1
            nxt = {}
            for u in layer:
                for v in ws.adjacency[u]:
                    if dist[v] == -1 or dist[v] == d:
                        dist[v] = d
                        nxt[v] = min(nxt.get(v, n), int(near[u]))
            for v, lab in nxt.items():
                near[v] = lab
            layer = list(nxt)

    return CompiledProblem(
        node_count=n,
        adj_ptr=adj_ptr,
        adj_idx=np.asarray(adj_idx, dtype=np.int64),
        parent=parent,
        tin=tin,
        tout=tout,
        near_branch=near,
        starts=np.asarray(problem.starts, dtype=np.int64),
        goals=np.asarray(problem.goals, dtype=np.int64),
    )


@njit(cache=True, inline="always")
def _anc(tin, tout, u, v):
    return tin[u] <= tin[v] and tin[v] < tout[u]


@njit(cache=True)
def _next_hop(parent, tin, tout, a, b):
    if _anc(tin, tout, a, b):
        x = b
        while parent[x] != a:
            x = parent[x]
        return x
    return parent[a]


@njit(cache=True)
def _on_path(parent, tin, tout, x, a, b):
    # x on the path a -> b, excluding a, including b
    if x == a:
        return False
    xa = _anc(tin, tout, x, a)
    xb = _anc(tin, tout, x, b)
    if xa and xb:
        lca = a
        while not _anc(tin, tout, lca, b):
            lca = parent[lca]
        return lca == x
    return xa or xb


@njit(cache=True)
def _condition(code, i, pos, goal, branch, solved, occ, adj_ptr, adj_idx,
               parent, tin, tout, near_branch, ball_ptr, ball_idx):
    p = pos[i]
    if code == 0:
        ti = branch[i] if branch[i] >= 0 else goal[i]
        best = -1
        for k in range(ball_ptr[p], ball_ptr[p + 1]):
            j = occ[ball_idx[k]]
            if j < 0 or (best >= 0 and j >= best):
                continue
            pj = pos[j]
            tj = branch[j] if branch[j] >= 0 else goal[j]
            if _on_path(parent, tin, tout, p, pj, tj) and _on_path(parent, tin, tout, pj, p, ti):
                best = j
        if best < 0:
            return False
        target = near_branch[p]
        if target < 0:
            return False
        branch[i] = target
        branch[best] = target
        return True
    if code == 1:
        for k in range(adj_ptr[p], adj_ptr[p + 1]):
            nb = adj_idx[k]
            if occ[nb] < 0:
                continue
            full = True
            for m in range(adj_ptr[nb], adj_ptr[nb + 1]):
                if occ[adj_idx[m]] < 0:
                    full = False
                    break
            if full:
                return True
        return False
    if code == 2:
        return branch[i] >= 0 and p == branch[i]
    if code == 3:
        return p == goal[i]
    if code == 4:
        return branch[i] >= 0 and p != branch[i]
    if code == 5:
        ti = branch[i] if branch[i] >= 0 else goal[i]
        if p == ti:
            return False
        return occ[_next_hop(parent, tin, tout, p, ti)] < 0
    if code == 6:
        return solved[i]
    if code == 7:
        for k in range(ball_ptr[p], ball_ptr[p + 1]):
            j = occ[ball_idx[k]]
            if j < 0:
                continue
            tj = branch[j] if branch[j] >= 0 else goal[j]
            if _on_path(parent, tin, tout, p, pos[j], tj):
                return True
        return False
    # code == 8
    for k in range(ball_ptr[p], ball_ptr[p + 1]):
        j = occ[ball_idx[k]]
        if j >= 0 and branch[j] >= 0 and pos[j] != branch[j]:
            return True
    return False


@njit(cache=True)
def _step(t, codes, left, right, pos, goal, branch, solved, visited, occ, counters,
          dep_stamp, dep_dst, adj_ptr, adj_idx, parent, tin, tout, near_branch,
          ball_ptr, ball_idx):
    n_robots = pos.shape[0]
    for i in range(n_robots):
        node = 0
        while codes[node] < _N_FUNCTIONS:
            if _condition(codes[node], i, pos, goal, branch, solved, occ, adj_ptr, adj_idx,
                          parent, tin, tout, near_branch, ball_ptr, ball_idx):
                node = left[node]
            else:
                node = right[node]
        action = codes[node] - _N_FUNCTIONS
        p = pos[i]
        cand = -1
        if action == 0:
            if branch[i] >= 0 and branch[i] != p:
                cand = _next_hop(parent, tin, tout, p, branch[i])
        elif action == 1:
            for k in range(adj_ptr[p], adj_ptr[p + 1]):
                nb = adj_idx[k]
                if occ[nb] < 0 and not visited[i, nb]:
                    cand = nb
                    break
        elif action == 2:
            ti = branch[i] if branch[i] >= 0 else goal[i]
            if p != ti:
                cand = _next_hop(parent, tin, tout, p, ti)
        if cand < 0 or occ[cand] >= 0:
            continue
        if (dep_stamp[p] == t and dep_dst[p] == cand) or (dep_stamp[cand] == t and dep_dst[cand] == p):
            continue
        occ[p] = -1
        occ[cand] = i
        dep_stamp[p] = t
        dep_dst[p] = cand
        pos[i] = cand
        if not visited[i, cand]:
            visited[i, cand] = True
            counters[1] += 1
        if cand == goal[i] and not solved[i]:
            solved[i] = True
            counters[0] += 1
        if branch[i] == p:
            branch[i] = -1


@njit(cache=True)
def episode_kernel(codes, left, right, starts, goals, step_cap, adj_ptr, adj_idx, parent,
                   tin, tout, near_branch, ball_ptr, ball_idx, final_pos):
    """Returns ``(solved, steps_used)`` and writes final positions into ``final_pos``."""
    n_nodes = parent.shape[0]
    n_robots = starts.shape[0]
    pos = starts.copy()
    goal = goals
    branch = np.full(n_robots, -1, np.int64)
    solved = np.zeros(n_robots, np.bool_)
    visited = np.zeros((n_robots, n_nodes), np.bool_)
    occ = np.full(n_nodes, -1, np.int64)
    counters = np.zeros(2, np.int64)  # solved robots, visited total
    for i in range(n_robots):
        occ[pos[i]] = i
        visited[i, pos[i]] = True
        if pos[i] == goal[i]:
            solved[i] = True
            counters[0] += 1
    counters[1] = n_robots
    if counters[0] == n_robots:
        final_pos[:] = pos
        return True, 0

    dep_stamp = np.full(n_nodes, -1, np.int64)
    dep_dst = np.full(n_nodes, -1, np.int64)
    saved_pos = pos.copy()
    saved_branch = branch.copy()
    saved_visits = counters[1]
    power = 1
    lam = 0
    t = 0
    while t < step_cap:
        _step(t, codes, left, right, pos, goal, branch, solved, visited, occ, counters,
              dep_stamp, dep_dst, adj_ptr, adj_idx, parent, tin, tout, near_branch,
              ball_ptr, ball_idx)
        t += 1
        if counters[0] == n_robots:
            final_pos[:] = pos
            return True, t
        lam += 1
        same = counters[1] == saved_visits
        if same:
            for i in range(n_robots):
                if pos[i] != saved_pos[i] or branch[i] != saved_branch[i]:
                    same = False
                    break
        if same:
            # period lam from here on; only the phase at the cap matters
            for _ in range((step_cap - t) % lam):
                _step(t, codes, left, right, pos, goal, branch, solved, visited, occ, counters,
                      dep_stamp, dep_dst, adj_ptr, adj_idx, parent, tin, tout, near_branch,
                      ball_ptr, ball_idx)
                t += 1
            final_pos[:] = pos
            return False, step_cap
        if lam == power:
            saved_pos[:] = pos
            saved_branch[:] = branch
            saved_visits = counters[1]
            power *= 2
            lam = 0
    final_pos[:] = pos
    return False, step_cap


def run_compiled(problem: ProblemInstance, program: Program, step_cap: int, comm_radius: int = 2):
    """``(solved, steps_used, final_positions)`` for one episode."""
    cp: CompiledProblem = problem.compiled
    codes, left, right = program.flat
    ball_ptr, ball_idx = cp.ball(comm_radius)
    final = np.empty(len(cp.starts), dtype=np.int64)
    solved, steps = episode_kernel(
        codes, left, right, cp.starts, cp.goals, int(step_cap), cp.adj_ptr, cp.adj_idx,
        cp.parent, cp.tin, cp.tout, cp.near_branch, ball_ptr, ball_idx, final,
    )
    return bool(solved), int(steps), tuple(int(x) for x in final)

