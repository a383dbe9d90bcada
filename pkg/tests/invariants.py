"""Step-by-step invariant checks on the reference simulator."""
from collections import Counter

from gpmrpp.simulator import init_state, step_world


def checked_episode(p, prog, cap):
    """Step the reference up to ``cap`` times; returns ``(robot_steps, violations)``."""
    state = init_state(p)
    adj = p.workspace.adjacency
    bad = Counter()
    robot_steps = 0
    was_solved = [r.has_visited_goal for r in state.robots]
    while not state.solved and state.t < cap:
        before = list(state.positions)
        fired = []
        step_world(state, prog, on_terminal=lambda r, k: fired.append(r))
        after = state.positions
        bad["terminal count"] += fired != list(range(p.robot_count))
        bad["node exclusivity"] += len(set(after)) != len(after)
        moved = [(min(a, b), max(a, b)) for a, b in zip(before, after) if a != b]
        bad["adjacency"] += sum(1 for a, b in zip(before, after) if a != b and b not in adj[a])
        bad["edge exclusivity"] += len(moved) != len(set(moved))
        bad["edge record"] += len(state.edges_used_this_step) != len(moved)
        bad["swap"] += sum(
            1
            for i in range(p.robot_count)
            for j in range(i + 1, p.robot_count)
            if before[i] != after[i] and after[i] == before[j] and after[j] == before[i]
        )
        for i, r in enumerate(state.robots):
            bad["visited"] += r.position not in r.visited
            bad["solved monotone"] += was_solved[i] and not r.has_visited_goal
            was_solved[i] = r.has_visited_goal
        robot_steps += p.robot_count
    return robot_steps, +bad
