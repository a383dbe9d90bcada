"""Independent recomputations used to cross-check the library.

Nothing here imports the code under test beyond plain data types.
"""
from __future__ import annotations

import itertools


def floyd_warshall(node_count, edges):
    inf = float("inf")
    d = [[0 if i == j else inf for j in range(node_count)] for i in range(node_count)]
    for u, v in edges:
        d[u][v] = d[v][u] = 1
    for k, i, j in itertools.product(range(node_count), repeat=3):
        if d[i][k] + d[k][j] < d[i][j]:
            d[i][j] = d[i][k] + d[k][j]
    return d


def dfs_path(node_count, edges, start, end):
    """Unique tree path by exhaustive DFS, excluding start, including end."""
    adj = {u: set() for u in range(node_count)}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)

    def walk(u, prev, acc):
        if u == end:
            return acc
        for v in adj[u]:
            if v != prev:
                found = walk(v, u, acc + [v])
                if found is not None:
                    return found
        return None

    return walk(start, None, [])


def squared_distance_sum(node_count, edges, positions, goals):
    d = floyd_warshall(node_count, edges)
    return sum(int(d[p][g]) ** 2 for p, g in zip(positions, goals))


def is_tree(node_count, edges):
    parent = list(range(node_count))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in edges:
        a, b = find(u), find(v)
        if a == b:
            return False
        parent[a] = b
    return len(edges) == node_count - 1


def bfs_distances(node_count, edges, source):
    adj = [[] for _ in range(node_count)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    dist = [None] * node_count
    dist[source] = 0
    frontier = [source]
    while frontier:
        nxt = []
        for u in frontier:
            for v in adj[u]:
                if dist[v] is None:
                    dist[v] = dist[u] + 1
                    nxt.append(v)
        frontier = nxt
    return dist
