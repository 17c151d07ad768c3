"""Straight-line reference implementations used only by the tests.

Kept deliberately naive and free of imports from the package under test.
"""

import itertools
from collections import deque


def value_of(start_distances, dist, gamma, order):
    total = 0.0
    elapsed = 0.0
    here = None
    for i in order:
        elapsed += start_distances[i] if here is None else dist[here][i]
        total += gamma ** elapsed
        here = i
    return total


def brute_force(start_distances, dist, gamma):
    n = len(start_distances)
    best, best_order = -1.0, None
    for perm in itertools.permutations(range(n)):
        v = value_of(start_distances, dist, gamma, perm)
        if v > best:
            best, best_order = v, perm
    return best, list(best_order)


def grid_bfs(rows, source):
    """Step distances from ``source`` over non-'#' cells of an ASCII grid."""
    h, w = len(rows), len(rows[0])
    out = {source: 0}
    q = deque([source])
    while q:
        r, c = q.popleft()
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            rr, cc = r + dr, c + dc
            if 0 <= rr < h and 0 <= cc < w and rows[rr][cc] != "#" and (rr, cc) not in out:
                out[(rr, cc)] = out[(r, c)] + 1
                q.append((rr, cc))
    return out


def floyd(n, edges):
    inf = float("inf")
    d = [[0.0 if i == j else inf for j in range(n)] for i in range(n)]
    for a, b, w in edges:
        d[a][b] = min(d[a][b], w)
        d[b][a] = min(d[b][a], w)
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if d[i][k] + d[k][j] < d[i][j]:
                    d[i][j] = d[i][k] + d[k][j]
    return d
