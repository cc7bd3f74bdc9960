"""Independent reference models the tests compare the package against.

None of these import the package; they are written from the definitions
only (direct-mapped cache, grid-in-circle placement, Murphy's formula,
textbook graph algorithms).
"""

from collections import deque
import heapq
import math

import mpmath
import numpy as np


class RefCache:
    """Direct-mapped, write-back, write-allocate cache replaying (line, op) records.

    op is "R", "W" (demand) or "P" (prefetch: fill if absent, no hit/miss).
    """

    def __init__(self, lines):
        self.lines = lines
        self.slot = {}      # index -> [line, dirty]
        self.hits = self.misses = self.evictions = self.writebacks = 0

    def _fill(self, line):
        idx = line % self.lines
        old = self.slot.get(idx)
        if old is not None:
            self.evictions += 1
            if old[1]:
                self.writebacks += 1
        self.slot[idx] = [line, False]

    def replay(self, trace):
        for line, op in trace:
            idx = line % self.lines
            cur = self.slot.get(idx)
            resident = cur is not None and cur[0] == line
            if op == "P":
                if not resident:
                    self._fill(line)
                continue
            if resident:
                self.hits += 1
            else:
                self.misses += 1
                self._fill(line)
            if op == "W":
                self.slot[idx][1] = True
        return self


def murphy_mp(area, density, dps=50):
    with mpmath.workdps(dps):
        x = mpmath.mpf(area) * mpmath.mpf(density)
        if x == 0:
            return mpmath.mpf(1)
        return ((1 - mpmath.exp(-x)) / x) ** 2


def brute_dies_per_wafer(die_w, die_h, diameter=300.0, edge_loss=4.0, scribe=0.2):
    """Count grid cells (lines through the wafer centre) whose four corners lie in the usable disk."""
    r = diameter / 2 - edge_loss
    w, h = die_w + scribe, die_h + scribe
    n = 0
    ni, nj = int(r / w) + 2, int(r / h) + 2
    for i in range(-ni, ni):
        for j in range(-nj, nj):
            corners = [(i * w, j * h), ((i + 1) * w, j * h), (i * w, (j + 1) * h), ((i + 1) * w, (j + 1) * h)]
            if all(x * x + y * y <= r * r + 1e-9 for x, y in corners):
                n += 1
    return n


def ring_graph_distance(n, src, dst, wrap):
    adj = {i: [] for i in range(n)}
    for i in range(n - 1):
        adj[i].append(i + 1)
        adj[i + 1].append(i)
    if wrap and n > 2:
        adj[0].append(n - 1)
        adj[n - 1].append(0)
    return _bfs(adj, src)[dst]


def grid_graph(nx, ny, wrap):
    adj = {}
    for y in range(ny):
        for x in range(nx):
            nb = []
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                u, v = x + dx, y + dy
                if wrap:
                    u, v = u % nx, v % ny
                if 0 <= u < nx and 0 <= v < ny and (u, v) != (x, y):
                    nb.append(v * nx + u)
            adj[y * nx + x] = nb
    return adj


def _bfs(adj, src):
    dist = {src: 0}
    q = deque([src])
    while q:
        v = q.popleft()
        for u in adj[v]:
            if u not in dist:
                dist[u] = dist[v] + 1
                q.append(u)
    return dist


def all_pairs_hops(adj):
    return {s: _bfs(adj, s) for s in adj}


# ---------------------------------------------------------------- graph apps
INF = 2 ** 31 - 1


def _csr_edges(row_ptr, col_idx):
    for v in range(len(row_ptr) - 1):
        for e in range(row_ptr[v], row_ptr[v + 1]):
            yield v, e, col_idx[e]


def bfs_levels(row_ptr, col_idx, root):
    n = len(row_ptr) - 1
    level = [INF] * n
    if n == 0:
        return level
    frontier = [root]
    level[root] = 0
    d = 0
    while frontier:
        d += 1
        nxt = []
        for v in frontier:
            for e in range(row_ptr[v], row_ptr[v + 1]):
                u = col_idx[e]
                if level[u] == INF:
                    level[u] = d
                    nxt.append(u)
        frontier = nxt
    return level


def bellman_ford(row_ptr, col_idx, weights, root):
    n = len(row_ptr) - 1
    dist = [INF] * n
    if n == 0:
        return dist
    dist[root] = 0
    edges = [(v, u, weights[e]) for v, e, u in _csr_edges(row_ptr, col_idx)]
    for _ in range(n):
        changed = False
        for v, u, w in edges:
            if dist[v] != INF and dist[v] + w < dist[u]:
                dist[u] = dist[v] + w
                changed = True
        if not changed:
            break
    return dist


def wcc_union_find(row_ptr, col_idx):
    n = len(row_ptr) - 1
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for v, _, u in _csr_edges(row_ptr, col_idx):
        a, b = find(v), find(u)
        if a != b:
            parent[max(a, b)] = min(a, b)
    return [find(v) for v in range(n)]


def spmv_dense(n, row_ptr, col_idx, values, x):
    a = np.zeros((n, n))
    for v, e, u in _csr_edges(row_ptr, col_idx):
        a[v, u] += values[e]
    return a @ np.asarray(x, dtype=np.float64)


def pagerank_power(n, row_ptr, col_idx, damping, epochs):
    """Power iteration without dangling redistribution, one vector per epoch."""
    m = np.zeros((n, n))
    for v in range(n):
        deg = row_ptr[v + 1] - row_ptr[v]
        for e in range(row_ptr[v], row_ptr[v + 1]):
            m[col_idx[e], v] += 1.0 / deg
    r = np.full(n, 1.0 / n) if n else np.zeros(0)
    out = []
    for _ in range(epochs):
        r = (1 - damping) / n + damping * (m @ r)
        out.append(r.copy())
    return out


def histogram_counts(values, nbins, width):
    return np.bincount(np.asarray(values, dtype=np.int64) // width, minlength=nbins)[:nbins]


def reachable(row_ptr, col_idx, root):
    lv = bfs_levels(row_ptr, col_idx, root)
    return [d != INF for d in lv]


def relerr(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


def dijkstra(row_ptr, col_idx, weights, root):
    # second route for SSSP used where Bellman-Ford would be slow
    n = len(row_ptr) - 1
    dist = [INF] * n
    if n == 0:
        return dist
    dist[root] = 0
    pq = [(0, root)]
    while pq:
        d, v = heapq.heappop(pq)
        if d != dist[v]:
            continue
        for e in range(row_ptr[v], row_ptr[v + 1]):
            u = col_idx[e]
            if d + weights[e] < dist[u]:
                dist[u] = d + weights[e]
                heapq.heappush(pq, (dist[u], u))
    return dist


def isclose(a, b, rel):
    return math.isclose(a, b, rel_tol=rel)


def spmv_rows(n, row_ptr, col_idx, values, x):
    # row-by-row accumulation, no matrix materialised
    y = [0.0] * n
    for v, e, u in _csr_edges(row_ptr, col_idx):
        y[v] += values[e] * x[u]
    return y
