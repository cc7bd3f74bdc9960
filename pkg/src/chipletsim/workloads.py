"""The six applications as task programs, and the sequential reference results.

A graph application is three task types chained through the network:

    T1(v)                  local, from the tile's frontier: look up the row of v
    T2(first, count, p)    at the edge-array owner: stream the edges
    T3(u, p)               at the owner of u: apply the update, maybe wake T1(u)

Histogram has only T1 (stream input chunk) and T2 (bump a bin).
Handlers receive a task context from the execution engine; every data
access goes through it so that timing, energy and ownership are enforced.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .dataset import CSRDataset, PGASLayout, partition

APPS = ("bfs", "sssp", "pagerank", "wcc", "spmv", "histogram")
GRAPH_APPS = ("bfs", "sssp", "pagerank", "wcc", "spmv")
INF = 2 ** 31 - 1


class WorkloadError(ValueError):
    pass


@dataclass(frozen=True)
class CostModel:
    base_cycles: int
    cycles_per_element: int
    flops_per_element: float
    bytes_per_element: int

    def __post_init__(self):
        if min(self.base_cycles, self.cycles_per_element, self.flops_per_element, self.bytes_per_element) < 0:
            raise WorkloadError("cost fields must be >= 0")


@dataclass(frozen=True)
class TaskDef:
    task_id: int
    name: str
    routing_array: str
    prefetch_array: str | None
    streams: bool
    cost: CostModel
    nparams: int
    handler: object = field(repr=False, compare=False)
    # True when invocations arrive through the NoC; T1 comes from the local frontier
    network: bool = True


@dataclass
class TaskProgram:
    app: str
    tasks: tuple
    epoch: bool
    dataset: CSRDataset
    layout: PGASLayout
    # array name -> bytes per element
    widths: dict
    # array name -> initial contents (python list, global indexing)
    init: dict
    args: dict
    epochs: int = 1

    def __post_init__(self):
        n = len(self.tasks)
        if self.app == "histogram" and n != 2:
            raise WorkloadError("histogram has two task types")
        if self.app != "histogram" and n != 3:
            raise WorkloadError("graph applications have three task types")
        for t in self.tasks:
            if t.routing_array not in self.widths:
                raise WorkloadError(f"{t.name}: unknown routing array {t.routing_array!r}")

    @property
    def output_array(self) -> str:
        return OUTPUT[self.app]

    def seed(self, tile: int) -> list:
        """Initial local (T1) invocations of a tile as (key, message)."""
        lay = self.layout
        if self.app == "histogram":
            lo, hi = lay.owned_range("col_idx", tile)
            return [(f, (f, min(CHUNK, hi - f))) for f in range(lo, hi, CHUNK)]
        lo, hi = lay._vertex_range(tile)
        if self.app in ("bfs", "sssp"):
            root = self.args["root"]
            return [(root, (root, 0))] if lo <= root < hi else []
        return [(v, (v, 0)) for v in range(lo, hi)]


OUTPUT = {"bfs": "dist", "sssp": "dist", "wcc": "label", "pagerank": "rank",
          "spmv": "y", "histogram": "bins"}

CHUNK = 16  # histogram input elements per T1 invocation

# Per-app cost tables: (base cycles, cycles/element, FLOPs/element, nominal bytes/element)
# for T1, T2, T3.  FLOPs are calibrated against the measured bytes so that the
# FLOPs/byte of a run lands on the reference arithmetic intensity.
COSTS = {
    "bfs":       ((4, 2, 5.3, 20), (2, 4, 9.8, 4), (3, 3, 6.2, 6)),
    "sssp":      ((4, 2, 5.9, 20), (2, 5, 12.7, 8), (3, 3, 5.9, 6)),
    "wcc":       ((4, 2, 5.0, 20), (2, 4, 4.2, 4), (3, 3, 3.4, 6)),
    "pagerank":  ((4, 2, 7.6, 20), (2, 4, 5.1, 4), (3, 3, 5.1, 8)),
    "spmv":      ((4, 2, 8.6, 20), (2, 5, 17.1, 8), (3, 3, 8.6, 8)),
    "histogram": ((2, 3, 7.5, 4), (3, 3, 2.1, 8)),
}

# Bytes per element of every array the programs touch.
WIDTHS = {"row_ptr": 8, "col_idx": 4, "values": 4, "dist": 4, "label": 4,
          "rank": 4, "acc": 4, "x": 4, "y": 4, "bins": 4}


def _cost(app, i):
    return CostModel(*COSTS[app][i])


# ---------------------------------------------------------------- handlers
# A handler gets (ctx, msg) and returns None when done or the remaining
# message when it had to yield because its output queue filled up.

def _graph_t1(payload_of):
    def t1(ctx, msg):
        v, off = msg
        lo = ctx.read("row_ptr", v)
        hi = ctx.read("row_ptr", v + 1)
        if lo + off >= hi:
            return None
        p = payload_of(ctx, v, hi - lo)
        budget = ctx.space(1)
        for owner, first, count in ctx.edge_chunks(lo + off, hi):
            if budget == 0:
                return (v, first - lo)
            ctx.step()
            ctx.emit_to(1, owner, (first, count, p))
            budget -= 1
        return None
    return t1


def _graph_t2(combine, weighted):
    def t2(ctx, msg):
        first, count, p = msg
        n = min(count, ctx.space(2))
        for e in range(first, first + n):
            u = ctx.stream("col_idx", e)
            if weighted:
                val = combine(p, ctx.stream("values", e))
            else:
                val = p
            ctx.step()
            ctx.emit(2, u, (u, val))
        if n < count:
            return (first + n, count - n, p)
        return None
    return t2


def _min_t3(array):
    def t3(ctx, msg):
        u, val = msg
        ctx.step()
        if val < ctx.read(array, u):
            ctx.write(array, u, val)
            ctx.activate(u)
        return None
    return t3


def _acc_t3(array):
    def t3(ctx, msg):
        u, val = msg
        ctx.step()
        ctx.write(array, u, ctx.read(array, u) + val)
        return None
    return t3


def _hist_t1(bin_width):
    def t1(ctx, msg):
        first, count = msg
        n = min(count, ctx.space(1))
        for e in range(first, first + n):
            x = ctx.stream("col_idx", e)
            ctx.step()
            b = x // bin_width
            ctx.emit(1, b, (b,))
        if n < count:
            return (first + n, count - n)
        return None
    return t1


def _hist_t2(ctx, msg):
    (b,) = msg
    ctx.step()
    ctx.write("bins", b, ctx.read("bins", b) + 1)
    return None


def _bfs_payload(ctx, v, deg):
    return ctx.read("dist", v) + 1


def _sssp_payload(ctx, v, deg):
    return ctx.read("dist", v)


def _wcc_payload(ctx, v, deg):
    return ctx.read("label", v)


def _pr_payload(ctx, v, deg):
    return ctx.read("rank", v) / deg


def _spmv_payload(ctx, v, deg):
    return ctx.read("x", v)


def spmv_vector(n: int, seed: int = 0) -> list:
    """Dense input vector for SPMV: small integers, so float sums are exact."""
    rng = np.random.Generator(np.random.PCG64(seed + 7))
    return [float(x) for x in rng.integers(1, 10, size=n)]


def transpose(ds: CSRDataset) -> CSRDataset:
    """CSR of the transposed matrix (i.e. the column-major form of ds)."""
    from .dataset import from_edges
    src, dst = ds.edges()
    return from_edges(ds.num_vertices, dst, src, ds.values, name=ds.name + "^T")


DEFAULT_ARGS = {"root": 0, "damping": 0.85, "epochs": 10, "bin_width": 4, "seed": 0}


def build_program(app: str, dataset: CSRDataset, layout: PGASLayout, **args) -> TaskProgram:
    if app not in APPS:
        raise WorkloadError(f"unknown app {app!r}; choose from {', '.join(APPS)}")
    a = dict(DEFAULT_ARGS)
    unknown = set(args) - set(a)
    if unknown:
        raise WorkloadError(f"unknown app arguments {sorted(unknown)}")
    a.update(args)
    T = layout.num_tiles
    ds = dataset
    if app == "wcc":
        ds = dataset.symmetrized()
    elif app == "spmv":
        if dataset.values is None:
            raise WorkloadError("spmv needs a matrix with values")
        ds = transpose(dataset)
    if ds is not dataset:
        layout = partition(ds, T, layout.edge_ownership)
    V = ds.num_vertices
    if app in ("bfs", "sssp") and V and not 0 <= a["root"] < V:
        raise WorkloadError(f"root {a['root']} outside [0, {V})")
    if app == "sssp" and ds.values is None:
        raise WorkloadError("sssp needs edge weights")
    if app == "sssp" and len(ds.values) and ds.values.min() < 0:
        raise WorkloadError("sssp needs non-negative weights")
    if a["epochs"] < 1:
        raise WorkloadError("epochs must be >= 1")
    if a["bin_width"] < 1:
        raise WorkloadError("bin_width must be >= 1")

    init = {"row_ptr": ds.row_ptr.tolist(), "col_idx": ds.col_idx.tolist()}
    widths = {"row_ptr": WIDTHS["row_ptr"], "col_idx": WIDTHS["col_idx"]}
    c = [_cost(app, i) for i in range(len(COSTS[app]))]
    if app == "histogram":
        del init["row_ptr"], widths["row_ptr"]
        nbins = -(-V // a["bin_width"]) if V else 0
        layout = layout.with_array("bins", nbins)
        init["bins"] = [0] * nbins
        widths["bins"] = WIDTHS["bins"]
        tasks = (
            TaskDef(0, "T1", "col_idx", None, True, c[0], 2, _hist_t1(a["bin_width"]), network=False),
            TaskDef(1, "T2", "bins", None, False, c[1], 1, _hist_t2),
        )
        return TaskProgram(app, tasks, False, ds, layout, widths, init, a)

    weighted = app in ("sssp", "spmv")
    if weighted:
        init["values"] = ds.values.tolist()
        widths["values"] = WIDTHS["values"]
    if app in ("bfs", "sssp"):
        arr = "dist"
        vals = [INF] * V
        if V:
            vals[a["root"]] = 0
        init[arr] = vals
        payload = _bfs_payload if app == "bfs" else _sssp_payload
        t3 = _min_t3(arr)
        combine = (lambda p, w: p + w) if weighted else None
    elif app == "wcc":
        arr = "label"
        init[arr] = list(range(V))
        payload, t3, combine = _wcc_payload, _min_t3(arr), None
    elif app == "pagerank":
        arr = "rank"
        init["rank"] = [1.0 / V] * V if V else []
        init["acc"] = [0.0] * V
        widths["acc"] = WIDTHS["acc"]
        payload, t3, combine = _pr_payload, _acc_t3("acc"), None
    else:  # spmv
        arr = "x"
        init["x"] = spmv_vector(V, a["seed"])
        init["y"] = [0.0] * V
        widths["y"] = WIDTHS["y"]
        payload, t3, combine = _spmv_payload, _acc_t3("y"), (lambda p, w: p * w)
    widths[arr] = WIDTHS[arr]
    t3_array = {"pagerank": "acc", "spmv": "y"}.get(app, arr)
    tasks = (
        TaskDef(0, "T1", "row_ptr", arr, False, c[0], 2, _graph_t1(payload), network=False),
        TaskDef(1, "T2", "col_idx", "values" if weighted else None, True, c[1], 3,
                _graph_t2(combine, weighted)),
        TaskDef(2, "T3", t3_array, None, False, c[2], 2, t3),
    )
    epochs = a["epochs"] if app == "pagerank" else 1
    return TaskProgram(app, tasks, app == "pagerank", ds, layout, widths, init, a, epochs)


def pagerank_step(rank: list, acc: list, damping: float) -> list:
    """The epoch barrier update shared by the engine and the oracle."""
    n = len(rank)
    base = (1.0 - damping) / n if n else 0.0
    return [base + damping * s for s in acc]


# ---------------------------------------------------------------- oracles

@dataclass
class ReferenceResult:
    app: str
    values: np.ndarray
    # PageRank: rank vector after every epoch
    epochs: list = field(default_factory=list)
    reached: np.ndarray | None = None


def _rows(ds):
    rp = ds.row_ptr.tolist()
    ci = ds.col_idx.tolist()
    return rp, ci


def oracle(app: str, dataset: CSRDataset, **args) -> ReferenceResult:
    """Sequential textbook computation of each application's result."""
    a = dict(DEFAULT_ARGS)
    a.update(args)
    V = dataset.num_vertices
    rp, ci = _rows(dataset)
    if app == "bfs":
        dist = [INF] * V
        if V:
            dist[a["root"]] = 0
            q = deque([a["root"]])
            while q:
                v = q.popleft()
                for e in range(rp[v], rp[v + 1]):
                    u = ci[e]
                    if dist[u] == INF:
                        dist[u] = dist[v] + 1
                        q.append(u)
        d = np.array(dist, dtype=np.int64)
        return ReferenceResult(app, d, reached=d < INF)
    if app == "sssp":
        w = dataset.values.tolist()
        dist = [INF] * V
        if V:
            dist[a["root"]] = 0
            pq = [(0, a["root"])]
            while pq:
                d0, v = heapq.heappop(pq)
                if d0 > dist[v]:
                    continue
                for e in range(rp[v], rp[v + 1]):
                    nd = d0 + w[e]
                    if nd < dist[ci[e]]:
                        dist[ci[e]] = nd
                        heapq.heappush(pq, (nd, ci[e]))
        d = np.array(dist, dtype=np.int64)
        return ReferenceResult(app, d, reached=d < INF)
    if app == "wcc":
        adj = [[] for _ in range(V)]
        for v in range(V):
            for e in range(rp[v], rp[v + 1]):
                adj[v].append(ci[e])
                adj[ci[e]].append(v)
        label = [-1] * V
        for s in range(V):  # ascending start => component label is its minimum id
            if label[s] >= 0:
                continue
            label[s] = s
            q = deque([s])
            while q:
                v = q.popleft()
                for u in adj[v]:
                    if label[u] < 0:
                        label[u] = s
                        q.append(u)
        return ReferenceResult(app, np.array(label, dtype=np.int64), reached=np.ones(V, dtype=bool))
    if app == "pagerank":
        d = a["damping"]
        rank = [1.0 / V] * V if V else []
        hist = []
        for _ in range(a["epochs"]):
            acc = [0.0] * V
            for v in range(V):
                deg = rp[v + 1] - rp[v]
                if deg:
                    share = rank[v] / deg
                    for e in range(rp[v], rp[v + 1]):
                        acc[ci[e]] += share
            rank = pagerank_step(rank, acc, d)
            hist.append(np.array(rank))
        return ReferenceResult(app, np.array(rank), epochs=hist, reached=np.ones(V, dtype=bool))
    if app == "spmv":
        x = spmv_vector(V, a["seed"])
        w = dataset.values.tolist()
        y = []
        for i in range(V):
            s = 0.0
            for e in range(rp[i], rp[i + 1]):
                s += w[e] * x[ci[e]]
            y.append(s)
        return ReferenceResult(app, np.array(y), reached=np.ones(V, dtype=bool))
    if app == "histogram":
        bw = a["bin_width"]
        bins = [0] * (-(-V // bw) if V else 0)
        for x in ci:
            bins[x // bw] += 1
        return ReferenceResult(app, np.array(bins, dtype=np.int64))
    raise WorkloadError(f"unknown app {app!r}")


def count_traversed_edges(app: str, dataset: CSRDataset, reached=None) -> int:
    """m for TEPS: edges out of reached vertices (graph apps), non-zeros (SPMV),
    elements processed (Histogram).  ``dataset`` is the graph the program ran on."""
    if app in ("spmv", "histogram"):
        return int(dataset.num_edges)
    if app not in APPS:
        raise WorkloadError(f"unknown app {app!r}")
    deg = dataset.out_degree()
    if reached is None:
        return int(deg.sum())
    return int(deg[np.asarray(reached, dtype=bool)].sum())


def is_float_app(app: str) -> bool:
    return app in ("pagerank", "spmv")


def relative_error(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        return math.inf
    if a.size == 0:
        return 0.0
    scale = np.maximum(np.abs(b), 1e-300)
    return float(np.max(np.abs(a - b) / scale))
