"""Metrics, reports and sweeps.

A report is one JSON document holding the echoed configuration, the raw
counters of the run and the metrics derived from them; ``metrics_from_raw``
re-derives every metric from the echoed counters alone.  The summary is a
CSV row per run (see ``SUMMARY_FIELDS``).
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import itertools
import json
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import cost as C
from . import energy as E
from .dataset import generate_rmat, load_csr, partition, read_edge_list
from .execution import RunResult, Simulation
from .sysconfig import SECTIONS, apply_overrides, system_from_raw, system_to_dict
from .workloads import APPS, build_program, count_traversed_edges

SWEEP_CAP = 1024


class ReportError(RuntimeError):
    pass


@dataclass
class RunMetrics:
    wall_cycles: int
    seconds: float
    m: int
    teps: float
    ops_per_s: float
    flops_per_s: float
    mem_bandwidth: float        # bytes/s the PUs moved to/from memory
    hit_rate: float
    energy_j: float
    power_w: float
    cost_usd: float
    teps_per_dollar: float
    teps_per_watt: float
    hops: int
    energy_pct: dict = field(default_factory=dict)


def geomean(values) -> float:
    vals = [float(v) for v in values]
    if not vals or min(vals) <= 0:
        raise ValueError("geomean needs positive values")
    return math.exp(math.fsum(math.log(v) for v in vals) / len(vals))


def _metrics(seconds, cycles, m, ops, flops, nbytes, hits, misses, energy_pj, categories, cost_usd, hops):
    if seconds <= 0:
        raise ReportError("zero-time run: metrics undefined")
    teps = m / seconds
    energy_j = energy_pj * 1e-12
    power = energy_j / seconds
    total = math.fsum(categories.values())
    pct = {k: 100.0 * v / total for k, v in categories.items()} if total > 0 else {}
    return RunMetrics(
        wall_cycles=cycles, seconds=seconds, m=m, teps=teps,
        ops_per_s=ops / seconds, flops_per_s=flops / seconds,
        mem_bandwidth=nbytes / seconds,
        hit_rate=hits / (hits + misses) if hits + misses else 1.0,
        energy_j=energy_j, power_w=power, cost_usd=cost_usd,
        teps_per_dollar=teps / cost_usd if cost_usd > 0 else math.inf,
        teps_per_watt=teps / power if power > 0 else math.inf,
        hops=hops, energy_pct=pct,
    )


def compute_metrics(result: RunResult, ledger: E.EnergyLedger | None = None,
                    cost_report: C.CostReport | None = None, m: int | None = None) -> RunMetrics:
    """Derived quantities from the primary counters of a finished run."""
    ledger = ledger if ledger is not None else result.energy
    if m is None:
        m = traversed_edges(result)
    cats = ledger.categories_pj()
    return _metrics(
        result.seconds, result.cycles, m, int(result.active_cycles.sum()), result.total_flops,
        result.bytes_accessed, result.mem["hits"], result.mem["misses"],
        math.fsum(cats.values()), cats, cost_report.node_total if cost_report else 0.0,
        result.noc["hops"])


def traversed_edges(result: RunResult) -> int:
    prog = result.program
    reached = None
    if result.app in ("bfs", "sssp"):
        reached = result.output < np.iinfo(np.int32).max
    return count_traversed_edges(result.app, prog.dataset, reached)


def raw_counters(result: RunResult, m: int) -> dict:
    """Everything metrics_from_raw needs, as plain numbers."""
    return {
        "ticks": result.ticks, "tick_hz": result.ticks / result.seconds if result.seconds else 0,
        "seconds": result.seconds, "cycles": result.cycles, "m": m,
        "active_cycles": int(result.active_cycles.sum()), "flops": result.total_flops,
        "bytes_read": result.mem["bytes_read"], "bytes_written": result.mem["bytes_written"],
        "hits": result.mem["hits"], "misses": result.mem["misses"],
        "hops": result.noc["hops"],
    }


def metrics_from_raw(raw: dict, energy_categories: dict, cost_usd: float) -> RunMetrics:
    return _metrics(raw["seconds"], raw["cycles"], raw["m"], raw["active_cycles"], raw["flops"],
                    raw["bytes_read"] + raw["bytes_written"], raw["hits"], raw["misses"],
                    math.fsum(energy_categories.values()), energy_categories, cost_usd, raw["hops"])


# ---------------------------------------------------------------- datasets

_RMAT = re.compile(r"^(?:rmat:)?(\d+)x(\d+)(?::(\d+))?$")


def load_dataset(spec: str, seed: int = 1):
    """``SCALExEDGEFACTOR[:seed]`` (RMAT), a ``.csr`` binary file or a text edge list."""
    m = _RMAT.match(spec)
    if m:
        s = int(m.group(3)) if m.group(3) else seed
        return generate_rmat(int(m.group(1)), int(m.group(2)), s)
    if not os.path.exists(spec):
        raise ReportError(f"dataset {spec!r} is neither SCALExEF nor an existing file")
    if spec.endswith(".csr"):
        return load_csr(spec)
    return read_edge_list(spec)


# ---------------------------------------------------------------- experiments

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


SUMMARY_FIELDS = (
    "label", "app", "dataset", "grid", "tile_noc", "die_noc", "noc_width", "pu_freq",
    "cycles", "seconds", "m", "teps", "flops_per_s", "mem_bandwidth", "hit_rate",
    "energy_j", "power_w", "cost_usd", "teps_per_dollar", "teps_per_watt", "hops", "status",
)


def run_experiment(raw_config: dict, app: str, dataset: str, overrides=(), app_args: dict | None = None,
                   out_dir: str | None = None, label: str = "", timestamp: bool = True,
                   dataset_seed: int = 1) -> dict:
    """One simulation; returns the report and writes it (plus a summary row) when out_dir is set."""
    if app not in APPS:
        raise ReportError(f"unknown app {app!r}; choose from {', '.join(APPS)}")
    raw = apply_overrides(raw_config, overrides)
    system = system_from_raw(raw)
    econst = E.constants_from_dict(raw.get("energy"))
    cconst = C.constants_from_dict(raw.get("cost"))
    ds = load_dataset(dataset, dataset_seed)
    layout = partition(ds, system.num_tiles, system.compile.edge_ownership)
    args = dict(app_args or {})
    if app in ("bfs", "sssp") and "root" not in args and ds.num_vertices:
        args["root"] = int(np.argmax(ds.out_degree()))
    program = build_program(app, ds, layout, **args)
    result = Simulation(system, program, energy_constants=econst).run()
    cost_report = C.system_cost(system, cconst)
    m = traversed_edges(result)
    metrics = compute_metrics(result, cost_report=cost_report, m=m)
    out_hash = hashlib.sha256(np.ascontiguousarray(result.output).tobytes()).hexdigest()
    report = {
        "label": label,
        "app": app,
        "app_args": args,
        "dataset": {"spec": dataset, "vertices": ds.num_vertices, "edges": ds.num_edges},
        "grid": [system.grid_x, system.grid_y],
        "config": system_to_dict(system),
        "energy_constants": asdict(econst),
        "cost_constants": asdict(cconst),
        "raw": raw_counters(result, m),
        "metrics": asdict(metrics),
        "energy": {**result.energy.to_dict(), "hbm_powered_seconds": result.hbm_powered_seconds},
        "cost": cost_report.as_dict(),
        "noc": result.noc,
        "memory": result.mem,
        "tasks": {"completed": result.tasks.sum(axis=0), "yields": result.yields,
                  "spawned": result.spawned, "barriers": result.barriers},
        "per_tile": {"tasks": result.tasks, "active_cycles": result.active_cycles,
                     "stall_ticks": result.stall_ticks, "oq_stall_ticks": result.oq_stall_ticks,
                     "hits": result.mem_per_tile["hits"], "misses": result.mem_per_tile["misses"]},
        "output_sha256": out_hash,
    }
    if timestamp:
        report["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    report = _jsonable(report)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        stem = label or f"{app}"
        with open(os.path.join(out_dir, f"{stem}.json"), "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        append_summary(os.path.join(out_dir, "summary.csv"), [summary_row(report)])
    return report


def summary_row(report: dict, status: str = "ok") -> dict:
    c = report["config"]
    mt = report["metrics"]
    return {
        "label": report.get("label", ""), "app": report["app"], "dataset": report["dataset"]["spec"],
        "grid": "x".join(str(g) for g in report["grid"]),
        "tile_noc": c["compile"]["topology_tile_noc"], "die_noc": c["compile"]["topology_die_noc"],
        "noc_width": c["tapeout"]["noc_width"], "pu_freq": c["compile"]["pu_freq_used"],
        "cycles": mt["wall_cycles"], "seconds": mt["seconds"], "m": mt["m"], "teps": mt["teps"],
        "flops_per_s": mt["flops_per_s"], "mem_bandwidth": mt["mem_bandwidth"],
        "hit_rate": mt["hit_rate"], "energy_j": mt["energy_j"], "power_w": mt["power_w"],
        "cost_usd": mt["cost_usd"], "teps_per_dollar": mt["teps_per_dollar"],
        "teps_per_watt": mt["teps_per_watt"], "hops": mt["hops"], "status": status,
    }


def append_summary(path: str, rows) -> None:
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS, extrasaction="ignore")
        if new:
            w.writeheader()
        for r in rows:
            w.writerow(r)


def recompute_cost_metrics(report: dict, cost_overrides: dict) -> dict:
    """TEPS/$ after changing prices, without re-running the simulation."""
    raw = {"compile": report["config"]["compile"], "tapeout": report["config"]["tapeout"],
           "packaging": report["config"]["packaging"]}
    system = system_from_raw(raw)
    consts = dict(report["cost_constants"])
    consts.update(cost_overrides)
    cr = C.system_cost(system, C.constants_from_dict(consts))
    m = metrics_from_raw(report["raw"], report["energy"]["categories_pj"], cr.node_total)
    return {"cost": cr.as_dict(), "metrics": asdict(m)}


# ---------------------------------------------------------------- sweeps

@dataclass
class SweepSpec:
    base: dict
    axes: list                  # [(dotted knob path, [values])]
    apps: list = field(default_factory=lambda: ["bfs"])
    datasets: list = field(default_factory=lambda: ["10x8"])
    mode: str = "cartesian"     # or "paired"
    seeds: list = field(default_factory=lambda: [1])
    cap: int = SWEEP_CAP
    app_args: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("cartesian", "paired"):
            raise ReportError("sweep mode must be cartesian or paired")
        for path, values in self.axes:
            parts = path.split(".")
            if len(parts) != 2 or parts[0] not in SECTIONS:
                raise ReportError(f"sweep path {path!r} must be section.knob")
            names = {f for f in SECTIONS[parts[0]].__dataclass_fields__}
            if parts[1] not in names:
                raise ReportError(f"sweep path {path!r} names no knob")
            if not isinstance(values, (list, tuple)) or not values:
                raise ReportError(f"sweep axis {path!r} needs a non-empty value list")
        if self.mode == "paired" and len({len(v) for _, v in self.axes}) > 1:
            raise ReportError("paired sweep axes must have equal lengths")
        if self.size() > self.cap:
            raise ReportError(f"sweep has {self.size()} points, cap is {self.cap}")

    def knob_points(self) -> list:
        if not self.axes:
            return [()]
        paths = [p for p, _ in self.axes]
        if self.mode == "paired":
            combos = zip(*[v for _, v in self.axes])
        else:
            combos = itertools.product(*[v for _, v in self.axes])
        return [tuple(zip(paths, c)) for c in combos]

    def points(self) -> list:
        out = []
        for knobs in self.knob_points():
            for app in self.apps:
                for ds in self.datasets:
                    for seed in self.seeds:
                        out.append((knobs, app, ds, seed))
        return out

    def size(self) -> int:
        return len(self.knob_points()) * len(self.apps) * len(self.datasets) * len(self.seeds)

    @classmethod
    def from_dict(cls, data: dict, base: dict | None = None) -> "SweepSpec":
        axes = [(k, v) for k, v in (data.get("axes") or {}).items()]
        return cls(base=base if base is not None else data.get("base", {}), axes=axes,
                   apps=list(data.get("apps", ["bfs"])), datasets=[str(d) for d in data.get("datasets", ["10x8"])],
                   mode=data.get("mode", "cartesian"), seeds=list(data.get("seeds", [1])),
                   cap=int(data.get("cap", SWEEP_CAP)), app_args=dict(data.get("app_args") or {}))


def _fmt(v):
    return json.dumps(v) if not isinstance(v, str) else v


def _run_point(args):
    base, knobs, app, ds, seed, app_args = args
    overrides = [f"{p}={_fmt(v)}" for p, v in knobs]
    label = ",".join(f"{p}={v}" for p, v in knobs) or "base"
    try:
        rep = run_experiment(base, app, ds, overrides, app_args, label=label, timestamp=False,
                             dataset_seed=seed)
        row = summary_row(rep)
    except Exception as exc:  # partial-failure policy: record and continue
        row = {k: "" for k in SUMMARY_FIELDS}
        row.update(label=label, app=app, dataset=ds, status=f"error: {type(exc).__name__}: {exc}")
    row["seed"] = seed
    for p, v in knobs:
        row[p] = v
    return row


def run_sweep(spec: SweepSpec, workers: int = 1, out_path: str | None = None) -> list:
    """One summary row per point, in point order regardless of worker count."""
    jobs = [(spec.base, knobs, app, ds, seed, spec.app_args) for knobs, app, ds, seed in spec.points()]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_run_point, jobs))
    else:
        rows = [_run_point(j) for j in jobs]
    if out_path:
        fields_ = list(SUMMARY_FIELDS) + ["seed"] + [p for p, _ in spec.axes]
        with open(out_path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=fields_, extrasaction="ignore")
            w.writeheader()
            w.writerows(rows)
    return rows


def geomean_by(rows, key: str, group_by: str) -> dict:
    """Geomean of ``key`` across rows sharing ``group_by`` (e.g. across apps per config)."""
    groups = {}
    for r in rows:
        if r.get("status", "ok") != "ok":
            continue
        groups.setdefault(r[group_by], []).append(float(r[key]))
    return {g: geomean(v) for g, v in groups.items()}
