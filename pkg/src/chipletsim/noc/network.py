"""Network state around the cycle kernel, plus synthetic traffic experiments."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernel as K
from .topology import TopologySpec


class NetworkError(RuntimeError):
    pass


class Network:
    """All router, queue and message state of one NoC instance.

    In exec mode the owner allocates message slots, fills injection queues
    and consumes the ejection log; input-queue occupancy lives in ``iqc`` so
    that ejection can refuse when the destination queue is full.
    """

    def __init__(self, spec: TopologySpec, mode: str = "exec", nq: int = 1, oq_capacity: int = 16,
                 iq_capacity=(16,), slots: int | None = None, trace_limit: int = 0,
                 check: bool = False, scan_every: int = 4096, ej_capacity: int | None = None):
        self.spec = spec
        R = spec.num_routers
        self.R = R
        if K.NB + nq > 31:
            raise NetworkError("too many injection queues")
        self.nq = nq
        self.params = spec.params()
        p = self.params
        p[K.P_NQ] = nq
        p[K.P_MODE] = K.MODE_EXEC if mode == "exec" else K.MODE_SINK
        p[K.P_TRACE] = trace_limit
        p[K.P_CHECK] = 1 if check else 0
        p[K.P_SCAN] = scan_every
        p[K.P_WIDTH] = spec.width
        p[K.P_WATCHDOG] = 100_000
        p[K.P_MEAS1] = 1 << 62
        p[K.P_QCAP] = oq_capacity
        self.mode = mode
        self.fparams = np.zeros(2, dtype=np.float64)
        self.nbr, self.lat, self.lcls, self.length = spec.tables()
        B = spec.buffer_slots
        NI = K.NB + nq
        self.buf = np.zeros((R, K.NB, B), dtype=np.int64)
        self.bh = np.zeros((R, K.NB), dtype=np.int64)
        self.bc = np.zeros((R, K.NB), dtype=np.int64)
        self.bfl = np.zeros((R, K.NB), dtype=np.int64)
        self.inbusy = np.zeros((R, NI), dtype=np.int64)
        self.obusy = np.zeros((R, K.NPORTS), dtype=np.int64)
        self.mask = np.zeros(R, dtype=np.int64)
        self.oq_capacity = oq_capacity
        self.oq = np.zeros((R, nq, oq_capacity), dtype=np.int64)
        self.oqh = np.zeros((R, nq), dtype=np.int64)
        self.oqc = np.zeros((R, nq), dtype=np.int64)
        iq_capacity = np.asarray(iq_capacity, dtype=np.int64)
        self.iqcap = iq_capacity
        self.iqc = np.zeros((R, len(iq_capacity)), dtype=np.int64)
        if slots is None:
            slots = R * (nq * oq_capacity + K.NB * B + int(iq_capacity.sum())) + 16
        self.slots = slots
        self.msg = np.zeros((slots, K.NF), dtype=np.int64)
        self.ej = np.zeros((ej_capacity or max(4096, 4 * R), 5), dtype=np.int64)
        self.stats = np.zeros(K.NSTATS, dtype=np.int64)
        self.rbits = np.zeros((R, 1 + 8), dtype=np.int64)
        self.want = np.zeros(R, dtype=np.int64)
        self.trace = np.zeros((max(trace_limit, 1), 4), dtype=np.int64)
        self.freelist = np.arange(slots - 1, -1, -1, dtype=np.int64)
        self.stats[K.S_FREEN] = slots
        self.rng = np.array([0x9E3779B97F4A7C15], dtype=np.uint64)
        self.aux = np.zeros(R, dtype=np.int64)
        # cached (ready cycle, output port) of the head message of every input
        self.hready = np.zeros((R, NI), dtype=np.int64)
        self.hout = np.full((R, NI), -1, dtype=np.int64)
        self.cycle = 0
        self._next_id = 0

    # -- slot and queue management (exec mode) --------------------------------
    def alloc(self) -> int:
        n = self.stats[K.S_FREEN]
        if n == 0:
            raise NetworkError("out of message slots")
        self.stats[K.S_FREEN] = n - 1
        return int(self.freelist[n - 1])

    def free(self, s: int) -> None:
        n = self.stats[K.S_FREEN]
        self.freelist[n] = s
        self.stats[K.S_FREEN] = n + 1

    def oq_free(self, r: int, q: int) -> int:
        return self.oq_capacity - int(self.oqc[r, q])

    def push(self, r: int, q: int, dst: int, task: int, flits: int, ready: int, vt: int = 0,
             msg_id: int | None = None) -> int:
        """Place a new message in injection queue q of router r; returns its slot."""
        if self.oqc[r, q] >= self.oq_capacity:
            raise NetworkError(f"injection queue {q} of router {r} is full")
        s = self.alloc()
        if msg_id is None:
            msg_id = self._next_id
            self._next_id += 1
        # field order: DST TASK VT FLITS READY CLS FLAGS HOPS SRC INJ ID GEN OUT
        self.msg[s] = (dst, task, vt, flits, ready, 0, 0, 0, r, -1, msg_id, ready, -1)
        self.oq[r, q, (self.oqh[r, q] + self.oqc[r, q]) % self.oq_capacity] = s
        if self.oqc[r, q] == 0:
            self.hready[r, K.NB + q] = ready
            self.hout[r, K.NB + q] = -1
        self.oqc[r, q] += 1
        self.mask[r] |= 1 << (K.NB + q)
        if self.mode == "sink":
            self.stats[K.S_OQ_MSGS] += 1
        return s

    def run(self, until: int) -> int:
        """Run cycles up to ``until`` (exclusive) or until an early stop."""
        if until <= self.cycle:
            return self.cycle
        self.cycle = int(K.run_cycles(
            self.cycle, until, self.params, self.fparams, self.nbr, self.lat,
            self.buf, self.bh, self.bc, self.bfl, self.inbusy, self.obusy, self.mask,
            self.oq, self.oqh, self.oqc, self.iqc, self.iqcap, self.msg, self.ej, self.stats,
            self.rbits, self.want, self.trace, self.freelist, self.rng, self.aux,
            self.hready, self.hout))
        return self.cycle

    def take_ejections(self) -> np.ndarray:
        n = int(self.stats[K.S_EJN])
        out = self.ej[:n].copy()
        self.stats[K.S_EJN] = 0
        return out

    # -- observation ------------------------------------------------------------
    @property
    def in_flight_messages(self) -> int:
        return int(self.stats[K.S_INFLIGHT_MSG])

    @property
    def queued_messages(self) -> int:
        return int(self.oqc.sum())

    @property
    def empty(self) -> bool:
        return self.in_flight_messages == 0 and self.queued_messages == 0

    def stat(self, idx: int) -> int:
        return int(self.stats[idx])

    def full_scan(self) -> int:
        return int(K._scan(self.R, K.NB + self.nq, self.params, self.buf, self.bh, self.bc,
                           self.bfl, self.oqc, self.msg, self.stats))

    def bits_by_class(self) -> dict:
        """Link bits summed per link class, plus router traversal bits."""
        router = int(self.rbits[:, 0].sum())
        link = self.rbits[:, 1:]
        on_die = int(link[self.lcls == 0].sum()) if link.size else 0
        cross = int(link[self.lcls == 1].sum()) if link.size else 0
        express = int(link[self.lcls == 2].sum()) if link.size else 0
        return {"router": router, "on_die": on_die, "cross_die": cross, "express": express}

    def wire_bit_mm(self) -> float:
        """Sum over links of bits * link length (mm)."""
        return float((self.rbits[:, 1:] * self.length).sum())

    def trace_records(self) -> list:
        n = int(self.stats[K.S_TRN])
        names = ("+X", "-X", "+Y", "-Y", "E+X", "E-X", "E+Y", "E-Y", "eject")
        return [{"message": int(a), "router": int(b), "cycle": int(c), "port": names[int(d)]}
                for a, b, c, d in self.trace[:n]]

    def write_trace(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.trace_records():
                fh.write(json.dumps(rec) + "\n")


PATTERNS = {"uniform": K.PAT_UNIFORM, "hotspot": K.PAT_HOTSPOT,
            "crossdie": K.PAT_CROSSDIE, "all2all": K.PAT_ALL2ALL}


@dataclass
class TrafficResult:
    cycles: int
    status: str
    generated: int
    injected: int
    delivered: int
    delivered_flits: int
    injected_flits: int
    accepted_flits_per_node_cycle: float
    mean_latency: float
    max_latency: int
    total_hops: int
    express_hops: int
    conservation_errors: int
    scan_errors: int
    checks: int
    scans: int
    refused: int
    log: np.ndarray | None = field(default=None, repr=False)


def run_synthetic(spec: TopologySpec, pattern: str = "uniform", rate: float = 0.1, cycles: int = 10_000,
                  flits: int = 2, seed: int = 1, hot_tile: int = 0, hot_prob: float = 0.2,
                  queue_capacity: int = 8, drain: bool = True, drain_cap: int = 10_000_000,
                  watchdog: int = 100_000, check: bool = True, scan_every: int = 4096,
                  warmup: int = 0, log: bool = False, trace_limit: int = 0) -> TrafficResult:
    """Open-loop synthetic traffic: Bernoulli injection per router per cycle.

    ``accepted_flits_per_node_cycle`` counts flits delivered during
    [warmup, cycles) divided by routers and window length.
    """
    if pattern not in PATTERNS:
        raise ValueError(f"unknown pattern {pattern!r}")
    net = Network(spec, mode="sink", nq=1, oq_capacity=queue_capacity, iq_capacity=(1,),
                  check=check, scan_every=scan_every, trace_limit=trace_limit,
                  ej_capacity=1 << 16)
    p = net.params
    p[K.P_PATTERN] = PATTERNS[pattern]
    p[K.P_HOT] = hot_tile
    p[K.P_FLITS] = flits
    p[K.P_INJ_UNTIL] = cycles
    p[K.P_WATCHDOG] = watchdog
    p[K.P_MEAS0] = warmup
    p[K.P_MEAS1] = cycles
    p[K.P_LOG] = 1 if log else 0
    net.fparams[K.FP_RATE] = rate
    net.fparams[K.FP_HOT] = hot_prob
    net.rng[0] = np.uint64((seed * 0x9E3779B97F4A7C15 + 0x632BE59BD9B4E019) % (1 << 64) or 1)
    logs = []
    end = cycles + (drain_cap if drain else 0)
    while True:
        net.run(end)
        if log:
            logs.append(net.take_ejections())
        st = net.stats[K.S_STATUS]
        if st != K.STATUS_RUNNING or net.cycle >= end:
            break
    status = {K.STATUS_RUNNING: "running", K.STATUS_DEADLOCK: "deadlock",
              K.STATUS_DRAINED: "drained"}[int(net.stats[K.S_STATUS])]
    if not drain and status == "running":
        status = "stopped"
    s = net.stats
    window = max(1, cycles - warmup)
    delivered = int(s[K.S_DEL_MSG])
    return TrafficResult(
        cycles=net.cycle, status=status, generated=int(s[K.S_GEN]),
        injected=int(s[K.S_INJ_MSG]), delivered=delivered,
        delivered_flits=int(s[K.S_DEL_FLITS]), injected_flits=int(s[K.S_INJ_FLITS]),
        accepted_flits_per_node_cycle=int(s[K.S_MEAS_FLITS]) / (window * spec.num_routers),
        mean_latency=int(s[K.S_LAT]) / delivered if delivered else 0.0,
        max_latency=int(s[K.S_MAXLAT]), total_hops=int(s[K.S_HOPS]),
        express_hops=int(s[K.S_EXP_HOPS]),
        conservation_errors=int(s[K.S_CONS_ERR]), scan_errors=int(s[K.S_SCAN_ERR]),
        checks=int(s[K.S_CHECKS]), scans=int(s[K.S_SCANS]), refused=int(s[K.S_REFUSED]),
        log=np.concatenate(logs) if log and logs else None,
    )


def deliver_batch(spec: TopologySpec, pairs, flits: int = 1, start: int = 0, max_cycles: int = 1_000_000,
                  check: bool = True, trace_limit: int = 0):
    """Inject explicit (src, dst) messages at cycle ``start`` and run until drained.

    Returns (network, log) where log rows are (id, router, tail_cycle, hops, src).
    Messages of one source enter its injection queue in the given order.
    """
    per_src = {}
    for k, (s, d) in enumerate(pairs):
        per_src.setdefault(s, []).append((k, d))
    qcap = max([len(v) for v in per_src.values()] + [1])
    net = Network(spec, mode="sink", nq=1, oq_capacity=qcap, iq_capacity=(1,), check=check,
                  trace_limit=trace_limit, ej_capacity=max(1 << 12, len(pairs) + 4 * spec.num_routers),
                  slots=len(pairs) + 16)
    p = net.params
    p[K.P_LOG] = 1
    p[K.P_INJ_UNTIL] = 0
    p[K.P_WATCHDOG] = 100_000
    net.cycle = start
    for s, items in per_src.items():
        for k, d in items:
            net.push(s, 0, d, 0, flits, start, msg_id=k)
    logs = []
    while True:
        net.run(start + max_cycles)
        logs.append(net.take_ejections())
        if net.stats[K.S_STATUS] != K.STATUS_RUNNING or net.cycle >= start + max_cycles:
            break
    return net, np.concatenate(logs)
