"""The tile engine (TSU, PUs, queues) and the global simulation loop.

Tasks run functionally when they start: the handler performs its reads,
writes and message emissions right away while a local clock walks through
the task's cycles and memory stalls.  Spawned messages enter the router's
injection queue with a ready time equal to the emission time, so the NoC
sees them when the PU would have produced them.  The NoC runs in the
compiled kernel between engine events (task completions, ejections into a
tile with an idle PU, injection-queue pops for a tile waiting on space).
"""

from __future__ import annotations

import heapq
import math
import sys
from collections import OrderedDict, deque
from dataclasses import dataclass, field

import numpy as np

from . import energy as E
from .dataset import PGASLayout
from .memhier import (LINE_BYTES, DramChannel, TileMemory, channel_of, plan_sram,
                      sram_extra_cycles)
from .noc import kernel as K
from .noc.network import Network
from .noc.topology import flits_for, message_bits, spec_from_system
from .workloads import TaskProgram, pagerank_step


class SimulationError(RuntimeError):
    pass


class OwnershipError(SimulationError):
    pass


class WatchdogTimeout(SimulationError):
    def __init__(self, message, snapshot):
        super().__init__(message)
        self.snapshot = snapshot


@dataclass(frozen=True)
class SimClock:
    """Common tick grid for the PU and NoC clock domains.

    One tick is 1/lcm(f_pu, f_noc) seconds; a PU cycle is ``tp`` ticks and a
    NoC cycle ``tn`` ticks, so both domains stay in a fixed integer ratio.
    """

    pu_freq: int
    noc_freq: int

    def __post_init__(self):
        if self.pu_freq <= 0 or self.noc_freq <= 0:
            raise ValueError("frequencies must be positive")

    @property
    def tick_hz(self) -> int:
        return self.pu_freq * self.noc_freq // math.gcd(self.pu_freq, self.noc_freq)

    @property
    def tp(self) -> int:
        return self.tick_hz // self.pu_freq

    @property
    def tn(self) -> int:
        return self.tick_hz // self.noc_freq

    def ticks_for_ns(self, ns: float) -> int:
        return math.ceil(ns * self.tick_hz / 1e9 - 1e-9)

    def seconds(self, ticks: int) -> float:
        return ticks / self.tick_hz


def select_task(queued, capacity, runnable=None):
    """Index of the queue to serve: highest occupancy ratio, ties to the latest stage."""
    best = None
    best_ratio = -1.0
    for k, n in enumerate(queued):
        if n <= 0 or (runnable is not None and not runnable[k]):
            continue
        r = min(n, capacity[k]) / capacity[k]
        if r >= best_ratio:
            best, best_ratio = k, r
    return best


class Tile:
    __slots__ = ("id", "mem", "local", "iq", "idle", "tasks", "yields", "active", "flops",
                 "stall", "die", "busy_ticks", "stalled", "oq_stall")

    def __init__(self, tid, mem, ntasks, npus, die):
        self.id = tid
        self.mem = mem
        self.local = OrderedDict()
        self.iq = [None] + [deque() for _ in range(ntasks - 1)]
        self.idle = list(range(npus))
        self.tasks = [0] * ntasks
        self.yields = [0] * ntasks
        self.active = 0
        self.flops = 0.0
        self.stall = 0
        self.die = die
        self.busy_ticks = 0
        self.oq_stall = 0
        self.stalled = []               # (pu, task, continuation, since tick) waiting on a full OQ


class TaskContext:
    """What a task handler may do. One per tile, reused across tasks."""

    def __init__(self, sim, tile):
        self.sim = sim
        self.tile = tile
        self.mem = tile.mem
        self.r = tile.id
        self.state = sim.state
        self.now = 0
        self.step_ticks = 0
        self.cpe = 0
        self.fpe = 0.0
        self.active = 0
        self.flops = 0.0
        self._streamed = set()

    def _begin(self, start, task):
        c = task.cost
        self.now = start + c.base_cycles * self.sim.tp
        self.step_ticks = c.cycles_per_element * self.sim.tp
        self.cpe = c.cycles_per_element
        self.fpe = c.flops_per_element
        self.active = c.base_cycles
        self.flops = 0.0
        self._streamed.clear()

    def read(self, array, index):
        self.now = self.mem.access(array, index, self.now, False)
        return self.state[array][index]

    def write(self, array, index, value):
        self.now = self.mem.access(array, index, self.now, True)
        self.state[array][index] = value

    def stream(self, array, index):
        first = array not in self._streamed
        if first:
            self._streamed.add(array)
        self.now = self.mem.stream(array, index, self.now, self.sim.stream_depth, first)
        return self.state[array][index]

    def step(self):
        self.now += self.step_ticks
        self.active += self.cpe
        self.flops += self.fpe

    def space(self, task_id):
        q = task_id - 1
        return self.sim.oq_cap[q] - int(self.sim.net.oqc[self.r, q])

    def edge_chunks(self, lo, hi):
        return self.sim.edge_chunks(lo, hi)

    def emit(self, task_id, index, msg):
        self.emit_to(task_id, self.sim.owner(task_id, index), msg)

    def emit_to(self, task_id, owner, msg):
        sim = self.sim
        ready = -(-self.now // sim.tn)
        mid = sim.next_id
        sim.next_id = mid + 1
        slot = sim.net.push(self.r, task_id - 1, owner, task_id, sim.flits[task_id], ready,
                            task_id - 1, mid)
        sim.pending[slot] = (task_id, msg, mid)
        sim.spawned[task_id] += 1

    def activate(self, v):
        sim = self.sim
        if v not in self.tile.local:
            self.tile.local[v] = ((v, 0), self.now)
            sim.prefetch_for(self.tile, 0, v, self.now)
        else:
            self.tile.local[v] = ((v, 0), self.tile.local[v][1])


@dataclass
class RunResult:
    app: str
    cycles: int                      # NoC cycles until quiescence
    ticks: int
    seconds: float
    pu_freq: int
    noc_freq: int
    output: np.ndarray
    arrays: dict
    epoch_values: list
    barriers: int
    tasks: np.ndarray                # [tile, task] completed invocations
    yields: np.ndarray               # [task] times a task hit a full output queue
    spawned: list                    # [task] messages sent through the NoC
    t1_runs: np.ndarray | None       # completed T1 invocations per vertex (graph apps)
    active_cycles: np.ndarray        # per tile PU cycles spent executing
    stall_ticks: np.ndarray          # per tile memory stall ticks
    oq_stall_ticks: np.ndarray       # per tile ticks PUs spent waiting on a full output queue
    flops: np.ndarray                # per tile
    mem: dict                        # aggregated memory counters
    mem_per_tile: dict
    noc: dict
    hbm_powered_seconds: dict        # die -> seconds powered
    energy: E.EnergyLedger
    traces: dict = field(default_factory=dict, repr=False)
    dram_image: dict | None = field(default=None, repr=False)
    program: TaskProgram | None = field(default=None, repr=False)
    sram_plan: object = None

    @property
    def bytes_accessed(self) -> int:
        return int(self.mem["bytes_read"] + self.mem["bytes_written"])

    @property
    def total_flops(self) -> float:
        return float(self.flops.sum())

    @property
    def arithmetic_intensity(self) -> float:
        b = self.bytes_accessed
        return self.total_flops / b if b else 0.0

    @property
    def hit_rate(self) -> float:
        n = self.mem["hits"] + self.mem["misses"]
        return self.mem["hits"] / n if n else 1.0


class Simulation:
    """One run of a task program on a validated system."""

    def __init__(self, system, program: TaskProgram, record_trace: bool = False,
                 keep_dram_image: bool = False, check_noc: bool = False,
                 max_cycles: int | None = None, progress: bool = False,
                 energy_constants: E.EnergyConstants | None = None, track_ids: bool = False):
        self.system = system
        self.program = program
        c = system.compile
        self.clock = SimClock(int(round(c.pu_freq_used)), int(round(c.noc_freq_used)))
        self.layout: PGASLayout = program.layout
        T = system.num_tiles
        if self.layout.num_tiles != T:
            raise SimulationError(f"program laid out for {self.layout.num_tiles} tiles, system has {T}")
        self.T = T
        self.ntasks = len(program.tasks)
        self.max_cycles = max_cycles or c.watchdog_cycles
        self.progress = progress
        self.energy_constants = energy_constants or E.EnergyConstants()
        self.stream_depth = c.stream_prefetch_depth
        self.tsu_prefetch = c.tsu_prefetch
        self.track_ids = track_ids
        self.delivered_ids = set() if track_ids else None

        # functional state: python lists with global indices
        self.state = {k: list(v) for k, v in program.init.items()}

        # network
        spec = spec_from_system(system)
        self.spec = spec
        nq = self.ntasks - 1
        self.oq_cap = [c.oq_capacity[q] for q in range(nq)]
        self.iq_cap = c.iq_capacity
        iqcap = [1 << 30] + [c.iq_capacity] * nq
        self.net = Network(spec, mode="exec", nq=nq, oq_capacity=max(self.oq_cap), iq_capacity=iqcap,
                           check=check_noc, ej_capacity=max(4096, 8 * T),
                           slots=T * (nq * max(self.oq_cap) + K.NB * spec.buffer_slots) + max(4096, 8 * T) + 16)
        self.flits = [0] + [flits_for(message_bits(t.nparams), spec.width) for t in program.tasks[1:]]
        self.pending = {}
        self.next_id = 0
        self.spawned = [0] * self.ntasks

        # owner lookups
        self._route_arrays = [t.routing_array for t in program.tasks]
        self._blocks = [self.layout.block(a) for a in self._route_arrays]

        # memory
        self.plan = plan_sram(system, self._per_tile_bytes(), self.ntasks)
        extra = sram_extra_cycles(system.tapeout.sram_per_tile, self.clock.pu_freq) * self.clock.tp
        lat = self.clock.ticks_for_ns(50.0)
        svc = max(1, self.clock.ticks_for_ns(LINE_BYTES / 64.0))
        tx, ty = system.tapeout.tiles_per_die_x, system.tapeout.tiles_per_die_y
        nch = system.tapeout.mem_channels_per_die
        self.channels = {}
        self.dram_image = {k: list(v) for k, v in program.init.items()} if keep_dram_image else None
        self.tiles = []
        for t in range(T):
            x, y, dx, dy = system.tile_coords(t)
            die = system.die_index(t)
            segs = self._segments(t)
            ch = None
            if any(s.cached for s in segs.values()):
                ch_id = (die, channel_of((y % ty) * tx + (x % tx), nch))
                ch = self.channels.get(ch_id)
                if ch is None:
                    ch = self.channels[ch_id] = DramChannel(svc, lat)
            mem = TileMemory(t, segs, self.plan, ch, extra, record_trace,
                             self.state if keep_dram_image else None, self.dram_image)
            self.tiles.append(Tile(t, mem, self.ntasks, system.tapeout.pus_per_tile, die))
        self.ctx = [TaskContext(self, tile) for tile in self.tiles]
        self.heap = []
        self._seq = 0
        self.barriers = 0
        self.epoch_values = []
        V = program.dataset.num_vertices
        self.t1_runs = np.zeros(V, dtype=np.int64) if program.app != "histogram" else None
        # tile -> output queues it is waiting on (tile has an idle PU and blocked work)
        self._blocked = {}
        self.stall_on_full = system.compile.oq_full_policy == "stall"
        self.tp, self.tn = self.clock.tp, self.clock.tn

    # ------------------------------------------------------------------ layout
    def _range(self, array, t):
        lay = self.layout
        if array == "row_ptr":
            lo, hi = lay._vertex_range(t)
            if lo < hi:
                return lo, hi + 1
            if lay.num_vertices == 0 and t == 0:
                return 0, 1
            return lo, lo
        return lay.owned_range(array, t)

    def _per_tile_bytes(self):
        out = {}
        for a, w in self.program.widths.items():
            out[a] = max((self._range(a, t)[1] - self._range(a, t)[0]) * w for t in range(self.T))
        return out

    def _segments(self, t):
        from .memhier import Segment
        segs = {}
        for a, w in self.program.widths.items():
            lo, hi = self._range(a, t)
            segs[a] = Segment(a, lo, hi - lo, w, self.plan.is_cached(a))
        return segs

    def owner(self, task_id, index):
        o = index // self._blocks[task_id]
        return o if o < self.T else self.T - 1

    def edge_chunks(self, lo, hi):
        lay = self.layout
        if lay.edge_ownership != "even":
            return list(lay.edge_chunks(lo, hi))
        b = lay.edges_per_tile
        out = []
        i = lo
        T = self.T
        while i < hi:
            o = i // b
            if o >= T:
                o = T - 1
                end = hi
            else:
                end = min(hi, (o + 1) * b)
            out.append((o, i, end - i))
            i = end
        return out

    # ------------------------------------------------------------------ TSU
    def prefetch_for(self, tile, k, index, now):
        if not self.tsu_prefetch:
            return
        t = self.program.tasks[k]
        mem = tile.mem
        mem.prefetch(t.routing_array, index, now)
        if t.prefetch_array is not None:
            mem.prefetch(t.prefetch_array, index, now)

    def _pick(self, tile):
        """(task id or None, output queues that block queued work) following the TSU policy."""
        cap = self.iq_cap
        best = None
        best_ratio = -1.0
        blocked = None
        oqc = self.net.oqc
        r = tile.id
        nt = self.ntasks
        for k in range(nt):
            n = len(tile.local) if k == 0 else len(tile.iq[k])
            if n == 0:
                continue
            if k < nt - 1 and self.oq_cap[k] - oqc[r, k] <= 0:
                if blocked is None:
                    blocked = [k]
                else:
                    blocked.append(k)
                continue
            ratio = (n if n < cap else cap) / cap
            if ratio >= best_ratio:
                best, best_ratio = k, ratio
        return best, blocked

    def _set_want(self, tile, base):
        # bit 0: wake on ejection, bit 1: wake when an output queue pops
        self.net.want[tile.id] = base | (2 if tile.stalled else 0)

    def _try_start(self, tile, t):
        while tile.idle:
            k, blocked = self._pick(tile)
            if k is None:
                if blocked:
                    self._blocked[tile.id] = blocked
                    self._set_want(tile, 3)
                else:
                    self._blocked.pop(tile.id, None)
                    self._set_want(tile, 1)
                return
            pu = tile.idle.pop(0)
            if k == 0:
                _key, (msg, avail) = tile.local.popitem(last=False)
            else:
                avail, msg = tile.iq[k].popleft()
            self._execute(tile, pu, k, msg, t if t > avail else avail)
        self._blocked.pop(tile.id, None)
        self._set_want(tile, 0)

    def _execute(self, tile, pu, k, msg, start):
        task = self.program.tasks[k]
        ctx = self.ctx[tile.id]
        ctx._begin(start, task)
        stall0 = tile.mem.counters.stall_ticks
        try:
            rem = task.handler(ctx, msg)
        except IndexError as exc:
            raise OwnershipError(
                f"tile {tile.id} running {task.name}{msg} at tick {start}: {exc}") from exc
        tile.active += ctx.active
        tile.flops += ctx.flops
        tile.stall += tile.mem.counters.stall_ticks - stall0
        finish = ctx.now
        tile.busy_ticks += finish - start
        self._seq += 1
        heapq.heappush(self.heap, (finish, self._seq, tile.id, pu, k, rem, msg))

    def _complete(self, ev):
        tick, _seq, r, pu, k, rem, msg = ev
        tile = self.tiles[r]
        if rem is None:
            tile.tasks[k] += 1
            if k > 0:
                self.net.iqc[r, k] -= 1
            elif self.t1_runs is not None:
                self.t1_runs[msg[0]] += 1
        elif self.stall_on_full:
            # the PU keeps the task and waits for its output queue to drain
            tile.yields[k] += 1
            tile.stalled.append((pu, k, rem, tick))
            self._resume(tile, tick)
            return
        else:
            tile.yields[k] += 1
            if k == 0:
                if rem[0] not in tile.local:
                    tile.local[rem[0]] = (rem, tick)
            else:
                tile.iq[k].appendleft((tick, rem))
        tile.idle.append(pu)
        tile.idle.sort()
        self._try_start(tile, tick)

    def _resume(self, tile, now):
        """Restart stalled tasks whose output queue has room again."""
        oqc = self.net.oqc
        keep = []
        for pu, k, rem, since in tile.stalled:
            if self.oq_cap[k] - oqc[tile.id, k] > 0:
                start = now if now > since else since
                tile.oq_stall += start - since
                self._execute(tile, pu, k, rem, start)
            else:
                keep.append((pu, k, rem, since))
        tile.stalled = keep
        self._set_want(tile, int(self.net.want[tile.id]) & 1)

    def _eject(self):
        ej = self.net.take_ejections()
        if len(ej) == 0:
            return
        tn = self.tn
        net = self.net
        touched = []
        for slot, r, tail, _hops, _src in ej.tolist():
            k, msg, mid = self.pending.pop(slot)
            net.free(slot)
            if self.delivered_ids is not None:
                if mid in self.delivered_ids:
                    raise SimulationError(f"message {mid} delivered twice")
                self.delivered_ids.add(mid)
            avail = (tail + 1) * tn
            tile = self.tiles[r]
            tile.iq[k].append((avail, msg))
            self.prefetch_for(tile, k, msg[0], avail)
            if tile.idle:
                touched.append((avail, r))
        for avail, r in touched:
            tile = self.tiles[r]
            if tile.idle:
                self._try_start(tile, avail)

    def _seed(self, now):
        for tile in self.tiles:
            for key, msg in self.program.seed(tile.id):
                tile.local[key] = (msg, now)
                self.prefetch_for(tile, 0, msg[0], now)
        for tile in self.tiles:
            self._try_start(tile, now)

    def _barrier(self):
        a = self.program.args
        st = self.state
        st["rank"] = pagerank_step(st["rank"], st["acc"], a["damping"])
        st["acc"] = [0.0] * len(st["acc"])
        self.barriers += 1
        self.epoch_values.append(np.array(st["rank"]))

    def snapshot(self) -> dict:
        return {
            "cycle": int(self.net.cycle),
            "running": len(self.heap),
            "in_flight": self.net.in_flight_messages,
            "queued_in_oqs": self.net.queued_messages,
            "iq": {t.id: [len(t.local)] + [len(q) for q in t.iq[1:]]
                   for t in self.tiles if t.local or any(t.iq[1:])},
        }

    def quiescent(self) -> bool:
        return detect_quiescence(self)

    # ------------------------------------------------------------------ loop
    def run(self) -> RunResult:
        net = self.net
        tn = self.clock.tn
        limit = self.max_cycles
        self._seed(0)
        events = 0
        next_prune = 1 << 15
        while True:
            now_t = net.cycle * tn
            heap = self.heap
            while heap and heap[0][0] <= now_t:
                self._complete(heapq.heappop(heap))
                events += 1
            if not heap and net.empty:
                if any(t.local or t.stalled or any(t.iq[1:]) for t in self.tiles):
                    raise SimulationError(f"idle tiles with queued work: {self.snapshot()}")
                if self.program.epoch:
                    self._barrier()
                    if self.barriers < self.program.epochs:
                        self._seed(now_t)
                        continue
                break
            if net.cycle > limit:
                raise WatchdogTimeout(f"no quiescence after {limit} cycles (livelock?)", self.snapshot())
            target = -(-heap[0][0] // tn) if heap else net.cycle + (1 << 16)
            if target > net.cycle:
                net.run(min(target, limit + 2))
            self._eject()
            if self._blocked or self.stall_on_full:
                # the kernel flags (bit 2) waiting routers whose injection queue popped
                now_t = net.cycle * tn
                for r in np.flatnonzero(net.want & 4).tolist():
                    net.want[r] &= 3
                    tile = self.tiles[r]
                    if tile.stalled:
                        self._resume(tile, now_t)
                    if tile.idle:
                        self._try_start(tile, now_t)
            if events > next_prune:
                next_prune = events + (1 << 15)
                floor = max(0, net.cycle * tn - 4096)
                for ch in self.channels.values():
                    ch.prune(floor)
                if self.progress:
                    print(f"[{self.program.app}] cycle {net.cycle} events {events}", file=sys.stderr)
        return self._result()

    # ------------------------------------------------------------------ results
    def _result(self) -> RunResult:
        net = self.net
        clock = self.clock
        ticks = net.cycle * clock.tn
        for tile in self.tiles:
            if self.dram_image is not None:
                tile.mem.flush()
        tasks = np.array([t.tasks for t in self.tiles], dtype=np.int64)
        yields = np.array([t.yields for t in self.tiles], dtype=np.int64).sum(axis=0)
        keys = ("sram_read_bits", "sram_write_bits", "tag_checks", "dram_read_bits", "dram_write_bits",
                "reads", "writes", "bytes_read", "bytes_written", "stall_ticks", "spm_accesses")
        per_tile = {k: np.array([getattr(t.mem.counters, k) for t in self.tiles], dtype=np.int64)
                    for k in keys}
        cache_keys = ("hits", "misses", "evictions", "writebacks", "prefetch_issued", "prefetch_useful")
        for k in cache_keys:
            per_tile[k] = np.array([getattr(t.mem.cache, k) if t.mem.cache else 0 for t in self.tiles],
                                   dtype=np.int64)
        mem = {k: int(v.sum()) for k, v in per_tile.items()}
        bits = net.bits_by_class()
        s = net.stats
        noc = {
            "messages": int(s[K.S_DEL_MSG]), "flits": int(s[K.S_DEL_FLITS]),
            "hops": int(s[K.S_HOPS]), "express_hops": int(s[K.S_EXP_HOPS]),
            "router_bits": bits["router"], "on_die_bits": bits["on_die"],
            "cross_die_bits": bits["cross_die"], "express_bits": bits["express"],
            "wire_bit_mm": net.wire_bit_mm(), "mean_latency": int(s[K.S_LAT]) / max(1, int(s[K.S_DEL_MSG])),
            "conservation_errors": int(s[K.S_CONS_ERR]), "scan_errors": int(s[K.S_SCAN_ERR]),
        }
        hbm = self._hbm_powered(ticks)
        ledger = self._energy(per_tile, hbm)
        traces = {t.id: t.mem.cache.trace for t in self.tiles
                  if t.mem.cache is not None and t.mem.cache.trace is not None}
        out_name = self.program.output_array
        arrays = {k: np.array(v) for k, v in self.state.items() if k not in ("row_ptr", "col_idx", "values")}
        return RunResult(
            app=self.program.app, cycles=int(net.cycle), ticks=int(ticks),
            seconds=clock.seconds(ticks), pu_freq=clock.pu_freq, noc_freq=clock.noc_freq,
            output=arrays[out_name], arrays=arrays, epoch_values=self.epoch_values,
            barriers=self.barriers, tasks=tasks, yields=yields, spawned=list(self.spawned),
            t1_runs=self.t1_runs,
            active_cycles=np.array([t.active for t in self.tiles], dtype=np.int64),
            stall_ticks=np.array([t.stall for t in self.tiles], dtype=np.int64),
            oq_stall_ticks=np.array([t.oq_stall for t in self.tiles], dtype=np.int64),
            flops=np.array([t.flops for t in self.tiles], dtype=np.float64),
            mem=mem, mem_per_tile=per_tile, noc=noc, hbm_powered_seconds=hbm, energy=ledger,
            traces=traces, dram_image=self.dram_image, program=self.program, sram_plan=self.plan,
        )

    def _hbm_powered(self, ticks):
        """Seconds each die's HBM stays powered: until the last miss plus the idle window."""
        out = {}
        if self.system.packaging.hbm_per_die == 0:
            return out
        window = self.system.compile.hbm_off_window * self.clock.tp
        dies = {}
        for t in self.tiles:
            if t.mem.cache is not None:
                dies[t.die] = max(dies.get(t.die, -1), t.mem.last_miss)
        for die, last in sorted(dies.items()):
            on_until = min(ticks, (last if last >= 0 else 0) + window)
            out[die] = self.clock.seconds(max(0, on_until))
        return out

    def _energy(self, per_tile, hbm) -> E.EnergyLedger:
        c0 = self.energy_constants
        cpu = E.scale_for_frequency(c0, self.clock.pu_freq, "pu")
        csr = E.scale_for_frequency(c0, self.clock.pu_freq, "sram")
        cnoc = E.scale_for_frequency(c0, self.clock.noc_freq, "noc")
        led = E.EnergyLedger()
        net = self.net
        link_bits = net.rbits[:, 1:]
        crossing = (net.lcls >= 1)
        for t in self.tiles:
            r = t.id
            led.record("pu", t.active, cpu.pu_op, r)
            led.record("sram", int(per_tile["sram_read_bits"][r]), csr.sram_read, r)
            led.record("sram", int(per_tile["sram_write_bits"][r]), csr.sram_write, r)
            led.record("cache_tag", int(per_tile["tag_checks"][r]), csr.tag_read_cmp, r)
            led.record("dram", int(per_tile["dram_read_bits"][r] + per_tile["dram_write_bits"][r]),
                       c0.dram_rw, r)
            led.record("noc_router", int(net.rbits[r, 0]), cnoc.noc_router, r)
            led.record("noc_wire", float((link_bits[r] * net.length[r]).sum()), cnoc.noc_wire, r)
            led.record("die_crossing", int(link_bits[r][crossing[r]].sum()), c0.die_to_die, r)
        cap = self.system.packaging.hbm_per_die
        for die, secs in hbm.items():
            E.accrue_refresh(led, cap, secs, c0, die)
        return led


def detect_quiescence(sim: Simulation) -> bool:
    """Empty queues, idle PUs and nothing in the network."""
    if sim.heap:
        return False
    if not sim.net.empty:
        return False
    return not any(t.local or any(t.iq[1:]) for t in sim.tiles)


def run(system, program: TaskProgram, **kwargs) -> RunResult:
    return Simulation(system, program, **kwargs).run()
