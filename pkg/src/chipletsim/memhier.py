"""Per-tile SRAM (scratchpad and/or one direct-mapped cache) over per-die DRAM channels."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

LINE_BYTES = 64          # 512-bit line, the memory-controller bitline width
LINE_META_BYTES = 4      # tag + valid + dirty, stored in SRAM next to the data
SRAM_NS = 0.82
DRAM_LATENCY_NS = 50.0
CHANNEL_BW = 64e9        # bytes/s per channel


class MemoryConfigError(ValueError):
    pass


class AddressError(IndexError):
    pass


@dataclass(frozen=True)
class SramPlan:
    total: int
    reservation: int
    # array name -> bytes per tile, split by placement
    scratchpad: dict
    cached: dict
    cache_lines: int
    line_bytes: int = LINE_BYTES

    @property
    def cache_bytes(self) -> int:
        return self.cache_lines * (self.line_bytes + LINE_META_BYTES)

    @property
    def used(self) -> int:
        return self.reservation + sum(self.scratchpad.values()) + self.cache_bytes

    def is_cached(self, name: str) -> bool:
        return name in self.cached


def queue_reservation(compile_cfg, ntasks: int = 3, msg_bytes: int = 16, program_bytes: int = 4096) -> int:
    return program_bytes + msg_bytes * (compile_cfg.iq_capacity * ntasks + sum(compile_cfg.oq_capacity))


def _round_up(n: int, a: int) -> int:
    return -(-n // a) * a


def plan_sram(system, array_bytes: dict, ntasks: int = 3) -> SramPlan:
    """Place each array in scratchpad or behind the cache.

    ``array_bytes`` is the worst-case per-tile footprint of every array.
    With ``cached_arrays == "auto"`` everything goes to scratchpad when it
    fits, otherwise everything is cached with the largest power-of-two line
    count that fits next to the reservation.
    """
    c = system.compile
    total = system.tapeout.sram_per_tile
    reserve = queue_reservation(c, ntasks)
    sizes = {k: _round_up(v, LINE_BYTES) for k, v in array_bytes.items()}
    free = total - reserve
    if free <= 0:
        raise MemoryConfigError(f"SRAM of {total} B cannot hold the queues and program ({reserve} B)")
    hbm = system.packaging.hbm_per_die
    if c.cached_arrays == "auto":
        if sum(sizes.values()) <= free and not c.cache_lines:
            return SramPlan(total, reserve, dict(sizes), {}, 0)
        if hbm == 0:
            raise MemoryConfigError(
                f"dataset needs {sum(sizes.values())} B per tile but only {free} B of SRAM is free "
                "and there is no DRAM to cache it from")
        cached_names = list(sizes)
    else:
        unknown = [a for a in c.cached_arrays if a not in sizes]
        if unknown:
            raise MemoryConfigError(f"cached_arrays names unknown arrays {unknown}; have {sorted(sizes)}")
        cached_names = list(c.cached_arrays)
    spm = {k: v for k, v in sizes.items() if k not in cached_names}
    cached = {k: v for k, v in sizes.items() if k in cached_names}
    left = free - sum(spm.values())
    if cached and hbm == 0:
        raise MemoryConfigError("cached segments need DRAM (hbm_per_die = 0)")
    if cached:
        if c.cache_lines:
            lines = c.cache_lines
        else:
            fit = left // (LINE_BYTES + LINE_META_BYTES)
            if fit < 1:
                raise MemoryConfigError("no SRAM left for the cache")
            lines = 1 << (fit.bit_length() - 1)
        plan = SramPlan(total, reserve, spm, cached, lines)
    else:
        plan = SramPlan(total, reserve, spm, {}, 0)
    if plan.used > total:
        raise MemoryConfigError(
            f"SRAM plan needs {plan.used} B (scratchpad {sum(spm.values())}, cache {plan.cache_bytes}, "
            f"reserved {reserve}) but a tile has {total} B")
    tiles_per_die = system.tiles_per_die
    slice_bytes = hbm // tiles_per_die if hbm else 0
    if cached and sum(cached.values()) > slice_bytes:
        raise MemoryConfigError(f"cached arrays need {sum(cached.values())} B per tile but the DRAM vault "
                                f"slice is {slice_bytes} B")
    return plan


def sram_extra_cycles(sram_bytes: int, pu_freq: float) -> int:
    """Cycles beyond the first one for an SRAM access (+1 ns per 4x above 512 KiB)."""
    ns = SRAM_NS
    base = 512 * 1024
    size = sram_bytes
    while size > base:
        size /= 4
        ns += 1.0
    return max(0, math.ceil(ns * pu_freq / 1e9 - 1e-9) - 1)


def effective_bandwidth(hit_rate: float, sram_bw: float, dram_bw: float) -> float:
    if not 0.0 <= hit_rate <= 1.0:
        raise ValueError("hit rate must be in [0, 1]")
    return sram_bw * hit_rate + dram_bw * (1.0 - hit_rate)


class DramChannel:
    """One memory-controller channel: one line transfer per service slot, FIFO in time.

    Requests may be booked out of time order (a task books all of its
    misses when it starts), so the channel keeps a calendar of taken slots
    and serves each request in the first free slot at or after its issue
    time.  Completion = slot start + fixed latency.
    """

    def __init__(self, service_ticks: int, latency_ticks: int):
        self.service = max(1, service_ticks)
        self.latency = latency_ticks
        self._next = {}
        self.transfers = 0
        self.last_request = -1
        self._floor = 0

    def _find(self, k: int) -> int:
        nxt = self._next
        root = k
        while root in nxt:
            root = nxt[root]
        while k in nxt and nxt[k] != root:
            nxt[k], k = root, nxt[k]
        return root

    def request(self, now: int) -> int:
        k = max(-(-now // self.service), self._floor)
        slot = self._find(k)
        self._next[slot] = slot + 1
        self.transfers += 1
        if now > self.last_request:
            self.last_request = now
        return slot * self.service + self.latency

    def prune(self, now: int) -> None:
        """Forget slots strictly before ``now``; later requests never look at them."""
        k = now // self.service
        if k <= self._floor:
            return
        self._floor = k
        self._next = {a: b for a, b in self._next.items() if a >= k}


class DirectMappedCache:
    def __init__(self, lines: int, record_trace: bool = False):
        if lines < 1:
            raise MemoryConfigError("cache needs at least one line")
        self.lines = lines
        self.tags = [-1] * lines
        self.dirty = bytearray(lines)
        self.fill = [0] * lines
        self.prefetched = bytearray(lines)
        self.hits = 0
        self.misses = 0
        self.evictions = 0
        self.writebacks = 0
        self.prefetch_issued = 0
        self.prefetch_useful = 0
        self.tag_checks = 0
        self.trace = [] if record_trace else None

    def _install(self, line, idx, now, fetch, writeback, prefetch):
        old = self.tags[idx]
        if old >= 0:
            self.evictions += 1
            if self.dirty[idx]:
                self.writebacks += 1
                writeback(old, now)
        self.tags[idx] = line
        self.dirty[idx] = 0
        self.prefetched[idx] = 1 if prefetch else 0
        self.fill[idx] = fetch(line, now)

    def access(self, line: int, write: bool, now: int, fetch, writeback) -> int:
        """Demand access; returns the tick at which the data is available."""
        if self.trace is not None:
            self.trace.append((line, "W" if write else "R"))
        idx = line % self.lines
        self.tag_checks += 1
        if self.tags[idx] == line:
            self.hits += 1
            if self.prefetched[idx]:
                self.prefetch_useful += 1
                self.prefetched[idx] = 0
            ready = self.fill[idx]
        else:
            self.misses += 1
            self._install(line, idx, now, fetch, writeback, False)
            ready = self.fill[idx]
        if write:
            self.dirty[idx] = 1
        return ready if ready > now else now

    def prefetch(self, line: int, now: int, fetch, writeback) -> bool:
        """Non-blocking fill; coalesces with a resident or in-flight copy."""
        if self.trace is not None:
            self.trace.append((line, "P"))
        idx = line % self.lines
        self.tag_checks += 1
        if self.tags[idx] == line:
            return False
        self.prefetch_issued += 1
        self._install(line, idx, now, fetch, writeback, True)
        return True

    def dirty_lines(self) -> list:
        return [self.tags[i] for i in range(self.lines) if self.dirty[i] and self.tags[i] >= 0]

    @property
    def hit_rate(self) -> float:
        n = self.hits + self.misses
        return self.hits / n if n else 1.0


@dataclass
class Segment:
    name: str
    lo: int          # first global index owned by the tile
    n: int           # number of owned elements
    width: int       # bytes per element
    cached: bool
    base: int = 0    # byte offset in the tile's DRAM vault slice (cached segments)


@dataclass
class MemCounters:
    sram_read_bits: int = 0
    sram_write_bits: int = 0
    tag_checks: int = 0
    dram_read_bits: int = 0
    dram_write_bits: int = 0
    reads: int = 0
    writes: int = 0
    bytes_read: int = 0
    bytes_written: int = 0
    stall_ticks: int = 0
    spm_accesses: int = 0


def place_segments(segments: dict, cache_lines: int) -> int:
    """Assign vault offsets to the cached segments; returns the bytes used.

    Segment i starts on a line whose cache index is i * lines / n, so
    element k of two equally sized arrays streamed together does not evict
    element k of the other on every access.
    """
    cached = [s for s in segments.values() if s.cached]
    n = len(cached)
    base = 0
    for i, s in enumerate(cached):
        if cache_lines > 1:
            want = i * cache_lines // n
            pad = (want - base // LINE_BYTES) % cache_lines
            base += pad * LINE_BYTES
        s.base = base
        base += _round_up(s.n * s.width, LINE_BYTES)
    return base


class TileMemory:
    """The memory a tile's PU sees: owned array segments, the D$ and its DRAM channel."""

    def __init__(self, tile: int, segments: dict, plan: SramPlan, channel: DramChannel | None,
                 sram_extra_ticks: int, record_trace: bool = False, data: dict | None = None,
                 shadow: dict | None = None):
        self.tile = tile
        self.segments = segments
        self.plan = plan
        self.channel = channel
        self.sram_extra = sram_extra_ticks
        self.counters = MemCounters()
        self.cache = DirectMappedCache(plan.cache_lines, record_trace) if plan.cached and any(
            s.cached for s in segments.values()) else None
        self.vault_bytes = place_segments(segments, plan.cache_lines)
        self.last_miss = -1
        self.data = data
        # DRAM image shared by all tiles (array name -> list); only written on writeback
        self.shadow = shadow if data is not None else None

    # DRAM hooks -------------------------------------------------------------
    def _fetch(self, line, now):
        self.counters.dram_read_bits += LINE_BYTES * 8
        self.counters.sram_write_bits += LINE_BYTES * 8
        if now > self.last_miss:
            self.last_miss = now
        return self.channel.request(now)

    def _writeback(self, line, now):
        self.counters.dram_write_bits += LINE_BYTES * 8
        self.counters.sram_read_bits += LINE_BYTES * 8
        self.channel.request(now)
        if self.shadow is not None:
            self._copy_line(line)

    def _copy_line(self, line):
        lo_b, hi_b = line * LINE_BYTES, (line + 1) * LINE_BYTES
        for name, s in self.segments.items():
            if not s.cached:
                continue
            seg_hi = s.base + s.n * s.width
            if hi_b <= s.base or lo_b >= seg_hi:
                continue
            a = max(0, (lo_b - s.base) // s.width)
            b = min(s.n, -(-(hi_b - s.base) // s.width))
            self.shadow[name][s.lo + a:s.lo + b] = self.data[name][s.lo + a:s.lo + b]

    # accesses -----------------------------------------------------------------
    def _seg(self, array, index):
        s = self.segments.get(array)
        if s is None:
            raise AddressError(f"tile {self.tile} has no segment of array {array!r}")
        off = index - s.lo
        if not 0 <= off < s.n:
            raise AddressError(f"tile {self.tile}: {array}[{index}] outside owned range "
                               f"[{s.lo}, {s.lo + s.n})")
        return s, off

    def line_of(self, array, index) -> int:
        s, off = self._seg(array, index)
        return (s.base + off * s.width) // LINE_BYTES

    def access(self, array: str, index: int, now: int, write: bool = False) -> int:
        """Returns the tick at which the access completes (>= now)."""
        s, off = self._seg(array, index)
        c = self.counters
        bits = s.width * 8
        if write:
            c.writes += 1
            c.bytes_written += s.width
            c.sram_write_bits += bits
        else:
            c.reads += 1
            c.bytes_read += s.width
            c.sram_read_bits += bits
        if not s.cached:
            c.spm_accesses += 1
            return now + self.sram_extra
        c.tag_checks += 1
        line = (s.base + off * s.width) // LINE_BYTES
        ready = self.cache.access(line, write, now, self._fetch, self._writeback)
        done = max(ready, now) + self.sram_extra
        c.stall_ticks += done - now - self.sram_extra
        return done

    def read(self, array, index, now):
        return self.access(array, index, now, False)

    def write(self, array, index, now):
        return self.access(array, index, now, True)

    def prefetch(self, array: str, index: int, now: int) -> bool:
        s = self.segments.get(array)
        if s is None or not s.cached:
            return False
        off = index - s.lo
        if not 0 <= off < s.n:
            return False
        self.counters.tag_checks += 1
        line = (s.base + off * s.width) // LINE_BYTES
        return self.cache.prefetch(line, now, self._fetch, self._writeback)

    def stream(self, array: str, index: int, now: int, depth: int, first: bool) -> int:
        """Demand read of a streamed element, prefetching ahead at every new line."""
        s, off = self._seg(array, index)
        if s.cached and depth and (first or (off * s.width) % LINE_BYTES == 0):
            done = self.access(array, index, now, False)
            self.prefetch_ahead(array, index, now, depth)
            return done
        return self.access(array, index, now, False)

    def prefetch_ahead(self, array: str, index: int, now: int, depth: int) -> None:
        """Next-line prefetch of the ``depth`` lines after the one holding ``index``."""
        s = self.segments.get(array)
        if s is None or not s.cached or depth <= 0:
            return
        off = index - s.lo
        line = (s.base + off * s.width) // LINE_BYTES
        last = (s.base + (s.n - 1) * s.width) // LINE_BYTES
        for k in range(1, depth + 1):
            if line + k > last:
                break
            self.counters.tag_checks += 1
            self.cache.prefetch(line + k, now, self._fetch, self._writeback)

    def flush(self) -> int:
        """Write back every dirty line (end of run); returns how many."""
        if self.cache is None:
            return 0
        n = 0
        for i in range(self.cache.lines):
            if self.cache.dirty[i] and self.cache.tags[i] >= 0:
                if self.shadow is not None:
                    self._copy_line(self.cache.tags[i])
                self.cache.dirty[i] = 0
                n += 1
        return n


def channel_of(tile_in_die: int, channels: int) -> int:
    return tile_in_die % channels


@dataclass
class DieMemory:
    """The DRAM channels of one die's HBM stack."""

    die: int
    channels: list = field(default_factory=list)

    @property
    def last_request(self) -> int:
        return max((c.last_request for c in self.channels), default=-1)

    @property
    def transfers(self) -> int:
        return sum(c.transfers for c in self.channels)
