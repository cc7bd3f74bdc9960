import heapq

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles as O
from conftest import make_system, simulate
from chipletsim.dataset import generate_rmat
from chipletsim.memhier import (AddressError, DirectMappedCache, DramChannel, MemoryConfigError,
                                Segment, SramPlan, TileMemory, effective_bandwidth, plan_sram,
                                sram_extra_cycles)


def tile_memory(n=4096, lines=64, channel=None, cached=("a", "b"), trace=False):
    segs = {name: Segment(name, 0, n, 4, name in cached) for name in ("a", "b", "s")}
    plan = SramPlan(512 * 1024, 0, {"s": 4 * n}, {k: 4 * n for k in cached}, lines)
    return TileMemory(0, segs, plan, channel or DramChannel(1, 50), 0, record_trace=trace)


def test_scratchpad_read_is_single_cycle():
    assert sram_extra_cycles(512 * 1024, 1e9) == 0
    assert sram_extra_cycles(512 * 1024, 2e9) == 1          # 0.82 ns needs two 0.5 ns cycles
    assert sram_extra_cycles(2 * 1024 * 1024, 1e9) == 1     # +1 ns for 4x the capacity
    m = tile_memory()
    assert m.read("s", 5, 10) == 10
    c = m.counters
    assert (c.reads, c.spm_accesses, c.sram_read_bits, c.tag_checks) == (1, 1, 32, 0)


def test_cold_cached_read_stalls_dram_latency():
    m = tile_memory()
    assert m.read("a", 0, 0) == 50
    c = m.counters
    assert c.stall_ticks == 50
    assert c.dram_read_bits == 512 and c.sram_write_bits == 512   # line fill
    assert c.tag_checks == 1 and m.cache.misses == 1


def test_streaming_eight_elements_one_miss():
    m = tile_memory()
    now = 0
    for i in range(8):
        now = m.read("a", i, now)
    assert m.cache.misses == 1 and m.counters.stall_ticks == 50


def test_prefetched_line_has_no_stall():
    m = tile_memory()
    m.prefetch("a", 0, 0)
    now = 100
    for i in range(8):
        now = m.read("a", i, now)
    assert now == 100 and m.counters.stall_ticks == 0
    assert m.cache.prefetch_useful == 1


def test_conflicting_lines_evict():
    m = tile_memory(lines=64)
    m.read("a", 0, 0)
    m.read("a", 64 * 64 // 4, 100)       # 64 lines further: same index
    assert m.cache.misses == 2 and m.cache.evictions == 1


def test_tsu_prefetch_counts():
    ch = DramChannel(1, 50)
    m = tile_memory(channel=ch)
    assert m.prefetch("a", 10, 0) and m.prefetch("b", 10, 0)
    assert ch.transfers == 2
    assert not m.prefetch("a", 10, 1)    # resident
    assert not m.prefetch("s", 10, 1)    # scratchpad: nothing to prefetch
    assert ch.transfers == 2


def test_out_of_segment_access_raises():
    with pytest.raises(AddressError):
        tile_memory(n=16).read("a", 16, 0)


def test_channel_latency_and_fifo():
    ch = DramChannel(1, 50)
    assert ch.request(0) == 50
    assert ch.request(0) == 51


def test_channel_out_of_order_booking():
    ch = DramChannel(2, 10)
    assert ch.request(100) == 110
    assert ch.request(10) == 20
    assert ch.request(100) == 112


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 500), max_size=200))
def test_channel_never_double_books(times):
    ch = DramChannel(3, 7)
    done = [ch.request(t) for t in times]
    assert len(set(done)) == len(done)
    for t, d in zip(times, done):
        assert d >= t + 7


def test_channel_saturation_128_tiles():
    # 128 tiles share one 64 GB/s channel (1 line per ns) and stream without pause
    ch = DramChannel(1, 50)
    mems = [tile_memory(n=1 << 16, lines=16, channel=ch, cached=("a",)) for _ in range(128)]
    heap = [(0, t, 0) for t in range(128)]
    horizon = 200_000
    while heap:
        now, t, i = heapq.heappop(heap)
        if now >= horizon:
            continue
        done = mems[t].read("a", i, now)
        heapq.heappush(heap, (done + 1, t, (i + 1) % (1 << 16)))
    per_tile = np.mean([m.cache.misses * 64 / (horizon * 1e-9) for m in mems])
    assert per_tile == pytest.approx(0.5e9, rel=0.05)


def test_effective_bandwidth_examples():
    assert effective_bandwidth(1.0, 100, 4) == 100
    assert effective_bandwidth(0.0, 100, 4) == 4
    assert effective_bandwidth(0.95, 100, 4) == pytest.approx(95.2)
    with pytest.raises(ValueError):
        effective_bandwidth(1.5, 1, 1)


@given(st.floats(0, 1), st.floats(0, 1e3), st.floats(0, 1e3))
def test_effective_bandwidth_between_bounds(h, a, b):
    v = effective_bandwidth(h, a, b)
    assert min(a, b) - 1e-9 <= v <= max(a, b) + 1e-9


def test_cache_matches_reference_on_random_accesses():
    rng = np.random.default_rng(1)
    c = DirectMappedCache(128, record_trace=True)
    fetch = lambda line, now: now + 50
    wb = lambda line, now: None
    lines = rng.integers(0, 1024, 100_000)
    ops = rng.integers(0, 3, 100_000)
    for i, (ln, op) in enumerate(zip(lines.tolist(), ops.tolist())):
        if op == 2:
            c.prefetch(ln, i, fetch, wb)
        else:
            c.access(ln, op == 1, i, fetch, wb)
    ref = O.RefCache(128).replay(c.trace)
    assert (c.hits, c.misses, c.evictions, c.writebacks) == (ref.hits, ref.misses, ref.evictions, ref.writebacks)


def test_plan_sram_modes():
    s = make_system(4, 4)
    p = plan_sram(s, {"col_idx": 1000, "dist": 100})
    assert not p.cached and p.used <= s.tapeout.sram_per_tile
    big = plan_sram(s, {"col_idx": 10 ** 6, "dist": 10 ** 5})
    assert set(big.cached) == {"col_idx", "dist"}
    assert big.cache_lines & (big.cache_lines - 1) == 0 and big.used <= s.tapeout.sram_per_tile
    nodram = make_system(4, 4, packaging={"hbm_per_die": 0})
    with pytest.raises(MemoryConfigError):
        plan_sram(nodram, {"col_idx": 10 ** 6})
    explicit = make_system(4, 4, cached_arrays=("col_idx",), cache_lines=32)
    p = plan_sram(explicit, {"col_idx": 4096, "dist": 64})
    assert p.is_cached("col_idx") and not p.is_cached("dist") and p.cache_lines == 32


def test_stream_prefetch_reduces_stalls():
    ds = generate_rmat(10, 16, 3)
    kw = dict(cached_arrays=("row_ptr", "col_idx", "values", "dist"), cache_lines=64, tsu_prefetch=False)
    off = simulate("sssp", ds, make_system(8, 8, stream_prefetch_depth=0, **kw))
    on = simulate("sssp", ds, make_system(8, 8, stream_prefetch_depth=1, **kw))
    assert on.output.tolist() == off.output.tolist()
    assert on.stall_ticks.sum() < off.stall_ticks.sum()


def test_cached_run_writes_back_to_dram_image():
    ds = generate_rmat(9, 8, 2)
    s = make_system(4, 4, cached_arrays=("dist", "col_idx"), cache_lines=16)
    r = simulate("bfs", ds, s, sim_kw=dict(keep_dram_image=True))
    assert r.dram_image["dist"] == r.output.tolist()
