import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_system, simulate
from chipletsim.dataset import from_edges, generate_rmat, partition
from chipletsim.execution import (OwnershipError, SimClock, Simulation, WatchdogTimeout,
                                  detect_quiescence, select_task)
from chipletsim.workloads import build_program, oracle


def test_select_task_examples():
    assert select_task([3, 10], [12, 12]) == 1
    assert select_task([0, 0, 0], [12, 12, 12]) is None
    assert select_task([6, 0, 6], [12, 12, 12]) == 2
    assert select_task([6, 0, 6], [12, 12, 12], runnable=[True, True, False]) == 0


@given(st.lists(st.integers(0, 20), min_size=1, max_size=5), st.integers(1, 20))
def test_select_task_picks_max_ratio(queued, cap):
    caps = [cap] * len(queued)
    k = select_task(queued, caps)
    if not any(queued):
        assert k is None
        return
    ratios = [min(q, cap) / cap for q in queued]
    assert queued[k] > 0 and ratios[k] == max(ratios)
    assert all(ratios[j] < ratios[k] for j in range(k + 1, len(queued)))


def test_clock_ratios():
    c = SimClock(2_000_000_000, 1_000_000_000)
    assert (c.tp, c.tn) == (1, 2)
    c = SimClock(750_000_000, 1_000_000_000)
    assert (c.tp, c.tn) == (4, 3)
    assert c.seconds(c.tick_hz) == 1.0


def _one_tile(app, ds, **kw):
    s = make_system(1, 1, **kw)
    prog = build_program(app, ds, partition(ds, 1), root=0)
    return s, prog, Simulation(s, prog)


def test_t3_hit_costs_base_plus_one_element():
    ds = from_edges(2, [0], [1])
    s, prog, sim = _one_tile("bfs", ds)
    t3 = prog.tasks[2]
    ctx = sim.ctx[0]
    ctx._begin(0, t3)
    assert t3.handler(ctx, (0, 5)) is None          # 5 > dist[0] = 0: no update
    assert ctx.now == t3.cost.base_cycles + t3.cost.cycles_per_element
    assert sim.tiles[0].mem.counters.stall_ticks == 0


def _stream_t2(prefetch):
    ds = from_edges(9, [0] * 8, list(range(1, 9)))
    s, prog, sim = _one_tile("bfs", ds, cached_arrays=("col_idx",), cache_lines=16,
                             stream_prefetch_depth=0, tsu_prefetch=False)
    t2 = prog.tasks[1]
    mem = sim.tiles[0].mem
    start = 0
    if prefetch:
        mem.prefetch("col_idx", 0, 0)
        start = 100
    ctx = sim.ctx[0]
    ctx._begin(start, t2)
    assert t2.handler(ctx, (0, 8, 1)) is None
    return ctx.now - start, t2.cost, mem


def test_t2_streaming_prefetched_has_no_stall():
    took, c, mem = _stream_t2(True)
    assert took == c.base_cycles + 8 * c.cycles_per_element
    assert mem.counters.stall_ticks == 0


def test_t2_streaming_cold_one_miss():
    took, c, mem = _stream_t2(False)
    assert mem.cache.misses == 1
    assert took == c.base_cycles + 8 * c.cycles_per_element + 50


def test_single_vertex_bfs():
    ds = from_edges(1, [], [])
    r = simulate("bfs", ds, make_system(2, 2), root=0)
    assert r.tasks.sum(axis=0).tolist() == [1, 0, 0]


def test_bfs_task_counts_match_recount():
    ds = generate_rmat(10, 8, 5)
    r = simulate("bfs", ds, make_system(8, 8), sim_kw=dict(track_ids=True))
    per_type = r.tasks.sum(axis=0)
    deg = ds.out_degree()
    assert per_type[2] == int((r.t1_runs * deg).sum())
    assert per_type[0] == int(r.t1_runs.sum())
    reached = oracle("bfs", ds, root=int(np.argmax(deg))).reached
    assert ((r.t1_runs > 0) == reached).all()
    assert per_type[2] >= int(deg[reached].sum())
    assert per_type[1] == r.spawned[1] and per_type[2] == r.spawned[2]


def test_bfs_on_tree_runs_each_vertex_once():
    ds = from_edges(15, list(range(7)) * 2, [2 * i + 1 for i in range(7)] + [2 * i + 2 for i in range(7)])
    r = simulate("bfs", ds, make_system(4, 4), root=0)
    assert r.tasks.sum(axis=0)[2] == 14


def test_pagerank_barriers():
    ds = from_edges(2, [0, 1], [1, 0])
    r = simulate("pagerank", ds, make_system(2, 2), epochs=2)
    assert r.barriers == 2 and len(r.epoch_values) == 2


class LedgerSim(Simulation):
    """Checks the message ledger every time the engine declares quiescence."""

    checks = 0

    def _barrier(self):
        assert detect_quiescence(self)
        assert not self.pending
        done = sum(t.tasks[k] for t in self.tiles for k in range(1, self.ntasks))
        assert done == sum(self.spawned[1:]) == len(self.delivered_ids)
        LedgerSim.checks += 1
        super()._barrier()


@settings(max_examples=10, deadline=None)
@given(st.integers(2, 60), st.integers(0, 200), st.integers(0, 10 ** 6))
def test_quiescence_never_with_unaccounted_messages(n, e, seed):
    rng = np.random.default_rng(seed)
    ds = from_edges(n, rng.integers(0, n, e), rng.integers(0, n, e))
    s = make_system(4, 4, iq_capacity=2, oq_capacity=(2, 2, 2))
    prog = build_program("pagerank", ds, partition(ds, 16), epochs=3)
    before = LedgerSim.checks
    r = LedgerSim(s, prog, track_ids=True).run()
    assert LedgerSim.checks - before == 3
    assert r.barriers == 3


def test_quiescence_examples():
    ds = generate_rmat(6, 4, 1)
    s = make_system(2, 2)
    sim = Simulation(s, build_program("bfs", ds, partition(ds, 4)))
    assert detect_quiescence(sim)
    sim.net.push(0, 0, 3, 1, 1, 0)
    assert not detect_quiescence(sim)


def test_small_queues_lose_nothing():
    ds = generate_rmat(9, 8, 7)
    s = make_system(4, 4, iq_capacity=2, oq_capacity=(2, 2, 2), router_buffer_entries=2)
    for app in ("bfs", "wcc", "spmv"):
        r = simulate(app, ds, s, sim_kw=dict(track_ids=True, check_noc=True))
        ref = oracle(app, ds, root=int(np.argmax(ds.out_degree())))
        assert np.allclose(r.output, ref.values, rtol=1e-12, atol=0)
        assert r.noc["conservation_errors"] == 0


def test_multi_pu_tiles():
    ds = generate_rmat(9, 8, 7)
    s = make_system(4, 4, tapeout={"pus_per_tile": 4})
    r = simulate("sssp", ds, s)
    assert r.output.tolist() == oracle("sssp", ds, root=int(np.argmax(ds.out_degree()))).values.tolist()


def test_deterministic_counters():
    ds = generate_rmat(9, 8, 7)
    s = make_system(4, 4, cached_arrays=("col_idx", "dist"), cache_lines=32)
    a, b = simulate("sssp", ds, s), simulate("sssp", ds, s)
    assert a.cycles == b.cycles
    assert a.mem == b.mem and a.noc == b.noc
    assert np.array_equal(a.tasks, b.tasks) and np.array_equal(a.stall_ticks, b.stall_ticks)


def test_watchdog_reports_snapshot():
    ds = generate_rmat(9, 8, 7)
    s = make_system(4, 4, watchdog_cycles=50)
    with pytest.raises(WatchdogTimeout) as e:
        simulate("bfs", ds, s)
    assert e.value.snapshot["cycle"] > 50


def test_ownership_violation_is_reported():
    ds = generate_rmat(8, 8, 1)
    s = make_system(4, 4)
    prog = build_program("bfs", ds, partition(ds, 16), root=int(np.argmax(ds.out_degree())))
    sim = Simulation(s, prog)
    sim.owner = lambda task_id, index: 0
    with pytest.raises(OwnershipError, match="tile 0"):
        sim.run()


def _spin_program(ds, layout, work):
    prog = build_program("wcc", ds, layout)
    t1 = prog.tasks[0]

    def spin(ctx, msg):
        for _ in range(work):
            ctx.step()
        return None

    return dataclasses.replace(prog, tasks=(dataclasses.replace(t1, handler=spin),) + prog.tasks[1:])


def test_pu_clock_domain_halves_compute_time():
    ds = from_edges(64, [], [])
    cycles = {}
    for f in (1_000_000_000, 2_000_000_000):
        s = make_system(4, 4, tapeout={"pu_freq_max": 2_000_000_000}, pu_freq_used=f)
        prog = _spin_program(ds, partition(ds, 16), 1000)
        cycles[f] = Simulation(s, prog).run().cycles
    assert abs(cycles[2_000_000_000] - cycles[1_000_000_000] / 2) <= 1


def test_oq_stall_policy_light_load_matches_yield():
    ds = generate_rmat(7, 4, 5)
    a = simulate("bfs", ds, make_system(4, 4, oq_full_policy="yield"))
    # deep IQs keep ejection flowing, so stalled PUs always resume
    b = simulate("bfs", ds, make_system(4, 4, oq_full_policy="stall", oq_capacity=(4, 4, 4), iq_capacity=128))
    assert b.yields.sum() > 0 and b.oq_stall_ticks.sum() > 0
    assert np.array_equal(a.output, b.output)


def test_oq_stall_policy_deadlock_is_reported_by_watchdog():
    # every PU holding a full OQ2 while the IQ3s they feed are full: a protocol deadlock
    ds = generate_rmat(10, 16, 1)
    s = make_system(8, 8, oq_full_policy="stall", watchdog_cycles=200_000)
    with pytest.raises(WatchdogTimeout) as e:
        simulate("spmv", ds, s)
    assert e.value.snapshot["queued_in_oqs"] > 0
