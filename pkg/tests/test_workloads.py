import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles as O
from conftest import degenerate_graphs, make_system, simulate
from chipletsim.dataset import from_edges, generate_rmat, partition
from chipletsim.workloads import (APPS, INF, WorkloadError, build_program, count_traversed_edges,
                                  oracle, spmv_vector, transpose)


def test_program_shapes():
    ds = generate_rmat(6, 4, 1)
    lay = partition(ds, 4)
    for app in APPS:
        p = build_program(app, ds, lay)
        assert len(p.tasks) == (2 if app == "histogram" else 3)
        assert p.epoch == (app == "pagerank")
        for t in p.tasks:
            assert t.routing_array in p.widths
            assert min(t.cost.base_cycles, t.cost.cycles_per_element, t.cost.flops_per_element) >= 0
    with pytest.raises(WorkloadError):
        build_program("dfs", ds, lay)


def test_bfs_path_example():
    ds = from_edges(3, [0, 1], [1, 2])
    r = simulate("bfs", ds, make_system(2, 2), root=0)
    assert r.output.tolist() == [0, 1, 2]


def test_sssp_triangle_example():
    ds = from_edges(3, [0, 0, 2], [1, 2, 1], [5, 1, 2])
    r = simulate("sssp", ds, make_system(2, 2), root=0)
    assert r.output[1] == 3
    assert oracle("sssp", ds, root=0).values[1] == 3


def test_histogram_unit_bins_example():
    ds = from_edges(6, [0, 0, 0], [1, 5, 1])
    r = simulate("histogram", ds, make_system(2, 2), bin_width=1)
    assert r.output[1] == 2 and r.output[5] == 1 and r.output.sum() == 3


def test_wcc_two_components():
    ds = from_edges(4, [0, 2], [1, 3])
    lab = oracle("wcc", ds).values.tolist()
    assert lab[0] == lab[1] and lab[2] == lab[3] and lab[0] != lab[2]
    assert simulate("wcc", ds, make_system(2, 2)).output.tolist() == lab


def test_spmv_identity():
    ds = from_edges(3, [0, 1, 2], [0, 1, 2], [1, 1, 1])
    x = spmv_vector(3)
    assert oracle("spmv", ds).values.tolist() == x
    assert simulate("spmv", ds, make_system(2, 2)).output.tolist() == x


def test_pagerank_two_cycle_symmetry():
    ds = from_edges(2, [0, 1], [1, 0])
    ref = oracle("pagerank", ds, epochs=20, damping=0.85)
    assert ref.values == pytest.approx([0.5, 0.5], rel=1e-12)
    r = simulate("pagerank", ds, make_system(2, 2), epochs=20)
    assert r.output == pytest.approx([0.5, 0.5], rel=1e-12)


def test_traversed_edges_examples():
    ds = from_edges(3, [0] * 50 + [1] * 50, [1] * 50 + [2] * 50)
    assert ds.num_edges == 100
    ref = oracle("bfs", ds, root=0)
    assert count_traversed_edges("bfs", ds, ref.reached) == 100
    iso = from_edges(4, [1, 2], [2, 3])
    assert count_traversed_edges("bfs", iso, oracle("bfs", iso, root=0).reached) == 0


def test_traversed_edges_matches_reachability_scan():
    ds = generate_rmat(10, 8, 4)
    root = int(np.argmax(ds.out_degree()))
    rp, ci = ds.row_ptr.tolist(), ds.col_idx.tolist()
    reach = O.reachable(rp, ci, root)
    brute = sum(rp[v + 1] - rp[v] for v in range(ds.num_vertices) if reach[v])
    assert count_traversed_edges("bfs", ds, oracle("bfs", ds, root=root).reached) == brute


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_package_oracles_match_independent_oracles(seed):
    ds = generate_rmat(9, 6, seed)
    rp, ci, w = ds.row_ptr.tolist(), ds.col_idx.tolist(), ds.values.tolist()
    root = int(np.argmax(ds.out_degree()))
    n = ds.num_vertices
    assert oracle("bfs", ds, root=root).values.tolist() == O.bfs_levels(rp, ci, root)
    assert oracle("sssp", ds, root=root).values.tolist() == O.bellman_ford(rp, ci, w, root)
    assert oracle("wcc", ds).values.tolist() == O.wcc_union_find(rp, ci)
    assert O.relerr(oracle("spmv", ds).values, O.spmv_dense(n, rp, ci, w, spmv_vector(n))) < 1e-12
    pr = oracle("pagerank", ds, epochs=5)
    for mine, ref in zip(pr.epochs, O.pagerank_power(n, rp, ci, 0.85, 5)):
        assert O.relerr(mine, ref) < 1e-12
    nb = -(-n // 4)
    assert oracle("histogram", ds, bin_width=4).values.tolist() == O.histogram_counts(ci, nb, 4).tolist()


def test_transpose_twice_is_identity_up_to_order():
    ds = generate_rmat(7, 4, 2)
    tt = transpose(transpose(ds))
    assert np.array_equal(tt.row_ptr, ds.row_ptr)
    for v in range(ds.num_vertices):
        a = sorted(zip(ds.col_idx[ds.row_ptr[v]:ds.row_ptr[v + 1]], ds.values[ds.row_ptr[v]:ds.row_ptr[v + 1]]))
        b = sorted(zip(tt.col_idx[tt.row_ptr[v]:tt.row_ptr[v + 1]], tt.values[tt.row_ptr[v]:tt.row_ptr[v + 1]]))
        assert a == b


@pytest.mark.parametrize("ds", degenerate_graphs(), ids=lambda d: d.name)
def test_degenerate_oracles(ds):
    rp, ci = ds.row_ptr.tolist(), ds.col_idx.tolist()
    if ds.num_vertices:
        assert oracle("bfs", ds, root=0).values.tolist() == O.bfs_levels(rp, ci, 0)
    assert oracle("wcc", ds).values.tolist() == O.wcc_union_find(rp, ci)


@pytest.mark.parametrize("app", ["bfs", "sssp", "wcc", "spmv", "histogram"])
def test_result_invariant_under_topology(app):
    ds = generate_rmat(9, 8, 11)
    outs = []
    for kw in (dict(topology_tile_noc="mesh"), dict(topology_tile_noc="torus"),
               dict(topology_tile_noc="torus", topology_die_noc="torus")):
        s = make_system(8, 8, dies=(4, 1), **kw) if "topology_die_noc" in kw else make_system(8, 8, **kw)
        outs.append(simulate(app, ds, s).output)
    assert all(np.array_equal(outs[0], o) for o in outs[1:])


def test_argument_errors():
    ds = generate_rmat(5, 2, 1)
    lay = partition(ds, 4)
    with pytest.raises(WorkloadError):
        build_program("bfs", ds, lay, root=ds.num_vertices)
    with pytest.raises(WorkloadError):
        build_program("pagerank", ds, lay, epochs=0)
    with pytest.raises(WorkloadError):
        build_program("bfs", ds, lay, colour="red")
    unweighted = from_edges(3, [0], [1])
    with pytest.raises(WorkloadError):
        build_program("sssp", unweighted, partition(unweighted, 1))


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 40), st.integers(0, 120), st.integers(0, 10 ** 6))
def test_random_small_graphs_match_oracle(n, e, seed):
    rng = np.random.default_rng(seed)
    ds = from_edges(n, rng.integers(0, n, e), rng.integers(0, n, e), rng.integers(1, 20, e))
    s = make_system(4, 4)
    root = int(rng.integers(0, n))
    assert simulate("bfs", ds, s, root=root).output.tolist() == oracle("bfs", ds, root=root).values.tolist()
    assert simulate("sssp", ds, s, root=root).output.tolist() == O.dijkstra(
        ds.row_ptr.tolist(), ds.col_idx.tolist(), ds.values.tolist(), root)
    assert simulate("wcc", ds, s).output.tolist() == O.wcc_union_find(ds.row_ptr.tolist(), ds.col_idx.tolist())
    assert INF == 2 ** 31 - 1
