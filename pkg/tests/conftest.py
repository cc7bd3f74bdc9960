import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from chipletsim.dataset import from_edges, generate_rmat, partition
from chipletsim.execution import Simulation
from chipletsim.sysconfig import CompileConfig, PackagingConfig, TapeoutConfig, validate
from chipletsim.workloads import build_program


def make_system(gx=8, gy=8, die=None, dies=(1, 1), tapeout=None, packaging=None, **compile_kw):
    """Grid of gx x gy tiles; by default one die exactly the size of the grid."""
    dw, dh = die if die else (gx // dies[0], gy // dies[1])
    t = dict(tiles_per_die_x=dw, tiles_per_die_y=dh)
    t.update(tapeout or {})
    p = dict(dies_x=dies[0], dies_y=dies[1])
    p.update(packaging or {})
    c = dict(grid_x=gx, grid_y=gy)
    c.update(compile_kw)
    return validate(TapeoutConfig(**t), PackagingConfig(**p), CompileConfig(**c))


def best_root(ds):
    return int(np.argmax(ds.out_degree())) if ds.num_vertices else 0


def simulate(app, ds, system, sim_kw=None, **args):
    layout = partition(ds, system.num_tiles, system.compile.edge_ownership)
    if app in ("bfs", "sssp") and "root" not in args:
        args["root"] = best_root(ds)
    prog = build_program(app, ds, layout, **args)
    return Simulation(system, prog, **(sim_kw or {})).run()


def degenerate_graphs():
    """Empty, single vertex, path, star and disconnected graphs (weighted)."""
    def g(n, pairs, name):
        src = [a for a, _ in pairs]
        dst = [b for _, b in pairs]
        w = [(3 * i) % 7 + 1 for i in range(len(pairs))]
        return from_edges(n, np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64),
                          np.array(w, dtype=np.int64), name=name)

    return [
        g(0, [], "empty"),
        g(1, [], "single"),
        g(6, [(i, i + 1) for i in range(5)], "path"),
        g(9, [(0, i) for i in range(1, 9)] + [(i, 0) for i in range(1, 9)], "star"),
        g(10, [(0, 1), (1, 2), (2, 0), (5, 6), (6, 5), (8, 9)], "disconnected"),
    ]


@pytest.fixture(scope="session")
def rmat10():
    return generate_rmat(10, 16, 3)


@pytest.fixture
def system8():
    return make_system(8, 8)


# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
