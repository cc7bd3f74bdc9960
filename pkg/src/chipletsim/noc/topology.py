"""Topology description, link tables and the routing helpers.

Output ports (same numbering in the cycle kernel)::

    0 +X   1 -X   2 +Y   3 -Y      local tile-NoC links
    4 +X   5 -X   6 +Y   7 -Y      die-NoC express links (die-edge routers only)
    8 eject

Die-NoC express links join the edge routers of consecutive dies in a row
(or column): the east-edge router of die d talks to the east-edge router of
die d+1, so one express hop crosses one die.  Routers with express ports
are radix 9, the rest radix 5.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .kernel import (EJECT, FLAG_EXP_X, FLAG_EXP_Y, NPARAMS, P_B, P_DH, P_DIEMODE, P_DW,
                     P_GX, P_GY, P_NDX, P_NDY, P_THR, P_TX, P_TY, route_kernel, express_flags)

PORT_NAMES = ("+X", "-X", "+Y", "-Y", "E+X", "E-X", "E+Y", "E-Y", "eject")
MODES = ("mesh", "torus")
DIE_MODES = ("mesh", "torus", "off")

HEADER_BITS = 32
PARAM_BITS = 32


def ring_distance(extent: int, src: int, dst: int, mode: str) -> int:
    """Hops between two positions of one dimension."""
    if not (0 <= src < extent and 0 <= dst < extent):
        raise ValueError("positions outside extent")
    d = abs(dst - src)
    if mode == "mesh":
        return d
    if mode == "torus":
        return min(d, extent - d)
    raise ValueError(f"unknown mode {mode!r}")


def message_bits(nparams: int) -> int:
    return HEADER_BITS + PARAM_BITS * nparams


def flits_for(bits: int, width: int) -> int:
    return max(1, -(-bits // width))


@dataclass(frozen=True)
class Flit:
    message_id: int
    head: bool
    tail: bool
    dst: int
    bits: int


def to_flits(message_id: int, dst: int, bits: int, width: int) -> list:
    """A message as one head, n body and one tail flit (or a single head-tail flit)."""
    n = flits_for(bits, width)
    return [Flit(message_id, i == 0, i == n - 1, dst, width) for i in range(n)]


@dataclass(frozen=True)
class TopologySpec:
    grid_x: int
    grid_y: int
    die_w: int
    die_h: int
    tile_mode: str = "torus"
    die_mode: str = "torus"
    die_threshold: int = 2
    buffer_slots: int = 4
    router_cycles: int = 1
    wire_cycles: int = 1
    express_wire_cycles: int = 1
    d2d_cycles: int = 4
    hop_mm: float = 1.0
    express_mm: float = 1.0
    width: int = 32
    # placement of the grid inside the node (tile coordinates)
    origin: tuple = (0, 0)

    def __post_init__(self):
        if self.tile_mode not in MODES:
            raise ValueError(f"tile-NoC mode must be one of {MODES}")
        if self.die_mode not in DIE_MODES:
            raise ValueError(f"die-NoC mode must be one of {DIE_MODES}")
        if self.grid_x < 1 or self.grid_y < 1:
            raise ValueError("empty grid")
        if self.buffer_slots < 2:
            raise ValueError("bubble flow control needs at least 2 buffer slots")

    @property
    def num_routers(self) -> int:
        return self.grid_x * self.grid_y

    @property
    def dw(self) -> int:
        return min(self.die_w, self.grid_x)

    @property
    def dh(self) -> int:
        return min(self.die_h, self.grid_y)

    @property
    def dies_x(self) -> int:
        return -(-self.grid_x // self.dw)

    @property
    def dies_y(self) -> int:
        return -(-self.grid_y // self.dh)

    def coords(self, r: int) -> tuple:
        return r % self.grid_x, r // self.grid_x

    def die_of(self, r: int) -> tuple:
        x, y = self.coords(r)
        return x // self.dw, y // self.dh

    def params(self) -> np.ndarray:
        p = np.zeros(NPARAMS, dtype=np.int64)
        p[P_GX], p[P_GY] = self.grid_x, self.grid_y
        p[P_DW], p[P_DH] = self.dw, self.dh
        p[P_TX] = p[P_TY] = 1 if self.tile_mode == "torus" else 0
        p[P_DIEMODE] = DIE_MODES.index(self.die_mode) + 1 if self.die_mode != "off" else 0
        p[P_THR] = self.die_threshold
        p[P_B] = self.buffer_slots
        p[P_NDX], p[P_NDY] = self.dies_x, self.dies_y
        return p

    def tables(self):
        """(nbr, lat, lcls, length_mm) arrays of shape [R, 8]."""
        R = self.num_routers
        gx, gy = self.grid_x, self.grid_y
        nbr = np.full((R, 8), -1, dtype=np.int64)
        lat = np.zeros((R, 8), dtype=np.int64)
        lcls = np.zeros((R, 8), dtype=np.int64)
        length = np.zeros((R, 8), dtype=np.float64)
        torus = self.tile_mode == "torus"
        for r in range(R):
            x, y = r % gx, r // gx
            cand = {
                0: (x + 1, y), 1: (x - 1, y), 2: (x, y + 1), 3: (x, y - 1),
            }
            for port, (nx, ny) in cand.items():
                ext = gx if port < 2 else gy
                pos = nx if port < 2 else ny
                if not 0 <= pos < ext:
                    if not torus or ext == 1:
                        continue
                    pos %= ext
                    nx, ny = (pos, ny) if port < 2 else (nx, pos)
                n = ny * gx + nx
                if n == r:
                    continue
                nbr[r, port] = n
                cross = self.die_of(n) != self.die_of(r)
                lat[r, port] = self.router_cycles + self.wire_cycles + (self.d2d_cycles if cross else 0)
                lcls[r, port] = 1 if cross else 0
                length[r, port] = self.hop_mm
            if self.die_mode == "off":
                continue
            dw, dh, ndx, ndy = self.dw, self.dh, self.dies_x, self.dies_y
            die_torus = self.die_mode == "torus"
            lx, ly = x % dw, y % dh
            ex = {}
            if lx == dw - 1:
                ex[4] = (x + dw, y, gx, 0)
            if lx == 0:
                ex[5] = (x - dw, y, gx, 0)
            if ly == dh - 1:
                ex[6] = (x, y + dh, gy, 1)
            if ly == 0:
                ex[7] = (x, y - dh, gy, 1)
            for port, (nx, ny, ext, dim) in ex.items():
                if (ndx if dim == 0 else ndy) < 3:
                    continue  # an express hop never pays off with fewer than 3 dies
                pos = nx if dim == 0 else ny
                if not 0 <= pos < ext:
                    if not (die_torus and torus):
                        continue
                    pos %= ext
                    nx, ny = (pos, ny) if dim == 0 else (nx, pos)
                n = ny * gx + nx
                nbr[r, port] = n
                lat[r, port] = self.router_cycles + self.express_wire_cycles + self.d2d_cycles
                lcls[r, port] = 2
                length[r, port] = self.express_mm
        return nbr, lat, lcls, length

    def edge_routers(self) -> set:
        nbr = self.tables()[0]
        return {r for r in range(self.num_routers) if (nbr[r, 4:] >= 0).any()}

    def wrap_bits(self) -> dict:
        """Router -> set of local ports whose link wraps around the torus extent."""
        nbr = self.tables()[0]
        gx = self.grid_x
        out = {}
        for r in range(self.num_routers):
            x, y = r % gx, r // gx
            bits = set()
            for port in range(4):
                n = nbr[r, port]
                if n < 0:
                    continue
                nx, ny = n % gx, n // gx
                step = {0: nx - x, 1: x - nx, 2: ny - y, 3: y - ny}[port]
                if step != 1:
                    bits.add(port)
            if bits:
                out[r] = bits
        return out


def route_select(src: int, dst: int, spec: TopologySpec) -> str:
    """'die_noc' when the message will be flagged for express die hops, else 'tile_noc'."""
    flags = express_flags(src, dst, spec.params())
    return "die_noc" if flags & (FLAG_EXP_X | FLAG_EXP_Y) else "tile_noc"


def next_hop(router: int, dst: int, spec: TopologySpec, flags: int | None = None, tables=None) -> int:
    """Output port a head flit takes at ``router`` (dimension-ordered)."""
    params = spec.params()
    nbr = tables[0] if tables is not None else spec.tables()[0]
    if flags is None:
        flags = express_flags(router, dst, params)
    return int(route_kernel(router, dst, flags, params, nbr))


def walk(src: int, dst: int, spec: TopologySpec, tables=None) -> list:
    """Routers visited from src to dst (inclusive), following next_hop."""
    tables = tables if tables is not None else spec.tables()
    params = spec.params()
    flags = express_flags(src, dst, params)
    path = [src]
    r = src
    for _ in range(4 * spec.num_routers + 8):
        port = int(route_kernel(r, dst, flags, params, tables[0]))
        if port == EJECT:
            return path
        r = int(tables[0][r, port])
        if r < 0:
            raise RuntimeError(f"route from {src} to {dst} took a missing link")
        path.append(r)
    raise RuntimeError(f"route from {src} to {dst} does not terminate")


def graph_hops(spec: TopologySpec, src: int, include_express: bool = False) -> np.ndarray:
    """BFS hop distances from src over the explicit link graph."""
    nbr = spec.tables()[0]
    ports = range(8) if include_express else range(4)
    dist = np.full(spec.num_routers, -1, dtype=np.int64)
    dist[src] = 0
    q = deque([src])
    while q:
        r = q.popleft()
        for p in ports:
            n = nbr[r, p]
            if n >= 0 and dist[n] < 0:
                dist[n] = dist[r] + 1
                q.append(n)
    return dist


def spec_from_system(system, buffer_slots=None) -> TopologySpec:
    """Topology for a validated system, with link latencies from its geometry."""
    c = system.compile
    t = system.tapeout
    geo = system.geometry
    period_ns = 1e9 / c.noc_freq_used
    wire_ns_per_mm = 0.05
    router_cycles = max(1, math.ceil(0.5 / period_ns - 1e-12))
    wire_cycles = math.ceil(geo.hop_length_tile_noc * wire_ns_per_mm / period_ns - 1e-12)
    ex_cycles = math.ceil(geo.hop_length_die_noc * wire_ns_per_mm / period_ns - 1e-12)
    d2d = math.ceil(4.0 / period_ns - 1e-12)
    return TopologySpec(
        grid_x=system.grid_x, grid_y=system.grid_y,
        die_w=t.tiles_per_die_x, die_h=t.tiles_per_die_y,
        tile_mode=c.topology_tile_noc, die_mode=c.topology_die_noc,
        die_threshold=c.die_noc_threshold,
        buffer_slots=buffer_slots or c.router_buffer_entries,
        router_cycles=router_cycles, wire_cycles=wire_cycles,
        express_wire_cycles=ex_cycles, d2d_cycles=d2d,
        hop_mm=geo.hop_length_tile_noc, express_mm=geo.hop_length_die_noc,
        width=t.noc_width,
    )
