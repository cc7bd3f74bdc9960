"""CSR datasets, RMAT generation, on-disk format and the static PGAS layout."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"CSRB"
VERSION = 1
_HEADER = struct.Struct("<4sIQQBBBx")
_DTYPES = {1: "<u1", 2: "<u2", 4: "<u4", 8: "<u8"}

RMAT_PROBS = (0.57, 0.19, 0.19, 0.05)


class DatasetError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CSRDataset:
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray | None = None
    name: str = ""
    rowptr_bytes: int = 8
    index_bytes: int = 4
    value_bytes: int = 4
    output_bytes: int = 4

    @property
    def num_vertices(self) -> int:
        return len(self.row_ptr) - 1

    @property
    def num_edges(self) -> int:
        return len(self.col_idx)

    @property
    def footprint(self) -> int:
        """Bytes of row_ptr, col_idx, values plus one output array of size V."""
        v, e = self.num_vertices, self.num_edges
        total = (v + 1) * self.rowptr_bytes + e * self.index_bytes + v * self.output_bytes
        if self.values is not None:
            total += e * self.value_bytes
        return total

    def out_degree(self) -> np.ndarray:
        return np.diff(self.row_ptr)

    def check(self) -> None:
        rp, ci = self.row_ptr, self.col_idx
        if len(rp) < 1:
            raise DatasetError("row_ptr must have V+1 >= 1 entries")
        if rp[0] != 0:
            raise DatasetError("row_ptr[0] must be 0")
        if np.any(np.diff(rp) < 0):
            raise DatasetError("row_ptr is non-monotone")
        if rp[-1] != len(ci):
            raise DatasetError(f"row_ptr[V]={rp[-1]} but E={len(ci)}")
        if len(ci) and (ci.min() < 0 or ci.max() >= self.num_vertices):
            raise DatasetError("col_idx out of range")
        if self.values is not None and len(self.values) != len(ci):
            raise DatasetError("values length differs from col_idx")

    def edges(self):
        """(src, dst) arrays in CSR order."""
        src = np.repeat(np.arange(self.num_vertices, dtype=np.int64), self.out_degree())
        return src, self.col_idx

    def symmetrized(self) -> "CSRDataset":
        """Every edge u->v also present as v->u (weights copied)."""
        src, dst = self.edges()
        w = self.values
        s2 = np.concatenate([src, dst])
        d2 = np.concatenate([dst, src])
        w2 = None if w is None else np.concatenate([w, w])
        return from_edges(self.num_vertices, s2, d2, w2, name=self.name + "+sym")

    def same_as(self, other: "CSRDataset") -> bool:
        if not (np.array_equal(self.row_ptr, other.row_ptr) and np.array_equal(self.col_idx, other.col_idx)):
            return False
        if (self.values is None) != (other.values is None):
            return False
        return self.values is None or np.array_equal(self.values, other.values)


def from_edges(num_vertices, src, dst, weights=None, name="") -> CSRDataset:
    """Build CSR from an edge list; edges of one row keep their input order."""
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    if len(src) != len(dst):
        raise DatasetError("src and dst lengths differ")
    if len(src) and (src.min() < 0 or src.max() >= num_vertices or dst.min() < 0 or dst.max() >= num_vertices):
        raise DatasetError("edge endpoint out of range")
    order = np.argsort(src, kind="stable")
    counts = np.bincount(src, minlength=num_vertices)
    row_ptr = np.zeros(num_vertices + 1, dtype=np.int64)
    np.cumsum(counts, out=row_ptr[1:])
    vals = None if weights is None else np.asarray(weights, dtype=np.int64)[order]
    ds = CSRDataset(row_ptr, dst[order], vals, name=name)
    ds.check()
    return ds


def generate_rmat(scale: int, edgefactor: int, seed: int, probs=RMAT_PROBS,
                  weighted: bool = True, max_weight: int = 255, permute: bool = True) -> CSRDataset:
    """Kronecker (RMAT) graph with V = 2**scale and E = edgefactor * V directed edges.

    Duplicates and self-loops are kept. The vertex ids are shuffled so that
    the high-degree vertices do not all land on tile 0.
    """
    if scale < 0 or edgefactor < 1:
        raise DatasetError("need scale >= 0 and edgefactor >= 1")
    a, b, c, d = probs
    if min(probs) < 0 or abs(a + b + c + d - 1.0) > 1e-9:
        raise DatasetError("RMAT probabilities must be non-negative and sum to 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    n = 1 << scale
    m = edgefactor * n
    src = np.zeros(m, dtype=np.int64)
    dst = np.zeros(m, dtype=np.int64)
    for bit in range(scale):
        r = rng.random(m)
        right = (r >= a) & (r < a + b) | (r >= a + b + c)
        down = r >= a + b
        src |= down.astype(np.int64) << bit
        dst |= right.astype(np.int64) << bit
    if permute:
        perm = rng.permutation(n).astype(np.int64)
        src, dst = perm[src], perm[dst]
    w = rng.integers(1, max_weight + 1, size=m, dtype=np.int64) if weighted else None
    return from_edges(n, src, dst, w, name=f"rmat{scale}x{edgefactor}s{seed}")


def write_csr(ds: CSRDataset, path) -> None:
    vb = ds.value_bytes if ds.values is not None else 0
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, ds.num_vertices, ds.num_edges,
                              ds.rowptr_bytes, ds.index_bytes, vb))
        fh.write(ds.row_ptr.astype(_DTYPES[ds.rowptr_bytes]).tobytes())
        fh.write(ds.col_idx.astype(_DTYPES[ds.index_bytes]).tobytes())
        if ds.values is not None:
            fh.write(ds.values.astype(_DTYPES[vb]).tobytes())


def load_csr(path) -> CSRDataset:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise DatasetError("malformed header: file too short")
    magic, version, v, e, rpw, ixw, vw = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DatasetError(f"malformed header: bad magic {magic!r}")
    if version != VERSION:
        raise DatasetError(f"malformed header: unsupported version {version}")
    if rpw not in _DTYPES or ixw not in _DTYPES or (vw and vw not in _DTYPES):
        raise DatasetError("malformed header: bad element width")
    need = _HEADER.size + (v + 1) * rpw + e * ixw + e * vw
    if len(raw) != need:
        raise DatasetError(f"malformed file: expected {need} bytes, found {len(raw)}")
    off = _HEADER.size
    rp = np.frombuffer(raw, _DTYPES[rpw], v + 1, off).astype(np.int64)
    off += (v + 1) * rpw
    ci = np.frombuffer(raw, _DTYPES[ixw], e, off).astype(np.int64)
    off += e * ixw
    vals = np.frombuffer(raw, _DTYPES[vw], e, off).astype(np.int64) if vw else None
    ds = CSRDataset(rp, ci, vals, name=str(path), rowptr_bytes=rpw, index_bytes=ixw,
                    value_bytes=vw or 4)
    ds.check()
    return ds


def read_edge_list(path, num_vertices=None) -> CSRDataset:
    """Whitespace separated ``src dst [weight]`` lines; ``#`` starts a comment."""
    src, dst, w = [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise DatasetError(f"{path}:{lineno}: expected 'src dst [weight]'")
            src.append(int(parts[0]))
            dst.append(int(parts[1]))
            if len(parts) == 3:
                w.append(int(parts[2]))
    if w and len(w) != len(src):
        raise DatasetError(f"{path}: weights given for only some edges")
    n = num_vertices if num_vertices is not None else (max(src + dst) + 1 if src else 0)
    return from_edges(n, src, dst, w or None, name=str(path))


VERTEX_ARRAYS = "vertex"
EDGE_ARRAYS = "edge"


@dataclass(frozen=True, eq=False)
class PGASLayout:
    """Static ownership of every array element.

    Vertex-indexed arrays use contiguous blocks of ``vertices_per_tile``.
    Edge arrays are split evenly by edge index (default) or follow the
    owner of their source row.
    """

    num_tiles: int
    num_vertices: int
    num_edges: int
    vertices_per_tile: int
    edges_per_tile: int
    edge_ownership: str = "even"
    # Only used for row ownership: first edge index of every tile (T+1 entries).
    edge_bounds: np.ndarray | None = None
    # Extra block-partitioned arrays (e.g. histogram bins): name -> length.
    extra: dict = field(default_factory=dict)

    def kind(self, array: str) -> str:
        if array in ("col_idx", "values"):
            return EDGE_ARRAYS
        if array in self.extra:
            return array
        return VERTEX_ARRAYS

    def length(self, array: str) -> int:
        k = self.kind(array)
        if k == EDGE_ARRAYS:
            return self.num_edges
        if k == VERTEX_ARRAYS:
            return self.num_vertices + 1 if array == "row_ptr" else self.num_vertices
        return self.extra[array]

    def block(self, array: str) -> int:
        k = self.kind(array)
        if k == VERTEX_ARRAYS:
            return self.vertices_per_tile
        if k == EDGE_ARRAYS:
            return self.edges_per_tile
        n = self.extra[array]
        return max(1, -(-n // self.num_tiles))

    def owner_of(self, array: str, index: int) -> int:
        n = self.length(array)
        if not 0 <= index < n:
            raise IndexError(f"{array}[{index}] outside extent {n}")
        k = self.kind(array)
        if k == EDGE_ARRAYS and self.edge_ownership == "row":
            return int(np.searchsorted(self.edge_bounds, index, side="right")) - 1
        if array == "row_ptr" and index == self.num_vertices:
            # the closing offset lives with the last row
            index -= 1
            if index < 0:
                return 0
        return min(index // self.block(array), self.num_tiles - 1)

    def owned_range(self, array: str, tile: int) -> tuple:
        """Half-open [lo, hi) of indices of ``array`` owned by ``tile``."""
        n = self.length(array)
        k = self.kind(array)
        if k == EDGE_ARRAYS and self.edge_ownership == "row":
            return int(self.edge_bounds[tile]), int(self.edge_bounds[tile + 1])
        if array == "row_ptr":
            lo, hi = self._vertex_range(tile)
            # the closing offset lives with the last row (or tile 0 of an empty graph)
            if hi == self.num_vertices and (lo < hi or (self.num_vertices == 0 and tile == 0)):
                hi += 1
            return lo, hi
        b = self.block(array)
        lo = min(tile * b, n)
        hi = min((tile + 1) * b, n)
        return lo, hi

    def _vertex_range(self, tile):
        b = self.vertices_per_tile
        return min(tile * b, self.num_vertices), min((tile + 1) * b, self.num_vertices)

    def edge_chunks(self, lo: int, hi: int):
        """Split the edge range [lo, hi) at owner boundaries: yields (owner, first, count)."""
        i = lo
        while i < hi:
            t = self.owner_of("col_idx", i)
            end = min(hi, self.owned_range("col_idx", t)[1])
            yield t, i, end - i
            i = end

    def with_array(self, name: str, length: int) -> "PGASLayout":
        extra = dict(self.extra)
        extra[name] = length
        return PGASLayout(self.num_tiles, self.num_vertices, self.num_edges, self.vertices_per_tile,
                          self.edges_per_tile, self.edge_ownership, self.edge_bounds, extra)


def partition(ds: CSRDataset, num_tiles: int, edge_ownership: str = "even") -> PGASLayout:
    if num_tiles < 1:
        raise DatasetError("need at least one tile")
    v, e = ds.num_vertices, ds.num_edges
    vpt = -(-v // num_tiles) if v else 1
    ept = max(1, -(-e // num_tiles))
    bounds = None
    if edge_ownership == "row":
        starts = np.minimum(np.arange(num_tiles + 1, dtype=np.int64) * vpt, v)
        bounds = ds.row_ptr[starts].astype(np.int64)
    elif edge_ownership != "even":
        raise DatasetError(f"unknown edge ownership rule {edge_ownership!r}")
    return PGASLayout(num_tiles, v, e, vpt, ept, edge_ownership, bounds)
