"""Configuration knobs, validation and derived physical geometry.

The knobs are split in three tiers, following when each decision is taken:
at tapeout (silicon), at packaging time, and at compile time (per run).
Everything downstream consumes a :class:`ValidatedSystem`.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields, replace
from typing import Any

import yaml

KiB = 1024
MiB = 1024 * KiB
GiB = 1024 * MiB

# SRAM density in bytes per mm^2 (3.5 MB/mm^2, MB taken as 2^20 bytes).
SRAM_DENSITY = 3.5 * MiB

TOPOLOGIES = ("mesh", "torus")
DIE_TOPOLOGIES = ("mesh", "torus", "off")


@dataclass(frozen=True)
class TapeoutConfig:
    tiles_per_die_x: int = 32
    tiles_per_die_y: int = 32
    pus_per_tile: int = 1
    sram_per_tile: int = 512 * KiB
    noc_width: int = 32
    pu_freq_max: int = 1_000_000_000
    noc_freq_max: int = 1_000_000_000
    mem_channels_per_die: int = 8
    router_buffer_entries: int = 4
    sram_area_fraction: float = 0.6


@dataclass(frozen=True)
class PackagingConfig:
    dies_x: int = 1
    dies_y: int = 1
    hbm_per_die: int = 8 * GiB
    io_bandwidth: float = 64e9
    packages_x: int = 1
    packages_y: int = 1


@dataclass(frozen=True)
class CompileConfig:
    # 0 means "use the whole node" in that dimension.
    grid_x: int = 0
    grid_y: int = 0
    iq_capacity: int = 16
    # Indexed by producing task: OQ1 holds what task 1 emits, and so on.
    oq_capacity: tuple = (12, 12, 12)
    # "auto" maps everything to scratchpad when it fits, else caches all arrays.
    cached_arrays: Any = "auto"
    # Direct-mapped D$ size in 64-byte lines; 0 sizes it from the free SRAM.
    cache_lines: int = 0
    topology_tile_noc: str = "torus"
    topology_die_noc: str = "torus"
    die_noc_threshold: int = 2
    router_buffer_entries: int = 4
    pu_freq_used: int = 1_000_000_000
    noc_freq_used: int = 1_000_000_000
    # What a PU does when its output queue fills mid-task: "yield" parks the rest
    # of the task and frees the PU; "stall" holds the PU until the router drains a
    # slot, which can deadlock once every IQ on a cycle of tiles is full.
    oq_full_policy: str = "yield"
    tsu_prefetch: bool = True
    stream_prefetch_depth: int = 2
    hbm_off_window: int = 100_000
    watchdog_cycles: int = 1_000_000_000
    edge_ownership: str = "even"


@dataclass(frozen=True)
class Violation:
    knob: str
    rule: str

    def __str__(self) -> str:
        return f"{self.knob}: {self.rule}"


class ConstraintViolation(ValueError):
    """Raised by :func:`validate`; carries every violated rule, not just the first."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


@dataclass(frozen=True)
class Geometry:
    sram_area: float
    tile_area: float
    tile_pitch: float
    die_width: float
    die_height: float
    die_area: float
    hop_length_tile_noc: float
    hop_length_die_noc: float
    edge_router_tiles: frozenset

    def radix(self, tile_id: int) -> int:
        return 9 if tile_id in self.edge_router_tiles else 5


def _is_pow2(v) -> bool:
    return isinstance(v, int) and v >= 1 and (v & (v - 1)) == 0


def _check(tapeout, packaging, compile_) -> list:
    out = []

    def bad(knob, rule):
        out.append(Violation(knob, rule))

    def num(section, name, kind=int, minimum=None):
        value = getattr(section, name, None)
        label = {TapeoutConfig: "tapeout", PackagingConfig: "packaging",
                 CompileConfig: "compile"}[type(section)] + "." + name
        if isinstance(value, bool) or not isinstance(value, (int, float) if kind is float else int):
            bad(label, f"must be {'a number' if kind is float else 'an integer'}")
            return None
        if minimum is not None and value < minimum:
            bad(label, f"must be >= {minimum}")
            return None
        return value

    for sec, cls in ((tapeout, TapeoutConfig), (packaging, PackagingConfig), (compile_, CompileConfig)):
        if not isinstance(sec, cls):
            bad(cls.__name__, f"expected {cls.__name__}, got {type(sec).__name__}")
    if out:
        return out

    tx = num(tapeout, "tiles_per_die_x", minimum=1)
    ty = num(tapeout, "tiles_per_die_y", minimum=1)
    if tx is not None and not _is_pow2(tx):
        bad("tapeout.tiles_per_die_x", "must be a power of two")
    if ty is not None and not _is_pow2(ty):
        bad("tapeout.tiles_per_die_y", "must be a power of two")
    num(tapeout, "pus_per_tile", minimum=1)
    num(tapeout, "sram_per_tile", minimum=1)
    if tapeout.noc_width not in (32, 64, 128):
        bad("tapeout.noc_width", "must be one of 32, 64, 128 bits")
    pu_max = num(tapeout, "pu_freq_max", minimum=1)
    noc_max = num(tapeout, "noc_freq_max", minimum=1)
    num(tapeout, "mem_channels_per_die", minimum=1)
    rb_max = num(tapeout, "router_buffer_entries", minimum=2)
    frac = num(tapeout, "sram_area_fraction", kind=float)
    if frac is not None and not 0 < frac <= 1:
        bad("tapeout.sram_area_fraction", "must be in (0, 1]")

    dx = num(packaging, "dies_x", minimum=1)
    dy = num(packaging, "dies_y", minimum=1)
    hbm = num(packaging, "hbm_per_die", minimum=0)
    num(packaging, "io_bandwidth", kind=float, minimum=0)
    px = num(packaging, "packages_x", minimum=1)
    py = num(packaging, "packages_y", minimum=1)

    gx = num(compile_, "grid_x", minimum=0)
    gy = num(compile_, "grid_y", minimum=0)
    if None not in (tx, ty, dx, dy, px, py, gx, gy):
        node_x, node_y = tx * dx * px, ty * dy * py
        gx = gx or node_x
        gy = gy or node_y
        if gx > node_x:
            bad("compile.grid_x", f"grid exceeds node ({gx} > {node_x} tiles)")
        if gy > node_y:
            bad("compile.grid_y", f"grid exceeds node ({gy} > {node_y} tiles)")
        if gx > tx and gx % tx:
            bad("compile.grid_x", "a grid spanning several dies must cover whole dies")
        if gy > ty and gy % ty:
            bad("compile.grid_y", "a grid spanning several dies must cover whole dies")

    iq = num(compile_, "iq_capacity")
    if iq is not None and iq < 2:
        bad("compile.iq_capacity", "queue depth < 2 (bubble injection needs slack)")
    oqs = compile_.oq_capacity
    if not isinstance(oqs, (tuple, list)) or not oqs:
        bad("compile.oq_capacity", "must be a non-empty list of per-task depths")
    else:
        for i, q in enumerate(oqs):
            if isinstance(q, bool) or not isinstance(q, int) or q < 2:
                bad("compile.oq_capacity", f"OQ{i + 1} queue depth < 2 (bubble injection needs slack)")
    if compile_.oq_full_policy not in ("stall", "yield"):
        bad("compile.oq_full_policy", "must be 'stall' or 'yield'")
    if compile_.topology_tile_noc not in TOPOLOGIES:
        bad("compile.topology_tile_noc", f"must be one of {TOPOLOGIES}")
    if compile_.topology_die_noc not in DIE_TOPOLOGIES:
        bad("compile.topology_die_noc", f"must be one of {DIE_TOPOLOGIES}")
    thr = num(compile_, "die_noc_threshold", minimum=1)
    if thr is not None and thr < 2:
        bad("compile.die_noc_threshold", "must be >= 2 (a die-NoC hop only saves hops across two or more dies)")
    rb = num(compile_, "router_buffer_entries", minimum=2)
    if rb is not None and rb_max is not None and rb > rb_max:
        bad("compile.router_buffer_entries", f"exceeds tapeout maximum {rb_max}")
    pu = num(compile_, "pu_freq_used", minimum=1)
    noc = num(compile_, "noc_freq_used", minimum=1)
    if pu is not None and pu_max is not None and pu > pu_max:
        bad("compile.pu_freq_used", f"exceeds tapeout maximum {pu_max} Hz")
    if noc is not None and noc_max is not None and noc > noc_max:
        bad("compile.noc_freq_used", f"exceeds tapeout maximum {noc_max} Hz")
    num(compile_, "cache_lines", minimum=0)
    num(compile_, "stream_prefetch_depth", minimum=0)
    num(compile_, "hbm_off_window", minimum=1)
    num(compile_, "watchdog_cycles", minimum=1)
    if compile_.edge_ownership not in ("even", "row"):
        bad("compile.edge_ownership", "must be 'even' or 'row'")
    cached = compile_.cached_arrays
    if cached != "auto":
        if not isinstance(cached, (tuple, list)) or not all(isinstance(a, str) for a in cached):
            bad("compile.cached_arrays", "must be 'auto' or a list of array names")
        elif cached and hbm == 0:
            bad("compile.cached_arrays", "cached segments need DRAM (packaging.hbm_per_die = 0)")
    return out


@dataclass(frozen=True)
class ValidatedSystem:
    """A configuration that passed every rule. Immutable; share freely."""

    tapeout: TapeoutConfig
    packaging: PackagingConfig
    compile: CompileConfig
    grid_x: int
    grid_y: int

    @property
    def num_tiles(self) -> int:
        return self.grid_x * self.grid_y

    @property
    def node_x(self) -> int:
        return self.tapeout.tiles_per_die_x * self.packaging.dies_x * self.packaging.packages_x

    @property
    def node_y(self) -> int:
        return self.tapeout.tiles_per_die_y * self.packaging.dies_y * self.packaging.packages_y

    @property
    def dies_in_grid(self) -> tuple:
        tx, ty = self.tapeout.tiles_per_die_x, self.tapeout.tiles_per_die_y
        return (-(-self.grid_x // tx), -(-self.grid_y // ty))

    @property
    def tiles_per_die(self) -> int:
        return self.tapeout.tiles_per_die_x * self.tapeout.tiles_per_die_y

    def tile_coords(self, tile_id: int) -> tuple:
        """Row-major (x, y, die_x, die_y) of a tile id in the run grid."""
        if not isinstance(tile_id, int) or not 0 <= tile_id < self.num_tiles:
            raise IndexError(f"tile id {tile_id} outside grid of {self.num_tiles} tiles")
        y, x = divmod(tile_id, self.grid_x)
        return (x, y, x // self.tapeout.tiles_per_die_x, y // self.tapeout.tiles_per_die_y)

    def tile_id(self, x: int, y: int) -> int:
        if not (0 <= x < self.grid_x and 0 <= y < self.grid_y):
            raise IndexError(f"coordinates ({x}, {y}) outside {self.grid_x}x{self.grid_y} grid")
        return y * self.grid_x + x

    def die_index(self, tile_id: int) -> int:
        _, _, dx, dy = self.tile_coords(tile_id)
        return dy * self.dies_in_grid[0] + dx

    @property
    def geometry(self) -> Geometry:
        return derive_geometry(self)

    def with_compile(self, **changes) -> "ValidatedSystem":
        return validate(self.tapeout, self.packaging, replace(self.compile, **changes))


def check(tapeout, packaging, compile_) -> list:
    """All violated rules for a configuration (empty when valid). Never raises."""
    try:
        return _check(tapeout, packaging, compile_)
    except Exception as exc:  # validation must be total
        return [Violation("config", f"unreadable configuration: {exc!r}")]


def validate(tapeout=None, packaging=None, compile_=None) -> ValidatedSystem:
    tapeout = TapeoutConfig() if tapeout is None else tapeout
    packaging = PackagingConfig() if packaging is None else packaging
    compile_ = CompileConfig() if compile_ is None else compile_
    violations = check(tapeout, packaging, compile_)
    if violations:
        raise ConstraintViolation(violations)
    if isinstance(compile_.oq_capacity, list):
        compile_ = replace(compile_, oq_capacity=tuple(compile_.oq_capacity))
    if isinstance(compile_.cached_arrays, list):
        compile_ = replace(compile_, cached_arrays=tuple(compile_.cached_arrays))
    node_x = tapeout.tiles_per_die_x * packaging.dies_x * packaging.packages_x
    node_y = tapeout.tiles_per_die_y * packaging.dies_y * packaging.packages_y
    return ValidatedSystem(tapeout, packaging, compile_,
                           compile_.grid_x or node_x, compile_.grid_y or node_y)


def derive_geometry(system: ValidatedSystem) -> Geometry:
    t = system.tapeout
    sram_area = t.sram_per_tile / SRAM_DENSITY
    tile_area = sram_area / t.sram_area_fraction
    pitch = math.sqrt(tile_area)
    die_w = pitch * t.tiles_per_die_x
    die_h = pitch * t.tiles_per_die_y
    edges = set()
    for tid in range(system.num_tiles):
        x, y = tid % system.grid_x, tid // system.grid_x
        lx, ly = x % t.tiles_per_die_x, y % t.tiles_per_die_y
        if lx in (0, t.tiles_per_die_x - 1) or ly in (0, t.tiles_per_die_y - 1):
            edges.add(tid)
    return Geometry(
        sram_area=sram_area,
        tile_area=tile_area,
        tile_pitch=pitch,
        die_width=die_w,
        die_height=die_h,
        die_area=die_w * die_h,
        # folded torus: every link skips one tile, whatever the topology mode
        hop_length_tile_noc=2 * pitch,
        hop_length_die_noc=die_w,
        edge_router_tiles=frozenset(edges),
    )


# Each knob of the reconfigurable-parameter table and where it lives.
KNOB_TABLE = (
    ("tapeout", "# of Tiles per die", ("tapeout.tiles_per_die_x", "tapeout.tiles_per_die_y")),
    ("tapeout", "# of PUs per tile (and their operating and max. frequency)",
     ("tapeout.pus_per_tile", "tapeout.pu_freq_max", "compile.pu_freq_used")),
    ("tapeout", "SRAM capacity per tile", ("tapeout.sram_per_tile",)),
    ("tapeout", "# of Memory Controller Channels per die", ("tapeout.mem_channels_per_die",)),
    ("tapeout", "NoC Width (and the operating and max. frequency)",
     ("tapeout.noc_width", "tapeout.noc_freq_max", "compile.noc_freq_used")),
    ("tapeout", "Max. # of Router Buffer Entries per Physical NoC", ("tapeout.router_buffer_entries",)),
    ("packaging", "# of compute dies per package", ("packaging.dies_x", "packaging.dies_y")),
    ("packaging", "# of DRAM dies per package and capacity of each", ("packaging.hbm_per_die",)),
    ("packaging", "# of I/O dies per package (Off-Package BW)", ("packaging.io_bandwidth",)),
    ("packaging", "Packages per node board", ("packaging.packages_x", "packaging.packages_y")),
    ("compile", "Size of the input and output queues (for every task type)",
     ("compile.iq_capacity", "compile.oq_capacity")),
    ("compile", "Size and Place of the grid that the workload uses",
     ("compile.grid_x", "compile.grid_y", "compile.topology_tile_noc", "compile.topology_die_noc")),
    ("compile", "The address space for which the data is cached", ("compile.cached_arrays",)),
    ("compile", "Size of the D$ (in data elements)", ("compile.cache_lines",)),
    ("compile", "# of Router Buffer Entries of each NoC Channel", ("compile.router_buffer_entries",)),
)

# Knobs deliberately not modelled: one physical NoC per hierarchy level.
UNIMPLEMENTED_KNOBS = (
    "Max. # of Logical NoC Channels per Physical NoC",
    "Mapping of Tasks to (Logical) NoC Channels",
    "Mapping of NoC Channels to Physical NoCs",
    "Arbitration ratio between Channels sharing a Physical NoC",
    "Whether other types of chiplets are included",
)

SECTIONS = {"tapeout": TapeoutConfig, "packaging": PackagingConfig, "compile": CompileConfig}


def _coerce(cls, data: dict):
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConstraintViolation([Violation(f"{cls.__name__}.{k}", "unknown knob") for k in sorted(unknown)])
    data = dict(data)
    for k in ("oq_capacity", "cached_arrays"):
        if isinstance(data.get(k), list):
            data[k] = tuple(data[k])
    return cls(**data)


def parse_value(text: str):
    return yaml.safe_load(text)


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply ``section.knob=value`` strings to a raw config mapping (copied)."""
    out = {k: dict(v) if isinstance(v, dict) else v for k, v in raw.items()}
    for item in overrides or ():
        if "=" not in item:
            raise ValueError(f"override {item!r} is not of the form section.knob=value")
        path, value = item.split("=", 1)
        parts = path.strip().split(".")
        if len(parts) != 2:
            raise ValueError(f"override path {path!r} must be section.knob")
        section, knob = parts
        out.setdefault(section, {})[knob] = parse_value(value)
    return out


def load_raw(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: top level must be a mapping")
    return data


def system_from_raw(raw: dict) -> ValidatedSystem:
    """Build and validate a system from a mapping with tapeout/packaging/compile sections.

    Other top-level sections (``energy``, ``cost``) are ignored here; the
    energy and cost modules read their own.
    """
    parts = {}
    for name, cls in SECTIONS.items():
        section = raw.get(name) or {}
        if not isinstance(section, dict):
            raise ConstraintViolation([Violation(name, "section must be a mapping")])
        parts[name] = _coerce(cls, section)
    return validate(parts["tapeout"], parts["packaging"], parts["compile"])


def system_to_dict(system: ValidatedSystem) -> dict:
    def conv(obj):
        d = dataclasses.asdict(obj)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    return {"tapeout": conv(system.tapeout), "packaging": conv(system.packaging),
            "compile": conv(system.compile)}
