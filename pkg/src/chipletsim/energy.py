"""Event-based energy accounting from per-bit constants.

Energies are kept in picojoules. Every recorded event is a product
``quantity * unit`` rounded once; category and grand totals are
:func:`math.fsum` of those products, so the result does not depend on
recording order and a replay of the event log reproduces it bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

CATEGORIES = (
    "pu", "sram", "cache_tag", "dram", "refresh",
    "noc_wire", "noc_router", "die_crossing", "off_package",
)

# Which constants each clock domain scales.
DOMAINS = {
    "pu": ("pu_op",),
    "noc": ("noc_wire", "noc_router"),
    "sram": ("sram_read", "sram_write", "tag_read_cmp"),
}


class EnergyError(ValueError):
    pass


@dataclass(frozen=True)
class EnergyConstants:
    sram_read: float = 0.18          # pJ/bit
    sram_write: float = 0.28         # pJ/bit
    tag_read_cmp: float = 6.3        # pJ per tag check
    dram_rw: float = 3.7             # pJ/bit
    refresh: float = 0.22            # pJ/bit per refresh period
    refresh_period: float = 32e-3    # s
    noc_wire: float = 0.15           # pJ/bit/mm
    noc_router: float = 0.1          # pJ/bit
    die_to_die: float = 0.55         # pJ/bit
    off_package: float = 1.17        # pJ/bit
    pu_op: float = 1.0               # pJ/op, placeholder until calibrated
    base_freq: float = 1e9
    # Hz -> (V/V0)^2. Placeholder curve, not measured data.
    vf_table: tuple = ((250e6, 0.7 ** 2), (1e9, 1.0), (2e9, 1.25 ** 2))

    def vf_factor(self, f: float) -> float:
        for point, factor in self.vf_table:
            if point == f:
                return factor
        raise EnergyError(f"unsupported frequency point {f:g} Hz (table has "
                          f"{', '.join(f'{p:g}' for p, _ in self.vf_table)})")


def constants_from_dict(data: dict | None) -> EnergyConstants:
    data = dict(data or {})
    names = {f.name for f in fields(EnergyConstants)}
    unknown = set(data) - names
    if unknown:
        raise EnergyError(f"unknown energy constants: {sorted(unknown)}")
    if "vf_table" in data:
        table = data["vf_table"]
        if isinstance(table, dict):
            table = table.items()
        data["vf_table"] = tuple((float(k), float(v)) for k, v in table)
    c = EnergyConstants(**data)
    for f in fields(c):
        v = getattr(c, f.name)
        if isinstance(v, float) and v < 0:
            raise EnergyError(f"energy constant {f.name} must be >= 0")
    return c


def scale_for_frequency(constants: EnergyConstants, f: float, domain: str) -> EnergyConstants:
    """Scale the per-bit/op energies of one clock domain by the V^2 factor of ``f``."""
    if domain not in DOMAINS:
        raise EnergyError(f"unknown domain {domain!r}")
    k = constants.vf_factor(f) / constants.vf_factor(constants.base_freq)
    if k == 1.0:
        return constants
    return replace(constants, **{name: getattr(constants, name) * k for name in DOMAINS[domain]})


@dataclass(frozen=True)
class EnergyEvent:
    category: str
    tile: int
    quantity: float
    unit: float

    @property
    def pj(self) -> float:
        return self.quantity * self.unit


@dataclass
class EnergyLedger:
    events: list = field(default_factory=list)

    def record(self, category: str, quantity, unit: float, tile: int = -1) -> None:
        if category not in CATEGORIES:
            raise EnergyError(f"unknown energy category {category!r}")
        if quantity < 0 or unit < 0:
            raise EnergyError("energy events must be non-negative")
        if quantity == 0 or unit == 0:
            return
        self.events.append(EnergyEvent(category, tile, quantity, unit))

    # convenience wrappers
    def record_bits(self, category, bits, pj_per_bit, tile=-1):
        self.record(category, bits, pj_per_bit, tile)

    def record_wire(self, bits, mm, constants: EnergyConstants, tile=-1):
        self.record("noc_wire", bits * mm, constants.noc_wire, tile)

    def category_pj(self, category: str) -> float:
        return math.fsum(e.pj for e in self.events if e.category == category)

    def categories_pj(self) -> dict:
        parts = {c: [] for c in CATEGORIES}
        for e in self.events:
            parts[e.category].append(e.pj)
        return {c: math.fsum(v) for c, v in parts.items()}

    @property
    def total_pj(self) -> float:
        return math.fsum(self.categories_pj().values())

    @property
    def total_j(self) -> float:
        return self.total_pj * 1e-12

    def per_tile_pj(self) -> dict:
        parts = {}
        for e in self.events:
            parts.setdefault(e.tile, []).append(e.pj)
        return {t: math.fsum(v) for t, v in sorted(parts.items())}

    def breakdown(self) -> dict:
        """Percent of the total per category."""
        cats = self.categories_pj()
        total = math.fsum(cats.values())
        if total <= 0:
            raise EnergyError("empty run: no energy recorded")
        return {c: 100.0 * v / total for c, v in cats.items()}

    def merge(self, other: "EnergyLedger") -> "EnergyLedger":
        return EnergyLedger(self.events + other.events)

    def to_dict(self) -> dict:
        return {
            "categories_pj": self.categories_pj(),
            "total_pj": self.total_pj,
            "events": [[e.category, e.tile, e.quantity, e.unit] for e in self.events],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EnergyLedger":
        return cls([EnergyEvent(c, int(t), q, u) for c, t, q, u in data["events"]])


def replay(events) -> dict:
    """Independent recount of category totals and grand total from an event log."""
    buckets = {c: [] for c in CATEGORIES}
    for ev in events:
        cat, _tile, qty, unit = ev if isinstance(ev, (list, tuple)) else (ev.category, ev.tile, ev.quantity, ev.unit)
        buckets[cat].append(qty * unit)
    cats = {c: math.fsum(v) for c, v in buckets.items()}
    return {"categories_pj": cats, "total_pj": math.fsum(cats.values())}


def refresh_pj(capacity_bytes: int, seconds: float, constants: EnergyConstants) -> float:
    return capacity_bytes * 8 * (seconds / constants.refresh_period) * constants.refresh


def accrue_refresh(ledger: EnergyLedger, capacity_bytes: int, powered_seconds: float,
                   constants: EnergyConstants, die: int = 0) -> None:
    """Refresh of a powered DRAM device, pro-rata over elapsed refresh windows.

    Die-level events are filed under tile id ``-(die + 1)``.
    """
    if capacity_bytes <= 0 or powered_seconds <= 0:
        return
    ledger.record("refresh", capacity_bytes * 8 * (powered_seconds / constants.refresh_period),
                  constants.refresh, -(die + 1))


def accrue_idle(ledger: EnergyLedger, span_seconds: float, hbm_powered: dict,
                capacity_bytes: int, constants: EnergyConstants) -> None:
    """Idle span: gated PUs and SRAM banks add nothing; powered HBM devices refresh.

    ``hbm_powered`` maps die index -> bool.
    """
    for die, on in sorted(hbm_powered.items()):
        if on:
            accrue_refresh(ledger, capacity_bytes, span_seconds, constants, die)
