"""Fabrication and packaging cost: wafer placement, Murphy yield, package composition."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

GiB = 1 << 30


class CostError(ValueError):
    pass


@dataclass(frozen=True)
class CostConstants:
    wafer_price: float = 6047.0       # $ per 300 mm, 7 nm wafer
    wafer_diameter: float = 300.0     # mm
    scribe: float = 0.2               # mm
    edge_loss: float = 4.0            # mm
    defect_density: float = 0.07
    # Unit of defect_density; "mm2" keeps the literal value, "cm2" divides it by 100.
    defect_unit: str = "mm2"
    interposer_fraction: float = 0.20
    substrate_fraction: float = 0.10
    bonding_overhead: float = 0.05
    hbm_price: float = 7.5            # $ per GB (GB taken as 2^30 bytes)

    @property
    def defects_per_mm2(self) -> float:
        if self.defect_unit == "mm2":
            return self.defect_density
        if self.defect_unit == "cm2":
            return self.defect_density / 100.0
        raise CostError(f"unknown defect unit {self.defect_unit!r}")

    def scaled_prices(self, k: float) -> "CostConstants":
        return replace(self, wafer_price=self.wafer_price * k, hbm_price=self.hbm_price * k)


def constants_from_dict(data: dict | None) -> CostConstants:
    data = data or {}
    names = {f.name for f in fields(CostConstants)}
    unknown = set(data) - names
    if unknown:
        raise CostError(f"unknown cost constants: {sorted(unknown)}")
    return CostConstants(**data)


def murphy_yield(area: float, defect_density: float) -> float:
    """((1 - exp(-A*D)) / (A*D))**2, with the A*D -> 0 limit of 1."""
    if area <= 0 or defect_density < 0:
        raise CostError("need area > 0 and defect density >= 0")
    x = area * defect_density
    if x == 0:
        return 1.0
    # expm1 keeps full precision for tiny A*D
    f = -math.expm1(-x) / x
    return f * f


def dies_per_wafer(die_w: float, die_h: float, constants: CostConstants = CostConstants()) -> int:
    """Whole (die + scribe) cells inside the usable disk, grid lines through the centre."""
    r = constants.wafer_diameter / 2 - constants.edge_loss
    w = die_w + constants.scribe
    h = die_h + constants.scribe
    if die_w <= 0 or die_h <= 0:
        raise CostError("die dimensions must be positive")
    count = 0
    cols = int(r // w)
    for i in range(-cols, cols):
        x = max(abs(i * w), abs((i + 1) * w))
        if x > r:
            continue
        half = math.sqrt(r * r - x * x)
        count += 2 * int(half // h)
    if count == 0:
        raise CostError(f"die {die_w}x{die_h} mm does not fit in the usable wafer area")
    return count


def die_cost(wafer_price: float, good_dies: float) -> float:
    if good_dies <= 0:
        raise CostError("zero good dies per wafer")
    return wafer_price / good_dies


@dataclass(frozen=True)
class CostReport:
    dies_per_wafer: int
    die_yield: float
    good_dies: float
    die_cost: float
    compute: float
    hbm: float
    interposer: float
    substrate: float
    bonding: float
    package_total: float
    packages: int
    node_total: float

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def package_cost(n_compute_dies: int, die_cost_: float, hbm_gb_total: float,
                 constants: CostConstants = CostConstants(), hbm_pairs: int | None = None) -> dict:
    """Package composition. Interposer counted once per compute-die/HBM pair."""
    if n_compute_dies < 1:
        raise CostError("need at least one compute die")
    if hbm_pairs is None:
        hbm_pairs = n_compute_dies if hbm_gb_total > 0 else 0
    compute = n_compute_dies * die_cost_
    hbm = hbm_gb_total * constants.hbm_price
    interposer = constants.interposer_fraction * die_cost_ * hbm_pairs
    substrate = constants.substrate_fraction * die_cost_ * n_compute_dies
    bonding = constants.bonding_overhead * (compute + hbm + interposer + substrate)
    total = compute + hbm + interposer + substrate + bonding
    return {"compute": compute, "hbm": hbm, "interposer": interposer,
            "substrate": substrate, "bonding": bonding, "total": total}


def system_cost(system, constants: CostConstants = CostConstants()) -> CostReport:
    """Cost of the whole node described by a validated system."""
    geo = system.geometry
    n_dpw = dies_per_wafer(geo.die_width, geo.die_height, constants)
    y = murphy_yield(geo.die_area, constants.defects_per_mm2)
    good = n_dpw * y
    dc = die_cost(constants.wafer_price, good)
    pk = system.packaging
    n = pk.dies_x * pk.dies_y
    hbm_gb = n * pk.hbm_per_die / GiB
    parts = package_cost(n, dc, hbm_gb, constants)
    packages = pk.packages_x * pk.packages_y
    return CostReport(
        dies_per_wafer=n_dpw, die_yield=y, good_dies=good, die_cost=dc,
        compute=parts["compute"], hbm=parts["hbm"], interposer=parts["interposer"],
        substrate=parts["substrate"], bonding=parts["bonding"], package_total=parts["total"],
        packages=packages, node_total=packages * parts["total"],
    )
