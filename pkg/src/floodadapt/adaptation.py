"""Adaptation measure catalog, deployment ledger, decay, and action masking.

Eight zone-level actions: do nothing, three runoff-capture installations
(priced per planter or per road), and four permeable pavements (priced per
square metre of the zone's car-road surface). A deployment stays active for
its lifetime with linearly decaying effect, bills maintenance every year it
is alive, and blocks re-deployment of the same measure in its zone until it
expires.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
import json
import math

import numpy as np

from .errors import DomainError, FeasibilityError, ParseError, ValidationError
from .network import ZoneRoadStats

EFFECT_KINDS = ("none", "volume_m3", "depth_m")
APPLICATION_RULES = ("none", "perPlanterEvery30m", "oncePerRoad", "perSurfaceArea")

PLANTER_SPACING_M = 30.0


class Measure(IntEnum):
    DO_NOTHING = 0
    BIORETENTION_PLANTERS = 1
    SOAKAWAY = 2
    STORAGE_TANK = 3
    POROUS_ASPHALT = 4
    PERVIOUS_CONCRETE = 5
    PICP = 6
    GRID_PAVERS = 7


N_ACTIONS = len(Measure)
CATALOG_NAMES = {
    Measure.DO_NOTHING: "DoNothing",
    Measure.BIORETENTION_PLANTERS: "BioretentionPlanters",
    Measure.SOAKAWAY: "Soakaway",
    Measure.STORAGE_TANK: "StorageTank",
    Measure.POROUS_ASPHALT: "PorousAsphalt",
    Measure.PERVIOUS_CONCRETE: "PerviousConcrete",
    Measure.PICP: "PICP",
    Measure.GRID_PAVERS: "GridPavers",
}
_NAME_TO_MEASURE = {v: k for k, v in CATALOG_NAMES.items()}


@dataclass(frozen=True)
class MeasureSpec:
    id: Measure
    effect_kind: str
    effect_magnitude: float
    application_rule: str
    impl_cost_dkk: float
    maint_cost_dkk_per_year: float
    lifetime_years: int

    def __post_init__(self):
        if self.effect_kind not in EFFECT_KINDS:
            raise ValidationError(f"unknown effect kind {self.effect_kind!r}")
        if self.application_rule not in APPLICATION_RULES:
            raise ValidationError(f"unknown application rule {self.application_rule!r}")
        if self.id == Measure.DO_NOTHING:
            if (self.effect_kind != "none" or self.effect_magnitude != 0
                    or self.impl_cost_dkk != 0 or self.maint_cost_dkk_per_year != 0):
                raise ValidationError("DoNothing must have no effect and zero costs")
        else:
            if self.effect_kind == "none" or self.effect_magnitude <= 0:
                raise ValidationError(f"{self.id.name}: effect magnitude must be positive")
            if self.impl_cost_dkk <= 0 or self.maint_cost_dkk_per_year <= 0:
                raise ValidationError(f"{self.id.name}: costs must be positive")
            if self.lifetime_years <= 0:
                raise ValidationError(f"{self.id.name}: lifetime must be positive")


MeasureCatalog = dict[Measure, MeasureSpec]


def default_catalog() -> MeasureCatalog:
    """The shipped measure table: effect, pricing rule, costs, lifetime."""
    rows = [
        (Measure.DO_NOTHING, "none", 0.0, "none", 0.0, 0.0, 0),
        (Measure.BIORETENTION_PLANTERS, "volume_m3", 2.0, "perPlanterEvery30m", 14312.0, 24.0, 40),
        (Measure.SOAKAWAY, "volume_m3", 5.4, "oncePerRoad", 7273.0, 1.9, 30),
        (Measure.STORAGE_TANK, "volume_m3", 15.0, "oncePerRoad", 104896.0, 5.0, 50),
        (Measure.POROUS_ASPHALT, "depth_m", 0.3, "perSurfaceArea", 995.77, 0.635, 30),
        (Measure.PERVIOUS_CONCRETE, "depth_m", 0.45, "perSurfaceArea", 1199.81, 0.635, 30),
        (Measure.PICP, "depth_m", 0.25, "perSurfaceArea", 1046.78, 5.195, 50),
        (Measure.GRID_PAVERS, "depth_m", 0.2, "perSurfaceArea", 1097.79, 5.195, 30),
    ]
    return {m: MeasureSpec(m, kind, mag, rule, c, mc, life)
            for m, kind, mag, rule, c, mc, life in rows}


@dataclass(frozen=True)
class Deployment:
    zone: int
    measure: Measure
    deploy_year: int
    units: float  # planter count, road count, or m2 of surface, by rule
    base_effect: float  # m3 for volume measures, m of capture for pavements
    lifetime_years: int


@dataclass(frozen=True)
class DeploymentLedger:
    """Active deployments; at most one per (zone, measure)."""

    active: tuple[Deployment, ...] = ()

    def find(self, zone: int, measure: Measure) -> Deployment | None:
        for dep in self.active:
            if dep.zone == zone and dep.measure == measure:
                return dep
        return None


def action_mask(ledger: DeploymentLedger, zone: int) -> np.ndarray:
    """Boolean allowance over the 8 actions; an active measure blocks itself."""
    mask = np.ones(N_ACTIONS, dtype=bool)
    for dep in ledger.active:
        if dep.zone == zone:
            mask[dep.measure] = False
    mask[Measure.DO_NOTHING] = True
    return mask


def deployment_units(spec: MeasureSpec, stats: ZoneRoadStats | None) -> float:
    if spec.application_rule == "perPlanterEvery30m":
        if stats is None:
            return 0.0
        return float(sum(math.floor((ln + 1e-9) / PLANTER_SPACING_M)
                         for ln in stats.road_lengths_m))
    if spec.application_rule == "oncePerRoad":
        return 0.0 if stats is None else float(stats.road_count)
    if spec.application_rule == "perSurfaceArea":
        return 0.0 if stats is None else float(stats.car_surface_m2)
    return 0.0


def deploy(
    ledger: DeploymentLedger,
    zone: int,
    measure: Measure,
    stats: ZoneRoadStats | None,
    catalog: MeasureCatalog,
    year: int,
) -> tuple[DeploymentLedger, float]:
    """Install a measure; returns (new ledger, implementation cost in DKK)."""
    if measure == Measure.DO_NOTHING:
        raise ValidationError("DoNothing is not deployable")
    if not action_mask(ledger, zone)[measure]:
        raise FeasibilityError(
            f"{CATALOG_NAMES[measure]} is already active in zone {zone}", zones=[zone])
    spec = catalog[measure]
    units = deployment_units(spec, stats)
    if units <= 0:
        raise FeasibilityError(
            f"zone {zone} has no road inventory eligible for {CATALOG_NAMES[measure]}",
            zones=[zone])
    if spec.effect_kind == "volume_m3":
        base_effect = units * spec.effect_magnitude
    else:  # depth capture applies zone-wide at the rated depth
        base_effect = spec.effect_magnitude
    cost = units * spec.impl_cost_dkk
    dep = Deployment(zone, measure, year, units, base_effect, spec.lifetime_years)
    return DeploymentLedger(ledger.active + (dep,)), cost


def decayed_effect(dep: Deployment, current_year: int) -> float:
    """Linear decay from base effect at age 0 to zero at end of life."""
    age = current_year - dep.deploy_year
    if age < 0 or age > dep.lifetime_years:
        raise DomainError(
            f"deployment age {age} outside [0, {dep.lifetime_years}]; ledger not advanced")
    return dep.base_effect * (1.0 - age / dep.lifetime_years)


@dataclass(frozen=True)
class YearAdvance:
    """Ledger bookkeeping for one year.

    Maintenance covers every deployment alive this year, including those
    expiring now (billed once more, then removed). Captures carry the decayed
    effects: volumes per zone, pavement depths per car segment, and the
    per-zone, per-measure status matrix z (column k is measure k+1).
    """

    ledger: DeploymentLedger
    maintenance_dkk: np.ndarray
    zone_capture_m3: np.ndarray
    segment_capture_m: np.ndarray
    z: np.ndarray


def advance_year(
    ledger: DeploymentLedger,
    year: int,
    catalog: MeasureCatalog,
    zone_stats: dict[int, ZoneRoadStats],
    n_zones: int,
    n_segments: int,
) -> YearAdvance:
    maint = np.zeros(n_zones)
    vol = np.zeros(n_zones)
    seg = np.zeros(n_segments)
    z = np.zeros((n_zones, N_ACTIONS - 1))
    keep: list[Deployment] = []
    for dep in ledger.active:
        spec = catalog[dep.measure]
        maint[dep.zone] += dep.units * spec.maint_cost_dkk_per_year
        eff = decayed_effect(dep, year)
        z[dep.zone, dep.measure - 1] = eff
        if spec.effect_kind == "volume_m3":
            vol[dep.zone] += eff
        elif spec.effect_kind == "depth_m":
            stats = zone_stats.get(dep.zone)
            if stats is not None:
                seg[list(stats.car_segment_ids)] += eff
        if year - dep.deploy_year < dep.lifetime_years:
            keep.append(dep)
    return YearAdvance(DeploymentLedger(tuple(keep)), maint, vol, seg, z)


# -- measure catalog file grammar ---------------------------------------------
#
# JSON object:
#   {"version": 1,
#    "measures": [{"name": "Soakaway", "effectKind": "volume_m3",
#                  "effectMagnitude": 5.4, "applicationRule": "oncePerRoad",
#                  "implCost_dkk": 7273.0, "maintCost_dkk_per_year": 1.9,
#                  "lifetime_years": 30}, ...]}
# All eight measure names must appear exactly once.


def load_catalog(path: str) -> MeasureCatalog:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read measure catalog: {exc}", path=path) from exc
    try:
        if doc.get("version") != 1:
            raise ParseError(f"unsupported catalog version {doc.get('version')!r}", path=path)
        catalog: MeasureCatalog = {}
        for row in doc["measures"]:
            name = row["name"]
            if name not in _NAME_TO_MEASURE:
                raise ParseError(f"unknown measure name {name!r}", path=path)
            m = _NAME_TO_MEASURE[name]
            if m in catalog:
                raise ParseError(f"duplicate measure {name!r}", path=path)
            catalog[m] = MeasureSpec(
                m, row["effectKind"], float(row["effectMagnitude"]), row["applicationRule"],
                float(row["implCost_dkk"]), float(row["maintCost_dkk_per_year"]),
                int(row["lifetime_years"]))
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed measure catalog: {exc!r}", path=path) from exc
    missing = set(Measure) - set(catalog)
    if missing:
        raise ParseError(
            f"catalog missing measures: {sorted(CATALOG_NAMES[m] for m in missing)}", path=path)
    return catalog


def dump_catalog(catalog: MeasureCatalog, path: str) -> None:
    doc = {
        "version": 1,
        "measures": [
            {
                "name": CATALOG_NAMES[m],
                "effectKind": spec.effect_kind,
                "effectMagnitude": spec.effect_magnitude,
                "applicationRule": spec.application_rule,
                "implCost_dkk": spec.impl_cost_dkk,
                "maintCost_dkk_per_year": spec.maint_cost_dkk_per_year,
                "lifetime_years": spec.lifetime_years,
            }
            for m, spec in sorted(catalog.items())
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
