"""Per-zone economic impacts of one flood event: damage, delays, cancellations.

Infrastructure damage prices each segment's standing water through a
per-road-class depth-damage curve against its construction cost. Travel
impacts price completed-trip delay at the value of time and cancelled trips
at a fraction of their free-flow time. A trip never contributes to both.
"""
from __future__ import annotations

from dataclasses import dataclass
import json

import numpy as np

from .errors import ConfigError, ParseError, ValidationError
from .network import TransportNetwork, Trip, TripOutcome

DEFAULT_VALUE_OF_TIME = 100.0  # DKK per hour
DEFAULT_CANCELLATION_FACTOR = 0.8


@dataclass(frozen=True)
class DamageCurve:
    """Piecewise-linear depth (m) to damage fraction; clamped outside knots."""

    depths_m: tuple[float, ...]
    fractions: tuple[float, ...]

    def __post_init__(self):
        d, f = np.asarray(self.depths_m), np.asarray(self.fractions)
        if d.size != f.size or d.size < 2:
            raise ValidationError("damage curve needs matching depth/fraction knots (>= 2)")
        if d[0] != 0.0 or f[0] != 0.0:
            raise ValidationError("damage curve must start at (0, 0)")
        if np.any(np.diff(d) <= 0):
            raise ValidationError("damage curve depths must be strictly increasing")
        if np.any(np.diff(f) < 0) or np.any(f < 0) or np.any(f > 1):
            raise ValidationError("damage fractions must be nondecreasing within [0, 1]")

    def __call__(self, depth_m):
        return np.interp(depth_m, self.depths_m, self.fractions)


@dataclass(frozen=True)
class CostModel:
    value_of_time_dkk_per_h: float
    cancellation_factor: float
    construction_cost_dkk_per_m2: dict[str, float]
    damage_curves: dict[str, DamageCurve]

    def __post_init__(self):
        if not (self.value_of_time_dkk_per_h > 0):
            raise ValidationError("value of time must be positive")
        if not (0.0 <= self.cancellation_factor <= 1.0):
            raise ValidationError("cancellation factor must lie in [0, 1]")
        if set(self.construction_cost_dkk_per_m2) != set(self.damage_curves):
            raise ValidationError("construction costs and damage curves must cover the same road classes")
        for cls, cost in self.construction_cost_dkk_per_m2.items():
            if not (cost >= 0) or not np.isfinite(cost):
                raise ValidationError(f"road class {cls!r}: construction cost must be nonnegative")


def default_cost_model() -> CostModel:
    """Synthetic defaults: damage ramps linearly to 0.5 at 1 m of water."""
    ramp = DamageCurve((0.0, 1.0), (0.0, 0.5))
    classes = {
        "arterial": 1200.0,
        "residential": 1000.0,
        "local": 900.0,
        "bike_path": 400.0,
        "footpath": 300.0,
    }
    return CostModel(DEFAULT_VALUE_OF_TIME, DEFAULT_CANCELLATION_FACTOR,
                     classes, {c: ramp for c in classes})


@dataclass(frozen=True)
class ZoneImpacts:
    """Per-zone impact components for one timestep, all in DKK."""

    I_dkk: np.ndarray  # infrastructure damage
    D_dkk: np.ndarray  # delay costs
    C_dkk: np.ndarray  # cancellation costs

    @property
    def total_dkk(self) -> float:
        return float(self.I_dkk.sum() + self.D_dkk.sum() + self.C_dkk.sum())


def infrastructure_damage(
    net: TransportNetwork,
    segment_depths,
    cost: CostModel,
    n_zones: int,
) -> np.ndarray:
    depths = np.asarray(segment_depths, dtype=np.float64)
    if depths.shape != (net.n_segments,):
        raise ValidationError(f"expected {net.n_segments} segment depths, got {depths.shape}")
    if np.any(depths < 0):
        raise ValidationError("segment depths must be nonnegative")
    out = np.zeros(n_zones)
    classes = [s.road_class for s in net.segments]
    for cls in sorted(set(classes)):
        if cls not in cost.damage_curves:
            raise ConfigError(f"no construction cost / damage curve for road class {cls!r}")
        idx = np.array([i for i, c in enumerate(classes) if c == cls], dtype=np.int64)
        frac = cost.damage_curves[cls](depths[idx])
        dmg = cost.construction_cost_dkk_per_m2[cls] * net.seg_surface_m2[idx] * frac
        np.add.at(out, net.seg_zone[idx], dmg)
    return out


def delay_costs(trips: list[Trip], outcomes: list[TripOutcome], cost: CostModel,
                n_zones: int) -> np.ndarray:
    _check_aligned(trips, outcomes)
    out = np.zeros(n_zones)
    for tr, oc in zip(trips, outcomes):
        if oc.completed:
            delay_h = max(0.0, oc.time_h - tr.base_time_h)
            out[tr.origin_zone] += delay_h * cost.value_of_time_dkk_per_h
    return out


def cancellation_costs(trips: list[Trip], outcomes: list[TripOutcome], cost: CostModel,
                       n_zones: int) -> np.ndarray:
    _check_aligned(trips, outcomes)
    out = np.zeros(n_zones)
    for tr, oc in zip(trips, outcomes):
        if not oc.completed:
            out[tr.origin_zone] += cost.cancellation_factor * tr.base_time_h * cost.value_of_time_dkk_per_h
    return out


def compute_impacts(net, segment_depths, trips, outcomes, cost: CostModel,
                    n_zones: int) -> ZoneImpacts:
    return ZoneImpacts(
        I_dkk=infrastructure_damage(net, segment_depths, cost, n_zones),
        D_dkk=delay_costs(trips, outcomes, cost, n_zones),
        C_dkk=cancellation_costs(trips, outcomes, cost, n_zones),
    )


def _check_aligned(trips, outcomes):
    if len(trips) != len(outcomes):
        raise ValidationError(f"{len(trips)} trips but {len(outcomes)} outcomes")
    for tr, oc in zip(trips, outcomes):
        if tr.id != oc.trip_id:
            raise ValidationError(f"outcome {oc.trip_id} does not match trip {tr.id}")


# -- cost-model file grammar -------------------------------------------------
#
# JSON object:
#   {"version": 1,
#    "valueOfTime_dkk_per_h": 100.0,
#    "cancellationFactor": 0.8,
#    "roadClasses": {
#       "<class>": {"constructionCost_dkk_per_m2": 1000.0,
#                   "damageCurve": [[depth_m, fraction], ...]}}}


def load_cost_model(path: str) -> CostModel:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read cost model: {exc}", path=path) from exc
    try:
        if doc.get("version") != 1:
            raise ParseError(f"unsupported cost model version {doc.get('version')!r}", path=path)
        classes = doc["roadClasses"]
        costs = {c: float(v["constructionCost_dkk_per_m2"]) for c, v in classes.items()}
        curves = {
            c: DamageCurve(tuple(float(k[0]) for k in v["damageCurve"]),
                           tuple(float(k[1]) for k in v["damageCurve"]))
            for c, v in classes.items()
        }
        return CostModel(float(doc["valueOfTime_dkk_per_h"]), float(doc["cancellationFactor"]),
                         costs, curves)
    except (KeyError, TypeError, IndexError) as exc:
        raise ParseError(f"malformed cost model: {exc!r}", path=path) from exc


def dump_cost_model(cost: CostModel, path: str) -> None:
    doc = {
        "version": 1,
        "valueOfTime_dkk_per_h": cost.value_of_time_dkk_per_h,
        "cancellationFactor": cost.cancellation_factor,
        "roadClasses": {
            c: {
                "constructionCost_dkk_per_m2": cost.construction_cost_dkk_per_m2[c],
                "damageCurve": [[d, f] for d, f in zip(cv.depths_m, cv.fractions)],
            }
            for c, cv in sorted(cost.damage_curves.items())
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
