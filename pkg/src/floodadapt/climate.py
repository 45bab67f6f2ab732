"""Rainfall scenario models and annual event sampling.

A scenario model holds one rain-depth quantile table per (scenario, period)
pair. Annual maximum daily rainfall is sampled by inverse-CDF: draw a uniform
variate and interpolate linearly between the table's quantile knots.
"""
from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParseError, ValidationError


class RcpScenario(enum.IntEnum):
    """Emission scenarios ordered by severity."""

    RCP26 = 0
    RCP45 = 1
    RCP85 = 2

    @classmethod
    def parse(cls, text: str) -> "RcpScenario":
        key = text.strip().upper().replace(".", "").replace("-", "").replace("_", "")
        try:
            return cls[key]
        except KeyError:
            raise DomainError(f"unknown scenario {text!r} (expected RCP26, RCP45 or RCP85)")


@dataclass(frozen=True, order=True)
class TimeSlice:
    start_year: int
    end_year: int

    def __post_init__(self):
        if self.end_year < self.start_year:
            raise ValidationError(f"time slice {self.start_year}-{self.end_year} is reversed")

    def __contains__(self, year: int) -> bool:
        return self.start_year <= year <= self.end_year


#: The three projection periods every scenario model must cover.
CANONICAL_SLICES = (
    TimeSlice(2011, 2040),
    TimeSlice(2041, 2070),
    TimeSlice(2071, 2100),
)


@dataclass(frozen=True)
class RainQuantileTable:
    """Quantile knots of annual max daily rainfall.

    probabilities: ascending, within [0, 1].
    depths_mm: nondecreasing, nonnegative, same length.
    """

    probabilities: tuple[float, ...]
    depths_mm: tuple[float, ...]

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        d = np.asarray(self.depths_mm, dtype=float)
        if p.ndim != 1 or p.shape != d.shape or p.size < 1:
            raise ValidationError("quantile table needs matching 1-d probability/depth knots")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise ValidationError("quantile probabilities must lie in [0, 1]")
        if np.any(np.diff(p) <= 0.0):
            raise ValidationError("quantile probabilities must be strictly ascending")
        if np.any(d < 0.0):
            raise ValidationError("rain depths must be nonnegative")
        if np.any(np.diff(d) < 0.0):
            raise ValidationError("rain depths must be nondecreasing in probability")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(d))):
            raise ValidationError("quantile knots must be finite")

    def inverse_cdf(self, u: float | np.ndarray) -> float | np.ndarray:
        """Depth at cumulative probability u; clamped to end knots outside the range."""
        u = np.clip(u, 0.0, 1.0)
        out = np.interp(u, self.probabilities, self.depths_mm)
        return float(out) if np.ndim(out) == 0 else out

    def scaled(self, factor: float) -> "RainQuantileTable":
        if factor < 0.0 or not np.isfinite(factor):
            raise ValidationError(f"scale factor must be finite and nonnegative, got {factor}")
        return RainQuantileTable(self.probabilities, tuple(d * factor for d in self.depths_mm))


@dataclass(frozen=True)
class RainEvent:
    """One annual maximum daily rainfall realisation."""

    year: int
    depth_mm: float


@dataclass(frozen=True)
class ScenarioModel:
    """Complete (scenario x period) grid of quantile tables."""

    tables: dict[tuple[RcpScenario, TimeSlice], RainQuantileTable]
    slices: tuple[TimeSlice, ...] = CANONICAL_SLICES

    def __post_init__(self):
        for sc in RcpScenario:
            for sl in self.slices:
                if (sc, sl) not in self.tables:
                    raise ValidationError(f"scenario model misses table for {sc.name} {sl.start_year}-{sl.end_year}")
        for i, a in enumerate(self.slices):
            for b in self.slices[i + 1:]:
                if not (a.end_year < b.start_year or b.end_year < a.start_year):
                    raise ValidationError("time slices overlap")
        # Severity must be ordered pointwise. Piecewise-linear curves compare
        # exactly on the union of their knots.
        for sl in self.slices:
            for lo, hi in ((RcpScenario.RCP26, RcpScenario.RCP45), (RcpScenario.RCP45, RcpScenario.RCP85)):
                tl, th = self.tables[(lo, sl)], self.tables[(hi, sl)]
                probe = np.union1d(tl.probabilities, th.probabilities)
                if np.any(tl.inverse_cdf(probe) > th.inverse_cdf(probe) + 1e-12):
                    raise ValidationError(
                        f"severity ordering violated: {lo.name} exceeds {hi.name} in slice {sl.start_year}-{sl.end_year}"
                    )

    def slice_for(self, year: int) -> TimeSlice:
        for sl in self.slices:
            if year in sl:
                return sl
        spans = ", ".join(f"{s.start_year}-{s.end_year}" for s in self.slices)
        raise DomainError(f"year {year} outside modelled periods ({spans})")

    def table_for(self, scenario: RcpScenario, year: int) -> RainQuantileTable:
        return self.tables[(scenario, self.slice_for(year))]


def sample_event(model: ScenarioModel, scenario: RcpScenario, year: int, rng: np.random.Generator) -> RainEvent:
    """Draw the year's max daily rainfall by inverse-CDF on the active table."""
    table = model.table_for(scenario, year)
    u = rng.random()
    return RainEvent(year=year, depth_mm=float(table.inverse_cdf(u)))


def synth_scenario_model(
    severity_multipliers: dict[RcpScenario, float] | tuple[float, float, float],
    base_table: RainQuantileTable,
    slice_multipliers: tuple[float, ...] = (1.0, 1.15, 1.3),
    slices: tuple[TimeSlice, ...] = CANONICAL_SLICES,
) -> ScenarioModel:
    """Build a synthetic model by scaling one base table.

    Depths for (scenario, slice) are base depths x scenario multiplier x slice
    multiplier. Scenario multipliers must be ordered with severity and slice
    multipliers must be nondecreasing so later periods are at least as wet.
    """
    if not isinstance(severity_multipliers, dict):
        severity_multipliers = {sc: m for sc, m in zip(RcpScenario, severity_multipliers)}
    for sc in RcpScenario:
        if sc not in severity_multipliers:
            raise ValidationError(f"missing severity multiplier for {sc.name}")
        if severity_multipliers[sc] <= 0.0:
            raise ValidationError("severity multipliers must be positive")
    ordered = [severity_multipliers[sc] for sc in sorted(RcpScenario)]
    if np.any(np.diff(ordered) < 0.0):
        raise ValidationError("severity multipliers must be nondecreasing RCP26 <= RCP45 <= RCP85")
    if len(slice_multipliers) != len(slices):
        raise ValidationError("need one slice multiplier per time slice")
    if np.any(np.array(slice_multipliers) <= 0.0) or np.any(np.diff(slice_multipliers) < 0.0):
        raise ValidationError("slice multipliers must be positive and nondecreasing")
    tables = {}
    for sc in RcpScenario:
        for sl, sm in zip(slices, slice_multipliers):
            tables[(sc, sl)] = base_table.scaled(severity_multipliers[sc] * sm)
    return ScenarioModel(tables=tables, slices=slices)


# ---------------------------------------------------------------------------
# Scenario file grammar.
#
# Line-oriented text. Blank lines and lines starting with '#' are ignored.
# Every other line is one (scenario, period) record:
#
#   <scenario> <startYear> <endYear> <p>:<depth_mm> [<p>:<depth_mm> ...]
#
# e.g.  RCP45 2011 2040 0:0 0.5:12.5 0.99:61 1:80
#
# The file must cover every scenario for a consistent set of periods.
# ---------------------------------------------------------------------------

def load_scenario_model(text: str, *, path: str | None = None) -> ScenarioModel:
    tables: dict[tuple[RcpScenario, TimeSlice], RainQuantileTable] = {}
    slices: list[TimeSlice] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 4:
            raise ParseError("expected '<scenario> <start> <end> <p>:<depth> ...'", path=path, line=lineno)
        try:
            scenario = RcpScenario.parse(parts[0])
        except DomainError as e:
            raise ParseError(str(e), path=path, line=lineno)
        try:
            sl = TimeSlice(int(parts[1]), int(parts[2]))
        except (ValueError, ValidationError) as e:
            raise ParseError(f"bad period: {e}", path=path, line=lineno)
        probs, depths = [], []
        for knot in parts[3:]:
            try:
                p_s, d_s = knot.split(":")
                probs.append(float(p_s))
                depths.append(float(d_s))
            except ValueError:
                raise ParseError(f"bad knot {knot!r}, expected '<p>:<depth_mm>'", path=path, line=lineno)
        try:
            table = RainQuantileTable(tuple(probs), tuple(depths))
        except ValidationError as e:
            raise ParseError(str(e), path=path, line=lineno)
        if (scenario, sl) in tables:
            raise ParseError(f"duplicate record for {scenario.name} {sl.start_year}-{sl.end_year}", path=path, line=lineno)
        tables[(scenario, sl)] = table
        if sl not in slices:
            slices.append(sl)
    if not tables:
        raise ParseError("scenario file holds no records", path=path)
    try:
        return ScenarioModel(tables=tables, slices=tuple(sorted(slices)))
    except ValidationError as e:
        raise ParseError(str(e), path=path)


def dump_scenario_model(model: ScenarioModel) -> str:
    buf = io.StringIO()
    buf.write("# rain quantile tables: scenario startYear endYear p:depth_mm ...\n")
    for sc in RcpScenario:
        for sl in model.slices:
            t = model.tables[(sc, sl)]
            knots = " ".join(f"{p!r}:{d!r}" for p, d in zip(t.probabilities, t.depths_mm))
            buf.write(f"{sc.name} {sl.start_year} {sl.end_year} {knots}\n")
    return buf.getvalue()
