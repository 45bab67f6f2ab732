"""Sequential decision environment over the coupled flood/transport model.

One step is one planning year: pay for this year's deployments, bill
maintenance on everything already in the ground, draw the year's worst
rainfall, flood the terrain, route every trip through the flooded network,
and settle the bill. The reward is the negated sum of the five cost
channels, in DKK:

    reward = -(I + D + C + A + M)

with I infrastructure damage, D delay costs, C cancellation costs, A this
step's implementation spending, and M maintenance. A scaled copy
(reward_dkk * reward_scale) is provided for optimizers that want unit-ish
magnitudes; the identity above holds exactly on the DKK channel.

Per-zone observations are [I_z, D_z, C_z, z_1..z_7]: last year's realized
costs plus the decayed effect of each measure currently active in the zone.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass
import json

import numpy as np

from .adaptation import (
    Measure,
    N_ACTIONS,
    DeploymentLedger,
    action_mask,
    advance_year,
    deploy,
    deployment_units,
)
from .climate import RcpScenario, sample_event
from .errors import FeasibilityError, ProtocolError, ValidationError
from .floodsim import (
    TerrainGrid,
    build_depression_hierarchy,
    project_to_segments,
    simulate_flood,
    zone_adjacency,
)
from .impacts import compute_impacts
from .network import simulate_all, zone_road_stats
from .worldio import World, segment_cells

N_FEATURES = 3 + (N_ACTIONS - 1)  # I, D, C plus one slot per physical measure


@dataclass(frozen=True)
class ZoneGraph:
    """Undirected zone graph; edges from shared terrain borders.

    Worlds whose border graph is disconnected get the fewest extra edges
    needed to connect it, chosen by smallest centroid distance, so message
    passing always reaches every zone.
    """

    n_zones: int
    edges: tuple[tuple[int, int], ...]

    def adjacency_matrix(self) -> np.ndarray:
        adj = np.zeros((self.n_zones, self.n_zones))
        for a, b in self.edges:
            adj[a, b] = adj[b, a] = 1.0
        return adj

    def neighbors(self, zone: int) -> list[int]:
        out = [b for a, b in self.edges if a == zone]
        out.extend(a for a, b in self.edges if b == zone)
        return sorted(out)


def build_zone_graph(grid: TerrainGrid) -> ZoneGraph:
    nz = grid.n_zones()
    edges = set(zone_adjacency(grid))

    parent = list(range(nz))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        parent[find(a)] = find(b)
    roots = {find(z) for z in range(nz)}
    if len(roots) > 1:
        rows, cols = np.indices((grid.height, grid.width))
        cx = np.zeros(nz)
        cy = np.zeros(nz)
        for z in range(nz):
            sel = grid.zone_of == z
            cy[z] = rows[sel].mean()
            cx[z] = cols[sel].mean()
        while len({find(z) for z in range(nz)}) > 1:
            best = None
            for a in range(nz):
                for b in range(a + 1, nz):
                    if find(a) == find(b):
                        continue
                    d = float((cx[a] - cx[b]) ** 2 + (cy[a] - cy[b]) ** 2)
                    key = (d, a, b)
                    if best is None or key < best:
                        best = key
            _, a, b = best
            edges.add((a, b))
            parent[find(a)] = find(b)
    return ZoneGraph(nz, tuple(sorted(edges)))


@dataclass(frozen=True)
class EnvConfig:
    """Per-run knobs; None fields fall back to the world manifest."""

    scenario: RcpScenario
    seed: int = 0
    gamma: float = 0.99
    reward_scale: float | None = None
    start_year: int | None = None
    end_year: int | None = None

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise ValidationError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.reward_scale is not None and self.reward_scale <= 0:
            raise ValidationError("reward_scale must be positive")


@dataclass(frozen=True)
class StepInfo:
    """Everything observable about one simulated year."""

    year: int
    rain_mm: float
    I_dkk: np.ndarray
    D_dkk: np.ndarray
    C_dkk: np.ndarray
    A_dkk: np.ndarray
    M_dkk: np.ndarray
    z: np.ndarray
    outflow_m3: float
    stored_m3: float
    cancelled_trips: int
    delayed_trips: int

    @property
    def totals(self) -> dict[str, float]:
        return {
            "I": float(self.I_dkk.sum()),
            "D": float(self.D_dkk.sum()),
            "C": float(self.C_dkk.sum()),
            "A": float(self.A_dkk.sum()),
            "M": float(self.M_dkk.sum()),
        }


@dataclass(frozen=True)
class StepResult:
    state: np.ndarray
    reward_dkk: float
    reward: float
    done: bool
    masks: np.ndarray
    info: StepInfo

    def to_record(self, t: int, actions: np.ndarray) -> dict:
        """Flat JSON-serializable trajectory row."""
        rec = {
            "t": t,
            "year": self.info.year,
            "actions": [int(a) for a in actions],
            "rain_mm": self.info.rain_mm,
            "reward_dkk": self.reward_dkk,
            "reward": self.reward,
            "done": self.done,
            "cancelled": self.info.cancelled_trips,
            "delayed": self.info.delayed_trips,
            "outflow_m3": self.info.outflow_m3,
            "stored_m3": self.info.stored_m3,
        }
        rec.update({k: v for k, v in self.info.totals.items()})
        return rec


def write_trajectory(path: str, records: list[dict]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def episode_return(rewards, gamma: float) -> float:
    """Discounted sum with the first reward at discount gamma**0."""
    total = 0.0
    for t, r in enumerate(rewards):
        total += (gamma ** t) * float(r)
    return total


def do_nothing_actions(n_zones: int) -> np.ndarray:
    return np.zeros(n_zones, dtype=np.int64)


class FloodAdaptEnv:
    """Joint-action MDP: one measure choice per zone per year.

    Build once per (world, config); call reset() before stepping. Stepping a
    finished episode raises ProtocolError; an action its mask forbids raises
    FeasibilityError naming the offending zones, without touching state.
    """

    def __init__(self, world: World, config: EnvConfig):
        self.world = world
        self.config = config
        world.scenario_model.table_for(config.scenario, world.start_year)
        self.start_year = world.start_year if config.start_year is None else config.start_year
        self.end_year = world.end_year if config.end_year is None else config.end_year
        if self.start_year > self.end_year:
            raise ValidationError(
                f"start year {self.start_year} exceeds end year {self.end_year}")
        self.reward_scale = (world.reward_scale if config.reward_scale is None
                             else config.reward_scale)
        self.gamma = config.gamma
        self.n_zones = world.n_zones
        self.n_actions = N_ACTIONS
        self.hierarchy = build_depression_hierarchy(world.grid)
        self.zone_stats = zone_road_stats(world.network)
        self.seg_cells = segment_cells(world.grid, world.network)
        self.graph = build_zone_graph(world.grid)
        self._inventory_mask = self._build_inventory_mask()
        self._rng: np.random.Generator | None = None
        self._ledger: DeploymentLedger | None = None
        self._year = self.start_year
        self._t = 0
        self._done = True
        self._state = np.zeros((self.n_zones, N_FEATURES))

    def _build_inventory_mask(self) -> np.ndarray:
        """Static per-zone feasibility: a measure needs nonzero inventory."""
        inv = np.zeros((self.n_zones, N_ACTIONS), dtype=bool)
        inv[:, Measure.DO_NOTHING] = True
        for z in range(self.n_zones):
            stats = self.zone_stats.get(z)
            for m in Measure:
                if m == Measure.DO_NOTHING:
                    continue
                inv[z, m] = deployment_units(self.world.catalog[m], stats) > 0
        return inv

    @property
    def horizon(self) -> int:
        return self.end_year - self.start_year + 1

    @property
    def inventory_mask(self) -> np.ndarray:
        """Static (zones, actions) feasibility from road inventory alone."""
        return self._inventory_mask.copy()

    @property
    def year(self) -> int:
        return self._year

    @property
    def t(self) -> int:
        return self._t

    @property
    def done(self) -> bool:
        return self._done

    def _masks(self) -> np.ndarray:
        masks = np.empty((self.n_zones, N_ACTIONS), dtype=bool)
        for z in range(self.n_zones):
            masks[z] = action_mask(self._ledger, z) & self._inventory_mask[z]
        masks[:, Measure.DO_NOTHING] = True
        return masks

    def reset(self) -> tuple[np.ndarray, np.ndarray]:
        """Start an episode; returns (zeroed state, initial action masks)."""
        self._rng = np.random.default_rng(self.config.seed)
        self._ledger = DeploymentLedger()
        self._year = self.start_year
        self._t = 0
        self._done = False
        self._state = np.zeros((self.n_zones, N_FEATURES))
        return self._state.copy(), self._masks()

    def _validate_actions(self, actions) -> np.ndarray:
        arr = np.asarray(actions)
        if arr.shape != (self.n_zones,):
            raise ValidationError(
                f"expected one action per zone, shape ({self.n_zones},), got {arr.shape}")
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValidationError(f"actions must be integers, got dtype {arr.dtype}")
        if arr.min() < 0 or arr.max() >= N_ACTIONS:
            raise ValidationError(f"actions must lie in [0, {N_ACTIONS})")
        masks = self._masks()
        bad = [z for z in range(self.n_zones) if not masks[z, arr[z]]]
        if bad:
            raise FeasibilityError(
                f"masked action in zones {bad}", zones=bad)
        return arr.astype(np.int64)

    def step(self, actions) -> StepResult:
        if self._ledger is None:
            raise ProtocolError("reset() must be called before step()")
        if self._done:
            raise ProtocolError("episode is finished; call reset() to start another")
        acts = self._validate_actions(actions)
        world = self.world

        A = np.zeros(self.n_zones)
        ledger = self._ledger
        for z in range(self.n_zones):
            if acts[z] == Measure.DO_NOTHING:
                continue
            ledger, cost = deploy(ledger, z, Measure(acts[z]),
                                  self.zone_stats.get(z), world.catalog, self._year)
            A[z] = cost

        adv = advance_year(ledger, self._year, world.catalog, self.zone_stats,
                           self.n_zones, world.network.n_segments)
        self._ledger = adv.ledger

        event = sample_event(world.scenario_model, self.config.scenario,
                             self._year, self._rng)
        flood = simulate_flood(self.hierarchy, event,
                               zone_capture_m3=adv.zone_capture_m3)
        depths = project_to_segments(flood, self.seg_cells,
                                     pavement_capture_m=adv.segment_capture_m)
        outcomes = simulate_all(world.network, world.trips, depths)
        imp = compute_impacts(world.network, depths, world.trips, outcomes,
                              world.cost_model, self.n_zones)

        i_tot = float(imp.I_dkk.sum())
        d_tot = float(imp.D_dkk.sum())
        c_tot = float(imp.C_dkk.sum())
        a_tot = float(A.sum())
        m_tot = float(adv.maintenance_dkk.sum())
        reward_dkk = -(i_tot + d_tot + c_tot + a_tot + m_tot)

        cancelled = sum(1 for oc in outcomes if not oc.completed)
        delayed = sum(1 for tr, oc in zip(world.trips, outcomes)
                      if oc.completed and oc.time_h > tr.base_time_h + 1e-12)
        info = StepInfo(
            year=self._year,
            rain_mm=event.depth_mm,
            I_dkk=imp.I_dkk,
            D_dkk=imp.D_dkk,
            C_dkk=imp.C_dkk,
            A_dkk=A,
            M_dkk=adv.maintenance_dkk,
            z=adv.z,
            outflow_m3=flood.outflow_m3,
            stored_m3=float(flood.stored_m3.sum()),
            cancelled_trips=cancelled,
            delayed_trips=delayed,
        )

        self._state = np.column_stack([imp.I_dkk, imp.D_dkk, imp.C_dkk, adv.z])
        self._year += 1
        self._t += 1
        self._done = self._year > self.end_year
        return StepResult(
            state=self._state.copy(),
            reward_dkk=reward_dkk,
            reward=reward_dkk * self.reward_scale,
            done=self._done,
            masks=self._masks(),
            info=info,
        )

    def get_state(self) -> dict:
        """Snapshot for later set_state(); resuming replays identically."""
        if self._rng is None:
            raise ProtocolError("reset() must be called before get_state()")
        return {
            "year": self._year,
            "t": self._t,
            "done": self._done,
            "ledger": self._ledger.active,
            "rng": copy.deepcopy(self._rng.bit_generator.state),
            "state": self._state.copy(),
        }

    def set_state(self, snapshot: dict) -> None:
        self._year = int(snapshot["year"])
        self._t = int(snapshot["t"])
        self._done = bool(snapshot["done"])
        self._ledger = DeploymentLedger(tuple(snapshot["ledger"]))
        self._rng = np.random.default_rng()
        self._rng.bit_generator.state = copy.deepcopy(snapshot["rng"])
        self._state = np.array(snapshot["state"], dtype=np.float64).copy()

    def current_masks(self) -> np.ndarray:
        if self._ledger is None:
            raise ProtocolError("reset() must be called before current_masks()")
        return self._masks()
