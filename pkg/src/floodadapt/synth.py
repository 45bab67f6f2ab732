"""Synthetic city generation: terrain, zones, street graph, and trip demand.

Stands in for a real city extract. The terrain is a tilted plane with rolling
bumps and a carved depression near each zone's central junction, so heavy
rain ponds on streets; zones partition cells by nearest zone seed; the street
graph is a jittered lattice joined by a Delaunay triangulation, giving a
connected planar network shared by all three modes. Everything is a pure
function of the seed.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial import Delaunay

from .adaptation import default_catalog
from .climate import RainQuantileTable, RcpScenario, synth_scenario_model
from .errors import ValidationError
from .floodsim import TerrainGrid
from .impacts import default_cost_model
from .network import (
    BICYCLE_SPEED_KMH,
    WALK_SPEED_KMH,
    NetworkNode,
    Segment,
    TransportNetwork,
    Trip,
    base_travel_time,
)
from .worldio import World

DEFAULT_MODE_SHARES = {"car": 0.027, "bicycle": 0.193, "walk": 0.78}

ROAD_CLASSES = (
    ("arterial", 60.0, 0.20),
    ("residential", 40.0, 0.50),
    ("local", 30.0, 0.30),
)
CAR_WIDTH_M = 7.0
BIKE_WIDTH_M = 2.5
WALK_WIDTH_M = 2.0


def synth_city(
    zones: int,
    seed: int,
    n_trips: int = 600,
    grid_shape: tuple[int, int] = (40, 40),
    cell_size_m: float = 5.0,
    node_spacing_cells: int = 7,
    pit_depth_m: tuple[float, float] = (0.5, 1.1),
    pit_sigma_cells: float = 1.4,
    slope_per_m: float = 0.004,
    bump_amp_m: float = 0.35,
    mode_shares: dict[str, float] | None = None,
):
    """Generate (TerrainGrid, TransportNetwork, trips) for a synthetic city."""
    if zones < 1:
        raise ValidationError(f"zones must be >= 1, got {zones}")
    if n_trips < 0:
        raise ValidationError("n_trips must be nonnegative")
    h, w = grid_shape
    if h < 4 or w < 4:
        raise ValidationError("grid must be at least 4x4")
    rng = np.random.default_rng(seed)
    shares = dict(DEFAULT_MODE_SHARES if mode_shares is None else mode_shares)

    for attempt in range(20):
        built = _try_build(zones, rng, h, w, cell_size_m, node_spacing_cells,
                           pit_depth_m, pit_sigma_cells, slope_per_m, bump_amp_m)
        if built is not None:
            grid, net = built
            break
    else:
        raise ValidationError("could not place a node in every zone; increase grid size")

    trips = sample_trips(net, zones, n_trips, shares, rng)
    return grid, net, trips


def _try_build(zones, rng, h, w, cell, spacing, pit_depth, pit_sigma, slope, bump_amp):
    # zone seeds and nearest-seed partition over cell centers
    seeds = rng.uniform([0.15 * w * cell, 0.15 * h * cell],
                        [0.85 * w * cell, 0.85 * h * cell], size=(zones, 2))
    cx = (np.arange(w) + 0.5) * cell
    cy = (np.arange(h) + 0.5) * cell
    gx, gy = np.meshgrid(cx, cy)
    d2 = (gx[..., None] - seeds[:, 0]) ** 2 + (gy[..., None] - seeds[:, 1]) ** 2
    zone_of = np.argmin(d2, axis=2).astype(np.int64)
    if len(np.unique(zone_of)) != zones:
        return None

    # nodes: jittered lattice plus one junction per zone seed
    pts = []
    for r in np.arange(spacing * 0.5, h, spacing):
        for c in np.arange(spacing * 0.5, w, spacing):
            jr = r + rng.uniform(-1.2, 1.2)
            jc = c + rng.uniform(-1.2, 1.2)
            pts.append(((jc + 0.5) * cell, (jr + 0.5) * cell))
    pts.extend((float(s[0]), float(s[1])) for s in seeds)
    xy = np.array(pts)
    xy[:, 0] = np.clip(xy[:, 0], 0.5 * cell, (w - 0.5) * cell)
    xy[:, 1] = np.clip(xy[:, 1], 0.5 * cell, (h - 0.5) * cell)
    if len(xy) < 3:
        return None

    def cell_of(x, y):
        col = min(max(int(x / cell), 0), w - 1)
        row = min(max(int(y / cell), 0), h - 1)
        return row, col

    node_zone = np.array([zone_of[cell_of(x, y)] for x, y in xy], dtype=np.int64)
    if len(np.unique(node_zone)) != zones:
        return None

    # terrain: tilt + rolling bumps + a depression carved at each zone junction
    elev = slope * gy + 0.5 * slope * gx
    n_bumps = max(3, zones)
    for _ in range(n_bumps):
        bx = rng.uniform(0, w * cell)
        by = rng.uniform(0, h * cell)
        amp = rng.uniform(-bump_amp, bump_amp)
        sig = rng.uniform(6, 14) * cell
        elev += amp * np.exp(-((gx - bx) ** 2 + (gy - by) ** 2) / (2 * sig * sig))
    zone_center_nodes = np.arange(len(xy) - zones, len(xy))
    sig = pit_sigma * cell
    for ni in zone_center_nodes:
        px, py = xy[ni]
        depth = rng.uniform(*pit_depth)
        elev -= depth * np.exp(-((gx - px) ** 2 + (gy - py) ** 2) / (2 * sig * sig))
    grid = TerrainGrid(elev, zone_of, cell_area_m2=cell * cell)

    # street graph from the Delaunay triangulation of the junctions
    tri = Delaunay(xy)
    pairs = set()
    for simplex in tri.simplices:
        for i in range(3):
            a, b = int(simplex[i]), int(simplex[(i + 1) % 3])
            pairs.add((min(a, b), max(a, b)))
    nodes = [NetworkNode(i, float(x), float(y), int(z))
             for i, ((x, y), z) in enumerate(zip(xy, node_zone))]

    class_draw = rng.random(len(pairs))
    segments = []
    sid = 0
    probs = np.cumsum([p for _, _, p in ROAD_CLASSES])
    for k, (a, b) in enumerate(sorted(pairs)):
        length = float(np.hypot(*(xy[a] - xy[b])))
        mx, my = (xy[a] + xy[b]) / 2.0
        zone = int(zone_of[cell_of(mx, my)])
        ci = int(np.searchsorted(probs, class_draw[k]))
        ci = min(ci, len(ROAD_CLASSES) - 1)
        cls, car_speed, _ = ROAD_CLASSES[ci]
        for u, v in ((a, b), (b, a)):
            segments.append(Segment(sid, u, v, "car", length, zone, car_speed,
                                    length * CAR_WIDTH_M / 2.0, cls))
            sid += 1
        for u, v in ((a, b), (b, a)):
            segments.append(Segment(sid, u, v, "bicycle", length, zone, BICYCLE_SPEED_KMH,
                                    length * BIKE_WIDTH_M / 2.0, "bike_path"))
            sid += 1
        for u, v in ((a, b), (b, a)):
            segments.append(Segment(sid, u, v, "walk", length, zone, WALK_SPEED_KMH,
                                    length * WALK_WIDTH_M / 2.0, "footpath"))
            sid += 1
    return grid, TransportNetwork(nodes, segments)


def sample_trips(
    net: TransportNetwork,
    zones: int,
    n_trips: int,
    shares: dict[str, float],
    rng: np.random.Generator,
    start_id: int = 0,
) -> list[Trip]:
    """Draw a trip table: mode by survey share, O/D zones uniform, nodes uniform in zone."""
    modes = list(shares)
    p = np.array([shares[m] for m in modes], dtype=float)
    if np.any(p < 0) or p.sum() <= 0:
        raise ValidationError("mode shares must be nonnegative and sum to a positive value")
    p = p / p.sum()
    zone_nodes = {m: {z: net.zone_mode_nodes(m, z) for z in range(zones)} for m in modes}
    trips: list[Trip] = []
    for i in range(n_trips):
        mode = modes[int(rng.choice(len(modes), p=p))]
        oz = int(rng.integers(zones))
        dz = int(rng.integers(zones))
        o_nodes = zone_nodes[mode][oz]
        d_nodes = zone_nodes[mode][dz]
        if o_nodes.size == 0 or d_nodes.size == 0:
            raise ValidationError(f"zone {oz if o_nodes.size == 0 else dz} has no {mode} nodes")
        on = int(rng.choice(o_nodes))
        dn = int(rng.choice(d_nodes))
        base = 0.0 if on == dn else base_travel_time(net, mode, on, dn)
        trips.append(Trip(start_id + i, mode, oz, dz, on, dn, base))
    return trips


DEFAULT_BASE_KNOTS = ((0.0, 0.0), (0.70, 18.0), (0.90, 34.0), (0.97, 52.0), (1.0, 78.0))


def synth_world(
    zones: int,
    seed: int,
    name: str | None = None,
    scenario_multipliers: tuple[float, float, float] = (1.0, 1.35, 1.9),
    slice_multipliers: tuple[float, ...] = (1.0, 1.15, 1.3),
    base_knots: tuple[tuple[float, float], ...] = DEFAULT_BASE_KNOTS,
    start_year: int = 2024,
    end_year: int = 2100,
    reward_scale: float = 1e-8,
    default_scenario: RcpScenario = RcpScenario.RCP45,
    trip_seed: int | None = None,
    **city_kwargs,
) -> World:
    """Bundle a synthetic city with default economics into a ready World."""
    grid, net, trips = synth_city(zones, seed, **city_kwargs)
    base = RainQuantileTable(tuple(q for q, _ in base_knots),
                             tuple(d for _, d in base_knots))
    model = synth_scenario_model(scenario_multipliers, base,
                                 slice_multipliers=slice_multipliers)
    return World(
        name=name if name is not None else f"synth-{zones}z-{seed}",
        grid=grid,
        network=net,
        trips=trips,
        scenario_model=model,
        cost_model=default_cost_model(),
        catalog=default_catalog(),
        start_year=start_year,
        end_year=end_year,
        reward_scale=reward_scale,
        default_scenario=default_scenario,
        trip_seed=trip_seed if trip_seed is not None else seed,
    )
