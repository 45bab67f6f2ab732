"""World bundle persistence: terrain, network, trips, manifest, geometry.

A "world" is a directory with a manifest naming its parts:

  manifest.json   {"version": 1, "name": ..., "tripSeed": int,
                   "startYear": int, "endYear": int, "rewardScale": float,
                   "defaultScenario": "RCP45",
                   "files": {"terrain": ..., "network": ..., "trips": ...,
                             "scenario": ..., "costs": ..., "measures": ...}}

  terrain file    line 1: "TERRAIN <rows> <cols> <cellSize_m>"
                  <rows> whitespace-separated elevation rows (metres),
                  a line "ZONES",
                  <rows> integer zone-id rows (-1 marks an outlet cell).

  network file    JSON {"version": 1, "nodes": [{"id", "x", "y", "zone"}...],
                   "segments": [{"id", "from", "to", "mode", "length_m",
                                 "zone", "maxSpeed_kmh", "surfaceArea_m2",
                                 "roadClass"}...]}; ids contiguous from 0.

  trips file      JSON {"version": 1, "trips": [{"id", "mode", "originZone",
                   "destZone"}...]}. Origin/destination nodes are sampled at
                  load time from the manifest's tripSeed, so a world is fully
                  determined by its files.

Scenario, cost-model, and measure-catalog grammars live with their modules.
"""
from __future__ import annotations

from dataclasses import dataclass
import json
import os

import numpy as np

from .adaptation import MeasureCatalog, dump_catalog, load_catalog
from .climate import RcpScenario, ScenarioModel, dump_scenario_model, load_scenario_model
from .errors import ParseError, ValidationError
from .floodsim import OUTLET_MARKER, TerrainGrid
from .impacts import CostModel, dump_cost_model, load_cost_model
from .network import (
    MODE_INDEX,
    NetworkNode,
    Segment,
    TransportNetwork,
    Trip,
    base_travel_time,
)


def dump_terrain(grid: TerrainGrid, path: str) -> None:
    h, w = grid.height, grid.width
    size = float(np.sqrt(grid.cell_area_m2))
    with open(path, "w") as fh:
        fh.write(f"TERRAIN {h} {w} {size!r}\n")
        for r in range(h):
            fh.write(" ".join(repr(float(v)) for v in grid.elevation_m[r]) + "\n")
        fh.write("ZONES\n")
        for r in range(h):
            fh.write(" ".join(str(int(v)) for v in grid.zone_of[r]) + "\n")


def load_terrain(path: str) -> TerrainGrid:
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read terrain: {exc}", path=path) from exc
    if not lines or not lines[0].startswith("TERRAIN"):
        raise ParseError("terrain file must start with a TERRAIN header", path=path, line=1)
    head = lines[0].split()
    if len(head) != 4:
        raise ParseError("TERRAIN header needs <rows> <cols> <cellSize_m>", path=path, line=1)
    try:
        h, w, size = int(head[1]), int(head[2]), float(head[3])
    except ValueError as exc:
        raise ParseError(f"bad TERRAIN header: {exc}", path=path, line=1) from exc
    if size <= 0:
        raise ParseError("cell size must be positive", path=path, line=1)
    if len(lines) < 1 + h + 1 + h:
        raise ParseError(f"expected {2 * h + 2} lines for a {h}x{w} terrain", path=path)
    try:
        elev = np.array([[float(v) for v in lines[1 + r].split()] for r in range(h)])
    except ValueError as exc:
        raise ParseError(f"bad elevation row: {exc}", path=path) from exc
    if lines[1 + h].strip() != "ZONES":
        raise ParseError("missing ZONES separator", path=path, line=2 + h)
    try:
        zones = np.array([[int(v) for v in lines[2 + h + r].split()] for r in range(h)],
                         dtype=np.int64)
    except ValueError as exc:
        raise ParseError(f"bad zone row: {exc}", path=path) from exc
    if elev.shape != (h, w) or zones.shape != (h, w):
        raise ParseError(f"terrain body does not match {h}x{w} header", path=path)
    present = np.unique(zones)
    real = present[present != OUTLET_MARKER]
    if real.size == 0:
        raise ParseError("terrain needs at least one non-outlet zone", path=path)
    if real[0] < 0 or not np.array_equal(real, np.arange(real.size)):
        raise ParseError("zone ids must be contiguous from 0 (plus optional -1 outlets)",
                         path=path)
    return TerrainGrid(elev, zones, cell_area_m2=size * size)


def dump_network(net: TransportNetwork, path: str) -> None:
    doc = {
        "version": 1,
        "nodes": [{"id": n.id, "x": n.x, "y": n.y, "zone": n.zone} for n in net.nodes],
        "segments": [
            {
                "id": s.id, "from": s.from_node, "to": s.to_node, "mode": s.mode,
                "length_m": s.length_m, "zone": s.zone, "maxSpeed_kmh": s.max_speed_kmh,
                "surfaceArea_m2": s.surface_area_m2, "roadClass": s.road_class,
            }
            for s in net.segments
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_network(path: str) -> TransportNetwork:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read network: {exc}", path=path) from exc
    try:
        if doc.get("version") != 1:
            raise ParseError(f"unsupported network version {doc.get('version')!r}", path=path)
        nodes = [NetworkNode(int(n["id"]), float(n["x"]), float(n["y"]), int(n["zone"]))
                 for n in doc["nodes"]]
        segs = [
            Segment(int(s["id"]), int(s["from"]), int(s["to"]), str(s["mode"]),
                    float(s["length_m"]), int(s["zone"]), float(s["maxSpeed_kmh"]),
                    float(s["surfaceArea_m2"]), str(s["roadClass"]))
            for s in doc["segments"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed network: {exc!r}", path=path) from exc
    try:
        return TransportNetwork(nodes, segs)
    except ValidationError as exc:
        raise ParseError(str(exc), path=path) from exc


def dump_trips(trips: list[Trip], path: str) -> None:
    doc = {
        "version": 1,
        "trips": [
            {"id": t.id, "mode": t.mode, "originZone": t.origin_zone,
             "destZone": t.destination_zone}
            for t in trips
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_trips(path: str, net: TransportNetwork, seed: int) -> list[Trip]:
    """Read trip demand and realize nodes/base times deterministically."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read trips: {exc}", path=path) from exc
    if doc.get("version") != 1:
        raise ParseError(f"unsupported trips version {doc.get('version')!r}", path=path)
    rng = np.random.default_rng(seed)
    trips: list[Trip] = []
    zone_nodes: dict[tuple[str, int], np.ndarray] = {}
    try:
        records = [(int(t["id"]), str(t["mode"]), int(t["originZone"]), int(t["destZone"]))
                   for t in doc["trips"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed trips: {exc!r}", path=path) from exc
    for tid, mode, oz, dz in records:
        if mode not in MODE_INDEX:
            raise ParseError(f"trip {tid}: unknown mode {mode!r}", path=path)
        for z in (oz, dz):
            if (mode, z) not in zone_nodes:
                zone_nodes[(mode, z)] = net.zone_mode_nodes(mode, z)
            if zone_nodes[(mode, z)].size == 0:
                raise ParseError(f"trip {tid}: zone {z} has no {mode} nodes", path=path)
        on = int(rng.choice(zone_nodes[(mode, oz)]))
        dn = int(rng.choice(zone_nodes[(mode, dz)]))
        base = 0.0 if on == dn else base_travel_time(net, mode, on, dn)
        trips.append(Trip(tid, mode, oz, dz, on, dn, base))
    return trips


def segment_cells(grid: TerrainGrid, net: TransportNetwork) -> list[np.ndarray]:
    """Flat terrain-cell indices swept by each segment's centre line.

    Cells are assumed square with side sqrt(cellArea); points are sampled
    along the segment every half cell, so no crossed cell is skipped.
    """
    size = float(np.sqrt(grid.cell_area_m2))
    h, w = grid.height, grid.width
    out: list[np.ndarray] = []
    for seg in net.segments:
        a = np.array([net.node_x[seg.from_node], net.node_y[seg.from_node]])
        b = np.array([net.node_x[seg.to_node], net.node_y[seg.to_node]])
        n_pts = max(2, int(np.ceil(np.linalg.norm(b - a) / (0.5 * size))) + 1)
        t = np.linspace(0.0, 1.0, n_pts)
        pts = a[None, :] + t[:, None] * (b - a)[None, :]
        cols = np.clip((pts[:, 0] / size).astype(np.int64), 0, w - 1)
        rows = np.clip((pts[:, 1] / size).astype(np.int64), 0, h - 1)
        out.append(np.unique(rows * w + cols))
    return out


@dataclass
class World:
    """Everything one simulation needs, loaded from a world directory."""

    name: str
    grid: TerrainGrid
    network: TransportNetwork
    trips: list[Trip]
    scenario_model: ScenarioModel
    cost_model: CostModel
    catalog: MeasureCatalog
    start_year: int
    end_year: int
    reward_scale: float
    default_scenario: RcpScenario
    trip_seed: int

    @property
    def n_zones(self) -> int:
        return self.grid.n_zones()


MANIFEST_NAME = "manifest.json"
_DEFAULT_FILES = {
    "terrain": "terrain.txt",
    "network": "network.json",
    "trips": "trips.json",
    "scenario": "scenario.txt",
    "costs": "costs.json",
    "measures": "measures.json",
}


def save_world(world: World, directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    files = dict(_DEFAULT_FILES)
    dump_terrain(world.grid, os.path.join(directory, files["terrain"]))
    dump_network(world.network, os.path.join(directory, files["network"]))
    dump_trips(world.trips, os.path.join(directory, files["trips"]))
    with open(os.path.join(directory, files["scenario"]), "w") as fh:
        fh.write(dump_scenario_model(world.scenario_model))
    dump_cost_model(world.cost_model, os.path.join(directory, files["costs"]))
    dump_catalog(world.catalog, os.path.join(directory, files["measures"]))
    manifest = {
        "version": 1,
        "name": world.name,
        "tripSeed": world.trip_seed,
        "startYear": world.start_year,
        "endYear": world.end_year,
        "rewardScale": world.reward_scale,
        "defaultScenario": world.default_scenario.name,
        "files": files,
    }
    with open(os.path.join(directory, MANIFEST_NAME), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_world(directory: str) -> World:
    mpath = os.path.join(directory, MANIFEST_NAME)
    try:
        with open(mpath) as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read world manifest: {exc}", path=mpath) from exc
    if manifest.get("version") != 1:
        raise ParseError(f"unsupported manifest version {manifest.get('version')!r}", path=mpath)
    try:
        files = {k: os.path.join(directory, v) for k, v in manifest["files"].items()}
        name = str(manifest["name"])
        trip_seed = int(manifest["tripSeed"])
        start_year = int(manifest["startYear"])
        end_year = int(manifest["endYear"])
        reward_scale = float(manifest["rewardScale"])
        default_scenario = RcpScenario.parse(manifest["defaultScenario"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed manifest: {exc!r}", path=mpath) from exc
    grid = load_terrain(files["terrain"])
    net = load_network(files["network"])
    trips = load_trips(files["trips"], net, trip_seed)
    try:
        with open(files["scenario"]) as fh:
            scenario_text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read scenario model: {exc}", path=files["scenario"]) from exc
    world = World(
        name=name,
        grid=grid,
        network=net,
        trips=trips,
        scenario_model=load_scenario_model(scenario_text, path=files["scenario"]),
        cost_model=load_cost_model(files["costs"]),
        catalog=load_catalog(files["measures"]),
        start_year=start_year,
        end_year=end_year,
        reward_scale=reward_scale,
        default_scenario=default_scenario,
        trip_seed=trip_seed,
    )
    _validate_world(world)
    return world


def _validate_world(world: World) -> None:
    nz = world.n_zones
    if world.start_year >= world.end_year:
        raise ValidationError("world startYear must precede endYear")
    if world.reward_scale <= 0:
        raise ValidationError("rewardScale must be positive")
    for nd in world.network.nodes:
        if not (0 <= nd.zone < nz):
            raise ValidationError(f"node {nd.id}: zone {nd.zone} outside terrain zones")
    for seg in world.network.segments:
        if not (0 <= seg.zone < nz):
            raise ValidationError(f"segment {seg.id}: zone {seg.zone} outside terrain zones")
    for tr in world.trips:
        if not (0 <= tr.origin_zone < nz) or not (0 <= tr.destination_zone < nz):
            raise ValidationError(f"trip {tr.id}: zone outside terrain zones")
