"""Multi-modal transport graphs, flood-disrupted speeds, and trip routing.

Three modes (car, bicycle, walk) share one node universe; each mode owns its
directed segments. Standing water reduces segment speed linearly from the
mode maximum at zero depth to zero at the mode's impassability cutoff, and
trips are routed by travel time over the surviving segments. Cancellation is
exactly disconnection: a trip fails only when no positive-speed path remains.
"""
from __future__ import annotations

from dataclasses import dataclass
import heapq

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse import csgraph

from .errors import ValidationError

MODES = ("car", "bicycle", "walk")
MODE_INDEX = {m: i for i, m in enumerate(MODES)}

BICYCLE_SPEED_KMH = 16.2
WALK_SPEED_KMH = 5.65

# depth at which the mode becomes impassable
CUTOFF_M = {"car": 0.30, "bicycle": 0.20, "walk": 1.50}


def disrupted_speed(mode: str, max_speed_kmh: float, depth_m: float) -> float:
    """Speed under depth_m of standing water: linear from max to 0 at cutoff."""
    if mode not in MODE_INDEX:
        raise ValidationError(f"unknown mode {mode!r}")
    if not np.isfinite(depth_m) or depth_m < 0:
        raise ValidationError(f"depth must be finite and nonnegative, got {depth_m}")
    cutoff = CUTOFF_M[mode]
    if depth_m >= cutoff:
        return 0.0
    return max_speed_kmh * (1.0 - depth_m / cutoff)


def _speed_array(mode: str, max_speed_kmh: np.ndarray, depth_m: np.ndarray) -> np.ndarray:
    cutoff = CUTOFF_M[mode]
    return np.where(depth_m >= cutoff, 0.0, max_speed_kmh * (1.0 - depth_m / cutoff))


@dataclass(frozen=True)
class NetworkNode:
    id: int
    x: float
    y: float
    zone: int


@dataclass(frozen=True)
class Segment:
    """One directed link. Twin segments of a two-way road share endpoints."""

    id: int
    from_node: int
    to_node: int
    mode: str
    length_m: float
    zone: int
    max_speed_kmh: float
    surface_area_m2: float
    road_class: str


@dataclass(frozen=True)
class Trip:
    id: int
    mode: str
    origin_zone: int
    destination_zone: int
    origin_node: int
    destination_node: int
    base_time_h: float


@dataclass(frozen=True)
class TripOutcome:
    trip_id: int
    status: str  # "completed" | "cancelled"
    time_h: float  # travel time when completed, nan otherwise

    @property
    def completed(self) -> bool:
        return self.status == "completed"


class TransportNetwork:
    """Immutable multi-modal graph with per-mode routing structures.

    Nodes and segments must use contiguous ids starting at 0. Bicycle and
    walk segments must carry the fixed mode speeds; car speed is a segment
    attribute.
    """

    def __init__(self, nodes: list[NetworkNode], segments: list[Segment]):
        if not nodes:
            raise ValidationError("network requires at least one node")
        if sorted(n.id for n in nodes) != list(range(len(nodes))):
            raise ValidationError("node ids must be contiguous from 0")
        if sorted(s.id for s in segments) != list(range(len(segments))):
            raise ValidationError("segment ids must be contiguous from 0")
        self.nodes = sorted(nodes, key=lambda n: n.id)
        self.segments = sorted(segments, key=lambda s: s.id)
        n = len(self.nodes)
        self.node_x = np.array([nd.x for nd in self.nodes])
        self.node_y = np.array([nd.y for nd in self.nodes])
        self.node_zone = np.array([nd.zone for nd in self.nodes], dtype=np.int64)

        for s in self.segments:
            if s.mode not in MODE_INDEX:
                raise ValidationError(f"segment {s.id}: unknown mode {s.mode!r}")
            if not (s.length_m > 0) or not np.isfinite(s.length_m):
                raise ValidationError(f"segment {s.id}: length must be positive")
            if not (0 <= s.from_node < n) or not (0 <= s.to_node < n):
                raise ValidationError(f"segment {s.id}: endpoint outside node range")
            if s.max_speed_kmh <= 0 or not np.isfinite(s.max_speed_kmh):
                raise ValidationError(f"segment {s.id}: max speed must be positive")
            if s.mode == "bicycle" and s.max_speed_kmh != BICYCLE_SPEED_KMH:
                raise ValidationError(
                    f"segment {s.id}: bicycle segments travel at {BICYCLE_SPEED_KMH} km/h")
            if s.mode == "walk" and s.max_speed_kmh != WALK_SPEED_KMH:
                raise ValidationError(
                    f"segment {s.id}: walk segments travel at {WALK_SPEED_KMH} km/h")
            if s.surface_area_m2 < 0:
                raise ValidationError(f"segment {s.id}: surface area must be nonnegative")

        self.seg_from = np.array([s.from_node for s in self.segments], dtype=np.int64)
        self.seg_to = np.array([s.to_node for s in self.segments], dtype=np.int64)
        self.seg_length_m = np.array([s.length_m for s in self.segments])
        self.seg_zone = np.array([s.zone for s in self.segments], dtype=np.int64)
        self.seg_speed_kmh = np.array([s.max_speed_kmh for s in self.segments])
        self.seg_surface_m2 = np.array([s.surface_area_m2 for s in self.segments])
        self.mode_segments = {
            m: np.array([s.id for s in self.segments if s.mode == m], dtype=np.int64)
            for m in MODES
        }
        self._routers = {m: _ModeRouter(self, m) for m in MODES}

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    def mode_node_ids(self, mode: str) -> np.ndarray:
        """Nodes touched by the mode's segments, ascending."""
        idx = self.mode_segments[mode]
        return np.unique(np.concatenate([self.seg_from[idx], self.seg_to[idx]]))

    def zone_mode_nodes(self, mode: str, zone: int) -> np.ndarray:
        ids = self.mode_node_ids(mode)
        return ids[self.node_zone[ids] == zone]


class _ModeRouter:
    """Reusable sparse shortest-path structure for one mode.

    The sparsity pattern is built once; per-call segment times are folded to a
    minimum over parallel segments and written into the matrix data in place.
    """

    def __init__(self, net: TransportNetwork, mode: str):
        self.net = net
        self.mode = mode
        self.seg_idx = net.mode_segments[mode]
        u = net.seg_from[self.seg_idx]
        v = net.seg_to[self.seg_idx]
        n = net.n_nodes
        pair_key = u * n + v
        uniq, slot = np.unique(pair_key, return_inverse=True)
        self.slot = slot
        self.n_pairs = uniq.size
        if self.n_pairs:
            rows = (uniq // n).astype(np.int64)
            cols = (uniq % n).astype(np.int64)
            m = csr_matrix((np.arange(self.n_pairs, dtype=np.float64), (rows, cols)), shape=(n, n))
            self.perm = m.data.astype(np.int64)
            self.matrix = m
        else:
            self.perm = np.zeros(0, dtype=np.int64)
            self.matrix = csr_matrix((n, n))

    def segment_times_h(self, depths: np.ndarray) -> np.ndarray:
        speeds = _speed_array(self.mode, self.net.seg_speed_kmh[self.seg_idx], depths[self.seg_idx])
        lengths_km = self.net.seg_length_m[self.seg_idx] / 1000.0
        with np.errstate(divide="ignore"):
            return np.where(speeds > 0, lengths_km / np.maximum(speeds, 1e-300), np.inf)

    def distances_from(self, origins: np.ndarray, depths: np.ndarray) -> np.ndarray:
        """Travel-time rows, one per origin node; unreachable entries are inf."""
        if self.n_pairs == 0:
            out = np.full((origins.size, self.net.n_nodes), np.inf)
            out[np.arange(origins.size), origins] = 0.0
            return out
        times = self.segment_times_h(depths)
        pair_time = np.full(self.n_pairs, np.inf)
        np.minimum.at(pair_time, self.slot, times)
        self.matrix.data = pair_time[self.perm]
        return csgraph.dijkstra(self.matrix, directed=True, indices=origins)


def _check_depths(net: TransportNetwork, depths) -> np.ndarray:
    d = np.asarray(depths, dtype=np.float64)
    if d.shape != (net.n_segments,):
        raise ValidationError(
            f"expected one depth per segment ({net.n_segments}), got shape {d.shape}")
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise ValidationError("segment depths must be finite and nonnegative")
    return d


def shortest_route(
    net: TransportNetwork,
    mode: str,
    origin: int,
    destination: int,
    segment_depths,
) -> tuple[float | None, list[int]]:
    """Exact minimum-time route with deterministic tie-breaking.

    Ties are resolved by fewer segments, then lexicographically smallest
    segment-id sequence. Returns (time_h, segment ids), or (None, []) when the
    destination is unreachable.
    """
    depths = _check_depths(net, segment_depths)
    if mode not in MODE_INDEX:
        raise ValidationError(f"unknown mode {mode!r}")
    if origin == destination:
        return 0.0, []
    idx = net.mode_segments[mode]
    speeds = _speed_array(mode, net.seg_speed_kmh[idx], depths[idx])
    open_seg = speeds > 0
    times = (net.seg_length_m[idx][open_seg] / 1000.0) / speeds[open_seg]
    seg_ids = idx[open_seg]
    heads = net.seg_from[seg_ids]
    adj: dict[int, list[tuple[int, float, int]]] = {}
    for sid, u, v, t in zip(seg_ids, heads, net.seg_to[seg_ids], times):
        adj.setdefault(int(u), []).append((int(v), float(t), int(sid)))

    settled: set[int] = set()
    heap: list[tuple[float, int, tuple[int, ...], int]] = [(0.0, 0, (), origin)]
    while heap:
        t, hops, segs, node = heapq.heappop(heap)
        if node in settled:
            continue
        settled.add(node)
        if node == destination:
            return t, list(segs)
        for v, dt, sid in adj.get(node, []):
            if v not in settled:
                heapq.heappush(heap, (t + dt, hops + 1, segs + (sid,), v))
    return None, []


def route_trip(net: TransportNetwork, trip: Trip, segment_depths) -> TripOutcome:
    """Route one trip; cancelled exactly when no positive-speed path exists."""
    time_h, _ = shortest_route(net, trip.mode, trip.origin_node, trip.destination_node,
                               segment_depths)
    if time_h is None:
        return TripOutcome(trip.id, "cancelled", float("nan"))
    return TripOutcome(trip.id, "completed", time_h)


def simulate_all(net: TransportNetwork, trips: list[Trip], segment_depths) -> list[TripOutcome]:
    """Route every trip under one shared depth field.

    Equivalent to route_trip per trip but batched per mode: trips sharing an
    origin reuse one shortest-path tree, and a mode whose segments are all dry
    is answered from precomputed base times.
    """
    depths = _check_depths(net, segment_depths)
    out: list[TripOutcome | None] = [None] * len(trips)
    by_mode: dict[str, list[int]] = {}
    for i, tr in enumerate(trips):
        if tr.mode not in MODE_INDEX:
            raise ValidationError(f"trip {tr.id}: unknown mode {tr.mode!r}")
        by_mode.setdefault(tr.mode, []).append(i)

    for mode, rows in by_mode.items():
        router = net._routers[mode]
        if not np.any(depths[router.seg_idx] > 0):
            for i in rows:
                tr = trips[i]
                out[i] = TripOutcome(tr.id, "completed", tr.base_time_h)
            continue
        origins = np.array(sorted({trips[i].origin_node for i in rows}), dtype=np.int64)
        origin_row = {int(o): k for k, o in enumerate(origins)}
        dist = router.distances_from(origins, depths)
        for i in rows:
            tr = trips[i]
            t = dist[origin_row[tr.origin_node], tr.destination_node]
            if np.isfinite(t):
                out[i] = TripOutcome(tr.id, "completed", float(t))
            else:
                out[i] = TripOutcome(tr.id, "cancelled", float("nan"))
    return out  # type: ignore[return-value]


def base_travel_time(net: TransportNetwork, mode: str, origin: int, destination: int) -> float:
    """Free-flow travel time; raises when the pair is disconnected even dry."""
    t, _ = shortest_route(net, mode, origin, destination, np.zeros(net.n_segments))
    if t is None:
        raise ValidationError(
            f"no {mode} path between nodes {origin} and {destination} on a dry network")
    return t


@dataclass(frozen=True)
class ZoneRoadStats:
    """Per-zone road inventory used to size adaptation deployments.

    A road is the set of car segments joining one unordered node pair; twin
    directed segments therefore count as a single road whose surface area is
    the sum over the twins.
    """

    zone: int
    road_count: int
    road_lengths_m: tuple[float, ...]
    car_surface_m2: float
    car_segment_ids: tuple[int, ...]


def zone_road_stats(net: TransportNetwork) -> dict[int, ZoneRoadStats]:
    groups: dict[int, dict[frozenset, list[Segment]]] = {}
    for sid in net.mode_segments["car"]:
        seg = net.segments[int(sid)]
        pair = frozenset((seg.from_node, seg.to_node))
        groups.setdefault(seg.zone, {}).setdefault(pair, []).append(seg)
    stats: dict[int, ZoneRoadStats] = {}
    for zone, roads in groups.items():
        lengths = tuple(
            float(np.mean([s.length_m for s in segs])) for _, segs in sorted(
                roads.items(), key=lambda kv: min(s.id for s in kv[1]))
        )
        seg_ids = tuple(sorted(s.id for segs in roads.values() for s in segs))
        surface = float(sum(s.surface_area_m2 for segs in roads.values() for s in segs))
        stats[zone] = ZoneRoadStats(zone, len(roads), lengths, surface, seg_ids)
    return stats
