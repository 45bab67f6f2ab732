"""Terrain depressions and volume-conserving fill-spill flood simulation.

The terrain is a uniform grid. Depressions are organised as a forest: leaves
are pits, an internal node is the basin formed where two child basins meet at
a saddle, and roots spill over the domain edge (or marked outlet cells) to
the outlet. A rain event routes each cell's water to a pit (or out of the
domain), then water cascades through the forest: a node's overflow pours
back into sibling spare storage below the shared saddle before any water is
held above it, and surplus beyond the root rims leaves as outflow.

Domain edge rule: the void outside the grid adjoins a cell only across
directions in which the grid has extent > 1, so a 1xN strip drains at its
two ends only. Cells with zone id OUTLET_MARKER are explicit outlets: they
belong to the outlet from the start and their stated elevation is ignored.

Routing rule: a cell's rain follows its lowest already-swept in-grid
neighbour (ties broken by lowest cell id); only a cell with no such
neighbour sheds to the void (if edge- or marker-adjacent) or is a pit.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .climate import RainEvent
from .errors import ValidationError

#: zone id marking an explicit outlet cell.
OUTLET_MARKER = -1


@dataclass
class TerrainGrid:
    """Uniform elevation grid with a zone id per cell.

    elevation_m: (H, W) float array, finite.
    zone_of: (H, W) int array; >= 0 is a zone index, OUTLET_MARKER marks
        outlet cells.
    cell_area_m2: horizontal area of one cell.
    """

    elevation_m: np.ndarray
    zone_of: np.ndarray
    cell_area_m2: float

    def __post_init__(self):
        self.elevation_m = np.asarray(self.elevation_m, dtype=np.float64)
        self.zone_of = np.asarray(self.zone_of, dtype=np.int64)
        if self.elevation_m.ndim != 2:
            raise ValidationError("elevation grid must be 2-d")
        if self.zone_of.shape != self.elevation_m.shape:
            raise ValidationError("zone map shape differs from elevation grid")
        if not np.all(np.isfinite(self.elevation_m)):
            raise ValidationError("elevations must be finite")
        if np.any(self.zone_of < OUTLET_MARKER):
            raise ValidationError(f"zone ids must be >= {OUTLET_MARKER}")
        if not (np.isfinite(self.cell_area_m2) and self.cell_area_m2 > 0):
            raise ValidationError("cell area must be positive")

    @property
    def height(self) -> int:
        return self.elevation_m.shape[0]

    @property
    def width(self) -> int:
        return self.elevation_m.shape[1]

    @property
    def n_cells(self) -> int:
        return self.elevation_m.size

    def n_zones(self) -> int:
        z = self.zone_of[self.zone_of >= 0]
        return int(z.max()) + 1 if z.size else 0


def grid_neighbors(h: int, w: int, r: int, c: int):
    if r > 0:
        yield r - 1, c
    if r < h - 1:
        yield r + 1, c
    if c > 0:
        yield r, c - 1
    if c < w - 1:
        yield r, c + 1


def outside_adjacent_mask(h: int, w: int) -> np.ndarray:
    """Cells across whose edge water can leave the grid."""
    mask = np.zeros((h, w), dtype=bool)
    if h > 1:
        mask[0, :] = True
        mask[h - 1, :] = True
    if w > 1:
        mask[:, 0] = True
        mask[:, w - 1] = True
    return mask


@dataclass
class Depression:
    """One node of the depression forest.

    cells lists the node's full region (row, col) below its rim, children
    included. capacity_m3 equals sum((rim - elevation) * cellArea) over that
    region. spill_target is where overflow beyond the rim goes: the parent
    depression for internal nodes; for roots, the downstream depression the
    rim saddle drains into, or None when it drains straight to the outlet.
    Spill chains always terminate at the outlet.
    """

    id: int
    pit_cell: tuple[int, int] | None
    rim_elevation_m: float
    capacity_m3: float
    spill_target: int | None
    children: list[int] = field(default_factory=list)
    cells: list[tuple[int, int]] = field(default_factory=list)
    is_root: bool = False


class DepressionHierarchy:
    """Depression forest plus per-cell drainage targets and level curves."""

    def __init__(self, grid: TerrainGrid):
        self.grid = grid
        self.nodes: list[Depression] = []
        self.roots: list[int] = []
        # per cell: leaf depression id receiving its runoff, or -1 for outlet
        self.cell_leaf = np.full(grid.n_cells, -1, dtype=np.int64)
        self._build()

    # -- construction ------------------------------------------------------

    def _build(self):
        g = self.grid
        h, w = g.height, g.width
        elev = g.elevation_m.ravel()
        marked = (g.zone_of.ravel() == OUTLET_MARKER)
        outside = outside_adjacent_mask(h, w).ravel()
        if not outside.any() and not marked.any():
            raise ValidationError("terrain has no outlet: no domain edge and no marked outlet cells")

        n = g.n_cells
        OUTLET = -1
        parent_uf = np.arange(n, dtype=np.int64)
        set_node = {}  # union-find root -> active node id, or OUTLET

        def find(i):
            root = i
            while parent_uf[root] != root:
                root = parent_uf[root]
            while parent_uf[i] != root:
                parent_uf[i], i = root, parent_uf[i]
            return root

        def union(a, b):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent_uf[rb] = ra
            return ra

        # marked outlet cells are one pre-swept outlet set
        marked_idx = np.flatnonzero(marked)
        outlet_root = None
        if marked_idx.size:
            outlet_root = int(marked_idx[0])
            for i in marked_idx[1:]:
                outlet_root = union(outlet_root, int(i))
            set_node[find(outlet_root)] = OUTLET

        order = np.lexsort((np.arange(n), elev))
        order = order[~marked[order]]
        processed = marked.copy()
        exclusive: list[list[int]] = []  # flat cell ids added while each node was active
        drain = np.full(n, -2, dtype=np.int64)  # -2 pit, -1 outlet, else flat cell id
        root_escape_cell: dict[int, int] = {}  # root node -> far-side saddle neighbour

        def region_of(root):
            return set_node.get(root, None)

        for ci in order:
            ci = int(ci)
            r, c = divmod(ci, w)
            regions = set()
            best = None  # lowest processed unmarked neighbour by (elev, id)
            saw_exit = bool(outside[ci])
            if saw_exit:
                regions.add(OUTLET)
            for nr, nc in grid_neighbors(h, w, r, c):
                ni = nr * w + nc
                if not processed[ni]:
                    continue
                if marked[ni]:
                    saw_exit = True
                    regions.add(OUTLET)
                    continue
                node = region_of(find(ni))
                regions.add(node)
                key = (elev[ni], ni)
                if best is None or key < best[0]:
                    best = (key, ni)
            if best is not None:
                drain[ci] = best[1]
            elif saw_exit:
                drain[ci] = -1
            # else: stays -2 (pit)

            non_outlet = sorted(x for x in regions if x != OUTLET)
            if not regions:
                node_id = len(self.nodes)
                self.nodes.append(Depression(
                    id=node_id, pit_cell=(r, c), rim_elevation_m=np.nan,
                    capacity_m3=0.0, spill_target=None))
                exclusive.append([ci])
                set_node[find(ci)] = node_id
            elif len(regions) == 1:
                only = next(iter(regions))
                if only == OUTLET:
                    root = find(ci)
                    for nr, nc in grid_neighbors(h, w, r, c):
                        ni = nr * w + nc
                        if processed[ni] and region_of(find(ni)) == OUTLET:
                            root = union(ci, ni)
                    set_node[root] = OUTLET
                else:
                    rr = None
                    for nr, nc in grid_neighbors(h, w, r, c):
                        ni = nr * w + nc
                        if processed[ni] and not marked[ni] and region_of(find(ni)) == only:
                            rr = union(ci, ni)
                    set_node[rr] = only
                    exclusive[only].append(ci)
            else:
                # saddle: regions merge at elevation elev[ci]
                if OUTLET in regions:
                    # overflow beyond the rim crosses the saddle and descends
                    # the outlet side; remember the lowest such neighbour so
                    # the spill can be routed to the downstream depression
                    esc = None
                    for nr, nc in grid_neighbors(h, w, r, c):
                        ni = nr * w + nc
                        if processed[ni] and not marked[ni] and region_of(find(ni)) == OUTLET:
                            key = (elev[ni], ni)
                            if esc is None or key < esc:
                                esc = key
                    for node in non_outlet:
                        dep = self.nodes[node]
                        dep.rim_elevation_m = float(elev[ci])
                        dep.spill_target = None
                        dep.is_root = True
                        root_escape_cell[node] = -1 if esc is None else esc[1]
                        self.roots.append(node)
                    root = ci
                    for nr, nc in grid_neighbors(h, w, r, c):
                        ni = nr * w + nc
                        if processed[ni]:
                            root = union(root, ni)
                    if marked_idx.size:
                        root = union(root, int(marked_idx[0]))
                    set_node[find(root)] = OUTLET
                else:
                    node_id = len(self.nodes)
                    self.nodes.append(Depression(
                        id=node_id, pit_cell=None, rim_elevation_m=np.nan,
                        capacity_m3=0.0, spill_target=None, children=list(non_outlet)))
                    exclusive.append([ci])
                    for child in non_outlet:
                        dep = self.nodes[child]
                        dep.rim_elevation_m = float(elev[ci])
                        dep.spill_target = node_id
                    root = ci
                    for nr, nc in grid_neighbors(h, w, r, c):
                        ni = nr * w + nc
                        if processed[ni] and not marked[ni]:
                            root = union(root, ni)
                    set_node[find(root)] = node_id
            processed[ci] = True

        # any region never merged with the outlet would be a closed basin
        for node_id, dep in enumerate(self.nodes):
            if not np.isfinite(dep.rim_elevation_m):
                raise ValidationError("terrain contains a basin with no path to the outlet")

        # resolve drainage pointers to leaf nodes / outlet
        pit_leaf = {}
        for dep in self.nodes:
            if dep.pit_cell is not None:
                pit_leaf[dep.pit_cell[0] * w + dep.pit_cell[1]] = dep.id
        target = np.full(n, -9, dtype=np.int64)
        for ci in range(n):
            chain = []
            cur = ci
            while target[cur] == -9:
                if marked[cur] or drain[cur] == -1:
                    target[cur] = -1
                    break
                if drain[cur] == -2:
                    target[cur] = pit_leaf[cur]
                    break
                chain.append(cur)
                cur = int(drain[cur])
            t = target[cur]
            for x in chain:
                target[x] = t
        self.cell_leaf = target

        # a root's overflow follows the far-side saddle neighbour's drainage:
        # it lands in a depression that reached the outlet earlier (so these
        # chains can never cycle), or goes straight out when none exists
        for node_id, esc in root_escape_cell.items():
            leaf = -1 if esc < 0 else int(target[esc])
            self.nodes[node_id].spill_target = None if leaf < 0 else leaf

        # region elevation curves, children-before-parents (ids ascend that way)
        area = g.cell_area_m2
        self._region_elevs: list[np.ndarray] = []
        self._region_prefix: list[np.ndarray] = []
        self._region_cells: list[np.ndarray] = []
        self._subtree_ids: list[np.ndarray] = []
        for dep in self.nodes:
            own = np.asarray(exclusive[dep.id], dtype=np.int64)
            cells = [own] + [self._region_cells[ch] for ch in dep.children]
            allc = np.concatenate(cells) if cells else own
            self._region_cells.append(allc)
            e = np.sort(elev[allc])
            self._region_elevs.append(e)
            self._region_prefix.append(np.concatenate(([0.0], np.cumsum(e))))
            sub = [np.array([dep.id], dtype=np.int64)] + [self._subtree_ids[ch] for ch in dep.children]
            self._subtree_ids.append(np.sort(np.concatenate(sub)))
            dep.capacity_m3 = float(area * (e.size * dep.rim_elevation_m - self._region_prefix[dep.id][-1]))
            dep.cells = [(int(x) // w, int(x) % w) for x in allc]

        self._marginal = np.array([
            dep.capacity_m3 - sum(self.nodes[ch].capacity_m3 for ch in dep.children)
            for dep in self.nodes])
        np.clip(self._marginal, 0.0, None, out=self._marginal)

    # -- level geometry ----------------------------------------------------

    def level_from_volume(self, node_id: int, volume_m3: float) -> float:
        """Water surface elevation when the node's region holds volume_m3."""
        dep = self.nodes[node_id]
        v = min(max(volume_m3, 0.0), dep.capacity_m3)
        e = self._region_elevs[node_id]
        pre = self._region_prefix[node_id]
        a = self.grid.cell_area_m2
        idx = np.arange(e.size)
        knot_vol = a * (idx * e - pre[:-1])
        i = int(np.searchsorted(knot_vol, v, side="right")) - 1
        k = i + 1
        return float((v / a + pre[k]) / k)

    def volume_below(self, node_id: int, level: float) -> float:
        e = self._region_elevs[node_id]
        return float(self.grid.cell_area_m2 * np.sum(np.maximum(level - e, 0.0)))


def build_depression_hierarchy(grid: TerrainGrid) -> DepressionHierarchy:
    return DepressionHierarchy(grid)


@dataclass
class FloodField:
    """Result of one event: cell depths, per-depression storage, outflow."""

    depth_m: np.ndarray
    stored_m3: np.ndarray
    outflow_m3: float
    effective_input_m3: float


def simulate_flood(
    hierarchy: DepressionHierarchy,
    event: RainEvent | float,
    zone_capture_m3: np.ndarray | None = None,
) -> FloodField:
    """Distribute one rain event over the terrain.

    zone_capture_m3: per-zone captured volume; each zone's effective input is
    reduced by min(capture, input), applied proportionally over its cells.
    """
    grid = hierarchy.grid
    depth_mm = event.depth_mm if isinstance(event, RainEvent) else float(event)
    if depth_mm < 0 or not np.isfinite(depth_mm):
        raise ValidationError(f"rain depth must be finite and nonnegative, got {depth_mm}")
    rain_m = depth_mm / 1000.0
    n = grid.n_cells
    zone = grid.zone_of.ravel()
    cell_in = np.full(n, rain_m * grid.cell_area_m2)

    if zone_capture_m3 is not None and rain_m > 0:
        zc = np.asarray(zone_capture_m3, dtype=np.float64)
        if np.any(zc < 0):
            raise ValidationError("zone captures must be nonnegative")
        nz = grid.n_zones()
        if zc.shape != (nz,):
            raise ValidationError(f"expected {nz} zone captures, got shape {zc.shape}")
        zoned = zone >= 0
        zone_in = np.bincount(zone[zoned], weights=cell_in[zoned], minlength=nz)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(zone_in > 0, 1.0 - np.minimum(zc, zone_in) / np.maximum(zone_in, 1e-300), 1.0)
        cell_in[zoned] *= scale[zone[zoned]]

    effective_input = float(cell_in.sum())

    nodes = hierarchy.nodes
    n_nodes = len(nodes)
    stored = np.zeros(n_nodes)
    outflow = 0.0

    leaf = hierarchy.cell_leaf
    to_out = leaf < 0
    outflow += float(cell_in[to_out].sum())
    inflow = np.zeros(n_nodes)
    if n_nodes:
        routed = leaf >= 0
        np.add.at(inflow, leaf[routed], cell_in[routed])

    marginal = hierarchy._marginal if n_nodes else np.zeros(0)

    def pour(node_id: int, amount: float) -> float:
        """Fill the node's subtree bottom-up (ascending id); returns leftover."""
        for nid in hierarchy._subtree_ids[node_id]:
            if amount <= 0.0:
                break
            room = marginal[nid] - stored[nid]
            if room > 0.0:
                take = min(amount, room)
                stored[nid] += take
                amount -= take
        return amount

    overflow = np.zeros(n_nodes)
    for dep in nodes:  # ids ascend children-before-parents
        carry = inflow[dep.id] + sum(overflow[ch] for ch in dep.children)
        for ch in dep.children:
            if carry <= 0.0:
                break
            carry = pour(ch, carry)
        take = min(carry, marginal[dep.id] - stored[dep.id])
        if take > 0.0:
            stored[dep.id] += take
            carry -= take
        overflow[dep.id] = carry

    # overflow past a root's rim crosses its saddle into the downstream
    # depression, filling any storage left there, and cascades depression to
    # depression until it reaches the outlet
    for root in sorted(hierarchy.roots):
        v = float(overflow[root])
        node = root
        while v > 0.0:
            target = nodes[node].spill_target
            if target is None:
                outflow += v
                break
            cur = target
            while v > 0.0:
                v = pour(cur, v)
                if v <= 0.0 or nodes[cur].is_root:
                    break
                cur = nodes[cur].spill_target  # the parent, for internal nodes
            node = cur

    # depths: the highest node holding water defines one flat body over its region
    depth = np.zeros(n, dtype=np.float64)
    if n_nodes:
        sub_store = stored.copy()
        for dep in nodes:
            for ch in dep.children:
                sub_store[dep.id] += sub_store[ch]
        elev = grid.elevation_m.ravel()
        stack = list(hierarchy.roots)
        while stack:
            nid = stack.pop()
            if sub_store[nid] <= 0.0:
                continue
            if stored[nid] > 0.0:
                level = hierarchy.level_from_volume(nid, sub_store[nid])
                cells = hierarchy._region_cells[nid]
                depth[cells] = np.maximum(level - elev[cells], 0.0)
            else:
                stack.extend(nodes[nid].children)

    return FloodField(
        depth_m=depth.reshape(grid.height, grid.width),
        stored_m3=stored,
        outflow_m3=outflow,
        effective_input_m3=effective_input,
    )


def project_to_segments(
    field: FloodField,
    segment_cells: list[np.ndarray],
    pavement_capture_m: np.ndarray | None = None,
) -> np.ndarray:
    """Per-segment water depth: max over covered cells, minus pavement capture.

    segment_cells: per segment, flat cell indices the segment crosses.
    """
    depth = field.depth_m.ravel()
    out = np.zeros(len(segment_cells))
    for i, cells in enumerate(segment_cells):
        if len(cells) == 0:
            raise ValidationError(f"segment position {i} maps to no terrain cell")
        out[i] = depth[np.asarray(cells)].max()
    if pavement_capture_m is not None:
        cap = np.asarray(pavement_capture_m, dtype=np.float64)
        if cap.shape != out.shape:
            raise ValidationError("pavement capture length differs from segment count")
        if np.any(cap < 0):
            raise ValidationError("pavement capture depths must be nonnegative")
        out = np.maximum(out - cap, 0.0)
    return out


def zone_adjacency(grid: TerrainGrid) -> set[tuple[int, int]]:
    """Undirected zone adjacency from shared cell borders."""
    z = grid.zone_of
    pairs = set()
    for a, b in ((z[:-1, :], z[1:, :]), (z[:, :-1], z[:, 1:])):
        diff = (a != b) & (a >= 0) & (b >= 0)
        for x, y in zip(a[diff].ravel(), b[diff].ravel()):
            lo, hi = (int(x), int(y)) if x < y else (int(y), int(x))
            pairs.add((lo, hi))
    return pairs
