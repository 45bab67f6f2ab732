"""Brute-force reference computations used to pin expected values in tests.

The flood oracle recomputes the routed fill-spill result with deliberately
different machinery than the package: droplet walks per cell for routing,
merge structure by repeated BFS connectivity scans over frozen cell sets,
capacities by exhaustive summation and water levels by scalar bisection.
It shares only the model semantics (same drainage rule, same pour order).
Valid for plateau-aware small grids; randomized suites draw continuous
elevations so ties basically never occur.
"""
from __future__ import annotations

import itertools

import numpy as np


def _outside_adjacent(h, w, r, c):
    out = False
    if h > 1 and (r == 0 or r == h - 1):
        out = True
    if w > 1 and (c == 0 or c == w - 1):
        out = True
    return out


def _neighbors(h, w, r, c):
    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        nr, nc = r + dr, c + dc
        if 0 <= nr < h and 0 <= nc < w:
            yield nr, nc


def oracle_flood(elevation, cell_input_m3, cell_area_m2, marked=None, tol_m=1e-12):
    """Reference fill-spill result.

    Returns (depth_m array, outflow_m3). cell_input_m3 is per-cell water
    volume after any capture; marked is an optional boolean outlet-cell mask.
    """
    elev = np.asarray(elevation, dtype=float)
    h, w = elev.shape
    if marked is None:
        marked = np.zeros((h, w), dtype=bool)
    vin = np.asarray(cell_input_m3, dtype=float).reshape(h, w)

    order = sorted(
        ((r, c) for r in range(h) for c in range(w) if not marked[r, c]),
        key=lambda rc: (elev[rc], rc[0] * w + rc[1]),
    )
    rank = {rc: i for i, rc in enumerate(order)}

    # --- droplet routing -------------------------------------------------
    def droplet(rc):
        seen = set()
        while True:
            assert rc not in seen
            seen.add(rc)
            r, c = rc
            cands = []
            exit_here = _outside_adjacent(h, w, r, c)
            for nb in _neighbors(h, w, r, c):
                if marked[nb]:
                    exit_here = True
                    continue
                if rank[nb] < rank[rc]:
                    cands.append(nb)
            if cands:
                rc = min(cands, key=lambda x: (elev[x], x[0] * w + x[1]))
                continue
            if exit_here:
                return None
            return rc  # pit

    outflow = 0.0
    pit_in: dict[tuple[int, int], float] = {}
    for r in range(h):
        for c in range(w):
            if vin[r, c] == 0:
                continue
            if marked[r, c]:
                outflow += vin[r, c]
                continue
            pit = droplet((r, c))
            if pit is None:
                outflow += vin[r, c]
            else:
                pit_in[pit] = pit_in.get(pit, 0.0) + vin[r, c]

    # --- merge structure by repeated BFS scans ---------------------------
    # nodes: list of dicts {cells, rim, children, parent, order}
    nodes: list[dict] = []
    active: dict[int, set] = {}  # node id -> current region cell set
    outlet_cells = {(r, c) for r in range(h) for c in range(w) if marked[r, c]}
    outlet_touch = False  # whether outlet region exists via edge even with no marked cells

    def touching_regions(rc):
        r, c = rc
        touched = set()
        exit_adj = _outside_adjacent(h, w, r, c)
        for nb in _neighbors(h, w, r, c):
            if nb in outlet_cells:
                exit_adj = True
                continue
            for nid, cells in active.items():
                if nb in cells:
                    touched.add(nid)
        return touched, exit_adj

    for rc in order:
        touched, exit_adj = touching_regions(rc)
        if not touched and not exit_adj:
            nid = len(nodes)
            nodes.append({"cells": {rc}, "pit": rc, "rim": None, "children": [],
                          "parent": None, "escape_cell": None})
            active[nid] = {rc}
        elif exit_adj and not touched:
            outlet_cells.add(rc)
        elif len(touched) == 1 and not exit_adj:
            nid = next(iter(touched))
            active[nid].add(rc)
            nodes[nid]["cells"].add(rc)
        else:
            rim = elev[rc]
            if exit_adj:
                # the lowest unmarked outlet-side neighbour marks where spill
                # past this rim continues downhill
                esc = None
                for nb in _neighbors(h, w, rc[0], rc[1]):
                    if nb in outlet_cells and not marked[nb]:
                        key = (elev[nb], nb[0] * w + nb[1])
                        if esc is None or key < esc:
                            esc = key
                for nid in sorted(touched):
                    nodes[nid]["rim"] = rim
                    nodes[nid]["escape_cell"] = None if esc is None else (esc[1] // w, esc[1] % w)
                    outlet_cells.update(active[nid])
                    del active[nid]
                outlet_cells.add(rc)
            else:
                pid = len(nodes)
                kids = sorted(touched)
                region = set(itertools.chain.from_iterable(active[k] for k in kids)) | {rc}
                nodes.append({"cells": region, "pit": None, "rim": None, "children": kids,
                              "parent": None, "escape_cell": None})
                for k in kids:
                    nodes[k]["rim"] = rim
                    nodes[k]["parent"] = pid
                    del active[k]
                active[pid] = region

    assert not active, "closed basin with no path to outlet"

    def capacity(nid):
        node = nodes[nid]
        return cell_area_m2 * sum(max(node["rim"] - elev[rc], 0.0) for rc in node["cells"])

    def volume_at(nid, level):
        return cell_area_m2 * sum(max(level - elev[rc], 0.0) for rc in nodes[nid]["cells"])

    def level_by_bisection(nid, volume):
        node = nodes[nid]
        lo = min(elev[rc] for rc in node["cells"])
        hi = node["rim"]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if volume_at(nid, mid) < volume:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def subtree_ids(nid):
        out = [nid]
        for k in nodes[nid]["children"]:
            out.extend(subtree_ids(k))
        return sorted(out)

    marginal = {}
    for nid, node in enumerate(nodes):
        marginal[nid] = max(capacity(nid) - sum(capacity(k) for k in node["children"]), 0.0)

    stored = {nid: 0.0 for nid in range(len(nodes))}

    def pour(nid, amount):
        for k in subtree_ids(nid):
            if amount <= 0:
                break
            room = marginal[k] - stored[k]
            if room > 0:
                take = min(amount, room)
                stored[k] += take
                amount -= take
        return amount

    leaf_of_pit = {node["pit"]: nid for nid, node in enumerate(nodes) if node["pit"] is not None}
    for pit in pit_in:
        assert pit in leaf_of_pit, f"pit {pit} not in any leaf"

    # where each root's overflow lands: follow the escape cell's droplet to a
    # downstream leaf, or straight to the outlet when there is none
    escape_leaf = {}
    for nid, node in enumerate(nodes):
        if node["parent"] is None:
            esc = node["escape_cell"]
            pit = droplet(esc) if esc is not None else None
            escape_leaf[nid] = leaf_of_pit[pit] if pit is not None else None

    overflow = {}
    for nid, node in enumerate(nodes):  # creation order = children first
        carry = sum(overflow[k] for k in node["children"])
        if not node["children"]:
            carry = sum(v for pit, v in pit_in.items() if leaf_of_pit[pit] == nid)
        for k in node["children"]:
            if carry <= 0:
                break
            carry = pour(k, carry)
        take = min(carry, marginal[nid] - stored[nid])
        stored[nid] += take
        carry -= take
        overflow[nid] = carry

    for root in sorted(nid for nid, node in enumerate(nodes) if node["parent"] is None):
        v = overflow[root]
        node = root
        while v > 0:
            esc = escape_leaf.get(node)
            if esc is None:
                outflow += v
                break
            cur = esc
            while v > 0:
                v = pour(cur, v)
                if v <= 0 or nodes[cur]["parent"] is None:
                    break
                cur = nodes[cur]["parent"]
            node = cur

    depth = np.zeros((h, w))

    def sub_store(nid):
        return stored[nid] + sum(sub_store(k) for k in nodes[nid]["children"])

    def assign(nid):
        total = sub_store(nid)
        if total <= 0:
            return
        if stored[nid] > 0:
            level = level_by_bisection(nid, total)
            for rc in nodes[nid]["cells"]:
                depth[rc] = max(level - elev[rc], 0.0)
        else:
            for k in nodes[nid]["children"]:
                assign(k)

    for nid, node in enumerate(nodes):
        if node["parent"] is None:
            assign(nid)

    return depth, outflow


def oracle_shortest_paths(n_nodes, edges, origin, destination):
    """Exhaustive simple-path enumeration. edges: list of (u, v, time, seg_id).

    Returns (best_time, best_path_segids) with ties broken by fewer edges then
    lexicographic segment ids, or (None, None) when unreachable.
    """
    adj: dict[int, list[tuple[int, float, int]]] = {}
    for u, v, t, sid in edges:
        adj.setdefault(u, []).append((v, t, sid))
    best = None

    def walk(node, visited, t, segs):
        nonlocal best
        if node == destination:
            key = (t, len(segs), tuple(segs))
            if best is None or key < best:
                best = key
            return
        for v, dt, sid in adj.get(node, []):
            if v in visited:
                continue
            walk(v, visited | {v}, t + dt, segs + [sid])

    walk(origin, {origin}, 0.0, [])
    if best is None:
        return None, None
    return best[0], list(best[2])


def fd_gradients(loss_fn, params, keys, step=1e-5):
    """Central finite-difference gradients of loss_fn over params[keys].

    Mutates each scalar entry in place (+step/-step), calling loss_fn on the
    whole params dict, and restores it; completely independent of any
    analytic backprop path.
    """
    grads = {}
    for k in keys:
        arr = params[k]
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + step
            up = loss_fn(params)
            arr[idx] = orig - step
            down = loss_fn(params)
            arr[idx] = orig
            g[idx] = (up - down) / (2.0 * step)
        grads[k] = g
    return grads
