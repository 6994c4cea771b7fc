"""Fully derandomized HNSW graph.

Standard HNSW with every source of randomness removed:

  * node levels come from a pure function of the id (trailing zeros of
    splitmix64(id), capped at 16) — geometric(1/2), the usual HNSW level
    distribution with mL = 1/ln 2;
  * the entry point is pinned to the first inserted node and spans every
    layer of the hierarchy (so greedy descent always starts at the top);
    after its deletion, the live node with the smallest id is promoted;
  * every heap, result list and neighbor trim uses the total candidate
    order (distance ascending, id ascending), so no two distinct
    candidates ever compare equal;
  * distances are 64-bit integer squared-L2 values — no float enters the
    ranking path.

The graph stores topology only; callers supply distance callbacks over the
vector store (`dist(ids) -> int64 array`).
"""

from __future__ import annotations

import heapq
import struct
from typing import Callable, Iterable

import numpy as np

from .errors import DuplicateNode, UnknownNode

LEVEL_CAP = 16

DistFn = Callable[[list[int]], np.ndarray]


def splitmix64(x: int) -> int:
    """The standard public-domain splitmix64 mixing function."""
    z = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def level_for(node_id: int) -> int:
    """Deterministic node level: trailing zeros of splitmix64(id), cap 16."""
    z = splitmix64(node_id)
    if z == 0:
        return LEVEL_CAP
    return min((z & -z).bit_length() - 1, LEVEL_CAP)


def select_neighbors(candidates: list[tuple[int, int]], m: int) -> list[int]:
    """Keep the first m candidates under (dist, id) order; return ids
    sorted ascending for canonical adjacency storage."""
    return sorted(i for _, i in candidates[:m])


def select_neighbors_heuristic(
    candidates: list[tuple[int, int]],
    m: int,
    dist_between: Callable[[int, list[int]], np.ndarray],
) -> list[int]:
    """Diversity-pruning neighbor selection, fully deterministic.

    Walk candidates in (dist, id) order; keep one only if it is strictly
    closer to the query node than to every already-kept neighbor (exact
    integer comparisons, so the outcome is bit-stable). Falls back to the
    nearest rejected candidates if fewer than m survive. Returns ids
    sorted ascending.
    """
    kept: list[int] = []
    rejected: list[int] = []
    for d, c in candidates:
        if len(kept) >= m:
            break
        if kept and bool((dist_between(c, kept) < d).any()):
            rejected.append(c)
        else:
            kept.append(c)
    for c in rejected:
        if len(kept) >= m:
            break
        kept.append(c)
    return sorted(kept)


class HnswGraph:
    """Layered proximity graph with deterministic topology.

    `layers[level]` maps node id -> sorted list of neighbor ids. A node of
    level L appears in layers 0..L; the entry point has level LEVEL_CAP.
    Adjacency lists are capped at 2M on layer 0 and M above, and edges are
    symmetric within a layer.
    """

    __slots__ = ("layers", "levels", "entry_point", "_enc")

    def __init__(self):
        self.layers: list[dict[int, list[int]]] = []
        self.levels: dict[int, int] = {}
        self.entry_point: int | None = None
        self._enc: dict[tuple[int, int], bytes] = {}  # serialized-entry cache

    # -- introspection -------------------------------------------------

    @property
    def max_level(self) -> int:
        return len(self.layers) - 1

    def __len__(self) -> int:
        return len(self.levels)

    def __contains__(self, node_id: int) -> bool:
        return node_id in self.levels

    def neighbors(self, level: int, node_id: int) -> list[int]:
        return self.layers[level][node_id]

    # -- adjacency plumbing --------------------------------------------

    def _cap(self, level: int, m: int) -> int:
        return 2 * m if level == 0 else m

    def _set(self, level: int, node_id: int, neigh: list[int]) -> None:
        self.layers[level][node_id] = neigh
        self._enc.pop((level, node_id), None)

    def _drop_edge(self, level: int, a: int, b: int) -> None:
        la = self.layers[level][a]
        if b in la:
            la.remove(b)
            self._enc.pop((level, a), None)
        lb = self.layers[level][b]
        if a in lb:
            lb.remove(a)
            self._enc.pop((level, b), None)

    def _add_edge_with_trim(
        self, level: int, a: int, b: int, m: int, dist_between: Callable[[int, list[int]], np.ndarray]
    ) -> None:
        """Add the symmetric edge a-b; if an endpoint overflows its cap,
        re-select its adjacency with the diversity heuristic and drop the
        pruned edges (back-edges included, keeping the layer symmetric)."""
        cap = self._cap(level, m)
        for x, y in ((a, b), (b, a)):
            lx = self.layers[level][x]
            if y not in lx:
                lx.append(y)
                lx.sort()
                self._enc.pop((level, x), None)
        for x in (a, b):
            lx = self.layers[level][x]
            if len(lx) > cap:
                d = dist_between(x, lx)
                cands = sorted(zip((int(v) for v in d), lx))
                keep = set(
                    select_neighbors_heuristic(cands, cap, dist_between)
                )
                for w in [n for n in lx if n not in keep]:
                    self._drop_edge(level, x, w)

    # -- mutation ------------------------------------------------------

    def insert(
        self,
        node_id: int,
        dist: DistFn,
        dist_between: Callable[[int, list[int]], np.ndarray],
        m: int,
        ef_construction: int,
    ) -> None:
        if node_id in self.levels:
            raise DuplicateNode(f"node {node_id} already in graph")
        # The entry point spans every layer so that greedy descent always
        # starts at the top of the hierarchy; all other nodes use the pure
        # per-id level function.
        level = LEVEL_CAP if self.entry_point is None else level_for(node_id)
        while len(self.layers) <= level:
            self.layers.append({})
        self.levels[node_id] = level
        for lc in range(level + 1):
            self._set(lc, node_id, [])

        if self.entry_point is None:
            self.entry_point = node_id
            return

        ep = self.entry_point
        ep_level = self.levels[ep]
        cur = [(int(dist([ep])[0]), ep)]
        for lc in range(ep_level, level, -1):
            cur = self._search_layer(dist, cur, 1, lc)
        for lc in range(min(level, ep_level), -1, -1):
            found = self._search_layer(dist, cur, ef_construction, lc)
            cands = [(d, i) for d, i in found if i != node_id]
            for nb in select_neighbors_heuristic(cands, m, dist_between):
                self._add_edge_with_trim(lc, node_id, nb, m, dist_between)
            cur = found

    def remove(
        self,
        node_id: int,
        dist_between: Callable[[int, list[int]], np.ndarray],
        m: int,
    ) -> None:
        if node_id not in self.levels:
            raise UnknownNode(f"node {node_id} not in graph")
        level = self.levels.pop(node_id)
        for lc in range(level, -1, -1):
            former = self.layers[lc].pop(node_id)
            self._enc.pop((lc, node_id), None)
            for nb in former:
                lnb = self.layers[lc][nb]
                if node_id in lnb:
                    lnb.remove(node_id)
                    self._enc.pop((lc, nb), None)
            # Refill each former neighbor from (its survivors) U (the
            # removed node's survivors), in ascending id order.
            cap = self._cap(lc, m)
            for nb in sorted(former):
                pool = sorted((set(self.layers[lc][nb]) | set(former)) - {nb, node_id})
                if not pool:
                    continue
                d = dist_between(nb, pool)
                cands = sorted(zip((int(v) for v in d), pool))
                desired = select_neighbors_heuristic(cands, cap, dist_between)
                for want in desired:
                    if want not in self.layers[lc][nb]:
                        self._add_edge_with_trim(lc, nb, want, m, dist_between)
        if self.entry_point == node_id:
            self.entry_point = None
            if self.levels:
                self._promote_entry(min(self.levels), dist_between, m)
        while self.layers and not self.layers[-1]:
            self.layers.pop()

    def _promote_entry(
        self,
        new_ep: int,
        dist_between: Callable[[int, list[int]], np.ndarray],
        m: int,
    ) -> None:
        """Re-derive the entry point after its deletion: the live node with
        the smallest id, lifted onto every layer and connected there."""
        old_level = self.levels[new_ep]
        for lc in range(old_level + 1, LEVEL_CAP + 1):
            while len(self.layers) <= lc:
                self.layers.append({})
            pool = sorted(self.layers[lc])
            self._set(lc, new_ep, [])
            if pool:
                d = dist_between(new_ep, pool)
                cands = sorted(zip((int(v) for v in d), pool))
                for nb in select_neighbors_heuristic(cands, m, dist_between):
                    self._add_edge_with_trim(lc, new_ep, nb, m, dist_between)
        self.levels[new_ep] = LEVEL_CAP
        self.entry_point = new_ep

    # -- search --------------------------------------------------------

    def search(self, dist: DistFn, k: int, ef_search: int) -> list[tuple[int, int]]:
        """Top-k (dist, id) pairs under candidate order."""
        if self.entry_point is None:
            return []
        ep = self.entry_point
        cur = [(int(dist([ep])[0]), ep)]
        for lc in range(self.levels[ep], 0, -1):
            cur = self._search_layer(dist, cur, 1, lc)
        ef = max(ef_search, k)
        found = self._search_layer(dist, cur, ef, 0)
        return found[:k]

    def _search_layer(
        self, dist: DistFn, eps: list[tuple[int, int]], ef: int, level: int
    ) -> list[tuple[int, int]]:
        adj = self.layers[level]
        eps = [e for e in eps if e[1] in adj]
        visited = {i for _, i in eps}
        cand = list(eps)
        heapq.heapify(cand)
        # Result set as a max-heap under (dist, id) via negated keys.
        result = [(-d, -i) for d, i in eps]
        heapq.heapify(result)
        while cand:
            d, c = heapq.heappop(cand)
            worst = (-result[0][0], -result[0][1])
            if len(result) >= ef and (d, c) > worst:
                break
            fresh = [n for n in adj[c] if n not in visited]
            if not fresh:
                continue
            visited.update(fresh)
            dn = dist(fresh)
            for dv, n in zip((int(v) for v in dn), fresh):
                worst = (-result[0][0], -result[0][1])
                if len(result) < ef or (dv, n) < worst:
                    heapq.heappush(cand, (dv, n))
                    heapq.heappush(result, (-dv, -n))
                    if len(result) > ef:
                        heapq.heappop(result)
        return sorted((-d, -i) for d, i in result)

    # -- canonical serialization helpers (used by the snapshot module) --

    def encoded_node(self, level: int, node_id: int) -> bytes:
        key = (level, node_id)
        enc = self._enc.get(key)
        if enc is None:
            neigh = self.layers[level][node_id]
            enc = struct.pack("<QI", node_id, len(neigh)) + np.asarray(
                neigh, dtype="<u8"
            ).tobytes()
            self._enc[key] = enc
        return enc

    def check_integrity(self, m: int) -> None:
        """Raise AssertionError if a structural invariant is broken
        (test/debug helper; not called on the hot path)."""
        for lc, layer in enumerate(self.layers):
            cap = self._cap(lc, m)
            for nid, neigh in layer.items():
                assert neigh == sorted(neigh), (lc, nid)
                assert len(neigh) <= cap, (lc, nid, len(neigh))
                assert nid not in neigh, (lc, nid)
                for nb in neigh:
                    assert nid in layer[nb], (lc, nid, nb)
        for nid, lvl in self.levels.items():
            for lc in range(lvl + 1):
                assert nid in self.layers[lc], (nid, lc)
