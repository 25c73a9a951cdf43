"""Road graph: shortest paths, station lookup, travel conversions.

Distances come from Dijkstra over a directed weighted edge list; equal-length
alternatives are broken toward the smallest predecessor id so repeated runs
trace identical paths.  Full single-source results are cached per graph (the
fleet keeps asking about the same handful of nodes), bounded LRU-style.
"""

from __future__ import annotations

import heapq
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from pvjtcs.model import GameParams


class UnreachableNodeError(ValueError):
    """No directed path exists between the requested nodes."""


@dataclass
class RoadGraph:
    """Directed road network with km edge lengths and lon/lat node coords."""

    coords: dict[int, tuple[float, float]]
    adjacency: dict[int, list[tuple[int, float]]] = field(default_factory=dict)
    cache_size: int = 4096

    def __post_init__(self) -> None:
        for node in self.coords:
            self.adjacency.setdefault(node, [])
        for node, edges in self.adjacency.items():
            if node not in self.coords:
                raise ValueError(f"edge references unknown node {node}")
            for to, length in edges:
                if to not in self.coords:
                    raise ValueError(f"edge {node}->{to} references unknown node")
                if length <= 0.0:
                    raise ValueError(f"edge {node}->{to} has nonpositive length")
            edges.sort()
        self._sp_cache: OrderedDict[int, tuple[dict, dict]] = OrderedDict()

    @classmethod
    def from_edges(
        cls,
        nodes: dict[int, tuple[float, float]],
        edges: Iterable[tuple[int, int, float]],
    ) -> "RoadGraph":
        adjacency: dict[int, list[tuple[int, float]]] = {}
        for frm, to, length in edges:
            adjacency.setdefault(frm, []).append((to, float(length)))
        return cls(coords=dict(nodes), adjacency=adjacency)

    @property
    def nodes(self) -> list[int]:
        return sorted(self.coords)

    def has_node(self, node: int) -> bool:
        return node in self.coords

    def orphan_nodes(self) -> list[int]:
        """Nodes not mutually reachable with the rest of the graph.

        Empty iff the graph is strongly connected: every node must reach and
        be reached by an arbitrary anchor.
        """
        nodes = self.nodes
        if len(nodes) <= 1:
            return []
        anchor = nodes[0]
        forward = self._reachable(anchor, reverse=False)
        backward = self._reachable(anchor, reverse=True)
        return sorted(set(nodes) - (forward & backward))

    def _reachable(self, source: int, reverse: bool) -> set[int]:
        if reverse:
            adj: dict[int, list[int]] = {v: [] for v in self.coords}
            for u, edges in self.adjacency.items():
                for v, _ in edges:
                    adj[v].append(u)
        else:
            adj = {u: [v for v, _ in edges] for u, edges in self.adjacency.items()}
        seen = {source}
        stack = [source]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return seen

    def single_source(self, source: int) -> tuple[dict[int, float], dict[int, int]]:
        """Cached Dijkstra: distances and smallest-id predecessors."""
        if not self.has_node(source):
            raise KeyError(f"unknown node {source}")
        cached = self._sp_cache.get(source)
        if cached is not None:
            self._sp_cache.move_to_end(source)
            return cached
        dist: dict[int, float] = {source: 0.0}
        pred: dict[int, int] = {}
        heap: list[tuple[float, int]] = [(0.0, source)]
        done: set[int] = set()
        while heap:
            d, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            for v, w in self.adjacency[u]:
                nd = d + w
                old = dist.get(v)
                if old is None or nd < old:
                    dist[v] = nd
                    pred[v] = u
                    heapq.heappush(heap, (nd, v))
                elif nd == old and v not in done and pred.get(v, u + 1) > u:
                    pred[v] = u
        self._sp_cache[source] = (dist, pred)
        if len(self._sp_cache) > self.cache_size:
            self._sp_cache.popitem(last=False)
        return dist, pred

    def invalidate_cache(self) -> None:
        self._sp_cache.clear()


@dataclass
class StationSet:
    """Charging station locations (graph node ids)."""

    stations: Sequence[int]

    def __post_init__(self) -> None:
        self.stations = sorted(set(int(s) for s in self.stations))
        if not self.stations:
            raise ValueError("need at least one charging station")

    def __iter__(self):
        return iter(self.stations)

    def __len__(self) -> int:
        return len(self.stations)

    def validate_against(self, graph: RoadGraph) -> None:
        missing = [s for s in self.stations if not graph.has_node(s)]
        if missing:
            raise ValueError(f"stations not in the road graph: {missing}")


@dataclass
class RegionMap:
    """Total map from node id to region id 0..I-1."""

    regions: dict[int, int]

    def __post_init__(self) -> None:
        self.regions = {int(k): int(v) for k, v in self.regions.items()}
        if not self.regions:
            raise ValueError("region map is empty")
        ids = sorted(set(self.regions.values()))
        if ids[0] < 0:
            raise ValueError("region ids must be nonnegative")

    @property
    def n_regions(self) -> int:
        return max(self.regions.values()) + 1

    def region_of(self, node: int) -> int:
        try:
            return self.regions[node]
        except KeyError:
            raise KeyError(f"node {node} has no region assignment") from None

    def validate_against(self, graph: RoadGraph) -> None:
        missing = [v for v in graph.nodes if v not in self.regions]
        if missing:
            raise ValueError(f"nodes without region assignment: {missing[:10]}")


def shortest_path(
    graph: RoadGraph, frm: int, to: int
) -> tuple[float, list[int]]:
    """Distance in km and the node sequence, ties broken deterministically."""
    if not graph.has_node(frm):
        raise KeyError(f"unknown node {frm}")
    if not graph.has_node(to):
        raise KeyError(f"unknown node {to}")
    if frm == to:
        return 0.0, [frm]
    dist, pred = graph.single_source(frm)
    if to not in dist:
        raise UnreachableNodeError(f"no path from {frm} to {to}")
    path = [to]
    while path[-1] != frm:
        path.append(pred[path[-1]])
    path.reverse()
    return dist[to], path


def nearest_station(
    graph: RoadGraph, node: int, stations: StationSet
) -> tuple[int, float]:
    """Closest station by directed travel distance; ties to the smallest id."""
    dist, _ = graph.single_source(node)
    best, best_d = None, None
    for s in stations:
        d = dist.get(s)
        if d is None:
            continue
        if best_d is None or d < best_d:
            best, best_d = s, d
    if best is None:
        raise UnreachableNodeError(f"no station reachable from node {node}")
    return best, best_d


def travel_energy(distance_km: float, params: GameParams) -> float:
    """kwh burned driving the given distance."""
    if distance_km < 0.0:
        raise ValueError("distance must be nonnegative")
    return distance_km * params.consume_rate


def travel_time(distance_km: float, params: GameParams) -> float:
    """Hours spent driving the given distance."""
    if distance_km < 0.0:
        raise ValueError("distance must be nonnegative")
    return distance_km / params.speed
