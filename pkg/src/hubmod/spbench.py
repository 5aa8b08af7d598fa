"""Shortest-path benchmark route generator.

Candidate routes are the ``k`` shortest loopless hub paths of every stop.
Demand is split across the routes through each stop by a softmax on travel
time, routes are spliced where they share a link, and the pool is pruned by
length, circuity, the sub-route rule and pairwise similarity.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

from .model import Direction, StopNetwork, to_seconds


class MissingCoordinates(ValueError):
    """Raised when geometric pruning needs coordinates that are absent."""


@dataclass(frozen=True)
class BenchRoute:
    """A hub path in driving order; ``nodes`` includes the hub at one end."""

    nodes: tuple[str, ...]
    direction: Direction

    @property
    def links(self) -> tuple[tuple[str, str], ...]:
        return tuple(zip(self.nodes, self.nodes[1:]))

    def stops(self, hub: str) -> frozenset[str]:
        return frozenset(n for n in self.nodes if n != hub)

    def hub_outward(self, hub: str) -> tuple[str, ...]:
        seq = self.nodes if self.direction is Direction.FROM_HUB else self.nodes[::-1]
        return tuple(n for n in seq if n != hub)


@dataclass(frozen=True)
class WeightedRouteSet:
    routes: tuple[BenchRoute, ...]
    route_weight: tuple[float, ...]
    stop_weight: dict
    prob: dict  # (stop, route index) -> P


def stop_graph(network: StopNetwork, max_edge_minutes: float | None = None) -> nx.DiGraph:
    """Directed graph over hub and stops weighted by travel seconds.

    With ``max_edge_minutes`` only links at or under that time are kept,
    giving a sparser road-like graph.
    """
    g = nx.DiGraph()
    ids = network.node_ids
    g.add_nodes_from(ids)
    w = network.travel_seconds
    cap = math.inf if max_edge_minutes is None else to_seconds(max_edge_minutes)
    for a, i in enumerate(ids):
        for b, j in enumerate(ids):
            if a != b and w[a, b] <= cap:
                g.add_edge(i, j, weight=int(w[a, b]))
    return g


def k_shortest_routes(network: StopNetwork, k: int, direction: Direction = Direction.FROM_HUB,
                      max_edge_minutes: float | None = None) -> list[BenchRoute]:
    """Up to ``k`` loopless shortest hub paths per stop (Yen's algorithm via networkx)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    g = stop_graph(network, max_edge_minutes)
    hub = network.hub_id
    out = []
    for sid in network.stop_ids:
        src, dst = (hub, sid) if direction is Direction.FROM_HUB else (sid, hub)
        try:
            paths = nx.shortest_simple_paths(g, src, dst, weight="weight")
            out.extend(BenchRoute(tuple(p), direction) for p in itertools.islice(paths, k))
        except nx.NetworkXNoPath:
            continue
    return out


def stop_times(route: BenchRoute, network: StopNetwork) -> dict[str, int]:
    """In-vehicle seconds between the hub and each stop along ``route``."""
    hub = network.hub_id
    seq = route.nodes if route.direction is Direction.FROM_HUB else route.nodes[::-1]
    w = network.oriented_seconds(route.direction)
    out, t = {}, 0
    for a, b in zip(seq, seq[1:]):
        t += int(w[network.node(a), network.node(b)])
        if b != hub:
            out[b] = t
    return out


def assign_demand(routes: Sequence[BenchRoute], network: StopNetwork,
                  time_unit_minutes: float = 10.0) -> WeightedRouteSet:
    """Softmax assignment of each stop's demand over the routes passing it."""
    if not routes:
        raise ValueError("route set is empty")
    times = [stop_times(r, network) for r in routes]
    through: dict[str, list[int]] = {}
    for idx, tt in enumerate(times):
        for s in tt:
            through.setdefault(s, []).append(idx)
    prob = {}
    for s, idxs in through.items():
        x = np.array([times[r][s] for r in idxs], dtype=float) / (60.0 * time_unit_minutes)
        e = np.exp(-(x - x.min()))
        e /= e.sum()
        for r, p in zip(idxs, e):
            prob[(s, r)] = float(p)
    direction = routes[0].direction
    q = {s.id: s.demand(direction) for s in network.stops}
    stop_w = {s: 0.0 for s in network.stop_ids}
    for s_j, idxs in through.items():
        for r in idxs:
            share = q[s_j] * prob[(s_j, r)]
            for s_i in times[r]:
                stop_w[s_i] += share
    route_w = tuple(math.fsum(stop_w[s] for s in tt) for tt in times)
    return WeightedRouteSet(tuple(routes), route_w, stop_w, prob)


def _splice(a: tuple[tuple[str, str], ...], i: int, b: tuple[tuple[str, str], ...], j: int):
    links = a[:i + 1] + b[j + 1:]
    nodes = (links[0][0],) + tuple(l[1] for l in links)
    return nodes if len(set(nodes)) == len(nodes) else None


def expand_routes(routes: Sequence[BenchRoute], hub: str) -> list[BenchRoute]:
    """Crossover splices of every route pair sharing a link.

    When one stop set contains the other, only the splice that continues along
    the larger route is formed.  Splices that revisit a node are dropped.  The
    input routes come first in the result, then new routes in discovery order.
    """
    seen = {r.nodes for r in routes}
    out = list(routes)
    for r1, r2 in itertools.combinations(routes, 2):
        if r1.direction is not r2.direction:
            continue
        s1, s2 = r1.stops(hub), r2.stops(hub)
        if s2 <= s1 and not s1 <= s2:
            r1, r2, s1, s2 = r2, r1, s2, s1
        l1, l2 = r1.links, r2.links
        pos2 = {l: j for j, l in enumerate(l2)}
        for i, link in enumerate(l1):
            j = pos2.get(link)
            if j is None:
                continue
            cands = [_splice(l1, i, l2, j)]
            if not s1 <= s2:
                cands.append(_splice(l2, j, l1, i))
            for nodes in cands:
                if nodes is not None and nodes not in seen:
                    seen.add(nodes)
                    out.append(BenchRoute(nodes, r1.direction))
    return out


# -- geometry ----------------------------------------------------------------

def _projector(network: StopNetwork):
    """Equirectangular projection to kilometres around the hub."""
    if network.hub_coords is None or any(s.coords is None for s in network.stops):
        raise MissingCoordinates("pruning needs (lat, lon) for the hub and every stop")
    lat0 = math.radians(network.hub_coords[0])

    def xy(node: str) -> np.ndarray:
        lat, lon = network.coords(node)
        return np.array([math.radians(lon) * math.cos(lat0), math.radians(lat)]) * 6371.0
    return xy


def route_length(route: BenchRoute, xy) -> float:
    return math.fsum(float(np.linalg.norm(xy(b) - xy(a))) for a, b in route.links)


def circuity(route: BenchRoute, xy) -> float:
    direct = float(np.linalg.norm(xy(route.nodes[-1]) - xy(route.nodes[0])))
    return route_length(route, xy) / direct if direct > 0 else math.inf


def similarity(r1: BenchRoute, r2: BenchRoute, xy) -> float:
    """Mean nearest-midpoint distance between the two routes' links (0 if identical)."""
    m1 = np.array([(xy(a) + xy(b)) / 2 for a, b in r1.links])
    m2 = np.array([(xy(a) + xy(b)) / 2 for a, b in r2.links])
    d = np.linalg.norm(m1[:, None] - m2[None], axis=2)
    total = route_length(r1, xy) + route_length(r2, xy)
    return float(d.min(axis=1).sum() + d.min(axis=0).sum()) / total if total > 0 else 0.0


def prune_routes(weighted: WeightedRouteSet, network: StopNetwork, l_thd: float = 0.5,
                 c_thd: float = 2.0, s_thd: float = 0.05, invert_similarity: bool = False
                 ) -> list[tuple[BenchRoute, float]]:
    """Length, circuity, sub-route and similarity pruning.

    Returns ``(route, weight)`` pairs sorted by weight (descending).  Lengths
    are in kilometres.  A route is dropped when its similarity to a kept,
    heavier route is below ``s_thd`` (above it when ``invert_similarity``).
    """
    if min(l_thd, c_thd, s_thd) <= 0:
        raise ValueError("thresholds must be positive")
    xy = _projector(network)
    hub = network.hub_id
    items = [(r, w) for r, w in zip(weighted.routes, weighted.route_weight)
             if route_length(r, xy) > l_thd and circuity(r, xy) < c_thd]
    lengths = {r.nodes: route_length(r, xy) for r, _ in items}
    kept = []
    for r, w in items:
        s = r.stops(hub)
        if any(s < o.stops(hub) and lengths[o.nodes] > lengths[r.nodes] for o, _ in items):
            continue
        kept.append((r, w))
    kept.sort(key=lambda rw: (-rw[1], rw[0].nodes))
    survivors: list[tuple[BenchRoute, float]] = []
    for r, w in kept:
        sims = [similarity(r, o, xy) for o, _ in survivors]
        close = any((s > s_thd) if invert_similarity else (s < s_thd) for s in sims)
        if not close:
            survivors.append((r, w))
    return survivors


def feasible_stops(route: BenchRoute, network: StopNetwork) -> frozenset[str]:
    """Stops on ``route`` whose in-vehicle time respects the deviation limit."""
    lim = network.limits(route.direction)
    return frozenset(s for s, t in stop_times(route, network).items() if t < lim[network.node(s)])


def benchmark_coverage(routes: Iterable[BenchRoute], network: StopNetwork) -> list[float]:
    """Fraction of total demand covered by the first 1, 2, ... routes.

    Only stops that are time-feasible on the route count, so the numbers are
    comparable with maximum-coverage routes.
    """
    covered: set[str] = set()
    out = []
    for r in routes:
        covered |= feasible_stops(r, network)
        total = network.total_demand(r.direction)
        got = math.fsum(network.stop(s).demand(r.direction) for s in sorted(covered))
        out.append(got / total if total > 0 else 0.0)
    return out


def benchmark_routes(network: StopNetwork, k: int = 3, direction: Direction = Direction.FROM_HUB,
                     max_edge_minutes: float | None = None, time_unit_minutes: float = 10.0,
                     l_thd: float = 0.5, c_thd: float = 2.0, s_thd: float = 0.05,
                     invert_similarity: bool = False) -> list[tuple[BenchRoute, float]]:
    """Full benchmark: k-shortest paths, expansion, weighting, pruning."""
    base = k_shortest_routes(network, k, direction, max_edge_minutes)
    if not base:
        return []
    pool = expand_routes(base, network.hub_id)
    weighted = assign_demand(pool, network, time_unit_minutes)
    return prune_routes(weighted, network, l_thd, c_thd, s_thd, invert_similarity)
