"""Pairing from-hub and to-hub routes into round trips.

A from-hub route ends at its far stop; the to-hub route it is paired with
starts at *its* far stop, so the deadhead between them runs far end to far
end.  Pairs whose deadhead is longer than the shorter of the two trips are
priced out with a computed ``big`` cost, and any route left with such a
partner (or with a padding dummy) returns to the hub on its own.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import Direction, RoundTrip, Route, StopNetwork


@dataclass(frozen=True)
class GapMatrix:
    cost: np.ndarray
    feasible: np.ndarray
    big: float


def _haversine_miles(a: tuple[float, float], b: tuple[float, float]) -> float:
    lat1, lon1, lat2, lon2 = map(math.radians, (*a, *b))
    h = (math.sin((lat2 - lat1) / 2) ** 2
         + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2)
    return 2 * 3958.8 * math.asin(math.sqrt(h))


def _route_miles(route: Route, network: StopNetwork) -> float:
    nodes = (network.hub_id,) + route.stops
    return sum(_haversine_miles(network.coords(a), network.coords(b)) for a, b in zip(nodes, nodes[1:]))


def _has_coords(network: StopNetwork) -> bool:
    return network.hub_coords is not None and all(s.coords is not None for s in network.stops)


def connect_seconds(out: Route, back: Route, network: StopNetwork) -> int:
    return network.travel(out.far_end, back.far_end)


def build_gap_matrix(out_routes: Sequence[Route], back_routes: Sequence[Route],
                     network: StopNetwork, metric: str = "time") -> GapMatrix:
    """Demand-gap costs ``|cov(out) - cov(back)|`` with infeasible pairs set to ``big``.

    ``metric="distance"`` compares great-circle miles instead of seconds and
    needs coordinates for the hub and every stop.
    """
    if not out_routes or not back_routes:
        raise ValueError("both route sets must be nonempty")
    if metric not in ("time", "distance"):
        raise ValueError("metric must be 'time' or 'distance'")
    if metric == "distance" and not _has_coords(network):
        raise ValueError("distance metric needs coordinates for the hub and all stops")
    big = 1.0 + math.fsum(r.coverage for r in (*out_routes, *back_routes))
    cost = np.empty((len(out_routes), len(back_routes)))
    ok = np.zeros(cost.shape, dtype=bool)
    for a, r1 in enumerate(out_routes):
        for b, r2 in enumerate(back_routes):
            if metric == "time":
                gap = connect_seconds(r1, r2, network)
                limit = min(r1.trip_seconds, r2.trip_seconds)
            else:
                gap = _haversine_miles(network.coords(r1.far_end), network.coords(r2.far_end))
                limit = min(_route_miles(r1, network), _route_miles(r2, network))
            ok[a, b] = gap <= limit
            cost[a, b] = abs(r1.coverage - r2.coverage) if ok[a, b] else big
    return GapMatrix(cost, ok, big)


def hungarian_match(cost: np.ndarray, pad: float | None = None) -> list[tuple[int, int]]:
    """Minimum-cost perfect matching on a square matrix (rectangles are padded).

    Returns ``(row, col)`` pairs over the padded square; indices beyond the
    original shape refer to dummies.
    """
    cost = np.asarray(cost, dtype=float)
    n = max(cost.shape)
    if cost.shape[0] != cost.shape[1]:
        fill = pad if pad is not None else 1.0 + float(np.abs(cost).sum())
        square = np.full((n, n), fill)
        square[:cost.shape[0], :cost.shape[1]] = cost
        cost = square
    rows, cols = linear_sum_assignment(cost)
    return [(int(r), int(c)) for r, c in zip(rows, cols)]


def matching_cost(cost: np.ndarray, matching: Sequence[tuple[int, int]], pad: float) -> float:
    return math.fsum(cost[r, c] if r < cost.shape[0] and c < cost.shape[1] else pad
                     for r, c in matching)


def form_roundtrips(matching: Sequence[tuple[int, int]], out_routes: Sequence[Route],
                    back_routes: Sequence[Route], network: StopNetwork,
                    gaps: GapMatrix | None = None) -> list[RoundTrip]:
    """Build round trips; unmatched or infeasibly matched legs return via the hub.

    Paired trips come first in from-hub order, then lone from-hub legs, then
    lone to-hub legs.
    """
    if gaps is None:
        gaps = build_gap_matrix(out_routes, back_routes, network)
    hub = network.hub_id
    paired, lone_out, lone_back = [], [], []
    for a, b in sorted(matching):
        real_a, real_b = a < len(out_routes), b < len(back_routes)
        if real_a and real_b and gaps.feasible[a, b]:
            paired.append((a, b))
        else:
            if real_a:
                lone_out.append(a)
            if real_b:
                lone_back.append(b)
    trips = []
    for a, b in paired:
        out, back = out_routes[a], back_routes[b]
        trips.append(RoundTrip("", out, back, connect_seconds(out, back, network)))
    for a in sorted(lone_out):
        out = out_routes[a]
        trips.append(RoundTrip("", out, None, network.travel(out.far_end, hub)))
    for b in sorted(lone_back):
        back = back_routes[b]
        trips.append(RoundTrip("", None, back, network.travel(hub, back.far_end)))
    return [RoundTrip(f"RT{k}", t.out, t.back, t.connect_seconds) for k, t in enumerate(trips, 1)]


def combine_routes(out_routes: Sequence[Route], back_routes: Sequence[Route],
                   network: StopNetwork, metric: str = "time") -> list[RoundTrip]:
    """Gap matrix, matching and assembly in one call.  Either set may be empty."""
    for r in out_routes:
        if r.direction is not Direction.FROM_HUB:
            raise ValueError(f"{r.route_id} is not a from-hub route")
    for r in back_routes:
        if r.direction is not Direction.TO_HUB:
            raise ValueError(f"{r.route_id} is not a to-hub route")
    if not out_routes or not back_routes:
        lone = [(a, len(back_routes) + a) for a in range(len(out_routes))]
        lone += [(len(out_routes) + b, b) for b in range(len(back_routes))]
        dummy = GapMatrix(np.zeros((len(out_routes), len(back_routes))),
                          np.zeros((len(out_routes), len(back_routes)), dtype=bool), 1.0)
        return form_roundtrips(lone, out_routes, back_routes, network, dummy)
    gaps = build_gap_matrix(out_routes, back_routes, network, metric)
    matching = hungarian_match(gaps.cost, pad=gaps.big)
    return form_roundtrips(matching, out_routes, back_routes, network, gaps)
