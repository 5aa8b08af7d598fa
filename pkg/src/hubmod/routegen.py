"""Maximum-coverage route generation around a hub.

Routes are grown outward from the hub.  A stop ``j`` can extend a route
ending at ``i`` after ``elapsed`` seconds when::

    elapsed + w[i, j] < lam * t_alt[j]

To-hub routes use the transposed travel matrix, so ``elapsed`` is then the
remaining time from the stop to the hub and the same search applies.

The exact search is a depth-first tree search with branch-and-bound.  The
bound at a node is its coverage so far plus the demand of every stop still
reachable from it, which is admissible because descendants can only visit
stops from their parent's reachable set (given the triangle inequality).

With a transit overlay, stops may also be absorbed through one transfer at
the first visited stop where that is feasible.  Transfer reachability is not
monotone along a route, so every uncovered stop stays in a transfer pool
even once it can no longer be driven to.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .model import (
    Direction,
    NoFeasibleRoute,
    Route,
    StopNetwork,
    TransitOverlay,
    make_route,
    to_seconds,
)


class Mode(str, Enum):
    EXACT = "exact"
    HEURISTIC = "heuristic"


@dataclass(frozen=True)
class ReachSets:
    h_reach: frozenset[str]
    c_reach: frozenset[str]


@dataclass
class SearchAudit:
    """Counters filled by the exact search when an audit object is passed in."""

    expansions: int = 0
    returns: int = 0
    pruned: int = 0
    subset_violations: int = 0
    bound_violations: int = 0

    @property
    def clean(self) -> bool:
        return self.subset_violations == 0 and self.bound_violations == 0


class _Best(NamedTuple):
    coverage: float
    seconds: int
    seq: tuple[int, ...]
    transfers: tuple[int, ...]


_EMPTY = _Best(0.0, 0, (), ())


def _tie(a: float, b: float) -> bool:
    return abs(a - b) <= 1e-9 * max(1.0, abs(a), abs(b))


class _Context:
    """Index-based view of a network for one direction and demand vector."""

    def __init__(self, network: StopNetwork, direction: Direction, demand: Sequence[float],
                 overlay: TransitOverlay | None = None):
        self.network = network
        self.direction = direction
        self.ids = network.node_ids
        self.W = network.oriented_seconds(direction)
        self.w = self.W.tolist()
        self.L = network.limits(direction)
        self.limit = self.L.tolist()
        self.Q = np.asarray(demand, dtype=float)
        self.q = self.Q.tolist()
        if overlay is not None:
            self.X = overlay.transfer_seconds(network, direction)
            self.x = self.X.tolist()
        else:
            self.X = None
            self.x = None

    def reach(self, i: int, cands: Iterable[int], elapsed: int) -> list[int]:
        wi, lim = self.w[i], self.limit
        return [j for j in cands if elapsed + wi[j] < lim[j]]

    def connect_reach(self, i: int, cands: Iterable[int], elapsed: int) -> tuple[list[int], list[int]]:
        # The hub itself is never a transfer point: passengers must ride first.
        if self.x is None or i == 0:
            return self.reach(i, cands, elapsed), []
        wi, xi, lim = self.w[i], self.x[i], self.limit
        h, c = [], []
        for j in cands:
            if elapsed + xi[j] < lim[j]:
                c.append(j)
            elif elapsed + wi[j] < lim[j]:
                h.append(j)
        return h, c

    def key_names(self, seq: Sequence[int]) -> tuple[str, ...]:
        return tuple(self.ids[k] for k in seq)

    def better(self, a: _Best, b: _Best) -> bool:
        """True when ``a`` beats ``b``: more coverage, then shorter, then lexicographic."""
        if not _tie(a.coverage, b.coverage):
            return a.coverage > b.coverage
        if a.seconds != b.seconds:
            return a.seconds < b.seconds
        ka, kb = self.key_names(a.seq), self.key_names(b.seq)
        if ka != kb:
            return ka < kb
        return sorted(self.key_names(a.transfers)) < sorted(self.key_names(b.transfers))


def _demand_vector(network: StopNetwork, direction: Direction,
                   remaining: Mapping[str, float] | None) -> list[float]:
    if remaining is None:
        return network.demand(direction).tolist()
    out = [0.0] * (network.n + 1)
    for sid, v in remaining.items():
        if v < 0:
            raise ValueError(f"remaining demand at {sid} is negative")
        out[network.node(sid)] = float(v)
    return out


def _exact_search(ctx: _Context, connect: bool, audit: SearchAudit | None) -> _Best:
    q, w = ctx.q, ctx.w
    x, limit = ctx.x, ctx.limit
    positive = [k for k in range(1, len(q)) if q[k] > 0]
    incumbent = [-math.inf]
    if connect:
        # cheapest transfer into each stop from anywhere; elapsed only grows,
        # so a pooled stop failing this test can never be captured later
        best_in = ctx.X[1:, :].min(axis=0).tolist()

    def capturable(pool: list[int], t: int) -> float:
        return math.fsum(q[k] for k in pool if t + best_in[k] < limit[k])

    def expand(i: int, cands: list[int], pool: list[int], elapsed: int, prefix: float) -> _Best:
        if audit is not None:
            audit.expansions += 1
        children = []
        for j in cands:
            t = elapsed + w[i][j]
            rest = [k for k in cands if k != j]
            if connect:
                hj, cj = ctx.connect_reach(j, rest, t)
                xj = x[j]
                cj += [k for k in pool if t + xj[k] < limit[k]]
                taken = set(hj).union(cj)
                pj = [k for k in pool if k not in taken] + [k for k in rest if k not in taken]
            else:
                hj, cj, pj = ctx.reach(j, rest, t), [], []
            if audit is not None and not set(hj) <= set(cands):
                audit.subset_violations += 1
            gain = q[j] + math.fsum(q[k] for k in cj)
            reach_sum = math.fsum(q[k] for k in hj)
            if connect:
                reach_sum += capturable(pj, t)
            children.append((gain + reach_sum, j, t, hj, cj, pj, gain, reach_sum))
        children.sort(key=lambda c: (-c[0], ctx.ids[c[1]]))

        best = _EMPTY
        for bound, j, t, hj, cj, pj, gain, reach_sum in children:
            floor = incumbent[0]
            if prefix + bound < floor and not _tie(prefix + bound, floor):
                if audit is not None:
                    audit.pruned += 1
                continue
            sub = expand(j, hj, pj, t, prefix + gain)
            if audit is not None:
                audit.returns += 1
                total = gain + sub.coverage
                if total > gain + reach_sum and not _tie(total, gain + reach_sum):
                    audit.bound_violations += 1
            cand = _Best(
                gain + sub.coverage,
                w[i][j] + sub.seconds,
                (j,) + sub.seq,
                tuple(cj) + sub.transfers,
            )
            if ctx.better(cand, best):
                best = cand
        if prefix + best.coverage > incumbent[0]:
            incumbent[0] = prefix + best.coverage
        return best

    first = ctx.reach(0, positive, 0)
    if not first:
        raise NoFeasibleRoute("no stop with positive demand is reachable from the hub")
    pool = [k for k in positive if k not in set(first)] if connect else []
    return expand(0, first, pool, 0, 0.0)


def _heuristic_search(ctx: _Context, connect: bool) -> _Best:
    """Greedy descent toward the child whose own reachable set holds most demand."""
    Q, W, L = ctx.Q, ctx.W, ctx.L
    X = ctx.X if connect else None
    positive = np.array([k for k in range(1, len(Q)) if Q[k] > 0], dtype=np.int64)
    first = W[0, positive] < L[positive]
    cands = positive[first]
    pool = positive[~first] if connect else positive[:0]
    if cands.size == 0:
        raise NoFeasibleRoute("no stop with positive demand is reachable from the hub")
    i, elapsed = 0, 0
    seq: list[int] = []
    transfers: list[int] = []
    while cands.size:
        t = elapsed + W[i, cands]
        if cands.size == 1:
            j_pos = 0
        else:
            lim = L[cands][None, :]
            ok = (t[:, None] + W[np.ix_(cands, cands)]) < lim
            if X is not None:
                ok |= (t[:, None] + X[np.ix_(cands, cands)]) < lim
            np.fill_diagonal(ok, False)
            potential = ok.astype(float) @ Q[cands]
            if X is not None and pool.size:
                via = (t[:, None] + X[np.ix_(cands, pool)]) < L[pool][None, :]
                potential += via.astype(float) @ Q[pool]
            # argmax potential; ties by own demand, then nearer, then id
            j_pos = min(
                range(cands.size),
                key=lambda a: (-potential[a], -Q[cands[a]], int(W[i, cands[a]]), ctx.ids[cands[a]]),
            )
        j = int(cands[j_pos])
        elapsed = int(t[j_pos])
        seq.append(j)
        rest = np.delete(cands, j_pos)
        drive = (elapsed + W[j, rest]) < L[rest]
        if X is not None:
            via = (elapsed + X[j, rest]) < L[rest]
            via_pool = (elapsed + X[j, pool]) < L[pool]
            transfers.extend(int(k) for k in rest[via])
            transfers.extend(int(k) for k in pool[via_pool])
            drive &= ~via
            pool = np.concatenate([pool[~via_pool], rest[~via & ~drive]])
        cands = rest[drive]
        i = j
    cov = math.fsum(ctx.q[k] for k in seq + transfers)
    secs = 0
    prev = 0
    for k in seq:
        secs += ctx.w[prev][k]
        prev = k
    return _Best(cov, secs, tuple(seq), tuple(transfers))


def _to_route(ctx: _Context, best: _Best, route_id: str, demand: Sequence[float]) -> Route:
    dmap = {ctx.ids[k]: demand[k] for k in (*best.seq, *best.transfers)}
    return make_route(
        ctx.network,
        ctx.direction,
        [ctx.ids[k] for k in best.seq],
        [ctx.ids[k] for k in best.transfers],
        route_id=route_id,
        demand=dmap,
    )


# -- public API --------------------------------------------------------------

def reach(network: StopNetwork, frm: str, candidates: Iterable[str], elapsed: float = 0.0,
          direction: Direction = Direction.FROM_HUB) -> set[str]:
    """Stops in ``candidates`` that can follow ``frm`` after ``elapsed`` minutes."""
    ctx = _Context(network, direction, [0.0] * (network.n + 1))
    idx = [network.node(c) for c in candidates]
    return {ctx.ids[k] for k in ctx.reach(network.node(frm), idx, to_seconds(elapsed))}


def connect_reach(network: StopNetwork, overlay: TransitOverlay, frm: str,
                  candidates: Iterable[str], elapsed: float = 0.0,
                  direction: Direction = Direction.FROM_HUB) -> ReachSets:
    """Split candidates into vehicle-reachable and transfer-reachable stops.

    Transfer reachability is tested first, so the two sets are disjoint.
    """
    ctx = _Context(network, direction, [0.0] * (network.n + 1), overlay)
    idx = [network.node(c) for c in candidates]
    h, c = ctx.connect_reach(network.node(frm), idx, to_seconds(elapsed))
    return ReachSets(frozenset(ctx.ids[k] for k in h), frozenset(ctx.ids[k] for k in c))


def max_coverage_route(
    network: StopNetwork,
    remaining_demand: Mapping[str, float] | None = None,
    direction: Direction = Direction.FROM_HUB,
    mode: Mode | str = Mode.EXACT,
    overlay: TransitOverlay | None = None,
    route_id: str = "",
    audit: SearchAudit | None = None,
) -> tuple[float, Route]:
    """Single maximum-coverage route against ``remaining_demand``.

    Only stops with positive remaining demand are candidates, which is what
    keeps successive routes disjoint.  Raises :class:`NoFeasibleRoute`.
    """
    mode = Mode(mode)
    demand = _demand_vector(network, direction, remaining_demand)
    ctx = _Context(network, direction, demand, overlay)
    connect = overlay is not None
    if mode is Mode.EXACT:
        best = _exact_search(ctx, connect, audit)
    else:
        best = _heuristic_search(ctx, connect)
    if not best.seq:
        raise NoFeasibleRoute("search returned an empty route")
    route = _to_route(ctx, best, route_id, demand)
    return route.coverage, route


def max_coverage_route_exact(network, remaining_demand=None, direction=Direction.FROM_HUB,
                             audit=None) -> tuple[float, Route]:
    return max_coverage_route(network, remaining_demand, direction, Mode.EXACT, audit=audit)


def max_coverage_route_heuristic(network, remaining_demand=None,
                                 direction=Direction.FROM_HUB) -> tuple[float, Route]:
    return max_coverage_route(network, remaining_demand, direction, Mode.HEURISTIC)


def max_coverage_route_connect(network, overlay, remaining_demand=None,
                               direction=Direction.FROM_HUB, mode=Mode.EXACT,
                               audit=None) -> tuple[float, Route]:
    return max_coverage_route(network, remaining_demand, direction, mode, overlay, audit=audit)


def generate_k_mcr(
    network: StopNetwork,
    k: int,
    mode: Mode | str = Mode.EXACT,
    overlay: TransitOverlay | None = None,
    direction: Direction = Direction.FROM_HUB,
    audit: SearchAudit | None = None,
) -> list[Route]:
    """Up to ``k`` mutually disjoint routes, each best against what is left.

    Stops served by a route (visited or via transfer) have their demand
    zeroed before the next route is searched.  Stops early once every stop
    with demand is covered or nothing else is reachable.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    remaining = {s.id: s.demand(direction) for s in network.stops}
    routes: list[Route] = []
    for step in range(k):
        if not any(v > 0 for v in remaining.values()):
            break
        try:
            _, route = max_coverage_route(
                network, remaining, direction, mode, overlay,
                route_id=f"{direction.short}{step + 1}", audit=audit,
            )
        except NoFeasibleRoute:
            break
        routes.append(route)
        for sid in route.served():
            remaining[sid] = 0.0
    return routes


def cumulative_coverage(routes: Sequence[Route], network: StopNetwork,
                        direction: Direction) -> list[float]:
    """Fraction of total demand served by the first 1, 2, ... routes."""
    total = network.total_demand(direction)
    seen: set[str] = set()
    out = []
    for r in routes:
        seen |= r.served()
        covered = math.fsum(network.stop(s).demand(direction) for s in seen)
        out.append(covered / total if total > 0 else 0.0)
    return out


def route_violations(route: Route, network: StopNetwork,
                     overlay: TransitOverlay | None = None) -> list[str]:
    """Re-check a route from scratch against the deviation rules.

    Times are recomputed from the travel matrix and compared exactly with
    rationals; transfer paths are enumerated station by station.
    """
    d = route.direction
    out = []
    t = 0
    prev = network.hub_id
    elapsed = {}
    for sid, cum in zip(route.stops, route.cum_seconds):
        t += network.travel(prev, sid) if d is Direction.FROM_HUB else network.travel(sid, prev)
        if t != cum:
            out.append(f"{sid}: stored time {cum} != recomputed {t}")
        limit = network.lam * to_seconds(network.stop(sid).alt_time(d))
        if not Fraction(t) < limit:
            out.append(f"{sid}: {t}s exceeds {float(limit):.1f}s")
        elapsed[sid] = t
        prev = sid
    if route.transfer_covered:
        if overlay is None:
            return out + ["transfer-covered stops without an overlay"]
        for k in sorted(route.transfer_covered):
            limit = network.lam * to_seconds(network.stop(k).alt_time(d))
            times = [elapsed[i] + _best_transfer(overlay, i, k, d) for i in route.stops]
            if not any(math.isfinite(x) and Fraction(x) < limit for x in times):
                out.append(f"{k}: no feasible transfer from any visited stop")
    return out


def _best_transfer(overlay: TransitOverlay, i: str, k: str, direction: Direction) -> float:
    best = math.inf
    for a, sa in enumerate(overlay.stations):
        da = overlay.access_seconds.get((i, sa))
        if da is None:
            continue
        for b, sb in enumerate(overlay.stations):
            db = overlay.access_seconds.get((k, sb))
            if db is None:
                continue
            ride = overlay.station_seconds[a, b] if direction is Direction.FROM_HUB \
                else overlay.station_seconds[b, a]
            best = min(best, da + ride + db)
    return best + overlay.sigma_seconds
