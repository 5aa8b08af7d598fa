"""Independent brute-force oracles and random instance factories for tests.

Nothing here calls into the search, matching or solver code it is used to
check; the only shared pieces are the plain data types.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

from hubmod.model import Direction, Stop, TransitOverlay, network_from_matrix


# -- instances ---------------------------------------------------------------

def random_network(rng, n, lam="1.3", spread=10.0, alt_factor=(1.0, 1.15), coords=False):
    """Euclidean stops around a central hub; integer-second times, integer demand.

    Rounding distances up keeps the triangle inequality.
    """
    pts = rng.uniform(-spread, spread, size=(n + 1, 2))
    pts[0] = 0.0
    sec = np.ceil(np.linalg.norm(pts[:, None] - pts[None], axis=2) * 60.0) + 30
    np.fill_diagonal(sec, 0)
    stops = []
    for k in range(1, n + 1):
        stops.append(Stop(
            f"s{k:02d}",
            demand_from_hub=float(rng.integers(1, 10)),
            demand_to_hub=float(rng.integers(1, 10)),
            alt_time_from_hub=float(sec[0, k] * rng.uniform(*alt_factor)) / 60.0,
            alt_time_to_hub=float(sec[k, 0] * rng.uniform(*alt_factor)) / 60.0,
            alt_dist_from_hub=float(np.linalg.norm(pts[k])),
            alt_dist_to_hub=float(np.linalg.norm(pts[k])),
            max_dev_from_hub=float(rng.integers(0, 4)),
            max_dev_to_hub=float(rng.integers(0, 4)),
            coords=(float(pts[k, 1]) / 100, float(pts[k, 0]) / 100) if coords else None,
        ))
    hub_coords = (0.0, 0.0) if coords else None
    return network_from_matrix("hub", stops, sec / 60.0, lam, hub_coords=hub_coords)


def random_overlay(rng, network, n_stations=4, sigma_seconds=60, walk_prob=0.5):
    stations = tuple(f"m{a}" for a in range(n_stations))
    t = rng.integers(60, 600, size=(n_stations, n_stations)).astype(float)
    t = np.minimum(t, t.T)
    np.fill_diagonal(t, 0)
    access = {}
    for sid in network.stop_ids:
        for st in stations:
            if rng.random() < walk_prob:
                access[(sid, st)] = int(rng.integers(30, 400))
    return TransitOverlay(stations, t, access, sigma_seconds)


# -- route generation --------------------------------------------------------

def enumerate_routes(network, direction, remaining):
    """Every feasible ordered stop sequence over stops with positive demand.

    Yields ``(coverage, seconds, ids)``.  Feasibility is rechecked with exact
    rationals at each prefix, which is sufficient since an infeasible stop
    stays infeasible in every extension.
    """
    lam = network.lam
    ids = [s for s in network.stop_ids if remaining.get(s, 0) > 0]
    hub = network.hub_id

    def t(a, b):
        return network.travel(a, b) if direction is Direction.FROM_HUB else network.travel(b, a)

    def limit(s):
        return lam * round(network.stop(s).alt_time(direction) * 60)

    def rec(prefix, elapsed, cov):
        if prefix:
            yield cov, elapsed, tuple(prefix)
        last = prefix[-1] if prefix else hub
        for s in ids:
            if s in prefix:
                continue
            e = elapsed + t(last, s)
            if Fraction(e) < limit(s):
                prefix.append(s)
                yield from rec(prefix, e, cov + remaining[s])
                prefix.pop()

    yield from rec([], 0, 0.0)


def brute_force_mcr(network, direction, remaining):
    best = None
    for cov, sec, seq in enumerate_routes(network, direction, remaining):
        key = (-cov, sec, seq)
        if best is None or key < best:
            best = key
    if best is None:
        return None
    return -best[0], best[1], best[2]


def brute_force_sequential(network, direction, k):
    remaining = {s.id: s.demand(direction) for s in network.stops}
    out = []
    for _ in range(k):
        if not any(v > 0 for v in remaining.values()):
            break
        best = brute_force_mcr(network, direction, remaining)
        if best is None:
            break
        out.append(best)
        for s in best[2]:
            remaining[s] = 0.0
    return out


# -- assignment --------------------------------------------------------------

def brute_force_assignment(cost):
    n = len(cost)
    return min(sum(cost[i][p[i]] for i in range(n)) for p in itertools.permutations(range(n)))


# -- MILP --------------------------------------------------------------------

def enumerate_milp(c, A_ub, b_ub, A_eq, b_eq, lb, ub, integer, sense=1):
    """Optimum of a small MILP by enumerating all integer points.

    The continuous part of each integer point is solved with HiGHS linprog.
    ``sense`` is +1 for minimise and -1 for maximise.  Returns ``None``
    when infeasible.
    """
    c = np.asarray(c, float)
    nvar = len(c)
    ints = [j for j in range(nvar) if integer[j]]
    conts = [j for j in range(nvar) if not integer[j]]
    grids = [range(int(math.ceil(lb[j])), int(math.floor(ub[j])) + 1) for j in ints]
    best = None
    A_ub = np.zeros((0, nvar)) if A_ub is None else np.asarray(A_ub, float)
    A_eq = np.zeros((0, nvar)) if A_eq is None else np.asarray(A_eq, float)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, float)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, float)
    for point in itertools.product(*grids):
        xi = np.array(point, float)
        fixed = c[ints] @ xi if ints else 0.0
        rub = b_ub - (A_ub[:, ints] @ xi if ints else 0)
        req = b_eq - (A_eq[:, ints] @ xi if ints else 0)
        if not conts:
            if np.all(rub >= -1e-9) and np.all(np.abs(req) <= 1e-9):
                val = fixed
            else:
                continue
        else:
            res = linprog(
                sense * c[conts],
                A_ub=A_ub[:, conts] if len(rub) else None, b_ub=rub if len(rub) else None,
                A_eq=A_eq[:, conts] if len(req) else None, b_eq=req if len(req) else None,
                bounds=[(lb[j], ub[j]) for j in conts], method="highs",
            )
            if res.status != 0:
                continue
            val = fixed + sense * res.fun
        if best is None or sense * val < sense * best:
            best = val
    return best


# -- robust scheduling -------------------------------------------------------

def recourse_lp(problem, y, h, kappa, D_from, D_to):
    """Passenger assignment cost by a direct HiGHS LP over (X, L).

    Built independently of the library's model builders.
    """
    R, N = problem.n_routes, problem.n_stops
    cols = []  # (kind, direction, s, i)
    for a, delta in (("F", problem.delta_from), ("T", problem.delta_to)):
        for s in range(R):
            if kappa[s]:
                for i in range(N):
                    if delta[s, i]:
                        cols.append(("X", a, s, i))
        for i in range(N):
            cols.append(("L", a, None, i))
    D = {"F": np.asarray(D_from, float), "T": np.asarray(D_to, float)}
    dist = {"F": problem.dist_from, "T": problem.dist_to}
    c = []
    for kind, a, s, i in cols:
        c.append(problem.c_w * h[s] / 2 if kind == "X" else problem.c_l * dist[a][i])
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for a in ("F", "T"):
        for s in range(R):
            if not kappa[s]:
                continue
            row = [h[s] if (k == "X" and aa == a and ss == s) else 0 for k, aa, ss, _ in cols]
            A_ub.append(row)
            b_ub.append(problem.capacity)
        for i in range(N):
            A_eq.append([1 if (aa == a and ii == i) else 0 for _, aa, _, ii in cols])
            b_eq.append(D[a][i])
    bounds = []
    for kind, a, s, i in cols:
        bounds.append((0, D[a][i]) if kind == "X" else (0, None))
    res = linprog(c, A_ub=A_ub or None, b_ub=b_ub or None, A_eq=A_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    assert res.status == 0, res.message
    return float(res.fun)


def budget_scenarios(n, gamma):
    """All binary (p_from, p_to) pairs with exactly ``gamma`` ones."""
    for ones in itertools.combinations(range(2 * n), gamma):
        p = np.zeros(2 * n)
        p[list(ones)] = 1
        yield p[:n], p[n:]


def first_stage_grid(problem):
    """Every feasible (y, h, kappa) for the fleet/headway rules."""
    R = problem.n_routes
    per_route = [[(0, 0, 0)]] * R
    per_route = []
    for s in range(R):
        opts = [(0, 0, 0)]
        for y in range(1, problem.fleet + 1):
            for h in range(problem.h_min, problem.h_max + 1):
                if y * h >= problem.trip_minutes[s] - 1e-9:
                    opts.append((y, h, 1))
        per_route.append(opts)
    for combo in itertools.product(*per_route):
        if sum(o[0] for o in combo) <= problem.fleet:
            yield tuple(o[0] for o in combo), tuple(o[1] for o in combo), tuple(o[2] for o in combo)


def brute_force_robust(problem, gamma):
    """min over first-stage grid of c_o*sum(y) + max over budget scenarios of the recourse LP."""
    scen = list(budget_scenarios(problem.n_stops, gamma))
    best = math.inf
    for y, h, kappa in first_stage_grid(problem):
        worst = max(recourse_lp(problem, y, h, kappa, *problem.realized(pf, pt)) for pf, pt in scen)
        best = min(best, problem.c_o * sum(y) + worst)
    return best


def micro_problem(rng, n_stops=3, n_routes=2, fleet=3, h_range=(2, 6), gamma=0, **params):
    """Tiny scheduling instance with hand-assembled round trips.

    Each route serves a random nonempty stop subset in each direction (stops
    may be shared between routes); trip times are a few minutes.
    """
    from hubmod.model import RoundTrip, Route, ScheduleProblem

    ids = tuple(f"s{k}" for k in range(n_stops))
    trips = []
    for r in range(n_routes):
        legs = []
        for direction, tag in ((Direction.FROM_HUB, "F"), (Direction.TO_HUB, "T")):
            mask = rng.random(n_stops) < 0.6
            if not mask.any():
                mask[rng.integers(n_stops)] = True
            chosen = tuple(s for s, m in zip(ids, mask) if m)
            cum = tuple(int(x) for x in np.cumsum(rng.integers(30, 150, size=len(chosen))))
            legs.append(Route(f"{tag}{r}", direction, chosen, cum))
        trips.append(RoundTrip(f"RT{r}", legs[0], legs[1], int(rng.integers(0, 120))))
    return ScheduleProblem(
        roundtrips=tuple(trips),
        stop_ids=ids,
        mean_from=rng.uniform(0.2, 3.0, n_stops).round(2),
        mean_to=rng.uniform(0.2, 3.0, n_stops).round(2),
        dev_from=rng.uniform(0.0, 2.0, n_stops).round(2),
        dev_to=rng.uniform(0.0, 2.0, n_stops).round(2),
        dist_from=rng.uniform(1.0, 12.0, n_stops).round(2),
        dist_to=rng.uniform(1.0, 12.0, n_stops).round(2),
        fleet=fleet,
        h_min=h_range[0],
        h_max=h_range[1],
        gamma=gamma,
        **params,
    )


def random_milp(rng, max_int=12):
    """Small bounded MILP as arrays; the integer grid stays enumerable.

    Up to 6 integer variables may range over 0..3 and be joined by up to two
    continuous ones; larger counts are pure binary programs.
    """
    n_int = int(rng.integers(1, max_int + 1))
    if n_int <= 6:
        n_cont = int(rng.integers(0, 3))
        int_ub = rng.integers(1, 4, size=n_int).astype(float)
    else:
        n_cont = 0
        int_ub = np.ones(n_int)
    n = n_int + n_cont
    integer = np.array([True] * n_int + [False] * n_cont)
    lb = np.zeros(n)
    ub = np.concatenate([int_ub, rng.uniform(1.0, 5.0, n_cont).round(2)])
    c = rng.integers(-9, 10, size=n).astype(float)
    m = int(rng.integers(1, 5))
    A_ub = rng.integers(-3, 8, size=(m, n)).astype(float)
    b_ub = (A_ub.clip(min=0) @ ub * rng.uniform(0.2, 0.7)).round(1)
    A_eq = b_eq = None
    if n_cont and rng.random() < 0.3:
        A_eq = rng.integers(0, 3, size=(1, n)).astype(float)
        A_eq[0, -1] = 1.0
        b_eq = np.array([float(A_eq[0, :n_int] @ (int_ub // 2) + 0.5)])
    sense = 1 if rng.random() < 0.5 else -1
    return dict(c=c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, lb=lb, ub=ub,
                integer=integer, sense=sense)
