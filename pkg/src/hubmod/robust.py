"""Fleet and headway scheduling under demand uncertainty.

First stage: vehicles ``y``, headway ``h`` and operation flag ``kappa`` per
round trip.  Second stage: given realized demand, passengers are assigned
to routes (``X``) or lost (``L``) at least cost.  The robust problem takes
the worst realization in the budget set, where ``Gamma`` stop/direction
demands sit at their upper deviation and the rest at their mean.

The master problem encodes ``h`` in binary digits ``g`` and linearizes
``g * y`` and ``g * X`` with McCormick envelopes, which are exact because
``g`` is binary.  The worst case for a fixed schedule comes from the LP
dual of the assignment problem, with ``p * dual`` products linearized by
big-M.  Column-and-constraint generation alternates the two.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .milp.model import MilpModel, Status, VarKind
from .milp.solve import solve_milp
from .model import DemandScenario, Schedule, ScheduleProblem

log = logging.getLogger(__name__)

DIRS = ("F", "T")


class InfeasibleBudget(ValueError):
    """The uncertainty budget exceeds the number of stop/direction pairs."""


class RobustSolveError(RuntimeError):
    """A subproblem returned an unexpected solver status."""


def _delta(problem: ScheduleProblem, a: str) -> np.ndarray:
    return problem.delta_from if a == "F" else problem.delta_to


def _mean(problem: ScheduleProblem, a: str) -> np.ndarray:
    return problem.mean_from if a == "F" else problem.mean_to


def _dev(problem: ScheduleProblem, a: str) -> np.ndarray:
    return problem.dev_from if a == "F" else problem.dev_to


def _dist(problem: ScheduleProblem, a: str) -> np.ndarray:
    return problem.dist_from if a == "F" else problem.dist_to


def _pairs(problem: ScheduleProblem, a: str) -> list[tuple[int, int]]:
    """(route, stop) pairs where the route serves the stop in direction ``a``."""
    return [(int(s), int(i)) for s, i in zip(*np.nonzero(_delta(problem, a)))]


# -- costs -------------------------------------------------------------------

@dataclass(frozen=True)
class CostBreakdown:
    operation: float
    waiting: float
    loss: float

    @property
    def total(self) -> float:
        return self.operation + self.waiting + self.loss


def objective_components(schedule: Schedule, X_from, X_to, L_from, L_to,
                         problem: ScheduleProblem) -> CostBreakdown:
    """Operating, waiting and lost-demand cost of a schedule and an assignment.

    ``X_*`` are (routes x stops) arrays; entries where a route does not serve
    a stop are ignored.
    """
    h = np.asarray(schedule.headways, dtype=float)
    op = problem.c_o * sum(schedule.vehicles)
    wait = 0.0
    for X, d in ((X_from, problem.delta_from), (X_to, problem.delta_to)):
        X = np.asarray(X, dtype=float)
        wait += float(np.sum(X * d * h[:, None])) / 2.0
    loss = float(problem.dist_from @ np.asarray(L_from, float) + problem.dist_to @ np.asarray(L_to, float))
    return CostBreakdown(float(op), problem.c_w * wait, problem.c_l * loss)


# -- recourse: primal --------------------------------------------------------

@dataclass(frozen=True)
class Assignment:
    """Optimal passenger assignment for one schedule and one demand vector."""

    value: float
    X_from: np.ndarray
    X_to: np.ndarray
    L_from: np.ndarray
    L_to: np.ndarray


def build_recourse_primal(schedule: Schedule, demand_from, demand_to,
                          problem: ScheduleProblem) -> tuple[MilpModel, dict]:
    """Assignment LP at a fixed schedule and realized demand.

    Returns the model and an index ``{("X", a, s, i) | ("L", a, i): column}``.
    """
    D = {"F": np.asarray(demand_from, float), "T": np.asarray(demand_to, float)}
    m = MilpModel("recourse_primal")
    idx: dict = {}
    h, kappa = schedule.headways, schedule.active
    cost = {}
    for a in DIRS:
        for s, i in _pairs(problem, a):
            j = m.add_var(f"X{a}[{s},{i}]")
            idx[("X", a, s, i)] = j
            cost[j] = problem.c_w * h[s] / 2.0
        for i in range(problem.n_stops):
            j = m.add_var(f"L{a}[{i}]")
            idx[("L", a, i)] = j
            cost[j] = problem.c_l * _dist(problem, a)[i]
    m.set_objective(cost)
    for a in DIRS:
        pairs = _pairs(problem, a)
        for s in range(problem.n_routes):
            row = {idx[("X", a, ss, i)]: h[s] for ss, i in pairs if ss == s}
            if row:
                m.add_constraint(row, "<=", problem.capacity, f"cap{a}[{s}]")
        for i in range(problem.n_stops):
            row = {idx[("X", a, s, ii)]: 1.0 for s, ii in pairs if ii == i}
            row[idx[("L", a, i)]] = 1.0
            m.add_constraint(row, "=", D[a][i], f"cons{a}[{i}]")
        for s, i in pairs:
            m.add_constraint({idx[("X", a, s, i)]: 1.0}, "<=", kappa[s] * D[a][i], f"svc{a}[{s},{i}]")
    return m, idx


def solve_assignment(schedule: Schedule, demand_from, demand_to, problem: ScheduleProblem,
                     backend: str = "highs") -> Assignment:
    """Solve the assignment LP; it is always feasible because loss absorbs demand."""
    m, idx = build_recourse_primal(schedule, demand_from, demand_to, problem)
    sol = solve_milp(m, backend=backend)
    if sol.status is not Status.OPTIMAL:
        raise RobustSolveError(f"assignment LP returned {sol.status.value}")
    R, N = problem.n_routes, problem.n_stops
    X = {a: np.zeros((R, N)) for a in DIRS}
    L = {a: np.zeros(N) for a in DIRS}
    for key, j in idx.items():
        if key[0] == "X":
            X[key[1]][key[2], key[3]] = max(sol[j], 0.0)
        else:
            L[key[1]][key[2]] = max(sol[j], 0.0)
    return Assignment(sol.objective, X["F"], X["T"], L["F"], L["T"])


def recourse_value(schedule: Schedule, scenario: DemandScenario, problem: ScheduleProblem,
                   backend: str = "highs") -> float:
    D_from, D_to = problem.realized(scenario.p_from, scenario.p_to)
    return solve_assignment(schedule, D_from, D_to, problem, backend).value


# -- recourse: dual with budgeted deviations ---------------------------------

def big_m(problem: ScheduleProblem) -> float:
    """Bound on the magnitude of any conservation or service dual."""
    d_max = float(max(problem.dist_from.max(initial=0.0), problem.dist_to.max(initial=0.0)))
    return problem.c_w * problem.h_max * problem.n_routes / 2.0 + problem.c_l * d_max


def build_recourse_dual_milp(schedule: Schedule, problem: ScheduleProblem, gamma: int,
                             fixed_p: DemandScenario | None = None) -> tuple[MilpModel, dict]:
    """Worst-case assignment cost over the budget set, as one maximisation MILP.

    Dual of the assignment LP (per direction ``a``):

    * ``u[a,s] <= 0`` for route capacity,
    * ``lam[a,i] <= c_l d[a,i]`` (free below) for conservation,
    * ``v[a,s,i] <= 0`` for the service bound ``X <= kappa D``,

    with ``h_s u[a,s] + lam[a,i] + v[a,s,i] <= c_w h_s / 2`` for every served
    pair.  Demand ``D = Dbar + p Z`` enters the objective, and the products
    ``gam = p lam`` and ``psi = p v`` are linearized with two-sided big-M
    constraints.  With ``fixed_p`` the deviation vector is pinned instead of
    ranging over the budget set.
    """
    n2 = 2 * problem.n_stops
    if fixed_p is None and not 0 <= gamma <= n2:
        raise InfeasibleBudget(f"gamma={gamma} outside [0, {n2}]")
    M = big_m(problem)
    h, kappa = schedule.headways, schedule.active
    m = MilpModel("recourse_dual")
    idx: dict = {}
    obj: dict[int, float] = {}
    for a in DIRS:
        Dbar, Z, d = _mean(problem, a), _dev(problem, a), _dist(problem, a)
        fixed = None if fixed_p is None else np.asarray(
            fixed_p.p_from if a == "F" else fixed_p.p_to, float)
        for i in range(problem.n_stops):
            if fixed is None:
                p = m.add_var(f"p{a}[{i}]", VarKind.BINARY)
            else:
                p = m.add_var(f"p{a}[{i}]", lb=fixed[i], ub=fixed[i])
            lam = m.add_var(f"lam{a}[{i}]", lb=-M, ub=problem.c_l * d[i])
            gam = m.add_var(f"gam{a}[{i}]", lb=-M, ub=M)
            idx[("p", a, i)], idx[("lam", a, i)], idx[("gam", a, i)] = p, lam, gam
            obj[lam] = obj.get(lam, 0.0) + Dbar[i]
            obj[gam] = obj.get(gam, 0.0) + Z[i]
            _link_product(m, gam, p, lam, M)
        for s in range(problem.n_routes):
            u = m.add_var(f"u{a}[{s}]", lb=-math.inf, ub=0.0)
            idx[("u", a, s)] = u
            obj[u] = float(problem.capacity)
        for s, i in _pairs(problem, a):
            v = m.add_var(f"v{a}[{s},{i}]", lb=-M, ub=0.0)
            psi = m.add_var(f"psi{a}[{s},{i}]", lb=-M, ub=0.0)
            idx[("v", a, s, i)], idx[("psi", a, s, i)] = v, psi
            obj[v] = kappa[s] * Dbar[i]
            obj[psi] = kappa[s] * Z[i]
            _link_product(m, psi, idx[("p", a, i)], v, M)
            m.add_constraint({idx[("u", a, s)]: h[s], idx[("lam", a, i)]: 1.0, v: 1.0},
                             "<=", problem.c_w * h[s] / 2.0, f"dualX{a}[{s},{i}]")
    if fixed_p is None:
        m.add_constraint({idx[("p", a, i)]: 1.0 for a in DIRS for i in range(problem.n_stops)},
                         "=", gamma, "budget")
    m.set_objective(obj, "max")
    return m, idx


def _link_product(m: MilpModel, w: int, p: int, x: int, M: float) -> None:
    """``w = p * x`` for binary ``p`` and ``|x| <= M``."""
    m.add_constraint({w: 1.0, p: -M}, "<=", 0.0)
    m.add_constraint({w: 1.0, p: M}, ">=", 0.0)
    m.add_constraint({w: 1.0, x: -1.0, p: -M}, ">=", -M)
    m.add_constraint({w: 1.0, x: -1.0, p: M}, "<=", M)


@dataclass(frozen=True)
class WorstCase:
    value: float
    scenario: DemandScenario
    dual_value: float


def worst_case(schedule: Schedule, problem: ScheduleProblem, gamma: int,
               backend: str = "highs") -> WorstCase:
    """Worst budget scenario for a fixed schedule and its assignment cost.

    ``value`` re-solves the primal at the returned scenario; ``dual_value`` is
    the dual MILP optimum.  They agree by strong duality.
    """
    m, idx = build_recourse_dual_milp(schedule, problem, gamma)
    sol = solve_milp(m, rel_gap=1e-9, backend=backend)
    if sol.status is not Status.OPTIMAL:
        raise RobustSolveError(f"recourse MILP returned {sol.status.value}")
    N = problem.n_stops
    pf = tuple(float(round(sol[idx[("p", "F", i)]])) for i in range(N))
    pt = tuple(float(round(sol[idx[("p", "T", i)]])) for i in range(N))
    scen = DemandScenario(pf, pt)
    return WorstCase(recourse_value(schedule, scen, problem, backend), scen, sol.objective)


# -- master ------------------------------------------------------------------

@dataclass
class MasterIndex:
    y: list[int]
    kappa: list[int]
    g: list[list[int]]
    z: list[list[int]]
    eta: int
    X: list[dict] = field(default_factory=list)  # per scenario: (a, s, i) -> column
    L: list[dict] = field(default_factory=list)
    q: list[dict] = field(default_factory=list)  # per scenario: (k, a, s, i) -> column


def build_master(problem: ScheduleProblem, pool: Sequence[DemandScenario]) -> tuple[MilpModel, MasterIndex]:
    """First-stage model with one copy of the assignment variables per pooled scenario."""
    if not pool:
        raise ValueError("scenario pool must be nonempty")
    B, C = problem.fleet, problem.capacity
    R, N, K = problem.n_routes, problem.n_stops, problem.n_bits
    T_s = problem.trip_minutes
    m = MilpModel("master")
    y = [m.add_var(f"y[{s}]", VarKind.INTEGER, 0, B) for s in range(R)]
    kap = [m.add_var(f"kappa[{s}]", VarKind.BINARY) for s in range(R)]
    g = [[m.add_var(f"g[{s},{k}]", VarKind.BINARY) for k in range(K)] for s in range(R)]
    z = [[m.add_var(f"z[{s},{k}]", lb=0.0, ub=B) for k in range(K)] for s in range(R)]
    eta = m.add_var("eta", lb=0.0)
    ix = MasterIndex(y, kap, g, z, eta)

    m.add_constraint({j: 1.0 for j in y}, "<=", B, "fleet")
    for s in range(R):
        m.add_constraint({y[s]: 1.0, kap[s]: -B}, "<=", 0.0, f"op_hi[{s}]")
        m.add_constraint({kap[s]: 1.0, y[s]: -1.0}, "<=", 0.0, f"op_lo[{s}]")
        bits = {g[s][k]: 2.0 ** k for k in range(K)}
        m.add_constraint({**bits, kap[s]: -problem.h_min}, ">=", 0.0, f"hmin[{s}]")
        m.add_constraint({**bits, kap[s]: -problem.h_max}, "<=", 0.0, f"hmax[{s}]")
        m.add_constraint({z[s][k]: 2.0 ** k for k in range(K)} | {kap[s]: -T_s[s]}, ">=", 0.0,
                         f"cycle[{s}]")
        for k in range(K):
            m.add_constraint({g[s][k]: 1.0, kap[s]: -1.0}, "<=", 0.0)
            m.add_constraint({z[s][k]: 1.0, g[s][k]: -B}, "<=", 0.0)
            m.add_constraint({z[s][k]: 1.0, y[s]: -1.0}, "<=", 0.0)
            m.add_constraint({z[s][k]: 1.0, y[s]: -1.0, g[s][k]: -B}, ">=", -B)

    for l, scen in enumerate(pool):
        U = dict(zip(DIRS, problem.realized(scen.p_from, scen.p_to)))
        Xl, Ll, ql = {}, {}, {}
        cut = {eta: 1.0}
        for a in DIRS:
            pairs = _pairs(problem, a)
            d = _dist(problem, a)
            for s, i in pairs:
                Xl[(a, s, i)] = m.add_var(f"X{a}[{l}][{s},{i}]", lb=0.0, ub=U[a][i])
                for k in range(K):
                    ql[(k, a, s, i)] = m.add_var(f"q{a}[{l}][{k},{s},{i}]", lb=0.0, ub=U[a][i])
            for i in range(N):
                Ll[(a, i)] = m.add_var(f"L{a}[{l}][{i}]", lb=0.0)
                cut[Ll[(a, i)]] = -problem.c_l * d[i]
            for s in range(R):
                row = {ql[(k, a, s, i)]: 2.0 ** k for ss, i in pairs if ss == s for k in range(K)}
                if row:
                    m.add_constraint(row, "<=", C, f"cap{a}[{l}][{s}]")
            for i in range(N):
                row = {Xl[(a, s, ii)]: 1.0 for s, ii in pairs if ii == i}
                row[Ll[(a, i)]] = 1.0
                m.add_constraint(row, "=", U[a][i], f"cons{a}[{l}][{i}]")
            for s, i in pairs:
                x, u = Xl[(a, s, i)], U[a][i]
                m.add_constraint({x: 1.0, kap[s]: -u}, "<=", 0.0)
                for k in range(K):
                    q = ql[(k, a, s, i)]
                    m.add_constraint({q: 1.0, g[s][k]: -u}, "<=", 0.0)
                    m.add_constraint({q: 1.0, x: -1.0}, "<=", 0.0)
                    m.add_constraint({q: 1.0, x: -1.0, g[s][k]: -u}, ">=", -u)
                    cut[q] = cut.get(q, 0.0) - problem.c_w * 2.0 ** k / 2.0
        m.add_constraint(cut, ">=", 0.0, f"eta[{l}]")
        ix.X.append(Xl)
        ix.L.append(Ll)
        ix.q.append(ql)

    m.set_objective({**{j: problem.c_o for j in y}, eta: 1.0})
    return m, ix


def _schedule_from(sol, ix: MasterIndex, problem: ScheduleProblem) -> Schedule:
    K = problem.n_bits
    ys, hs, ks = [], [], []
    for s in range(problem.n_routes):
        k_on = int(round(sol[ix.kappa[s]]))
        y = int(round(sol[ix.y[s]])) if k_on else 0
        h = sum(2 ** k * int(round(sol[ix.g[s][k]])) for k in range(K)) if k_on else 0
        ys.append(y)
        hs.append(h)
        ks.append(k_on)
    return Schedule(tuple(ys), tuple(hs), tuple(ks))


def solve_master(problem: ScheduleProblem, pool: Sequence[DemandScenario], backend: str = "highs",
                 rel_gap: float = 1e-9):
    m, ix = build_master(problem, pool)
    sol = solve_milp(m, rel_gap=rel_gap, backend=backend)
    if sol.status not in (Status.OPTIMAL, Status.GAP_LIMIT) or sol.x is None:
        raise RobustSolveError(f"master returned {sol.status.value}")
    return sol, ix, _schedule_from(sol, ix, problem)


# -- column-and-constraint generation ----------------------------------------

@dataclass(frozen=True)
class CcgIteration:
    iteration: int
    lower: float
    upper: float
    gap: float
    pool_size: int
    seconds: float


@dataclass(frozen=True)
class RobustResult:
    schedule: Schedule
    objective: float
    status: Status
    gamma: int
    history: tuple[CcgIteration, ...]
    worst: DemandScenario
    lower: float
    upper: float

    @property
    def iterations(self) -> int:
        return len(self.history)


def initial_scenario(problem: ScheduleProblem, gamma: int) -> DemandScenario:
    """Deviate the ``gamma`` stop/directions with most cost at stake (ties by id, F first)."""
    N = problem.n_stops
    if not 0 <= gamma <= 2 * N:
        raise InfeasibleBudget(f"gamma={gamma} outside [0, {2 * N}]")
    keys = []
    for a_pos, a in enumerate(DIRS):
        Z, d = _dev(problem, a), _dist(problem, a)
        for i in range(N):
            score = Z[i] * (problem.c_w * problem.h_max / 2.0 + problem.c_l * d[i])
            keys.append((-score, problem.stop_ids[i], a_pos, a, i))
    keys.sort()
    p = {"F": [0.0] * N, "T": [0.0] * N}
    for _, _, _, a, i in keys[:gamma]:
        p[a][i] = 1.0
    return DemandScenario(tuple(p["F"]), tuple(p["T"]))


def _rel_gap(lower: float, upper: float) -> float:
    if upper <= 0:
        return 0.0 if upper - lower <= 1e-12 else math.inf
    return max(upper - lower, 0.0) / upper


def _with_costs(schedule: Schedule, scen: DemandScenario, problem: ScheduleProblem,
                backend: str) -> Schedule:
    D_from, D_to = problem.realized(scen.p_from, scen.p_to)
    asg = solve_assignment(schedule, D_from, D_to, problem, backend)
    c = objective_components(schedule, asg.X_from, asg.X_to, asg.L_from, asg.L_to, problem)
    return Schedule(schedule.vehicles, schedule.headways, schedule.active,
                    c.operation, c.waiting, c.loss)


def ccg_solve(problem: ScheduleProblem, gamma: int | None = None, rel_tol: float = 1e-4,
              iteration_limit: int = 50, backend: str = "highs",
              initial: DemandScenario | None = None) -> RobustResult:
    """Two-stage robust schedule by column-and-constraint generation.

    Each iteration solves the master over the scenario pool (lower bound),
    then the worst case for the master's schedule (upper bound candidate),
    and adds that scenario.  Stops when the relative gap is within
    ``rel_tol`` or the worst case is already pooled.  Hitting
    ``iteration_limit`` returns the best incumbent with ``GapLimit`` status.
    """
    gamma = problem.gamma if gamma is None else gamma
    pool = [initial if initial is not None else initial_scenario(problem, gamma)]
    lower, upper = -math.inf, math.inf
    best: Schedule | None = None
    best_worst = pool[0]
    history: list[CcgIteration] = []
    status = Status.GAP_LIMIT
    for it in range(1, iteration_limit + 1):
        t0 = time.perf_counter()
        sol, ix, sched = solve_master(problem, pool, backend)
        lower = max(lower, sol.bound if math.isfinite(sol.bound) else sol.objective)
        wc = worst_case(sched, problem, gamma, backend)
        cand = problem.c_o * sum(sched.vehicles) + wc.value
        if cand < upper:
            upper, best, best_worst = cand, sched, wc.scenario
        gap = _rel_gap(lower, upper)
        history.append(CcgIteration(it, lower, upper, gap, len(pool), time.perf_counter() - t0))
        log.info("ccg gamma=%d it=%d LB=%.6f UB=%.6f gap=%.2e", gamma, it, lower, upper, gap)
        if gap <= rel_tol or wc.scenario in pool:
            status = Status.OPTIMAL
            break
        pool.append(wc.scenario)
    assert best is not None
    return RobustResult(_with_costs(best, best_worst, problem, backend), upper, status, gamma,
                        tuple(history), best_worst, lower, upper)


def solve_for_scenario(problem: ScheduleProblem, scenario: DemandScenario,
                       backend: str = "highs") -> RobustResult:
    """Optimal schedule when demand is known to follow ``scenario``."""
    t0 = time.perf_counter()
    sol, ix, sched = solve_master(problem, [scenario], backend)
    value = problem.c_o * sum(sched.vehicles) + recourse_value(sched, scenario, problem, backend)
    row = CcgIteration(1, sol.bound, value, _rel_gap(sol.bound, value), 1, time.perf_counter() - t0)
    return RobustResult(_with_costs(sched, scenario, problem, backend), value, Status.OPTIMAL,
                        int(scenario.budget), (row,), scenario, sol.bound, value)


def solve_nominal(problem: ScheduleProblem, backend: str = "highs") -> RobustResult:
    """Deterministic schedule at mean demand."""
    return solve_for_scenario(problem, DemandScenario.constant(problem.n_stops, 0.0), backend)
