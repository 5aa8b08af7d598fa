"""Entry points for solving a :class:`MilpModel` with either backend.

``native`` is the in-package simplex plus best-bound branch-and-bound;
``highs`` hands the same model to HiGHS through :mod:`scipy.optimize`.
Callers choose by name, so model-building code never depends on a backend.
"""
from __future__ import annotations

import heapq
import itertools
import math

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp as _highs_milp

from .model import MilpModel, MilpSolution, SolverError, Status
from .simplex import solve_arrays

INT_TOL = 1e-6
BACKENDS = ("native", "highs")


def _split_rows(model: MilpModel):
    """Dense ``<=`` and ``=`` blocks for the native simplex."""
    n = model.n_vars
    ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
    for con in model.constraints:
        row = np.zeros(n)
        row[list(con.cols)] = con.vals
        if con.relation == "<=":
            ub_rows.append(row)
            ub_rhs.append(con.rhs)
        elif con.relation == ">=":
            ub_rows.append(-row)
            ub_rhs.append(-con.rhs)
        else:
            eq_rows.append(row)
            eq_rhs.append(con.rhs)
    as2d = lambda rows: np.array(rows).reshape(-1, n)
    return as2d(ub_rows), np.array(ub_rhs), as2d(eq_rows), np.array(eq_rhs)


def _signed_cost(model: MilpModel) -> tuple[np.ndarray, float]:
    sign = 1.0 if model.sense == "min" else -1.0
    return sign * model.cost_vector(), sign


# -- native ----------------------------------------------------------------

def solve_lp(model: MilpModel, relax: bool = True) -> MilpSolution:
    """Solve the continuous relaxation with the native simplex.

    ``bound`` holds the dual objective rebuilt from the optimal basis.
    """
    if not relax and model.integer_mask.any():
        raise ValueError("model has integer variables; use solve_milp")
    c, sign = _signed_cost(model)
    A_ub, b_ub, A_eq, b_eq = _split_rows(model)
    res = solve_arrays(c, A_ub, b_ub, A_eq, b_eq, model.lb, model.ub)
    if res.status == "infeasible":
        return MilpSolution(Status.INFEASIBLE, None, math.nan, math.nan)
    if res.status == "unbounded":
        inf = -sign * math.inf
        return MilpSolution(Status.UNBOUNDED, None, inf, inf)
    obj = sign * res.objective + model.constant
    return MilpSolution(Status.OPTIMAL, res.x, obj, sign * res.dual_objective + model.constant,
                        nodes=1, info={"iterations": res.iterations})


def _native_milp(model: MilpModel, rel_gap: float, node_limit: int) -> MilpSolution:
    c, sign = _signed_cost(model)
    A_ub, b_ub, A_eq, b_eq = _split_rows(model)
    is_int = model.integer_mask
    lb0, ub0 = model.lb, model.ub
    lb0[is_int] = np.ceil(lb0[is_int] - INT_TOL)
    ub0[is_int] = np.floor(ub0[is_int] + INT_TOL)
    if np.any(is_int & (~np.isfinite(lb0) | ~np.isfinite(ub0))):
        raise ValueError("branch-and-bound needs finite bounds on integer variables")

    def relax(lb, ub):
        return solve_arrays(c, A_ub, b_ub, A_eq, b_eq, lb, ub)

    root = relax(lb0, ub0)
    if root.status == "infeasible":
        return MilpSolution(Status.INFEASIBLE, None, math.nan, math.nan, nodes=1)
    if root.status == "unbounded":
        inf = -sign * math.inf
        return MilpSolution(Status.UNBOUNDED, None, inf, inf, nodes=1)

    counter = itertools.count()
    heap = [(root.objective, next(counter), lb0, ub0, root.x)]
    best_x, best_val = None, math.inf
    nodes, branchings = 1, 0
    bound = root.objective

    def closed(lower: float) -> bool:
        return best_x is not None and best_val - lower <= rel_gap * max(1.0, abs(best_val))

    while heap:
        bound, _, lb, ub, x = heapq.heappop(heap)
        if closed(bound):
            heap.clear()
            break
        frac = np.where(is_int, np.abs(x - np.round(x)), 0.0)
        j = int(np.argmax(frac))
        if frac[j] <= INT_TOL:
            xr = np.where(is_int, np.round(x), x)
            val = float(c @ xr)
            if val < best_val:
                best_x, best_val = xr, val
            continue
        if nodes >= node_limit:
            heapq.heappush(heap, (bound, next(counter), lb, ub, x))
            break
        branchings += 1
        for side in ("down", "up"):
            lb2, ub2 = lb.copy(), ub.copy()
            if side == "down":
                ub2[j] = math.floor(x[j])
            else:
                lb2[j] = math.ceil(x[j])
            child = relax(lb2, ub2)
            nodes += 1
            if child.status != "optimal":
                continue
            if best_x is not None and child.objective >= best_val:
                continue
            heapq.heappush(heap, (child.objective, next(counter), lb2, ub2, child.x))

    lower = min([bound] + [h[0] for h in heap]) if heap else (
        bound if best_x is None else min(bound, best_val))
    if best_x is None:
        if heap:
            return MilpSolution(Status.GAP_LIMIT, None, math.nan, sign * lower + model.constant,
                                nodes, branchings)
        return MilpSolution(Status.INFEASIBLE, None, math.nan, math.nan, nodes, branchings)
    lower = min(lower, best_val)
    status = Status.OPTIMAL if closed(lower) else Status.GAP_LIMIT
    return MilpSolution(status, best_x, sign * best_val + model.constant,
                        sign * lower + model.constant, nodes, branchings)


# -- HiGHS -----------------------------------------------------------------

def _highs(model: MilpModel, rel_gap: float, time_limit: float | None) -> MilpSolution:
    c, sign = _signed_cost(model)
    cons = []
    if model.n_cons:
        lo, hi = model.row_bounds()
        cons.append(LinearConstraint(model.matrix(), lo, hi))
    options = {"mip_rel_gap": rel_gap}
    if time_limit is not None:
        options["time_limit"] = time_limit
    res = _highs_milp(c, constraints=cons, integrality=model.integer_mask.astype(int),
                      bounds=Bounds(model.lb, model.ub), options=options)
    if res.status == 2:
        return MilpSolution(Status.INFEASIBLE, None, math.nan, math.nan)
    if res.status == 3:
        inf = -sign * math.inf
        return MilpSolution(Status.UNBOUNDED, None, inf, inf)
    if res.x is None:
        raise SolverError(f"HiGHS: {res.message}")
    x = np.asarray(res.x, dtype=float)
    is_int = model.integer_mask
    x[is_int] = np.round(x[is_int])
    obj = model.objective_value(x)
    dual = getattr(res, "mip_dual_bound", None)
    bound = obj if dual is None or not np.isfinite(dual) else sign * dual + model.constant
    status = Status.OPTIMAL if res.status == 0 else Status.GAP_LIMIT
    return MilpSolution(status, x, obj, bound, int(getattr(res, "mip_node_count", 0) or 0))


def solve_milp(model: MilpModel, rel_gap: float = 1e-6, backend: str = "native",
               node_limit: int = 200_000, time_limit: float | None = None) -> MilpSolution:
    """Solve ``model`` to a relative gap of ``rel_gap``.

    Pure LPs go straight to the simplex.  ``GapLimit`` is returned with the
    best incumbent when the node (or, for HiGHS, time) limit stops the search.
    """
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; choose from {BACKENDS}")
    if backend == "highs":
        return _highs(model, rel_gap, time_limit)
    if not model.integer_mask.any():
        return solve_lp(model)
    return _native_milp(model, rel_gap, node_limit)
