"""Dense two-phase tableau simplex.

Every variable is first shifted onto ``[0, u]`` (free variables are split),
finite upper bounds become explicit rows, and rows are sign-normalised so
the right-hand side is nonnegative.  Phase 1 drives artificial variables out;
phase 2 optimises the real objective.  Pricing is Dantzig's largest reduced
cost, switching to Bland's smallest-index rule after a run of degenerate
pivots, which rules out cycling.  The tableau is rebuilt from the original
columns every ``refactor_every`` pivots to keep round-off in check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FEAS_TOL = 1e-7
PIVOT_TOL = 1e-9
COST_TOL = 1e-9


@dataclass
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    objective: float = math.nan
    dual_objective: float = math.nan
    iterations: int = 0


@dataclass
class _Standard:
    """``min c x + const  s.t.  A x = b, x >= 0`` plus the map back to original vars."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    const: float
    n_struct: int
    slack_basis: list[int | None]
    # original x_j = offset_j + sum_k coef_k * z_k
    back: list[list[tuple[int, float]]]
    offset: np.ndarray


def _standardise(c, A_ub, b_ub, A_eq, b_eq, lb, ub) -> _Standard | None:
    n = len(c)
    cols: list[np.ndarray] = []
    cost: list[float] = []
    back: list[list[tuple[int, float]]] = []
    offset = np.zeros(n)
    bound_rows: list[tuple[int, float]] = []
    m_ub, m_eq = len(b_ub), len(b_eq)
    const = 0.0
    for j in range(n):
        col_ub, col_eq = A_ub[:, j], A_eq[:, j]
        lo, hi = lb[j], ub[j]
        if math.isfinite(lo):
            offset[j] = lo
            const += c[j] * lo
            b_ub = b_ub - col_ub * lo
            b_eq = b_eq - col_eq * lo
            back.append([(len(cols), 1.0)])
            cols.append(np.concatenate([col_ub, col_eq]))
            cost.append(c[j])
            if math.isfinite(hi):
                if hi - lo < -FEAS_TOL:
                    return None
                bound_rows.append((len(cols) - 1, max(hi - lo, 0.0)))
        elif math.isfinite(hi):
            offset[j] = hi
            const += c[j] * hi
            b_ub = b_ub - col_ub * hi
            b_eq = b_eq - col_eq * hi
            back.append([(len(cols), -1.0)])
            cols.append(-np.concatenate([col_ub, col_eq]))
            cost.append(-c[j])
        else:
            back.append([(len(cols), 1.0), (len(cols) + 1, -1.0)])
            full = np.concatenate([col_ub, col_eq])
            cols += [full, -full]
            cost += [c[j], -c[j]]
    n_struct = len(cols)
    m_b = len(bound_rows)
    m = m_ub + m_b + m_eq
    # rows: original <=, bound <=, equalities; slacks for the first two groups
    A = np.zeros((m, n_struct + m_ub + m_b))
    if n_struct:
        S = np.column_stack(cols)
        A[:m_ub, :n_struct] = S[:m_ub]
        A[m_ub + m_b:, :n_struct] = S[m_ub:]
    for r, (k, _) in enumerate(bound_rows):
        A[m_ub + r, k] = 1.0
    A[:m_ub + m_b, n_struct:] = np.eye(m_ub + m_b)
    b = np.concatenate([b_ub, [u for _, u in bound_rows], b_eq])
    slack_basis: list[int | None] = [n_struct + r for r in range(m_ub + m_b)] + [None] * m_eq
    neg = b < 0
    A[neg] *= -1
    b = np.where(neg, -b, b)
    for r in np.flatnonzero(neg):
        slack_basis[r] = None
    c_full = np.concatenate([cost, np.zeros(m_ub + m_b)])
    return _Standard(A, b, c_full, const, n_struct, slack_basis, back, offset)


class _Tableau:
    def __init__(self, A: np.ndarray, b: np.ndarray, basis: list[int], refactor_every: int):
        self.A0, self.b0 = A, b
        self.basis = list(basis)
        self.T = np.column_stack([A, b]).astype(float)
        self.refactor_every = refactor_every
        self.pivots = 0
        self.refactor()

    def refactor(self) -> None:
        if not self.basis:
            return
        B = self.A0[:, self.basis]
        try:
            self.T = np.linalg.solve(B, np.column_stack([self.A0, self.b0]))
        except np.linalg.LinAlgError:
            return
        self.T[:, -1] = np.maximum(self.T[:, -1], 0.0)

    def pivot(self, r: int, e: int) -> None:
        T = self.T
        T[r] /= T[r, e]
        col = T[:, e].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        self.basis[r] = e
        self.pivots += 1
        if self.pivots % self.refactor_every == 0:
            self.refactor()

    def run(self, c: np.ndarray, allowed: np.ndarray, max_iter: int) -> str:
        """Minimise ``c`` over the current basis; returns optimal or unbounded."""
        degenerate = 0
        for _ in range(max_iter):
            T = self.T
            d = c - c[self.basis] @ T[:, :-1]
            d[~allowed] = 0.0
            d[self.basis] = 0.0
            bland = degenerate >= 20
            if bland:
                cand = np.flatnonzero(d < -COST_TOL)
                if cand.size == 0:
                    return "optimal"
                e = int(cand[0])
            else:
                e = int(np.argmin(d))
                if d[e] >= -COST_TOL:
                    return "optimal"
            col = T[:, e]
            pos = col > PIVOT_TOL
            if not pos.any():
                return "unbounded"
            ratios = np.full(len(col), np.inf)
            ratios[pos] = T[pos, -1] / col[pos]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + 1e-12)
            # Bland: leaving variable with the smallest index among ties
            r = int(min(ties, key=lambda k: self.basis[k])) if bland else int(
                max(ties, key=lambda k: (col[k], -self.basis[k])))
            degenerate = degenerate + 1 if best <= 1e-12 else 0
            self.pivot(r, e)
        raise RuntimeError("simplex iteration limit reached")


def solve_arrays(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, lb=None, ub=None,
                 refactor_every: int = 50, max_iter: int = 100_000) -> LpResult:
    """Minimise ``c @ x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq`` and bounds."""
    c = np.asarray(c, dtype=float)
    n = len(c)
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, n)
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    lb = np.zeros(n) if lb is None else np.asarray(lb, dtype=float)
    ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float)

    std = _standardise(c, A_ub, b_ub, A_eq, b_eq, lb, ub)
    if std is None:
        return LpResult("infeasible")
    m, n_std = std.A.shape

    # phase 1 with artificials wherever no slack can start basic
    need = [r for r in range(m) if std.slack_basis[r] is None]
    A1 = np.hstack([std.A, np.zeros((m, len(need)))])
    basis = list(std.slack_basis)
    for a, r in enumerate(need):
        A1[r, n_std + a] = 1.0
        basis[r] = n_std + a
    tab = _Tableau(A1, std.b, basis, refactor_every)
    iters = 0
    if need:
        c1 = np.concatenate([np.zeros(n_std), np.ones(len(need))])
        tab.run(c1, np.ones(A1.shape[1], dtype=bool), max_iter)
        iters += tab.pivots
        if c1[tab.basis] @ tab.T[:, -1] > FEAS_TOL * max(1.0, float(np.abs(std.b).max(initial=0))):
            return LpResult("infeasible", iterations=iters)
        # drive remaining artificials out, dropping redundant rows
        keep = []
        for r in range(m):
            if tab.basis[r] < n_std:
                keep.append(r)
                continue
            row = tab.T[r, :n_std]
            j = np.flatnonzero(np.abs(row) > 1e-9)
            if j.size:
                tab.pivot(r, int(j[0]))
                keep.append(r)
        tab.T = tab.T[keep]
        tab.basis = [tab.basis[r] for r in keep]
        tab.A0 = tab.A0[keep]
        tab.b0 = tab.b0[keep]
    tab.T = np.column_stack([tab.T[:, :n_std], tab.T[:, -1]])
    tab.A0 = tab.A0[:, :n_std]
    tab.pivots = 0
    state = tab.run(std.c, np.ones(n_std, dtype=bool), max_iter)
    iters += tab.pivots
    if state == "unbounded":
        return LpResult("unbounded", iterations=iters)
    tab.refactor()

    z = np.zeros(n_std)
    z[tab.basis] = tab.T[:, -1]
    x = std.offset.copy()
    for j, parts in enumerate(std.back):
        for k, coef in parts:
            x[j] += coef * z[k]
    primal = float(std.c @ z) + std.const
    # duals from the final basis, recomputed from the original columns
    try:
        y = np.linalg.solve(tab.A0[:, tab.basis].T, std.c[tab.basis])
        dual = float(y @ tab.b0) + std.const
    except np.linalg.LinAlgError:
        dual = math.nan
    return LpResult("optimal", x, primal, dual, iters)
