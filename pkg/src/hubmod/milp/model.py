"""Solver-neutral representation of linear and mixed-integer programs."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

import numpy as np
from scipy import sparse


class VarKind(str, Enum):
    CONTINUOUS = "continuous"
    INTEGER = "integer"
    BINARY = "binary"


class Status(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    GAP_LIMIT = "GapLimit"


class SolverError(RuntimeError):
    """The backend stopped for a reason other than a recognised status."""


_RELATIONS = ("<=", "=", ">=")
Terms = Mapping[int, float] | Iterable[tuple[int, float]]


@dataclass(frozen=True)
class Variable:
    name: str
    kind: VarKind
    lb: float
    ub: float


@dataclass(frozen=True)
class Constraint:
    cols: tuple[int, ...]
    vals: tuple[float, ...]
    relation: str
    rhs: float
    name: str = ""


class MilpModel:
    """Incrementally built model: variables, linear rows and a linear objective.

    Variables are addressed by the integer index returned from :meth:`add_var`.
    Repeated column indices within one row are summed.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective: dict[int, float] = {}
        self.sense = "min"
        self.constant = 0.0
        self._names: dict[str, int] = {}

    # -- building -------------------------------------------------------------

    def add_var(self, name: str, kind: VarKind | str = VarKind.CONTINUOUS,
                lb: float = 0.0, ub: float = math.inf) -> int:
        kind = VarKind(kind)
        if kind is VarKind.BINARY:
            lb, ub = max(0.0, lb), min(1.0, ub)
        if lb > ub:
            raise ValueError(f"variable {name}: lower bound {lb} exceeds upper bound {ub}")
        if name in self._names:
            raise ValueError(f"duplicate variable name {name!r}")
        self._names[name] = len(self.variables)
        self.variables.append(Variable(name, kind, float(lb), float(ub)))
        return len(self.variables) - 1

    def var(self, name: str) -> int:
        return self._names[name]

    def add_constraint(self, terms: Terms, relation: str, rhs: float, name: str = "") -> int:
        if relation not in _RELATIONS:
            raise ValueError(f"relation must be one of {_RELATIONS}")
        merged: dict[int, float] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for j, v in items:
            if not 0 <= j < len(self.variables):
                raise IndexError(f"constraint {name!r} references undeclared variable {j}")
            merged[j] = merged.get(j, 0.0) + float(v)
        cols = tuple(sorted(merged))
        self.constraints.append(
            Constraint(cols, tuple(merged[j] for j in cols), relation, float(rhs), name))
        return len(self.constraints) - 1

    def set_objective(self, terms: Terms, sense: str = "min", constant: float = 0.0) -> None:
        if sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        obj: dict[int, float] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for j, v in items:
            if not 0 <= j < len(self.variables):
                raise IndexError(f"objective references undeclared variable {j}")
            obj[j] = obj.get(j, 0.0) + float(v)
        self.objective, self.sense, self.constant = obj, sense, float(constant)

    # -- views ----------------------------------------------------------------

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_cons(self) -> int:
        return len(self.constraints)

    @property
    def lb(self) -> np.ndarray:
        return np.array([v.lb for v in self.variables])

    @property
    def ub(self) -> np.ndarray:
        return np.array([v.ub for v in self.variables])

    @property
    def integer_mask(self) -> np.ndarray:
        return np.array([v.kind is not VarKind.CONTINUOUS for v in self.variables], dtype=bool)

    def cost_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for j, v in self.objective.items():
            c[j] = v
        return c

    def matrix(self) -> sparse.csr_matrix:
        rows, cols, vals = [], [], []
        for r, con in enumerate(self.constraints):
            rows.extend([r] * len(con.cols))
            cols.extend(con.cols)
            vals.extend(con.vals)
        return sparse.csr_matrix((vals, (rows, cols)), shape=(self.n_cons, self.n_vars))

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.full(self.n_cons, -np.inf)
        hi = np.full(self.n_cons, np.inf)
        for r, con in enumerate(self.constraints):
            if con.relation in ("=", ">="):
                lo[r] = con.rhs
            if con.relation in ("=", "<="):
                hi[r] = con.rhs
        return lo, hi

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.cost_vector() @ x) + self.constant

    def max_violation(self, x: np.ndarray) -> float:
        """Largest violation of any row or bound at ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        worst = float(max(np.max(self.lb - x, initial=0.0), np.max(x - self.ub, initial=0.0)))
        if self.n_cons:
            ax = self.matrix() @ x
            lo, hi = self.row_bounds()
            worst = max(worst, float(np.max(lo - ax)), float(np.max(ax - hi)))
        return max(worst, 0.0)

    # -- export ---------------------------------------------------------------

    def to_lp_text(self) -> str:
        """CPLEX LP format with every coefficient printed to 17 significant digits."""
        names = [_lp_name(v.name, j) for j, v in enumerate(self.variables)]

        def expr(pairs):
            parts = []
            for j, v in pairs:
                sign = "-" if v < 0 else "+"
                parts.append(f"{sign} {_num(abs(v))} {names[j]}")
            return " ".join(parts) if parts else "0 " + (names[0] if names else "")

        out = [f"\\ {self.name}", "Minimize" if self.sense == "min" else "Maximize"]
        obj = expr(sorted(self.objective.items()))
        if self.constant:
            obj += f" {'-' if self.constant < 0 else '+'} {_num(abs(self.constant))}"
        out.append(f" obj: {obj}")
        out.append("Subject To")
        for r, con in enumerate(self.constraints):
            label = _lp_name(con.name, r, prefix="c") if con.name else f"c{r}"
            out.append(f" {label}: {expr(zip(con.cols, con.vals))} {con.relation} {_num(con.rhs)}")
        out.append("Bounds")
        for j, v in enumerate(self.variables):
            if v.kind is VarKind.BINARY:
                continue
            lo = "-inf" if v.lb == -math.inf else _num(v.lb)
            hi = "+inf" if v.ub == math.inf else _num(v.ub)
            out.append(f" {lo} <= {names[j]} <= {hi}")
        ints = [names[j] for j, v in enumerate(self.variables) if v.kind is VarKind.INTEGER]
        bins = [names[j] for j, v in enumerate(self.variables) if v.kind is VarKind.BINARY]
        if ints:
            out += ["General", " " + " ".join(ints)]
        if bins:
            out += ["Binary", " " + " ".join(bins)]
        out.append("End")
        return "\n".join(out) + "\n"


def _num(v: float) -> str:
    return format(float(v), ".17g")


def _lp_name(name: str, index: int, prefix: str = "x") -> str:
    clean = re.sub(r"[^A-Za-z0-9_.]", "_", name)
    if not clean or clean[0].isdigit() or clean[0] == ".":
        clean = f"{prefix}{index}_{clean}"
    return clean


@dataclass
class MilpSolution:
    status: Status
    x: np.ndarray | None
    objective: float
    bound: float
    nodes: int = 0
    branchings: int = 0
    info: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status in (Status.OPTIMAL, Status.GAP_LIMIT) and self.x is not None

    def __getitem__(self, j: int) -> float:
        if self.x is None:
            raise ValueError(f"no solution values (status {self.status.value})")
        return float(self.x[j])
