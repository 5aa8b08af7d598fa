import itertools
import math
import re

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from hubmod.milp.model import MilpModel, Status
from hubmod.milp.simplex import solve_arrays
from hubmod.milp.solve import solve_lp, solve_milp
from milp_util import model_from_arrays
from oracles import enumerate_milp, random_milp


def _vertex_min(c, A, b):
    """min c@x over {A x <= b, x >= 0} by enumerating every basis of the slack form."""
    m, n = A.shape
    S = np.hstack([A, np.eye(m)])
    cc = np.concatenate([c, np.zeros(m)])
    best = math.inf
    for basis in itertools.combinations(range(n + m), m):
        B = S[:, basis]
        if abs(np.linalg.det(B)) < 1e-12:
            continue
        xb = np.linalg.solve(B, b)
        if np.all(xb >= -1e-12):
            best = min(best, float(cc[list(basis)] @ xb))
    return best


class TestLp:
    def test_single_lower_bound(self):
        m = MilpModel()
        x = m.add_var("x", lb=-math.inf)
        m.add_constraint({x: 1}, ">=", 3)
        m.set_objective({x: 1})
        sol = solve_lp(m)
        assert sol.status is Status.OPTIMAL and sol[x] == pytest.approx(3)

    def test_binding_row(self):
        m = MilpModel()
        x, y = m.add_var("x"), m.add_var("y")
        m.add_constraint({x: 1, y: 1}, "<=", 1)
        m.set_objective({x: 1, y: 1}, "max")
        assert solve_lp(m).objective == pytest.approx(1)

    def test_beale_cycling_instance_terminates(self):
        c = np.array([-0.75, 20, -0.5, 6])
        A = np.array([[0.25, -8, -1, 9], [0.5, -12, -0.5, 3], [0, 0, 1, 0]])
        b = np.array([0.0, 0.0, 1.0])
        res = solve_arrays(c, A, b)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(_vertex_min(c, A, b), abs=1e-9)
        assert res.objective == pytest.approx(-1.25, abs=1e-9)

    def test_infeasible(self):
        m = MilpModel()
        x = m.add_var("x", ub=1)
        m.add_constraint({x: 1}, ">=", 2)
        m.set_objective({x: 1})
        assert solve_lp(m).status is Status.INFEASIBLE

    def test_unbounded(self):
        m = MilpModel()
        x = m.add_var("x")
        m.set_objective({x: 1}, "max")
        assert solve_lp(m).status is Status.UNBOUNDED

    def test_equality_and_free_variables(self):
        m = MilpModel()
        x = m.add_var("x", lb=-math.inf)
        y = m.add_var("y", lb=-math.inf, ub=4)
        m.add_constraint({x: 1, y: 1}, "=", 2)
        m.set_objective({x: 1, y: 2}, "max")
        sol = solve_lp(m)
        assert (sol[x], sol[y]) == pytest.approx((-2, 4))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_lp_matches_reference_and_dual(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(1, 6)), int(rng.integers(1, 5))
    c = rng.integers(-5, 6, size=n).astype(float)
    A = rng.integers(-3, 6, size=(m, n)).astype(float)
    b = rng.integers(0, 10, size=m).astype(float)
    ub = np.where(rng.random(n) < 0.5, rng.integers(1, 5, size=n), np.inf)
    lb = np.where(rng.random(n) < 0.3, -rng.integers(0, 3, size=n), 0.0)
    ref = linprog(c, A_ub=A, b_ub=b, bounds=list(zip(lb, ub)), method="highs")
    res = solve_arrays(c, A, b, lb=lb, ub=ub)
    if ref.status == 2:
        assert res.status == "infeasible"
    elif ref.status == 3:
        assert res.status == "unbounded"
    else:
        assert res.status == "optimal"
        assert res.objective == pytest.approx(ref.fun, abs=1e-7)
        assert res.dual_objective == pytest.approx(res.objective, abs=1e-6)
        assert np.all(A @ res.x <= b + 1e-7)


class TestMilp:
    def test_two_binaries(self):
        m = MilpModel()
        x, y = m.add_var("x", "binary"), m.add_var("y", "binary")
        m.add_constraint({x: 1, y: 1}, "<=", 1.5)
        m.set_objective({x: 1, y: 1}, "max")
        for backend in ("native", "highs"):
            assert solve_milp(m, backend=backend).objective == pytest.approx(1)

    def test_knapsack_matches_enumeration(self):
        v = [10, 13, 7, 8, 4]
        w = [5, 6, 3, 4, 2]
        best = max(sum(v[i] for i in range(5) if bits[i])
                   for bits in itertools.product((0, 1), repeat=5)
                   if sum(w[i] for i in range(5) if bits[i]) <= 11)
        m = MilpModel()
        xs = [m.add_var(f"x{i}", "binary") for i in range(5)]
        m.add_constraint(dict(zip(xs, w)), "<=", 11)
        m.set_objective(dict(zip(xs, v)), "max")
        sol = solve_milp(m)
        assert sol.objective == pytest.approx(best)
        assert sol.bound >= sol.objective - 1e-9

    def test_integral_relaxation_needs_no_branching(self):
        m = MilpModel()
        x = m.add_var("x", "integer", 0, 10)
        y = m.add_var("y", "integer", 0, 10)
        m.add_constraint({x: 1}, "<=", 4)
        m.add_constraint({y: 1}, "<=", 3)
        m.set_objective({x: 1, y: 1}, "max")
        sol = solve_milp(m)
        assert sol.objective == 7 and sol.branchings == 0

    def test_infeasible_integer_program(self):
        m = MilpModel()
        x = m.add_var("x", "integer", 0, 5)
        m.add_constraint({x: 2}, "=", 3)
        m.set_objective({x: 1})
        assert solve_milp(m).status is Status.INFEASIBLE
        assert solve_milp(m, backend="highs").status is Status.INFEASIBLE

    def test_node_limit_gives_gap_limit(self):
        rng = np.random.default_rng(7)
        m = MilpModel()
        xs = [m.add_var(f"x{i}", "binary") for i in range(14)]
        w = rng.integers(5, 40, 14)
        m.add_constraint(dict(zip(xs, w)), "<=", float(w.sum()) / 2 + 0.5)
        m.set_objective(dict(zip(xs, w + rng.integers(0, 3, 14))), "max")
        sol = solve_milp(m, node_limit=3)
        assert sol.status is Status.GAP_LIMIT
        assert not sol.ok or sol.bound >= sol.objective - 1e-9
        assert solve_milp(m).objective <= sol.bound + 1e-9

    def test_unbounded_integer_variable_rejected(self):
        m = MilpModel()
        x = m.add_var("x", "integer")
        m.set_objective({x: 1})
        with pytest.raises(ValueError):
            solve_milp(m)

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            solve_milp(MilpModel(), backend="gurobi")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_milp_matches_enumeration(seed):
    prob = random_milp(np.random.default_rng(seed), max_int=8)
    ref = enumerate_milp(**prob)
    model = model_from_arrays(**prob)
    for backend in ("native", "highs"):
        sol = solve_milp(model, backend=backend)
        if ref is None:
            assert sol.status is Status.INFEASIBLE
            continue
        assert sol.status is Status.OPTIMAL
        assert sol.objective == pytest.approx(ref, abs=1e-6)
        assert model.max_violation(sol.x) <= 1e-6
        x_int = sol.x[model.integer_mask]
        assert np.all(np.abs(x_int - np.round(x_int)) <= 1e-6)
        # the bound sits on the optimistic side of the incumbent
        if model.sense == "min":
            assert sol.bound <= sol.objective + 1e-6
        else:
            assert sol.bound >= sol.objective - 1e-6


class TestModel:
    def test_duplicate_name(self):
        m = MilpModel()
        m.add_var("x")
        with pytest.raises(ValueError):
            m.add_var("x")

    def test_bad_bounds(self):
        with pytest.raises(ValueError):
            MilpModel().add_var("x", lb=2, ub=1)

    def test_undeclared_variable(self):
        with pytest.raises(IndexError):
            MilpModel().add_constraint({0: 1}, "<=", 1)

    def test_bad_relation(self):
        m = MilpModel()
        x = m.add_var("x")
        with pytest.raises(ValueError):
            m.add_constraint({x: 1}, "<", 1)

    def test_repeated_columns_are_summed(self):
        m = MilpModel()
        x = m.add_var("x")
        m.add_constraint([(x, 1.0), (x, 2.0)], "<=", 6)
        m.set_objective({x: 1}, "max")
        assert solve_milp(m).objective == pytest.approx(2)

    def test_lp_export_round_trips_coefficients(self):
        m = MilpModel("demo")
        x = m.add_var("x[0]", "integer", 0, 7)
        y = m.add_var("y", lb=-math.inf)
        b = m.add_var("b", "binary")
        coef = [0.1, 1 / 3, 2 ** -40]
        m.add_constraint({x: coef[0], y: coef[1], b: -coef[2]}, "<=", math.pi, "cap")
        m.set_objective({x: 1, y: -1e-17}, "max", constant=0.5)
        text = m.to_lp_text()
        assert text.startswith("\\ demo\nMaximize")
        assert "General\n x_0_" in text and "Binary\n b" in text
        assert "-inf <= y <= +inf" in text and text.endswith("End\n")
        numbers = {float(t) for t in re.findall(r"[-+]?\d[\d.]*(?:e[-+]?\d+)?", text)}
        for v in coef + [math.pi, 1e-17]:
            assert v in numbers
