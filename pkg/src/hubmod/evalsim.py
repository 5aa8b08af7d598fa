"""Scenario-based evaluation of schedules.

A schedule is judged by re-solving the passenger assignment at realized
demand: on a shared set of uniform random draws from the deviation box
(the average case) and at fixed deviation profiles such as ``p = 1`` and
``p = 0.5`` (the stress cases).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .model import Schedule, ScheduleProblem
from .robust import objective_components, solve_assignment


@dataclass(frozen=True)
class Evaluation:
    operation: float
    waiting: float
    loss: float
    loss_rate: float

    @property
    def total(self) -> float:
        return self.operation + self.waiting + self.loss


def sample_scenarios(problem: ScheduleProblem, n: int, seed: int | None = 0
                     ) -> list[tuple[np.ndarray, np.ndarray]]:
    """``n`` realized demand pairs ``(from, to)`` drawn uniformly in ``[mean, mean + dev]``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        u = rng.random((2, problem.n_stops))
        out.append(problem.realized(u[0], u[1]))
    return out


def profile(problem: ScheduleProblem, p: float) -> tuple[np.ndarray, np.ndarray]:
    """Realized demand with every stop and direction at deviation fraction ``p``."""
    full = np.full(problem.n_stops, float(p))
    return problem.realized(full, full)


def evaluate_schedule(schedule: Schedule, demand_from, demand_to, problem: ScheduleProblem,
                      backend: str = "highs") -> Evaluation:
    """Costs and lost share of demand under the best assignment at this demand.

    The loss rate of zero total demand is reported as 0.
    """
    asg = solve_assignment(schedule, demand_from, demand_to, problem, backend)
    c = objective_components(schedule, asg.X_from, asg.X_to, asg.L_from, asg.L_to, problem)
    total = float(np.sum(demand_from) + np.sum(demand_to))
    lost = float(asg.L_from.sum() + asg.L_to.sum())
    rate = min(max(lost / total, 0.0), 1.0) if total > 0 else 0.0
    return Evaluation(c.operation, c.waiting, c.loss, rate)


def average_evaluation(schedule: Schedule, scenarios: Sequence[tuple[np.ndarray, np.ndarray]],
                       problem: ScheduleProblem, backend: str = "highs") -> Evaluation:
    evals = [evaluate_schedule(schedule, f, t, problem, backend) for f, t in scenarios]
    mean = lambda xs: math.fsum(xs) / len(xs)
    return Evaluation(mean([e.operation for e in evals]), mean([e.waiting for e in evals]),
                      mean([e.loss for e in evals]), mean([e.loss_rate for e in evals]))


@dataclass(frozen=True)
class GapRow:
    gamma: int
    vehicles: int
    cost_avg: float
    cost_half: float
    cost_full: float
    loss_avg: float
    loss_half: float
    loss_full: float
    gap_avg: float
    gap_half: float
    gap_full: float


def _rel(value: float, base: float) -> float:
    """Relative change; NaN (undefined) when the baseline cost is zero."""
    return (value - base) / base if base != 0 else math.nan


def gap_metrics(schedules: Mapping[int, Schedule], scenarios: Sequence[tuple[np.ndarray, np.ndarray]],
                problem: ScheduleProblem, backend: str = "highs") -> list[GapRow]:
    """Cost, loss rate and relative cost gap to the ``Gamma = 0`` schedule.

    The average column uses the shared random scenarios; the half and full
    columns use the deterministic profiles ``p = 0.5`` and ``p = 1``.
    """
    if 0 not in schedules:
        raise ValueError("a schedule for gamma = 0 is required")
    half, full = profile(problem, 0.5), profile(problem, 1.0)
    raw = {}
    for g in sorted(schedules):
        s = schedules[g]
        raw[g] = (average_evaluation(s, scenarios, problem, backend),
                  evaluate_schedule(s, *half, problem, backend),
                  evaluate_schedule(s, *full, problem, backend))
    base = raw[0]
    rows = []
    for g, (avg, h, f) in raw.items():
        rows.append(GapRow(
            g, schedules[g].fleet_used, avg.total, h.total, f.total,
            avg.loss_rate, h.loss_rate, f.loss_rate,
            _rel(avg.total, base[0].total), _rel(h.total, base[1].total), _rel(f.total, base[2].total),
        ))
    return rows


REPORT_COLUMNS = ("gamma", "vehicles", "loss_avg", "loss_p05", "loss_p1",
                  "cost_avg", "cost_p05", "cost_p1", "gap_avg", "gap_p05", "gap_p1")


def fmt(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "undefined"
    return format(x, ".12g")


def report_csv(rows: Sequence[GapRow]) -> str:
    """Per-Gamma table: vehicles, loss rates and costs by profile, and gaps."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in rows:
        w.writerow([r.gamma, r.vehicles, fmt(r.loss_avg), fmt(r.loss_half), fmt(r.loss_full),
                    fmt(r.cost_avg), fmt(r.cost_half), fmt(r.cost_full),
                    fmt(r.gap_avg), fmt(r.gap_half), fmt(r.gap_full)])
    return buf.getvalue()
