"""Command-line driver: ``hubmod <stage> ...``.

Each stage reads the network folder plus the previous stage's output, so
stages can be run and inspected one at a time.  ``pipeline`` runs them all.
Exit codes: 0 ok, 1 solver failure, 2 input error; errors are printed to
stderr as one JSON object.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from . import combine, evalsim, robust, routegen, spbench
from .dataio import (
    Config,
    InputError,
    fmt,
    load_config,
    load_network,
    read_overlay,
    read_roundtrips,
    read_routes_geojson,
    read_schedule,
    roundtrips_to_dict,
    routes_geojson,
    schedule_to_dict,
    write_csv,
    write_json,
)
from .milp.model import SolverError
from .model import Direction, NetworkValidationError, ScheduleProblem, StopNetwork

log = logging.getLogger("hubmod")

HISTORY_COLUMNS = ("gamma", "iteration", "lower", "upper", "gap", "pool_size")


# -- stages ------------------------------------------------------------------

def stage_routes(network: StopNetwork, cfg: Config, folder: Path, k: int | None = None,
                 mode: str | None = None, connect: bool | None = None):
    k = cfg.k_routes if k is None else k
    mode = cfg.mode if mode is None else mode
    connect = cfg.connect if connect is None else connect
    overlay = None
    if connect:
        overlay = read_overlay(folder, cfg.sigma)
        if overlay is None:
            raise InputError("connect mode needs transit_stations.csv", str(folder / "transit_stations.csv"))
    return [r for d in Direction
            for r in routegen.generate_k_mcr(network, k, mode, overlay, d)]


def stage_combine(network: StopNetwork, routes, cfg: Config):
    outs = [r for r in routes if r.direction is Direction.FROM_HUB]
    backs = [r for r in routes if r.direction is Direction.TO_HUB]
    return combine.combine_routes(outs, backs, network, cfg.combine_metric)


def make_problem(network: StopNetwork, trips, cfg: Config) -> ScheduleProblem:
    try:
        return ScheduleProblem.from_network(network, trips, **cfg.schedule_params())
    except ValueError as e:
        raise InputError(f"bad schedule parameters: {e}") from None


def stage_schedule(problem: ScheduleProblem, cfg: Config, gammas: Sequence[int] | None = None):
    out = {}
    for g in (cfg.gamma if gammas is None else gammas):
        if not 0 <= g <= 2 * problem.n_stops:
            raise InputError(f"gamma {g} outside [0, {2 * problem.n_stops}]")
        out[g] = robust.ccg_solve(problem, g, cfg.ccg_tol, cfg.iteration_limit, cfg.backend)
    return out


def stage_evaluate(problem: ScheduleProblem, schedules, cfg: Config):
    if 0 not in schedules:
        schedules = dict(schedules)
        schedules[0] = robust.ccg_solve(problem, 0, cfg.ccg_tol, cfg.iteration_limit,
                                        cfg.backend).schedule
    scen = evalsim.sample_scenarios(problem, cfg.n_eval_scenarios, cfg.seed)
    return evalsim.gap_metrics(schedules, scen, problem, cfg.backend)


# -- writers -----------------------------------------------------------------

def write_routes(out: Path, routes, network: StopNetwork) -> None:
    write_json(out / "routes.geojson", routes_geojson(routes, network))


def write_schedules(out: Path, results, trips, network: StopNetwork, timing: bool) -> None:
    rows = []
    for g, res in results.items():
        write_json(out / f"schedule_g{g}.json", schedule_to_dict(res, trips, network.stop_ids))
        for h in res.history:
            row = [g, h.iteration, h.lower, h.upper, h.gap, h.pool_size]
            rows.append(row + [h.seconds] if timing else row)
    header = HISTORY_COLUMNS + (("seconds",) if timing else ())
    write_csv(out / "ccg_history.csv", header, rows)


def write_report(out: Path, rows) -> None:
    (out / "eval_report.csv").write_text(evalsim.report_csv(rows), encoding="utf-8")


# -- commands ----------------------------------------------------------------

def _setup(args):
    cfg = load_config(args.config)
    folder = Path(args.network)
    network = load_network(folder, cfg)
    out = Path(getattr(args, "out", None) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return cfg, folder, network, out


def cmd_validate(args) -> dict:
    cfg = load_config(args.config)
    net = load_network(args.network, cfg)
    overlay = read_overlay(Path(args.network), cfg.sigma)
    return {"ok": True, "hub": net.hub_id, "stops": len(net.stops),
            "transit_stations": len(overlay.stations) if overlay else 0}


def cmd_routes(args) -> dict:
    cfg, folder, network, out = _setup(args)
    routes = stage_routes(network, cfg, folder, args.k, args.mode,
                          True if args.connect else None)
    write_routes(out, routes, network)
    return {"routes": len(routes)}


def cmd_combine(args) -> dict:
    cfg, folder, network, out = _setup(args)
    routes = read_routes_geojson(args.routes or out / "routes.geojson", network)
    trips = stage_combine(network, routes, cfg)
    write_json(out / "roundtrips.json", roundtrips_to_dict(trips, network))
    return {"roundtrips": len(trips)}


def cmd_schedule(args) -> dict:
    cfg, folder, network, out = _setup(args)
    trips = read_roundtrips(args.roundtrips or out / "roundtrips.json", network)
    problem = make_problem(network, trips, cfg)
    results = stage_schedule(problem, cfg, args.gamma)
    write_schedules(out, results, trips, network, args.timing)
    return {g: {"objective": float(fmt(r.objective)), "status": r.status.value}
            for g, r in results.items()}


def cmd_evaluate(args) -> dict:
    cfg, folder, network, out = _setup(args)
    trips = read_roundtrips(args.roundtrips or out / "roundtrips.json", network)
    problem = make_problem(network, trips, cfg)
    paths = args.schedules or sorted(out.glob("schedule_g*.json"))
    if not paths:
        raise InputError("no schedule files found", str(out))
    schedules = dict(read_schedule(p, trips) for p in paths)
    rows = stage_evaluate(problem, schedules, cfg)
    write_report(out, rows)
    return {"rows": len(rows)}


def cmd_pipeline(args) -> dict:
    cfg, folder, network, out = _setup(args)
    routes = stage_routes(network, cfg, folder)
    write_routes(out, routes, network)
    trips = stage_combine(network, routes, cfg)
    write_json(out / "roundtrips.json", roundtrips_to_dict(trips, network))
    problem = make_problem(network, trips, cfg)
    results = stage_schedule(problem, cfg)
    write_schedules(out, results, trips, network, args.timing)
    rows = stage_evaluate(problem, {g: r.schedule for g, r in results.items()}, cfg)
    write_report(out, rows)
    return {"routes": len(routes), "roundtrips": len(trips), "gammas": list(results)}


def cmd_benchmark(args) -> dict:
    cfg, folder, network, out = _setup(args)
    rows = []
    for d in Direction:
        bench = spbench.benchmark_routes(network, args.k_paths, d, args.max_edge)
        exact = routegen.generate_k_mcr(network, cfg.k_routes, cfg.mode, direction=d)
        b = spbench.benchmark_coverage([r for r, _ in bench], network)
        e = routegen.cumulative_coverage(exact, network, d)
        for n in range(max(len(b), len(e))):
            rows.append([d.value, n + 1, e[min(n, len(e) - 1)] if e else 0.0,
                         b[min(n, len(b) - 1)] if b else 0.0])
    write_csv(out / "benchmark.csv", ("direction", "routes", "kmcr", "spbench"), rows)
    return {"rows": len(rows)}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hubmod", description="Hub-based high-capacity on-demand transit planning.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(name: str, help: str, out: bool = True):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("--network", required=True, help="folder with stops.csv and travel_times.csv")
        sp.add_argument("--config", help="config.json (defaults are used when omitted)")
        if out:
            sp.add_argument("--out", default="out", help="output folder (default: out)")
        return sp

    common("validate", "check the network inputs", out=False)
    sp = common("routes", "generate maximum-coverage routes in both directions")
    sp.add_argument("--k", type=int, help="routes per direction (overrides k_routes)")
    sp.add_argument("--mode", choices=("exact", "heuristic"))
    sp.add_argument("--connect", action="store_true", help="allow transfers to transit")
    sp = common("combine", "pair routes into round trips")
    sp.add_argument("--routes", help="routes.geojson (default: <out>/routes.geojson)")
    sp = common("schedule", "robust fleet and headway design per gamma")
    sp.add_argument("--roundtrips", help="roundtrips.json (default: <out>/roundtrips.json)")
    sp.add_argument("--gamma", type=int, nargs="+", help="budgets (overrides config)")
    sp.add_argument("--timing", action="store_true", help="add wall-clock seconds to ccg_history.csv")
    sp = common("evaluate", "scenario evaluation of saved schedules")
    sp.add_argument("--roundtrips")
    sp.add_argument("--schedules", nargs="+", help="schedule_g*.json files (default: all in <out>)")
    sp = common("pipeline", "run every stage")
    sp.add_argument("--timing", action="store_true")
    sp = common("benchmark", "cumulative coverage: maximum-coverage vs shortest-path routes")
    sp.add_argument("--k-paths", type=int, default=3, help="shortest paths per stop")
    sp.add_argument("--max-edge", type=float, help="drop links longer than this many minutes")
    return p


COMMANDS = {
    "validate": cmd_validate, "routes": cmd_routes, "combine": cmd_combine,
    "schedule": cmd_schedule, "evaluate": cmd_evaluate, "pipeline": cmd_pipeline,
    "benchmark": cmd_benchmark,
}


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("HUBMOD_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        summary = COMMANDS[args.command](args)
    except InputError as e:
        return _report(2, e.to_dict())
    except NetworkValidationError as e:
        return _report(2, {"error": "NetworkValidationError", **e.to_dict()})
    except (robust.RobustSolveError, SolverError) as e:
        return _report(1, {"error": type(e).__name__, "message": str(e)})
    except (ValueError, robust.InfeasibleBudget, spbench.MissingCoordinates) as e:
        return _report(2, {"error": type(e).__name__, "message": str(e)})
    print(json.dumps(summary, default=str))
    return 0


def _report(code: int, payload: dict) -> int:
    print(json.dumps(payload, default=str), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
