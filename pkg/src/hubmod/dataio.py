"""Reading inputs and writing stage artifacts.

All files are UTF-8 with a header row.  Floats in JSON and CSV outputs are
printed with 12 significant digits so repeated runs produce identical bytes.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .model import (
    Direction,
    RoundTrip,
    Route,
    Schedule,
    Stop,
    StopNetwork,
    TransitOverlay,
    floyd_warshall,
    make_route,
    to_seconds,
    validate_network,
)


class InputError(ValueError):
    """Bad or missing input; carries the offending file when known."""

    def __init__(self, message: str, file: str | None = None, detail: Any = None):
        super().__init__(message)
        self.file = file
        self.detail = detail

    def to_dict(self) -> dict:
        out = {"error": "InputError", "message": str(self)}
        if self.file is not None:
            out["file"] = self.file
        if self.detail is not None:
            out["detail"] = self.detail
        return out


# -- config ------------------------------------------------------------------

@dataclass(frozen=True)
class Config:
    c_o: float = 50.0
    c_w: float = 0.5
    c_l: float = 5.0
    lam: str = "1.3"
    sigma: float = 500.0  # seconds
    C: int = 20
    B: int = 200
    h_min: int = 3
    h_max: int = 30
    k_routes: int = 10
    mode: str = "exact"
    connect: bool = False
    gamma: tuple[int, ...] = (0,)
    ccg_tol: float = 1e-4
    iteration_limit: int = 50
    seed: int = 0
    n_eval_scenarios: int = 100
    hub_id: str | None = None
    hub_coords: tuple[float, float] | None = None
    repair_triangle: bool = False
    backend: str = "highs"
    combine_metric: str = "time"

    def schedule_params(self) -> dict:
        return dict(fleet=self.B, capacity=self.C, h_min=self.h_min, h_max=self.h_max,
                    c_o=self.c_o, c_w=self.c_w, c_l=self.c_l)


_ALIASES = {"lambda": "lam"}


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return Config()
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"config file not found: {path}", str(path)) from None
    except json.JSONDecodeError as e:
        raise InputError(f"config is not valid JSON: {e}", str(path)) from None
    if not isinstance(raw, dict):
        raise InputError("config must be a JSON object", str(path))
    known = set(Config.__dataclass_fields__)
    kw = {}
    for key, value in raw.items():
        name = _ALIASES.get(key, key)
        if name not in known:
            raise InputError(f"unknown config key {key!r}", str(path))
        kw[name] = value
    if "lam" in kw:
        kw["lam"] = str(kw["lam"])
    if "gamma" in kw:
        g = kw["gamma"]
        kw["gamma"] = tuple(int(x) for x in (g if isinstance(g, list) else [g]))
    if kw.get("hub_coords") is not None:
        kw["hub_coords"] = tuple(float(x) for x in kw["hub_coords"])
    cfg = Config(**kw)
    if cfg.mode not in ("exact", "heuristic"):
        raise InputError("mode must be 'exact' or 'heuristic'", str(path))
    if cfg.k_routes < 1:
        raise InputError("k_routes must be >= 1", str(path))
    return cfg


# -- network -----------------------------------------------------------------

STOP_COLUMNS = ("stop_id", "lat", "lon", "demand_from_hub", "demand_to_hub",
                "alt_time_from_hub", "alt_time_to_hub", "alt_dist_from_hub",
                "alt_dist_to_hub", "max_dev_from_hub", "max_dev_to_hub")


def _rows(path: Path, required: Sequence[str]) -> list[dict]:
    if not path.is_file():
        raise InputError(f"missing input file: {path.name}", str(path))
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise InputError(f"{path.name} lacks columns {missing}", str(path))
        return list(reader)


def _float(row: dict, key: str, path: Path, line: int) -> float:
    try:
        return float(row[key])
    except (TypeError, ValueError):
        raise InputError(f"{path.name} line {line}: {key} is not a number", str(path)) from None


def read_stops(path: Path) -> list[Stop]:
    stops = []
    for n, row in enumerate(_rows(path, STOP_COLUMNS), start=2):
        lat, lon = (row.get("lat") or "").strip(), (row.get("lon") or "").strip()
        coords = (_float(row, "lat", path, n), _float(row, "lon", path, n)) if lat and lon else None
        stops.append(Stop(
            row["stop_id"].strip(),
            *(_float(row, k, path, n) for k in STOP_COLUMNS[3:]),
            coords=coords,
        ))
    return stops


def read_travel_times(path: Path) -> dict[tuple[str, str], float]:
    out = {}
    for n, row in enumerate(_rows(path, ("from_id", "to_id", "minutes")), start=2):
        out[(row["from_id"].strip(), row["to_id"].strip())] = _float(row, "minutes", path, n)
    return out


def infer_hub(stops: Sequence[Stop], pairs: Mapping[tuple[str, str], float], path: Path) -> str:
    ids = {s.id for s in stops}
    extra = sorted({x for key in pairs for x in key} - ids)
    if len(extra) != 1:
        raise InputError(
            f"cannot infer the hub: expected one id in travel times that is not a stop, found {extra}",
            str(path))
    return extra[0]


def read_overlay(folder: Path, sigma_seconds: float) -> TransitOverlay | None:
    """Transit stations, in-transit times and walk access, if the files exist.

    Station times are closed under shortest paths so that staying on board
    through intermediate stations is allowed.
    """
    st_path = folder / "transit_stations.csv"
    if not st_path.is_file():
        return None
    stations = tuple(r["station_id"].strip() for r in _rows(st_path, ("station_id",)))
    pos = {s: k for k, s in enumerate(stations)}
    t = np.full((len(stations), len(stations)), np.inf)
    np.fill_diagonal(t, 0.0)
    tt_path = folder / "transit_times.csv"
    for n, row in enumerate(_rows(tt_path, ("from_station", "to_station", "minutes")), start=2):
        a, b = row["from_station"].strip(), row["to_station"].strip()
        if a not in pos or b not in pos:
            raise InputError(f"{tt_path.name} line {n}: unknown station", str(tt_path))
        t[pos[a], pos[b]] = min(t[pos[a], pos[b]], to_seconds(_float(row, "minutes", tt_path, n)))
    t = floyd_warshall(t)
    access = {}
    ac_path = folder / "access.csv"
    for n, row in enumerate(_rows(ac_path, ("stop_id", "station_id", "walk_minutes")), start=2):
        sid = row["station_id"].strip()
        if sid not in pos:
            raise InputError(f"{ac_path.name} line {n}: unknown station {sid}", str(ac_path))
        access[(row["stop_id"].strip(), sid)] = to_seconds(_float(row, "walk_minutes", ac_path, n))
    try:
        return TransitOverlay(stations, t, access, int(round(sigma_seconds)))
    except ValueError as e:
        raise InputError(str(e), str(folder)) from None


def load_network(folder: str | Path, cfg: Config) -> StopNetwork:
    folder = Path(folder)
    if not folder.is_dir():
        raise InputError(f"network folder not found: {folder}", str(folder))
    stops_path, tt_path = folder / "stops.csv", folder / "travel_times.csv"
    stops = read_stops(stops_path)
    pairs = read_travel_times(tt_path)
    hub = cfg.hub_id or infer_hub(stops, pairs, tt_path)
    return validate_network(hub, stops, pairs, cfg.lam, cfg.hub_coords, cfg.repair_triangle)


# -- formatting --------------------------------------------------------------

def fmt(x: float) -> str:
    return format(float(x), ".12g")


def _round_floats(obj):
    if isinstance(obj, float):
        return float(fmt(obj)) if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    if isinstance(obj, np.generic):
        return _round_floats(obj.item())
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_round_floats(obj), indent=2, sort_keys=False) + "\n", encoding="utf-8")


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, float) else v for v in row])


def read_json(path: str | Path, what: str) -> Any:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"missing {what}: {path.name}", str(path))
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InputError(f"{path.name} is not valid JSON: {e}", str(path)) from None


# -- routes ------------------------------------------------------------------

def route_to_dict(route: Route) -> dict:
    return {
        "route_id": route.route_id,
        "direction": route.direction.value,
        "stops": list(route.stops),
        "cum_seconds": list(route.cum_seconds),
        "transfer_covered": sorted(route.transfer_covered),
        "coverage": route.coverage,
        "trip_time": route.trip_time,
    }


def route_from_dict(d: Mapping, network: StopNetwork | None = None) -> Route:
    """Rebuild a route; with a network, times and coverage are recomputed from it."""
    direction = Direction(d["direction"])
    if network is not None:
        r = make_route(network, direction, d["stops"], d.get("transfer_covered", ()), d["route_id"])
        if list(r.cum_seconds) != list(d["cum_seconds"]):
            raise InputError(f"route {d['route_id']} times disagree with the travel matrix")
        return r
    return Route(d["route_id"], direction, tuple(d["stops"]), tuple(d["cum_seconds"]),
                 frozenset(d.get("transfer_covered", ())), float(d["coverage"]))


def routes_geojson(routes: Sequence[Route], network: StopNetwork) -> dict:
    """One LineString per route in driving order; empty geometry without coordinates."""
    feats = []
    have = network.hub_coords is not None and all(s.coords is not None for s in network.stops)
    for r in routes:
        nodes = ((network.hub_id,) + r.stops if r.direction is Direction.FROM_HUB
                 else r.travel_order() + (network.hub_id,))
        coords = [[network.coords(n)[1], network.coords(n)[0]] for n in nodes] if have else []
        feats.append({
            "type": "Feature",
            "geometry": {"type": "LineString", "coordinates": coords},
            "properties": route_to_dict(r),
        })
    return {"type": "FeatureCollection", "features": feats}


def read_routes_geojson(path: str | Path, network: StopNetwork | None = None) -> list[Route]:
    data = read_json(path, "routes file")
    try:
        return [route_from_dict(f["properties"], network) for f in data["features"]]
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"malformed routes file: {e}", str(path)) from None


# -- round trips and schedules -----------------------------------------------

def roundtrips_to_dict(trips: Sequence[RoundTrip], network: StopNetwork) -> dict:
    return {
        "hub": network.hub_id,
        "roundtrips": [{
            "trip_id": t.trip_id,
            "out": route_to_dict(t.out) if t.out else None,
            "back": route_to_dict(t.back) if t.back else None,
            "connect_seconds": t.connect_seconds,
            "total_time": t.total_time,
        } for t in trips],
    }


def read_roundtrips(path: str | Path, network: StopNetwork) -> list[RoundTrip]:
    data = read_json(path, "round trips file")
    try:
        return [RoundTrip(
            d["trip_id"],
            route_from_dict(d["out"], network) if d["out"] else None,
            route_from_dict(d["back"], network) if d["back"] else None,
            int(d["connect_seconds"]),
        ) for d in data["roundtrips"]]
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"malformed round trips file: {e}", str(path)) from None


def schedule_to_dict(result, trips: Sequence[RoundTrip], stop_ids: Sequence[str]) -> dict:
    s: Schedule = result.schedule
    return {
        "gamma": result.gamma,
        "status": result.status.value,
        "objective": result.objective,
        "lower_bound": result.lower,
        "upper_bound": result.upper,
        "iterations": result.iterations,
        "costs": {"operation": s.operation, "waiting": s.waiting, "loss": s.loss, "total": s.total},
        "fleet_used": s.fleet_used,
        "routes": [{"trip_id": t.trip_id, "vehicles": y, "headway": h, "active": k}
                   for t, y, h, k in zip(trips, s.vehicles, s.headways, s.active)],
        "worst_scenario": {
            "p_from": dict(zip(stop_ids, result.worst.p_from)),
            "p_to": dict(zip(stop_ids, result.worst.p_to)),
        },
    }


def read_schedule(path: str | Path, trips: Sequence[RoundTrip]) -> tuple[int, Schedule]:
    data = read_json(path, "schedule file")
    try:
        by_id = {r["trip_id"]: r for r in data["routes"]}
        rows = [by_id[t.trip_id] for t in trips]
        sched = Schedule(tuple(int(r["vehicles"]) for r in rows),
                         tuple(int(r["headway"]) for r in rows),
                         tuple(int(r["active"]) for r in rows))
        return int(data["gamma"]), sched
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"malformed schedule file: {e}", str(path)) from None
