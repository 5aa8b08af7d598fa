"""Domain types shared by route generation, combination and scheduling.

Travel times are held as whole seconds (``int``) so that deviation checks
are exact; minutes only appear at the input/output boundary.  The deviation
threshold is kept as a :class:`fractions.Fraction` for the same reason.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np


class Direction(str, Enum):
    FROM_HUB = "from_hub"
    TO_HUB = "to_hub"

    @property
    def short(self) -> str:
        return "F" if self is Direction.FROM_HUB else "T"


def to_seconds(minutes: float) -> int:
    return int(round(float(minutes) * 60.0))


def to_minutes(seconds: float) -> float:
    return seconds / 60.0


def as_fraction(value: float | str | Fraction) -> Fraction:
    """Exact rational for a user supplied threshold (``1.3`` -> ``13/10``)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value)
    return Fraction(repr(float(value)))


# -- validation errors -------------------------------------------------------

@dataclass(frozen=True)
class TriangleInequalityViolation:
    i: str
    j: str
    k: str

    def __str__(self) -> str:
        return f"w[{self.i},{self.j}] + w[{self.j},{self.k}] < w[{self.i},{self.k}]"


@dataclass(frozen=True)
class NegativeValue:
    field: str
    where: str = ""

    def __str__(self) -> str:
        return f"negative value in {self.field} ({self.where})"


@dataclass(frozen=True)
class NonPositiveValue:
    field: str
    where: str = ""

    def __str__(self) -> str:
        return f"value must be > 0 in {self.field} ({self.where})"


@dataclass(frozen=True)
class MissingHub:
    hub_id: str | None = None

    def __str__(self) -> str:
        return f"hub {self.hub_id!r} missing from travel times"


@dataclass(frozen=True)
class DuplicateStop:
    stop_id: str

    def __str__(self) -> str:
        return f"duplicate stop {self.stop_id!r}"


@dataclass(frozen=True)
class MissingTravelTime:
    i: str
    j: str

    def __str__(self) -> str:
        return f"no travel time for {self.i} -> {self.j}"


@dataclass(frozen=True)
class InvalidValue:
    field: str
    detail: str

    def __str__(self) -> str:
        return f"{self.field}: {self.detail}"


class NetworkValidationError(ValueError):
    """Raised with every violation found, not only the first."""

    def __init__(self, violations: Sequence[object]):
        self.violations = list(violations)
        head = "; ".join(str(v) for v in self.violations[:5])
        more = len(self.violations) - 5
        if more > 0:
            head += f"; ... and {more} more"
        super().__init__(f"{len(self.violations)} violation(s): {head}")

    def to_dict(self) -> dict:
        return {
            "error": "NetworkValidationError",
            "violations": [
                {"kind": type(v).__name__, **v.__dict__} for v in self.violations
            ],
        }


class NoFeasibleRoute(Exception):
    """No stop with positive remaining demand is reachable from the hub."""


# -- network -----------------------------------------------------------------

@dataclass(frozen=True)
class Stop:
    id: str
    demand_from_hub: float = 0.0
    demand_to_hub: float = 0.0
    alt_time_from_hub: float = 1.0
    alt_time_to_hub: float = 1.0
    alt_dist_from_hub: float = 0.0
    alt_dist_to_hub: float = 0.0
    max_dev_from_hub: float = 0.0
    max_dev_to_hub: float = 0.0
    coords: tuple[float, float] | None = None

    def demand(self, direction: Direction) -> float:
        return self.demand_from_hub if direction is Direction.FROM_HUB else self.demand_to_hub

    def alt_time(self, direction: Direction) -> float:
        return self.alt_time_from_hub if direction is Direction.FROM_HUB else self.alt_time_to_hub

    def alt_dist(self, direction: Direction) -> float:
        return self.alt_dist_from_hub if direction is Direction.FROM_HUB else self.alt_dist_to_hub

    def max_dev(self, direction: Direction) -> float:
        return self.max_dev_from_hub if direction is Direction.FROM_HUB else self.max_dev_to_hub


_NUMERIC_STOP_FIELDS = (
    "demand_from_hub", "demand_to_hub",
    "alt_time_from_hub", "alt_time_to_hub",
    "alt_dist_from_hub", "alt_dist_to_hub",
    "max_dev_from_hub", "max_dev_to_hub",
)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class StopNetwork:
    """Validated stop graph around one hub.

    Node index 0 is the hub; stops follow in the order given.  Use
    :func:`validate_network` rather than constructing this directly.
    """

    hub_id: str
    stops: tuple[Stop, ...]
    travel_seconds: np.ndarray
    lam: Fraction
    hub_coords: tuple[float, float] | None = None
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        ids = (self.hub_id,) + tuple(s.id for s in self.stops)
        object.__setattr__(self, "_index", {sid: k for k, sid in enumerate(ids)})

    @property
    def n(self) -> int:
        return len(self.stops)

    @property
    def node_ids(self) -> tuple[str, ...]:
        return (self.hub_id,) + tuple(s.id for s in self.stops)

    @property
    def stop_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.stops)

    def node(self, node_id: str) -> int:
        return self._index[node_id]

    def stop(self, stop_id: str) -> Stop:
        return self.stops[self._index[stop_id] - 1]

    def travel(self, i: str, j: str) -> int:
        """Seconds from node ``i`` to node ``j``."""
        return int(self.travel_seconds[self._index[i], self._index[j]])

    def oriented_seconds(self, direction: Direction) -> np.ndarray:
        """Travel matrix in search orientation (transposed for to-hub routes)."""
        w = self.travel_seconds
        return w if direction is Direction.FROM_HUB else w.T

    def limits(self, direction: Direction) -> np.ndarray:
        """Smallest integer elapsed time that is *not* acceptable at each node.

        For integer ``x``: ``x < lam * t`` holds iff ``x < ceil(lam * t)``.
        The hub entry is 0.
        """
        out = np.zeros(self.n + 1, dtype=np.int64)
        for k, s in enumerate(self.stops, start=1):
            out[k] = math.ceil(self.lam * to_seconds(s.alt_time(direction)))
        return out

    def demand(self, direction: Direction) -> np.ndarray:
        return np.array([0.0] + [s.demand(direction) for s in self.stops])

    def total_demand(self, direction: Direction) -> float:
        return math.fsum(s.demand(direction) for s in self.stops)

    def coords(self, node_id: str) -> tuple[float, float] | None:
        if node_id == self.hub_id:
            return self.hub_coords
        return self.stop(node_id).coords


def floyd_warshall(w: np.ndarray) -> np.ndarray:
    """All-pairs shortest path closure of a dense travel matrix."""
    d = np.array(w, dtype=np.int64, copy=True)
    for k in range(d.shape[0]):
        np.minimum(d, d[:, k:k + 1] + d[k:k + 1, :], out=d)
    return d


def triangle_violations(w: np.ndarray, ids: Sequence[str]) -> list[TriangleInequalityViolation]:
    out = []
    n = w.shape[0]
    for j in range(n):
        # bad[i, k] is True when going through j beats the direct edge
        bad = (w[:, j:j + 1] + w[j:j + 1, :]) < w
        for i, k in zip(*np.nonzero(bad)):
            if i != j and k != j and i != k:
                out.append(TriangleInequalityViolation(ids[i], ids[j], ids[k]))
    out.sort(key=lambda v: (v.i, v.j, v.k))
    return out


def validate_network(
    hub_id: str,
    stops: Iterable[Stop],
    travel_minutes: Mapping[tuple[str, str], float],
    lam: float | str | Fraction = Fraction(13, 10),
    hub_coords: tuple[float, float] | None = None,
    repair_triangle: bool = False,
) -> StopNetwork:
    """Build a :class:`StopNetwork`, collecting every violation before raising.

    ``travel_minutes`` maps ``(from_id, to_id)`` to minutes and must cover all
    ordered pairs of distinct nodes, hub included.  With ``repair_triangle``
    the matrix is replaced by its shortest-path closure instead of failing.
    """
    stops = list(stops)
    problems: list[object] = []

    seen: set[str] = set()
    for s in stops:
        if s.id in seen:
            problems.append(DuplicateStop(s.id))
        seen.add(s.id)
    if hub_id in seen:
        problems.append(InvalidValue("hub_id", f"hub {hub_id!r} also listed as a stop"))

    for s in stops:
        for name in _NUMERIC_STOP_FIELDS:
            v = getattr(s, name)
            if not math.isfinite(v) or v < 0:
                problems.append(NegativeValue(name, s.id))
        for name in ("alt_time_from_hub", "alt_time_to_hub"):
            if getattr(s, name) == 0:
                problems.append(NonPositiveValue(name, s.id))

    try:
        lam_q = as_fraction(lam)
        if lam_q < 1:
            problems.append(InvalidValue("lambda", f"must be >= 1, got {lam}"))
    except (ValueError, ZeroDivisionError):
        problems.append(InvalidValue("lambda", f"not a number: {lam!r}"))
        lam_q = Fraction(1)

    node_ids = [hub_id] + [s.id for s in stops]
    index = {sid: k for k, sid in enumerate(node_ids)}
    if not any(hub_id in key for key in travel_minutes):
        problems.append(MissingHub(hub_id))

    n1 = len(node_ids)
    w = np.zeros((n1, n1), dtype=np.int64)
    have = np.eye(n1, dtype=bool)
    for (a, b), minutes in travel_minutes.items():
        if a not in index or b not in index:
            continue
        if not math.isfinite(minutes) or minutes < 0:
            problems.append(NegativeValue("travel_time", f"{a}->{b}"))
            continue
        if a != b:
            w[index[a], index[b]] = to_seconds(minutes)
            have[index[a], index[b]] = True
    if not any(isinstance(p, (MissingHub, DuplicateStop)) for p in problems):
        for a, b in zip(*np.nonzero(~have)):
            problems.append(MissingTravelTime(node_ids[a], node_ids[b]))

    if not problems:
        if repair_triangle:
            w = floyd_warshall(w)
        problems.extend(triangle_violations(w, node_ids))
        off = ~np.eye(n1, dtype=bool)
        for a, b in zip(*np.nonzero((w == 0) & off)):
            problems.append(NonPositiveValue("travel_time", f"{node_ids[a]}->{node_ids[b]}"))

    if problems:
        raise NetworkValidationError(problems)
    return StopNetwork(hub_id, tuple(stops), _frozen(w), lam_q, hub_coords)


def network_from_matrix(
    hub_id: str,
    stops: Sequence[Stop],
    minutes: np.ndarray | Sequence[Sequence[float]],
    lam: float | str | Fraction = Fraction(13, 10),
    **kwargs,
) -> StopNetwork:
    """Convenience wrapper taking a dense matrix ordered hub-first."""
    ids = [hub_id] + [s.id for s in stops]
    m = np.asarray(minutes, dtype=float)
    pairs = {(ids[a], ids[b]): m[a, b] for a in range(len(ids)) for b in range(len(ids)) if a != b}
    return validate_network(hub_id, stops, pairs, lam, **kwargs)


@dataclass(frozen=True, eq=False)
class TransitOverlay:
    """Existing transit stations that HHMoD passengers may transfer to.

    ``station_seconds[a, b]`` is the in-transit time between stations (``inf``
    when unconnected); ``access_seconds`` maps ``(node_id, station_id)`` to a
    walk time.  Missing access pairs are unreachable.
    """

    stations: tuple[str, ...]
    station_seconds: np.ndarray
    access_seconds: Mapping[tuple[str, str], int]
    sigma_seconds: int

    def __post_init__(self):
        t = self.station_seconds
        if t.shape != (len(self.stations), len(self.stations)):
            raise ValueError("station_seconds must be square over stations")
        if np.any(t < 0) or np.any(np.diag(t) != 0):
            raise ValueError("station times must be >= 0 with a zero diagonal")
        if self.sigma_seconds < 0 or any(v < 0 for v in self.access_seconds.values()):
            raise ValueError("access times and sigma must be >= 0")

    def transfer_seconds(self, network: StopNetwork, direction: Direction) -> np.ndarray:
        """Cheapest single-transfer time from node ``i`` (row) to stop ``k`` (column).

        For from-hub trips a passenger leaves the vehicle at ``i``, walks to a
        station, rides, and walks to ``k``.  For to-hub trips the same path is
        travelled backwards, so station times are transposed.  ``sigma`` is
        included; unreachable pairs are ``inf``.
        """
        nodes = network.node_ids
        pos = {s: a for a, s in enumerate(self.stations)}
        acc = np.full((len(nodes), len(self.stations)), np.inf)
        for (nid, sid), sec in self.access_seconds.items():
            if nid in network._index and sid in pos:
                acc[network.node(nid), pos[sid]] = sec
        t = self.station_seconds if direction is Direction.FROM_HUB else self.station_seconds.T
        # min-plus products: first (node -> station) then (station -> stop)
        ride = np.min(acc[:, :, None] + t[None, :, :], axis=1)
        out = np.min(ride[:, :, None] + acc.T[None, :, :], axis=1) + self.sigma_seconds
        np.fill_diagonal(out, np.inf)
        return out

    @classmethod
    def empty(cls, sigma_seconds: int = 0) -> "TransitOverlay":
        return cls((), np.zeros((0, 0)), {}, sigma_seconds)


# -- routes ------------------------------------------------------------------

@dataclass(frozen=True)
class Route:
    """A one-directional route anchored at the hub.

    ``stops`` are listed hub-outward: ``stops[0]`` is next to the hub.  For
    to-hub routes the vehicle drives them in reverse (see
    :meth:`travel_order`).  ``cum_seconds[k]`` is the in-vehicle time between
    the hub and ``stops[k]``.
    """

    route_id: str
    direction: Direction
    stops: tuple[str, ...]
    cum_seconds: tuple[int, ...]
    transfer_covered: frozenset[str] = frozenset()
    coverage: float = 0.0

    def __post_init__(self):
        if len(self.stops) != len(self.cum_seconds):
            raise ValueError("stops and cum_seconds differ in length")
        if len(set(self.stops)) != len(self.stops):
            raise ValueError(f"route {self.route_id} repeats a stop")
        if any(b <= a for a, b in zip(self.cum_seconds, self.cum_seconds[1:])):
            raise ValueError(f"route {self.route_id}: cumulative time not increasing")
        if self.cum_seconds and self.cum_seconds[0] <= 0:
            raise ValueError(f"route {self.route_id}: first leg must take time")
        if self.transfer_covered & set(self.stops):
            raise ValueError(f"route {self.route_id}: stop both visited and transfer-covered")

    @property
    def trip_seconds(self) -> int:
        return self.cum_seconds[-1] if self.cum_seconds else 0

    @property
    def trip_time(self) -> float:
        return to_minutes(self.trip_seconds)

    @property
    def cum_time(self) -> tuple[float, ...]:
        return tuple(to_minutes(c) for c in self.cum_seconds)

    @property
    def far_end(self) -> str:
        """Stop farthest along the route from the hub."""
        return self.stops[-1]

    def travel_order(self) -> tuple[str, ...]:
        if self.direction is Direction.FROM_HUB:
            return self.stops
        return tuple(reversed(self.stops))

    def served(self) -> frozenset[str]:
        return frozenset(self.stops) | self.transfer_covered


def make_route(
    network: StopNetwork,
    direction: Direction,
    stops: Sequence[str],
    transfer_covered: Iterable[str] = (),
    route_id: str = "",
    demand: Mapping[str, float] | None = None,
) -> Route:
    """Assemble a route, recomputing times from the travel matrix.

    Coverage uses ``math.fsum`` so it does not depend on summation order.
    """
    w = network.oriented_seconds(direction)
    cum, t, prev = [], 0, 0
    for sid in stops:
        k = network.node(sid)
        t += int(w[prev, k])
        cum.append(t)
        prev = k
    covered = frozenset(transfer_covered)
    if demand is None:
        q = [network.stop(s).demand(direction) for s in (*stops, *sorted(covered))]
    else:
        q = [demand[s] for s in (*stops, *sorted(covered))]
    return Route(route_id, direction, tuple(stops), tuple(cum), covered, math.fsum(q))


@dataclass(frozen=True)
class RoundTrip:
    """A from-hub leg joined to a to-hub leg, or a single leg returning empty.

    ``connect_seconds`` is the deadhead between the legs: far end of ``out``
    to far end of ``back``, or to/from the hub when one leg is missing.
    """

    trip_id: str
    out: Route | None
    back: Route | None
    connect_seconds: int

    def __post_init__(self):
        if self.out is None and self.back is None:
            raise ValueError("round trip needs at least one leg")
        if self.out is not None and self.out.direction is not Direction.FROM_HUB:
            raise ValueError("out leg must be a from-hub route")
        if self.back is not None and self.back.direction is not Direction.TO_HUB:
            raise ValueError("back leg must be a to-hub route")
        if self.total_seconds <= 0:
            raise ValueError("round trip time must be positive")

    @property
    def total_seconds(self) -> int:
        out = self.out.trip_seconds if self.out else 0
        back = self.back.trip_seconds if self.back else 0
        return out + self.connect_seconds + back

    @property
    def total_time(self) -> float:
        return to_minutes(self.total_seconds)

    @property
    def connect_time(self) -> float:
        return to_minutes(self.connect_seconds)

    def served(self, direction: Direction) -> frozenset[str]:
        leg = self.out if direction is Direction.FROM_HUB else self.back
        return leg.served() if leg is not None else frozenset()


# -- scheduling --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ScheduleProblem:
    """Inputs of the fleet/headway problem.  Demand arrays are per stop (no hub)."""

    roundtrips: tuple[RoundTrip, ...]
    stop_ids: tuple[str, ...]
    mean_from: np.ndarray
    mean_to: np.ndarray
    dev_from: np.ndarray
    dev_to: np.ndarray
    dist_from: np.ndarray
    dist_to: np.ndarray
    fleet: int = 200
    capacity: int = 20
    h_min: int = 3
    h_max: int = 30
    c_o: float = 50.0
    c_w: float = 0.5
    c_l: float = 5.0
    gamma: int = 0

    def __post_init__(self):
        n = len(self.stop_ids)
        for name in ("mean_from", "mean_to", "dev_from", "dev_to", "dist_from", "dist_to"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.shape != (n,):
                raise ValueError(f"{name} must have one entry per stop")
            if np.any(a < 0):
                raise ValueError(f"{name} must be >= 0")
            object.__setattr__(self, name, _frozen(a.copy()))
        if not (0 < self.h_min <= self.h_max):
            raise ValueError("need 0 < h_min <= h_max")
        if self.fleet < 1 or self.capacity < 1:
            raise ValueError("fleet size and capacity must be >= 1")
        if not (0 <= self.gamma <= 2 * n):
            raise ValueError(f"gamma must lie in [0, {2 * n}]")
        if not self.roundtrips:
            raise ValueError("at least one round trip is required")
        pos = {s: k for k, s in enumerate(self.stop_ids)}
        dF = np.zeros((len(self.roundtrips), n), dtype=bool)
        dT = np.zeros_like(dF)
        for r, rt in enumerate(self.roundtrips):
            for s in rt.served(Direction.FROM_HUB):
                dF[r, pos[s]] = True
            for s in rt.served(Direction.TO_HUB):
                dT[r, pos[s]] = True
        object.__setattr__(self, "delta_from", _frozen(dF))
        object.__setattr__(self, "delta_to", _frozen(dT))
        object.__setattr__(
            self, "trip_minutes", _frozen(np.array([rt.total_time for rt in self.roundtrips]))
        )

    @property
    def n_routes(self) -> int:
        return len(self.roundtrips)

    @property
    def n_stops(self) -> int:
        return len(self.stop_ids)

    @property
    def n_bits(self) -> int:
        """Number of binary digits used to encode a headway (``H + 1``)."""
        return math.ceil(math.log2(self.h_max + 1))

    def realized(self, p_from, p_to) -> tuple[np.ndarray, np.ndarray]:
        return (self.mean_from + np.asarray(p_from) * self.dev_from,
                self.mean_to + np.asarray(p_to) * self.dev_to)

    @classmethod
    def from_network(cls, network: StopNetwork, roundtrips: Sequence[RoundTrip], **params):
        s = network.stops
        return cls(
            roundtrips=tuple(roundtrips),
            stop_ids=network.stop_ids,
            mean_from=np.array([x.demand_from_hub for x in s]),
            mean_to=np.array([x.demand_to_hub for x in s]),
            dev_from=np.array([x.max_dev_from_hub for x in s]),
            dev_to=np.array([x.max_dev_to_hub for x in s]),
            dist_from=np.array([x.alt_dist_from_hub for x in s]),
            dist_to=np.array([x.alt_dist_to_hub for x in s]),
            **params,
        )


@dataclass(frozen=True)
class DemandScenario:
    """Deviation multipliers per stop and direction (binary in the budget set)."""

    p_from: tuple[float, ...]
    p_to: tuple[float, ...]

    @property
    def budget(self) -> float:
        return sum(self.p_from) + sum(self.p_to)

    def is_binary(self) -> bool:
        return all(v in (0, 1) for v in (*self.p_from, *self.p_to))

    @classmethod
    def constant(cls, n: int, value: float) -> "DemandScenario":
        return cls((value,) * n, (value,) * n)


@dataclass(frozen=True)
class Schedule:
    """Vehicles, headway and operation flag per round trip, plus cost split."""

    vehicles: tuple[int, ...]
    headways: tuple[int, ...]
    active: tuple[int, ...]
    operation: float = 0.0
    waiting: float = 0.0
    loss: float = 0.0

    @property
    def total(self) -> float:
        return self.operation + self.waiting + self.loss

    @property
    def fleet_used(self) -> int:
        return sum(self.vehicles)


def schedule_violations(schedule: Schedule, problem: ScheduleProblem) -> list[str]:
    """Return a description of each broken fleet/headway rule (empty if valid)."""
    out = []
    if sum(schedule.vehicles) > problem.fleet:
        out.append("fleet size exceeded")
    for s, (y, h, k) in enumerate(zip(schedule.vehicles, schedule.headways, schedule.active)):
        if (k == 1) != (y >= 1):
            out.append(f"route {s}: operation flag inconsistent with vehicles")
        if k == 1:
            if not problem.h_min <= h <= problem.h_max:
                out.append(f"route {s}: headway {h} out of range")
            if y * h < problem.trip_minutes[s] - 1e-9:
                out.append(f"route {s}: {y} vehicles at headway {h} cannot cover trip")
    return out
