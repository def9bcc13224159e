"""Problem data model, solution representation and ground-truth feasibility checks.

Everything here is deliberately simple and simulation-based: `check_feasible` and
`simulate_route` walk routes forward in time and are used as the oracle against
which the incremental evaluation machinery is tested.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

import numpy as np

INF = math.inf


class Variant(str, Enum):
    MDVRP = "mdvrp"
    MDVRPTW = "mdvrptw"
    MDOVRP = "mdovrp"


@dataclass(frozen=True)
class Node:
    """One node of the problem graph (depot or customer)."""

    id: int
    kind: str  # "depot" | "customer"
    x: float
    y: float
    demand: float = 0.0
    service: float = 0.0
    tw_early: float = 0.0
    tw_late: float = INF


class Instance:
    """Immutable problem data: nodes, matrices, fleet and variant flags.

    Node ids are dense: depots first (0 .. n_depots-1), then customers.
    """

    def __init__(
        self,
        variant: Variant,
        nodes: list[Node],
        n_depots: int,
        dist: np.ndarray,
        time: Optional[np.ndarray] = None,
        fleet_per_depot: float = INF,
        capacity: float = INF,
        max_duration: float = INF,
        labels: Optional[list[int]] = None,
        name: str = "",
    ):
        self.variant = Variant(variant)
        self.nodes = nodes
        self.n_depots = n_depots
        self.n_customers = len(nodes) - n_depots
        if self.n_depots < 1 or self.n_customers < 1:
            raise ValueError("instance needs at least one depot and one customer")
        self.dist = np.asarray(dist, dtype=np.float64)
        self.time = self.dist if time is None else np.asarray(time, dtype=np.float64)
        for m, what in ((self.dist, "distance"), (self.time, "time")):
            if m.shape != (len(nodes), len(nodes)):
                raise ValueError(f"{what} matrix shape {m.shape} does not match node count")
            if np.abs(np.diag(m)).max() > 1e-12 or not np.allclose(m, m.T, atol=1e-9):
                raise ValueError(f"{what} matrix must be symmetric with zero diagonal")
        self.fleet_per_depot = fleet_per_depot
        self.capacity = capacity
        self.max_duration = max_duration
        self.open_routes = self.variant is Variant.MDOVRP
        self.labels = labels if labels is not None else list(range(len(nodes)))
        self.name = name

        self.demand = np.array([n.demand for n in nodes], dtype=np.float64)
        self.service = np.array([n.service for n in nodes], dtype=np.float64)
        self.tw_early = np.array([n.tw_early for n in nodes], dtype=np.float64)
        self.tw_late = np.array([n.tw_late for n in nodes], dtype=np.float64)
        self.xy = np.array([[n.x, n.y] for n in nodes], dtype=np.float64)

        for n in nodes:
            if n.demand < 0:
                raise ValueError(f"node {n.id}: negative demand")
            if n.tw_early > n.tw_late:
                raise ValueError(f"node {n.id}: empty time window")
        for d in range(n_depots):
            if nodes[d].demand != 0 or nodes[d].service != 0:
                raise ValueError(f"depot {d}: demand and service must be zero")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def has_windows(self) -> bool:
        return self.variant is Variant.MDVRPTW

    def depots(self) -> range:
        return range(self.n_depots)

    def customers(self) -> range:
        return range(self.n_depots, self.n_nodes)

    def is_depot(self, node: int) -> bool:
        return 0 <= node < self.n_depots

    @staticmethod
    def from_coords(
        variant: Variant,
        depot_xy: list[tuple[float, float]],
        customers: list[tuple],
        fleet_per_depot: float = INF,
        capacity: float = INF,
        max_duration: float = INF,
        depot_windows: Optional[list[tuple[float, float]]] = None,
        labels: Optional[list[int]] = None,
        name: str = "",
    ) -> "Instance":
        """Build an instance from coordinates; distances are exact Euclidean doubles.

        Customer tuples are (x, y, demand[, service[, e, l]]). Travel times equal
        distances (the benchmark sets provide no separate travel-time data).
        """
        variant = Variant(variant)
        nodes: list[Node] = []
        for d, (x, y) in enumerate(depot_xy):
            e, l = (0.0, INF)
            if depot_windows is not None:
                e, l = depot_windows[d]
            nodes.append(Node(d, "depot", float(x), float(y), 0.0, 0.0, e, l))
        base = len(depot_xy)
        for i, c in enumerate(customers):
            x, y, q = c[0], c[1], c[2]
            s = c[3] if len(c) > 3 else 0.0
            e, l = (c[4], c[5]) if len(c) > 5 else (0.0, INF)
            nodes.append(Node(base + i, "customer", float(x), float(y), float(q), float(s), float(e), float(l)))
        xy = np.array([[n.x, n.y] for n in nodes])
        diff = xy[:, None, :] - xy[None, :, :]
        dist = np.sqrt((diff * diff).sum(axis=2))
        np.fill_diagonal(dist, 0.0)
        return Instance(
            variant,
            nodes,
            len(depot_xy),
            dist,
            fleet_per_depot=fleet_per_depot,
            capacity=capacity,
            max_duration=max_duration,
            labels=labels,
            name=name,
        )


class Route:
    """One vehicle route: depot endpoints plus an ordered customer list."""

    __slots__ = ("depart", "arrive", "customers", "attr")

    def __init__(self, depart: int, arrive: int, customers: Optional[list[int]] = None, attr=None):
        self.depart = depart
        self.arrive = arrive
        self.customers = customers if customers is not None else []
        self.attr = attr  # cached sequence attributes, owned by the evaluation layer

    def sequence(self, open_routes: bool) -> list[int]:
        if open_routes:
            return [self.depart] + self.customers
        return [self.depart] + self.customers + [self.arrive]

    def clone(self) -> "Route":
        return Route(self.depart, self.arrive, list(self.customers), self.attr)

    def __repr__(self) -> str:
        return f"Route({self.depart}->{self.arrive}, {self.customers})"


class Solution:
    """A set of routes. May be partial or infeasible while the search runs."""

    __slots__ = ("routes", "meta")

    def __init__(self, routes: Optional[list[Route]] = None, meta: Optional[dict] = None):
        self.routes = routes if routes is not None else []
        self.meta = meta if meta is not None else {}

    def clone(self) -> "Solution":
        return Solution([r.clone() for r in self.routes], dict(self.meta))

    def customer_list(self) -> list[int]:
        out: list[int] = []
        for r in self.routes:
            out.extend(r.customers)
        return out

    def drop_empty_routes(self) -> None:
        self.routes = [r for r in self.routes if r.customers]

    def __repr__(self) -> str:
        return f"Solution({len(self.routes)} routes)"


def route_distance(route: Route, inst: Instance) -> float:
    """Sum of consecutive arc distances along the route (no return arc when open)."""
    seq = route.sequence(inst.open_routes)
    d = inst.dist
    return float(sum(d[a, b] for a, b in zip(seq, seq[1:])))


def objective(sol: Solution, inst: Instance) -> float:
    """Total travelled distance over all routes."""
    return float(sum(route_distance(r, inst) for r in sol.routes))


def route_edges(route: Route, open_routes: bool) -> set[tuple[int, int]]:
    """Undirected arcs traversed by a route (return arc omitted when open)."""
    seq = route.sequence(open_routes)
    return {(a, b) if a <= b else (b, a) for a, b in zip(seq, seq[1:])}


def solution_edges(sol: Solution, open_routes: bool) -> set[tuple[int, int]]:
    out: set[tuple[int, int]] = set()
    for r in sol.routes:
        if r.customers:
            out |= route_edges(r, open_routes)
    return out


@dataclass
class RouteSim:
    """Forward simulation results for one route (the scheduling oracle)."""

    distance: float = 0.0
    load: float = 0.0
    duration: float = 0.0  # travel + service + waiting, warps excluded by clamping
    time_warp: float = 0.0
    late_count: int = 0


def simulate_from(route: Route, inst: Instance, t0: float) -> RouteSim:
    """Simulate a route whose first node is reached at time t0.

    Early arrivals wait for the window to open; late arrivals are clamped to
    the latest start and the overshoot accumulates as time warp. The duration
    counts from the actual service start at the first node, so departing
    before the first window opens costs nothing.
    """
    seq = route.sequence(inst.open_routes)
    c, t = inst.dist, inst.time
    e, l, s, q = inst.tw_early, inst.tw_late, inst.service, inst.demand
    sim = RouteSim()
    first = seq[0]
    start = max(t0, e[first])
    if start > l[first]:
        sim.time_warp += start - l[first]
        sim.late_count += 1
        start = l[first]
    now = start + s[first]
    for a, b in zip(seq, seq[1:]):
        sim.distance += c[a, b]
        arrive = now + t[a, b]
        if arrive < e[b]:
            arrive = e[b]  # wait for the window to open
        elif arrive > l[b]:
            sim.time_warp += arrive - l[b]
            sim.late_count += 1
            arrive = l[b]  # clamp: the overshoot is carried as time warp
        now = arrive + s[b]
        sim.load += q[b]
    sim.duration = float(now - start + sim.time_warp)
    sim.distance = float(sim.distance)
    sim.load = float(sim.load)
    sim.time_warp = float(sim.time_warp)
    return sim


def simulate_route(route: Route, inst: Instance) -> RouteSim:
    """Earliest-departure forward simulation of a route."""
    seq = route.sequence(inst.open_routes)
    return simulate_from(route, inst, float(inst.tw_early[seq[0]]))


def minimal_duration(route: Route, inst: Instance) -> float:
    """Minimal route duration over warp-minimal departure times.

    Waiting can be traded away by departing later; the minimum sits at one of
    the finitely many departure times that align some arrival with a window
    boundary, which are scanned directly.
    """
    if not inst.has_windows:
        return simulate_route(route, inst).duration
    seq = route.sequence(inst.open_routes)
    e, l, s, t = inst.tw_early, inst.tw_late, inst.service, inst.time
    first = seq[0]
    raw = 0.0  # travel plus service from the first service start, no waiting
    cands = {float(e[first])}
    if math.isfinite(l[first]):
        cands.add(float(l[first]))
    for i, (a, b) in enumerate(zip(seq, seq[1:])):
        raw += s[a] + t[a, b]
        for bound in (e[b], l[b]):
            if math.isfinite(bound):
                cands.add(float(bound - raw))
    base = simulate_route(route, inst)
    best = base.duration
    for t0 in cands:
        if t0 < e[first]:
            continue
        sim = simulate_from(route, inst, t0)
        if sim.time_warp <= base.time_warp + 1e-9:
            best = min(best, sim.duration)
    return best


@dataclass
class FeasibilityReport:
    """Boolean flags and magnitudes for every feasibility aspect of a solution."""

    structural_error: Optional[str] = None
    missing: list[int] = field(default_factory=list)
    duplicated: list[int] = field(default_factory=list)
    capacity_excess: float = 0.0
    duration_excess: float = 0.0
    time_warp: float = 0.0
    late_count: int = 0
    closure_violations: int = 0
    fleet_excess: int = 0

    @property
    def coverage_ok(self) -> bool:
        return not self.missing and not self.duplicated

    @property
    def all_ok(self) -> bool:
        tol = 1e-9
        return (
            self.structural_error is None
            and self.coverage_ok
            and self.capacity_excess <= tol
            and self.duration_excess <= tol
            and self.time_warp <= tol
            and self.closure_violations == 0
            and self.fleet_excess == 0
        )


def check_feasible(sol: Solution, inst: Instance) -> FeasibilityReport:
    """Oracle feasibility check by direct forward simulation of every route."""
    rep = FeasibilityReport()
    n = inst.n_nodes
    for r in sol.routes:
        if not (0 <= r.depart < n) or not (0 <= r.arrive < n):
            rep.structural_error = f"unknown depot id on route {r!r}"
            return rep
        if not inst.is_depot(r.depart) or not inst.is_depot(r.arrive):
            rep.structural_error = f"route endpoint is not a depot: {r!r}"
            return rep
        for cst in r.customers:
            if not (0 <= cst < n):
                rep.structural_error = f"unknown node id {cst}"
                return rep
            if inst.is_depot(cst):
                rep.structural_error = f"depot {cst} appears as a customer"
                return rep
        if len(set(r.customers)) != len(r.customers):
            rep.structural_error = f"repeated customer within route {r!r}"
            return rep

    seen: dict[int, int] = {}
    for cst in sol.customer_list():
        seen[cst] = seen.get(cst, 0) + 1
    rep.missing = sorted(c for c in inst.customers() if c not in seen)
    rep.duplicated = sorted(c for c, k in seen.items() if k > 1)

    depot_count = [0] * inst.n_depots
    for r in sol.routes:
        if not r.customers:
            continue
        sim = simulate_route(r, inst)
        rep.capacity_excess += max(sim.load - inst.capacity, 0.0)
        if inst.max_duration != INF:
            rep.duration_excess += max(minimal_duration(r, inst) - inst.max_duration, 0.0)
        rep.time_warp += sim.time_warp
        rep.late_count += sim.late_count
        if not inst.open_routes and r.depart != r.arrive:
            rep.closure_violations += 1
        depot_count[r.depart] += 1
    if inst.fleet_per_depot != INF:
        rep.fleet_excess = int(sum(max(k - inst.fleet_per_depot, 0) for k in depot_count))
    return rep
