"""Penalized evaluation of solutions and constant-time move deltas.

The search minimizes F(S) = D(S) + sum_i lambda_i * V_i(S) where the four
normalized violation terms cover time windows (V1), vehicle capacity (V2),
route duration (V3) and depot constraints (V4, route closure plus per-depot
fleet overflow). Subsequence attributes are closed under a concatenation
operator, which lets move deltas be computed from a handful of precomputed
pieces instead of re-simulating whole routes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .model import INF, Instance, Route, Solution, Variant

LAMBDA_MIN = 0.01
LAMBDA_MAX = 10000.0


class SeqAttr:
    """Attributes of a node subsequence, closed under concatenation.

    For a single node: dist=0, load=q, T=s, E=e, L=l, TW=0. T accumulates
    travel + service + waiting; TW accumulates the clamped lateness (time warp).
    E/L bound the feasible start times of the subsequence.
    """

    __slots__ = ("dist", "load", "T", "E", "L", "TW", "first", "last")

    def __init__(self, dist, load, T, E, L, TW, first, last):
        self.dist = dist
        self.load = load
        self.T = T
        self.E = E
        self.L = L
        self.TW = TW
        self.first = first
        self.last = last

    @staticmethod
    def empty() -> "SeqAttr":
        """Identity element of the concatenation."""
        return SeqAttr(0.0, 0.0, 0.0, 0.0, INF, 0.0, -1, -1)

    def is_empty(self) -> bool:
        return self.first < 0

    def as_tuple(self):
        return (self.dist, self.load, self.T, self.E, self.L, self.TW)

    def __repr__(self) -> str:
        return (
            f"SeqAttr(dist={self.dist:.3f}, load={self.load:.3f}, T={self.T:.3f}, "
            f"E={self.E:.3f}, L={self.L}, TW={self.TW:.3f}, {self.first}->{self.last})"
        )


def single_attr(node: int, inst: Instance) -> SeqAttr:
    """Base case of the algebra: attributes of the one-node sequence."""
    return SeqAttr(
        0.0,
        float(inst.demand[node]),
        float(inst.service[node]),
        float(inst.tw_early[node]),
        float(inst.tw_late[node]),
        0.0,
        node,
        node,
    )


def concat(a: SeqAttr, b: SeqAttr, inst: Instance) -> SeqAttr:
    """Merge two adjacent subsequences (a then b) in O(1)."""
    if b.is_empty():
        return a
    if a.is_empty():
        return b
    t_link = float(inst.time[a.last, b.first])
    c_link = float(inst.dist[a.last, b.first])
    delta = a.T - a.TW + t_link
    wait = max(b.E - delta - a.L, 0.0)
    warp = max(a.E + delta - b.L, 0.0)
    return SeqAttr(
        a.dist + c_link + b.dist,
        a.load + b.load,
        a.T + b.T + t_link + wait,
        max(b.E - delta, a.E) - wait,
        min(b.L - delta, a.L) + warp,
        a.TW + b.TW + warp,
        a.first,
        b.last,
    )


def fold_attrs(seq: Sequence[int], inst: Instance) -> SeqAttr:
    """Left-fold of single-node attributes along a node sequence."""
    acc = single_attr(seq[0], inst)
    for node in seq[1:]:
        acc = concat(acc, single_attr(node, inst), inst)
    return acc


def route_attr(route: Route, inst: Instance) -> SeqAttr:
    return fold_attrs(route.sequence(inst.open_routes), inst)


@dataclass(frozen=True)
class ScalingConstants:
    """Penalty scaling: gamma converts time units to distance units, theta
    normalizes the remaining violation terms."""

    gamma: float
    theta: float

    @staticmethod
    def from_instance(inst: Instance) -> "ScalingConstants":
        n = inst.n_nodes
        iu, ju = [], []
        for i in range(n):
            for j in range(i + 1, n):
                iu.append(i)
                ju.append(j)
        c = inst.dist[iu, ju]
        t = inst.time[iu, ju]
        if float(c.max(initial=0.0)) <= 0.0:
            raise ValueError("degenerate instance: all arc distances are zero")
        t_sum = float(t.sum())
        gamma = float(c.sum()) / t_sum if t_sum > 0 else 1.0
        theta = 2.0 * float(c.max()) - float(c.min())
        return ScalingConstants(gamma, theta)


class PenaltyState:
    """The four adaptive penalty coefficients and their adjustment factor."""

    __slots__ = ("lam", "kappa", "lam_min", "lam_max")

    def __init__(self, kappa: float = 0.5, lam: Optional[Sequence[float]] = None,
                 lam_min: float = LAMBDA_MIN, lam_max: float = LAMBDA_MAX):
        if not (0.0 < kappa < 1.0):
            raise ValueError("kappa must lie in (0, 1)")
        self.kappa = kappa
        self.lam = list(lam) if lam is not None else [1.0, 1.0, 1.0, 1.0]
        self.lam_min = lam_min
        self.lam_max = lam_max

    def clone(self) -> "PenaltyState":
        return PenaltyState(self.kappa, self.lam, self.lam_min, self.lam_max)


def adapt_penalties(penalties: PenaltyState, violated: Sequence[bool]) -> PenaltyState:
    """Per coefficient: divide by kappa if its constraint is violated, else multiply."""
    for i in range(4):
        if violated[i]:
            penalties.lam[i] /= penalties.kappa
        else:
            penalties.lam[i] *= penalties.kappa
        penalties.lam[i] = min(max(penalties.lam[i], penalties.lam_min), penalties.lam_max)
    return penalties


@dataclass
class EvalBreakdown:
    """Objective plus the four (un-weighted) violation terms and penalized total."""

    D: float = 0.0
    V1: float = 0.0
    V2: float = 0.0
    V3: float = 0.0
    V4: float = 0.0
    F: float = 0.0

    def violations(self) -> list[float]:
        return [self.V1, self.V2, self.V3, self.V4]


def route_contributions(attr: SeqAttr, depart: int, arrive: int,
                        consts: ScalingConstants, inst: Instance):
    """Per-route pieces of (D, V1, V2, V3, closure count). Fleet is solution-level."""
    d = attr.dist
    v1 = consts.gamma * attr.TW if inst.has_windows else 0.0
    v2 = consts.theta * max(attr.load - inst.capacity, 0.0) / inst.capacity
    v3 = 0.0
    if inst.max_duration != INF:
        v3 = consts.theta * max(attr.T - inst.max_duration, 0.0) / inst.max_duration
    closure = 0 if inst.open_routes else int(depart != arrive)
    return d, v1, v2, v3, closure


def depot_counts(sol: Solution, inst: Instance) -> list[int]:
    counts = [0] * inst.n_depots
    for r in sol.routes:
        if r.customers:
            counts[r.depart] += 1
    return counts


def fleet_excess(counts: Sequence[int], inst: Instance) -> int:
    if inst.fleet_per_depot == INF:
        return 0
    return int(sum(max(k - inst.fleet_per_depot, 0) for k in counts))


def evaluate(sol: Solution, penalties: PenaltyState, consts: ScalingConstants,
             inst: Instance) -> EvalBreakdown:
    """Full penalized evaluation of a solution from scratch."""
    out = EvalBreakdown()
    closures = 0
    for r in sol.routes:
        if not r.customers:
            continue
        attr = route_attr(r, inst)
        d, v1, v2, v3, clo = route_contributions(attr, r.depart, r.arrive, consts, inst)
        out.D += d
        out.V1 += v1
        out.V2 += v2
        out.V3 += v3
        closures += clo
    out.V4 = consts.theta * (closures + fleet_excess(depot_counts(sol, inst), inst))
    lam = penalties.lam
    out.F = out.D + lam[0] * out.V1 + lam[1] * out.V2 + lam[2] * out.V3 + lam[3] * out.V4
    return out


def move_delta(sol: Solution, move, penalties: PenaltyState, consts: ScalingConstants,
               inst: Instance) -> EvalBreakdown:
    """Evaluate a move by rebuilding only the affected routes' attribute chains.

    Reference implementation for the batched evaluator; exact over the same
    arithmetic as evaluate(after) - evaluate(before).
    """
    from .moves import move_plan  # moves has no import back into this module

    plans = move_plan(sol, move, inst)
    delta = EvalBreakdown()
    closure_delta = 0
    count_changes: dict[int, int] = {}

    for plan in plans:
        if plan.route_index is not None:
            old = sol.routes[plan.route_index]
            attr = old.attr if old.attr is not None else route_attr(old, inst)
            d, v1, v2, v3, clo = route_contributions(attr, old.depart, old.arrive, consts, inst)
            delta.D -= d
            delta.V1 -= v1
            delta.V2 -= v2
            delta.V3 -= v3
            closure_delta -= clo
            count_changes[old.depart] = count_changes.get(old.depart, 0) - 1
        if plan.customers:
            new_route = Route(plan.depart, plan.arrive, plan.customers)
            attr = route_attr(new_route, inst)
            d, v1, v2, v3, clo = route_contributions(attr, plan.depart, plan.arrive, consts, inst)
            delta.D += d
            delta.V1 += v1
            delta.V2 += v2
            delta.V3 += v3
            closure_delta += clo
            count_changes[plan.depart] = count_changes.get(plan.depart, 0) + 1

    if inst.fleet_per_depot != INF and count_changes:
        counts = depot_counts(sol, inst)
        nv = inst.fleet_per_depot
        fleet_delta = 0
        for dep, chg in count_changes.items():
            fleet_delta += max(counts[dep] + chg - nv, 0) - max(counts[dep] - nv, 0)
    else:
        fleet_delta = 0
    delta.V4 = consts.theta * (closure_delta + fleet_delta)

    lam = penalties.lam
    delta.F = delta.D + lam[0] * delta.V1 + lam[1] * delta.V2 + lam[2] * delta.V3 + lam[3] * delta.V4
    return delta
