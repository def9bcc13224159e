"""Best-improvement local search over six operators with multi-move updates.

Each pass shuffles the operator order, evaluates every candidate of one
operator in a single batch, applies the best move (the leader) together with
any route-disjoint, distance-improving and penalty-neutral followers, then
adapts the penalty coefficients from the post-move violation state. The search
stops when a full pass accepts nothing or after `depth` accepted applications.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

from .batch import SolutionCache, evaluate_candidates, leader_and_followers
from .evaluation import (PenaltyState, ScalingConstants, adapt_penalties, route_attr)
from .model import Instance, Route, Solution
from .moves import ALL_OPS, CandidateSet, Move, Op, SolutionIndex, enumerate_candidates, move_plan
from .neighborhood import NeighborLists

VIOLATION_TOL = 1e-9


@dataclass
class SearchConfig:
    depth: int = 500  # accepted move-set applications per call
    multi_move: bool = False

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be >= 1")


def evaluate_batch(sol: Solution, cands: CandidateSet, penalties: PenaltyState,
                   consts: ScalingConstants, inst: Instance,
                   cache: Optional[SolutionCache] = None,
                   multi_move: bool = True):
    """Score a candidate set; returns (leader, followers)."""
    if cache is None:
        cache = SolutionCache(sol, inst, consts)
    deltas = evaluate_candidates(cache, cands, penalties)
    return leader_and_followers(cache, cands, deltas, multi_move)


def select_moves(leader: Move, followers: list[Move]) -> list[Move]:
    """Greedy route-disjoint selection: leader first, then followers by ascending dF."""
    chosen = [leader]
    used = leader.routes_touched()
    for mv in followers:
        touched = mv.routes_touched()
        if used & touched:
            continue
        chosen.append(mv)
        used |= touched
    return chosen


def apply_moves(sol: Solution, moves: list[Move], inst: Instance) -> None:
    """Apply a route-disjoint move set in place; refreshes caches, drops empties."""
    used: set[int] = set()
    for mv in moves:
        touched = mv.routes_touched()
        if used & touched:
            raise ValueError("conflicting moves: route sets intersect")
        used |= touched
    all_plans = [move_plan(sol, mv, inst) for mv in moves]
    new_routes: list[Route] = []
    for plans in all_plans:
        for plan in plans:
            if plan.route_index is None:
                r = Route(plan.depart, plan.arrive, plan.customers)
                if r.customers:
                    r.attr = route_attr(r, inst)
                new_routes.append(r)
            else:
                r = sol.routes[plan.route_index]
                r.depart = plan.depart
                r.arrive = plan.arrive
                r.customers = plan.customers
                r.attr = route_attr(r, inst) if r.customers else None
    sol.routes.extend(nr for nr in new_routes if nr.customers)
    sol.drop_empty_routes()


def refresh_attrs(sol: Solution, inst: Instance) -> None:
    for r in sol.routes:
        r.attr = route_attr(r, inst)


def enabled_operators(inst: Instance) -> list[Op]:
    ops = list(ALL_OPS)
    if inst.has_windows:
        ops.remove(Op.TWO_OPT)
    return ops


def local_search(sol: Solution, penalties: PenaltyState, cfg: SearchConfig,
                 nbr: NeighborLists, consts: ScalingConstants, inst: Instance,
                 rng, deadline: Optional[float] = None,
                 on_feasible=None) -> Solution:
    """Iterated best-improvement search (in place); returns the improved solution.

    on_feasible(distance, solution), when given, is invoked for every feasible
    state the search passes through, so callers can keep the best feasible
    solution even when the trajectory ends in infeasible space.
    """
    ops = enabled_operators(inst)
    accepted = 0
    cache: Optional[SolutionCache] = None
    sidx: Optional[SolutionIndex] = None
    while True:
        order = list(ops)
        rng.shuffle(order)
        any_accepted = False
        for op in order:
            if deadline is not None and time.monotonic() > deadline:
                return sol
            if cache is None:
                cache = SolutionCache(sol, inst, consts)
                sidx = SolutionIndex(sol, inst)
            cands = enumerate_candidates(sol, op, nbr, inst, sidx)
            deltas = evaluate_candidates(cache, cands, penalties)
            leader, followers = leader_and_followers(cache, cands, deltas, cfg.multi_move)
            if leader is None:
                continue
            moves = select_moves(leader, followers) if cfg.multi_move else [leader]
            apply_moves(sol, moves, inst)
            cache = SolutionCache(sol, inst, consts)
            sidx = SolutionIndex(sol, inst)
            totals = cache.totals()
            violated = [v > VIOLATION_TOL for v in totals[1:]]
            adapt_penalties(penalties, violated)
            if on_feasible is not None and not any(violated):
                on_feasible(totals[0], sol)
            accepted += 1
            any_accepted = True
            if accepted >= cfg.depth:
                return sol
        if not any_accepted:
            return sol
