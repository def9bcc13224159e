"""Population initialization, route-exchange crossover and its learning pieces.

The crossover copies a main parent and swaps whole routes in from other
parents, steering how much new material enters through diversity bounds picked
by a discounted UCB1 bandit. A second bandit picks the insertion operator used
to repair the offspring (best/regret insertion in feasible or relaxed form,
or uniformly random insertion).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional, Sequence

from .evaluation import (PenaltyState, ScalingConstants, SeqAttr, concat,
                         route_attr, single_attr)
from .model import INF, Instance, Route, Solution, route_edges, solution_edges

DIVERSITY_LEVELS = 20
VIOLATION_TOL = 1e-9


class InsertionOperator(IntEnum):
    FBI = 0  # feasible best insertion (new route as fallback)
    IBI = 1  # relaxed best insertion, never opens routes
    FRI = 2  # feasible regret insertion
    IRI = 3  # relaxed regret insertion
    RI = 4   # uniformly random insertion


class DiscountedUCB1:
    """Discounted UCB1 over a fixed action set."""

    def __init__(self, n_actions: int, discount: float = 0.99):
        self.n_actions = n_actions
        self.discount = discount
        self.rewards = [0.0] * n_actions
        self.counts = [0.0] * n_actions

    def select(self) -> int:
        for i in range(self.n_actions):
            if self.counts[i] == 0.0:
                return i  # unplayed actions first, in index order
        total = sum(self.counts)
        best, best_val = 0, -INF
        for i in range(self.n_actions):
            val = self.rewards[i] / self.counts[i] + math.sqrt(2.0 * math.log(total) / self.counts[i])
            if val > best_val:
                best, best_val = i, val
        return best

    def update(self, action: int, reward: float) -> None:
        g = self.discount
        for i in range(self.n_actions):
            self.rewards[i] *= g
            self.counts[i] *= g
        self.rewards[action] += reward
        self.counts[action] += 1.0


def improvement_reward(parent_value: float, offspring_value: float) -> float:
    """Percent improvement of the offspring over the main parent."""
    return 100.0 * (parent_value - offspring_value) / parent_value


# --------------------------------------------------------------------------- #
# insertion machinery (shared by initialization and offspring repair)
# --------------------------------------------------------------------------- #

class _RouteEval:
    """Prefix/suffix attributes of one route for O(1) insertion evaluation."""

    def __init__(self, route: Route, inst: Instance):
        self.route = route
        self.rebuild(inst)

    def rebuild(self, inst: Instance) -> None:
        seq = self.route.sequence(inst.open_routes)
        n = len(seq)
        pref = [single_attr(seq[0], inst)]
        for node in seq[1:]:
            pref.append(concat(pref[-1], single_attr(node, inst), inst))
        suf = [None] * n
        suf[n - 1] = single_attr(seq[n - 1], inst)
        for i in range(n - 2, -1, -1):
            suf[i] = concat(single_attr(seq[i], inst), suf[i + 1], inst)
        self.pref = pref
        self.suf = suf
        self.n = n

    def candidate_attr(self, pos: int, node: int, inst: Instance) -> SeqAttr:
        """Attributes after inserting `node` before customer index `pos`."""
        mid = concat(self.pref[pos], single_attr(node, inst), inst)
        if pos + 1 < self.n:
            return concat(mid, self.suf[pos + 1], inst)
        return mid


def _route_cost_terms(attr: SeqAttr, inst: Instance, consts: ScalingConstants):
    v1 = consts.gamma * attr.TW if inst.has_windows else 0.0
    v2 = consts.theta * max(attr.load - inst.capacity, 0.0) / inst.capacity
    v3 = 0.0
    if inst.max_duration != INF:
        v3 = consts.theta * max(attr.T - inst.max_duration, 0.0) / inst.max_duration
    return attr.dist, v1, v2, v3


def _attr_feasible(attr: SeqAttr, inst: Instance) -> bool:
    if attr.load > inst.capacity + VIOLATION_TOL:
        return False
    if inst.max_duration != INF and attr.T > inst.max_duration + VIOLATION_TOL:
        return False
    if inst.has_windows and attr.TW > VIOLATION_TOL:
        return False
    return True


class InsertState:
    """Mutable view of a solution used while inserting unrouted customers."""

    def __init__(self, sol: Solution, inst: Instance, consts: ScalingConstants,
                 penalties: PenaltyState):
        self.sol = sol
        self.inst = inst
        self.consts = consts
        self.penalties = penalties
        self.evals = [_RouteEval(r, inst) for r in sol.routes]

    def slot_delta(self, ri: int, pos: int, node: int):
        """(dD, dF, feasible) of inserting node before customer index pos."""
        ev = self.evals[ri]
        attr = ev.candidate_attr(pos, node, self.inst)
        old = ev.pref[ev.n - 1]
        d0, v10, v20, v30 = _route_cost_terms(old, self.inst, self.consts)
        d1, v11, v21, v31 = _route_cost_terms(attr, self.inst, self.consts)
        lam = self.penalties.lam
        dd = d1 - d0
        df = dd + lam[0] * (v11 - v10) + lam[1] * (v21 - v20) + lam[2] * (v31 - v30)
        return dd, df, _attr_feasible(attr, self.inst)

    def insert(self, ri: int, pos: int, node: int) -> None:
        route = self.sol.routes[ri]
        route.customers.insert(pos, node)
        self.evals[ri].rebuild(self.inst)
        route.attr = self.evals[ri].pref[self.evals[ri].n - 1]

    def open_route(self, node: int, rng) -> int:
        """New single-customer route at the cheapest depot, preferring free fleet."""
        inst = self.inst
        counts = [0] * inst.n_depots
        for r in self.sol.routes:
            if r.customers:
                counts[r.depart] += 1
        best, best_key = None, None
        for d in range(inst.n_depots):
            cost = inst.dist[d, node] + (0.0 if inst.open_routes else inst.dist[node, d])
            free = inst.fleet_per_depot == INF or counts[d] < inst.fleet_per_depot
            key = (not free, cost, d)
            if best_key is None or key < best_key:
                best, best_key = d, key
        route = Route(best, best, [node])
        route.attr = route_attr(route, inst)
        self.sol.routes.append(route)
        self.evals.append(_RouteEval(route, inst))
        return len(self.sol.routes) - 1

    def all_slots(self):
        for ri, ev in enumerate(self.evals):
            for pos in range(len(self.sol.routes[ri].customers) + 1):
                yield ri, pos


def _best_slot(state: InsertState, node: int, feasible_only: bool):
    """Best and second-best slots for one customer; returns
    (best, best_cost, second_cost) with costs dD (feasible) or dF (relaxed)."""
    best = None
    c1 = c2 = INF
    for ri, pos in state.all_slots():
        dd, df, feas = state.slot_delta(ri, pos, node)
        if feasible_only and not feas:
            continue
        cost = dd if feasible_only else df
        if cost < c1:
            best, c1, c2 = (ri, pos), cost, c1
        elif cost < c2:
            c2 = cost
    return best, c1, c2


def repair_insert(sol: Solution, unrouted: Sequence[int], op: InsertionOperator,
                  inst: Instance, consts: ScalingConstants, penalties: PenaltyState,
                  rng) -> Solution:
    """Insert every unrouted customer using the selected insertion operator."""
    pending = sorted(unrouted)
    if not pending:
        return sol
    state = InsertState(sol, inst, consts, penalties)

    if op == InsertionOperator.RI:
        for node in pending:
            if not sol.routes:
                state.open_route(node, rng)
                continue
            ri = rng.randrange(len(sol.routes))
            pos = rng.randint(0, len(sol.routes[ri].customers))
            state.insert(ri, pos, node)
        return sol

    feasible_only = op in (InsertionOperator.FBI, InsertionOperator.FRI)
    regret = op in (InsertionOperator.FRI, InsertionOperator.IRI)
    if not feasible_only and not sol.routes and pending:
        state.open_route(pending.pop(0), rng)  # degenerate guard for relaxed modes

    while pending:
        chosen_node = None
        chosen_slot = None
        if regret:
            best_key = None
            for node in pending:
                slot, c1, c2 = _best_slot(state, node, feasible_only)
                if slot is None:
                    key = (2, 0.0, -node)  # no slot at all: place first, new route
                elif c2 == INF:
                    key = (1, 0.0, -node)  # single slot: next priority
                else:
                    key = (0, c2 - c1, -node)
                if best_key is None or key > best_key:
                    best_key, chosen_node, chosen_slot = key, node, slot
        else:
            best_cost = INF
            for node in pending:
                slot, c1, _ = _best_slot(state, node, feasible_only)
                if slot is not None and c1 < best_cost:
                    best_cost, chosen_node, chosen_slot = c1, node, slot
            if chosen_node is None:
                chosen_node = pending[0]
                chosen_slot = None
        pending.remove(chosen_node)
        if chosen_slot is None:
            state.open_route(chosen_node, rng)
        else:
            state.insert(chosen_slot[0], chosen_slot[1], chosen_node)
    return sol


# --------------------------------------------------------------------------- #
# initialization
# --------------------------------------------------------------------------- #

def initial_solution(inst: Instance, consts: ScalingConstants,
                     penalties: PenaltyState, rng) -> Solution:
    """Nearest-depot assignment, randomized greedy construction per depot, then
    relaxed insertion of whatever could not be placed feasibly."""
    by_depot: dict[int, list[int]] = {d: [] for d in inst.depots()}
    for cst in inst.customers():
        d = min(inst.depots(), key=lambda dd: (inst.dist[dd, cst], dd))
        by_depot[d].append(cst)

    sol = Solution()
    leftovers: list[int] = []
    for d, members in by_depot.items():
        rng.shuffle(members)
        routes: list[Route] = []
        evals: list[_RouteEval] = []
        for cst in members:
            best = None
            best_cost = INF
            for ri, ev in enumerate(evals):
                for pos in range(len(routes[ri].customers) + 1):
                    attr = ev.candidate_attr(pos, cst, inst)
                    if not _attr_feasible(attr, inst):
                        continue
                    cost = attr.dist - ev.pref[ev.n - 1].dist
                    if cost < best_cost:
                        best, best_cost = (ri, pos), cost
            if best is not None:
                ri, pos = best
                routes[ri].customers.insert(pos, cst)
                evals[ri].rebuild(inst)
            elif inst.fleet_per_depot == INF or len(routes) < inst.fleet_per_depot:
                r = Route(d, d, [cst])
                routes.append(r)
                evals.append(_RouteEval(r, inst))
            else:
                leftovers.append(cst)
        sol.routes.extend(routes)

    if leftovers:
        repair_insert(sol, leftovers, InsertionOperator.IBI, inst, consts, penalties, rng)
    sol.drop_empty_routes()
    for r in sol.routes:
        r.attr = route_attr(r, inst)
    return sol


def initialize_population(inst: Instance, mu: int, consts: ScalingConstants,
                          penalties: PenaltyState, rng) -> list[Solution]:
    if mu < 2:
        raise ValueError("population size must be >= 2")
    return [initial_solution(inst, consts, penalties, rng) for _ in range(mu)]


# --------------------------------------------------------------------------- #
# route-exchange crossover
# --------------------------------------------------------------------------- #

@dataclass
class RoutePairScore:
    new_edges: int        # edges of the donor route absent from the main parent
    missing: int          # customers of the removed route the donor does not cover
    duplicated: int       # donor customers already in remaining main-origin routes
    conflicting: int      # donor customers clashing with previously introduced routes
    score: int
    delta_sigma: int


def score_route_pair(route_out: Route, route_in: Route,
                     main_edges: set, main_customers: set, introduced_customers: set,
                     inst: Instance) -> RoutePairScore:
    """Score one exchange: remove `route_out` from the offspring, add `route_in`."""
    cust_in = set(route_in.customers)
    cust_out = set(route_out.customers)
    e_i = len(route_edges(route_in, inst.open_routes) - main_edges)
    n_r = len(cust_out - cust_in)
    n_m = len(cust_in & (main_customers - cust_out))
    n_c = len(cust_in & introduced_customers)
    score = -(e_i - n_r - n_m - 10 * n_c)
    return RoutePairScore(e_i, n_r, n_m, n_c, score, e_i + n_r + n_m)


def diversity_bounds(level: int, inst: Instance, main_parent: Solution) -> tuple[float, float]:
    base = inst.n_customers + len(main_parent.routes)
    return level / DIVERSITY_LEVELS * base, (level + 1) / DIVERSITY_LEVELS * base


@dataclass
class CrossoverResult:
    offspring: Solution
    diversity_level: int
    insertion_op: InsertionOperator
    sigma: float
    main_index: int = -1


def dcrex(population: Sequence[Solution], inst: Instance, consts: ScalingConstants,
          penalties: PenaltyState, diversity_bandit: DiscountedUCB1,
          insertion_bandit: DiscountedUCB1, rng,
          main_index: Optional[int] = None) -> CrossoverResult:
    """Diversity-controlled route exchange over multiple parents, then repair."""
    if len(population) < 2:
        raise ValueError("crossover needs at least two parents")
    if main_index is None:
        main_index = rng.randrange(len(population))
    main = population[main_index]
    level = diversity_bandit.select()
    sigma_min, sigma_max = diversity_bounds(level, inst, main)

    offspring = main.clone()
    origin_main = [True] * len(offspring.routes)
    main_edges = solution_edges(main, inst.open_routes)
    main_customers = set()  # customers currently covered by main-origin routes
    for r in offspring.routes:
        main_customers.update(r.customers)
    introduced: set[int] = set()

    donors = [p for i, p in enumerate(population) if i != main_index]
    rng.shuffle(donors)
    sigma = 0.0
    done = False
    for donor in donors:
        if done:
            break
        used_donor_routes: set[int] = set()
        while True:
            pairs = []
            for oi, r_out in enumerate(offspring.routes):
                if not origin_main[oi]:
                    continue
                for dj, r_in in enumerate(donor.routes):
                    if dj in used_donor_routes or not r_in.customers:
                        continue
                    sc = score_route_pair(r_out, r_in, main_edges, main_customers,
                                          introduced, inst)
                    pairs.append((sc.score, oi, dj, sc))
            if not pairs:
                break  # nothing left to exchange with this donor
            pairs.sort(key=lambda t: (t[0], t[1], t[2]))
            pick = rng.choice(pairs[:5])
            _, oi, dj, sc = pick
            if sigma + sc.delta_sigma >= sigma_max:
                break  # this donor would overshoot the diversity window
            r_out = offspring.routes[oi]
            main_customers.difference_update(r_out.customers)
            del offspring.routes[oi]
            del origin_main[oi]
            r_new = donor.routes[dj].clone()
            offspring.routes.append(r_new)
            origin_main.append(False)
            introduced.update(r_new.customers)
            used_donor_routes.add(dj)
            sigma += sc.delta_sigma
            if sigma >= sigma_min:
                done = True
                break

    _remove_redundant(offspring, origin_main, inst)
    covered = set(offspring.customer_list())
    unrouted = [c for c in inst.customers() if c not in covered]
    ins_op = InsertionOperator(insertion_bandit.select())
    repair_insert(offspring, unrouted, ins_op, inst, consts, penalties, rng)
    offspring.drop_empty_routes()
    for r in offspring.routes:
        r.attr = route_attr(r, inst)
    return CrossoverResult(offspring, level, ins_op, sigma, main_index)


def _removal_saving(route: Route, pos: int, inst: Instance) -> float:
    seq = route.sequence(inst.open_routes)
    i = pos + 1  # sequence position of the customer
    prev_node = seq[i - 1]
    nxt = seq[i + 1] if i + 1 < len(seq) else None
    if nxt is None:
        return float(inst.dist[prev_node, seq[i]])
    return float(inst.dist[prev_node, seq[i]] + inst.dist[seq[i], nxt]
                 - inst.dist[prev_node, nxt])


def _remove_redundant(offspring: Solution, origin_main: list[bool], inst: Instance) -> None:
    """Keep one copy of each duplicated customer, preferring donor routes; ties
    are settled by removing the copy whose removal saves the most distance."""
    occurrences: dict[int, list[tuple[int, int]]] = {}
    for ri, r in enumerate(offspring.routes):
        for pos, cst in enumerate(r.customers):
            occurrences.setdefault(cst, []).append((ri, pos))
    to_remove: list[tuple[int, int]] = []
    for cst, occ in occurrences.items():
        if len(occ) <= 1:
            continue
        def keep_rank(item):
            ri, pos = item
            return (origin_main[ri], _removal_saving(offspring.routes[ri], pos, inst))
        keep = min(occ, key=keep_rank)  # donor copies first, then smallest saving
        to_remove.extend(o for o in occ if o != keep)
    for ri, pos in sorted(to_remove, key=lambda t: (t[0], -t[1])):
        del offspring.routes[ri].customers[pos]
