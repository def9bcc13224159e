"""Generation loop: crossover, local search, population update, best tracking.

One engine drives one seeded run. The loop stops at the generation budget, at
the stagnation patience, or at the wall-clock limit, whichever comes first.
"""
from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from typing import Optional

from .evaluation import PenaltyState, ScalingConstants, evaluate
from .genetic import (DIVERSITY_LEVELS, DiscountedUCB1, InsertionOperator,
                      dcrex, improvement_reward, initialize_population)
from .localsearch import SearchConfig, local_search
from .model import INF, Instance, Solution
from .neighborhood import NeighborConfig, build
from .population import Population

VIOLATION_TOL = 1e-9


@dataclass
class SolverConfig:
    generations: int = 5000   # max generations
    patience: int = 500       # stagnation limit
    time_limit: float = INF   # seconds
    mu: int = 20
    theta: int = 50
    depth: int = 500
    kappa: float = 0.5
    xi: float = 0.7
    multi_move: bool = False
    seed: int = 1

    def __post_init__(self):
        if min(self.generations, self.patience, self.mu, self.theta, self.depth) < 1:
            raise ValueError("config values must be positive")
        if not (0 < self.kappa < 1) or not (0 < self.xi <= 1):
            raise ValueError("kappa and xi must lie in (0, 1)")
        if self.time_limit < 0:
            raise ValueError("time limit must be >= 0")


@dataclass
class RunStats:
    best_cost: float = INF
    best: Optional[Solution] = None
    feasible_found: bool = False
    best_infeasible_cost: float = INF
    best_infeasible: Optional[Solution] = None
    generations: int = 0
    wall_time: float = 0.0
    cost_curve: list = field(default_factory=list)
    stagnation_trace: list = field(default_factory=list)


def gap(f: float, bks: float) -> float:
    """Percent gap to the best known solution; negative means an improvement."""
    if bks <= 0:
        raise ValueError("reference cost must be positive")
    return 100.0 * (f - bks) / bks


def _is_feasible(breakdown, sol: Solution, inst: Instance) -> bool:
    if max(breakdown.V1, breakdown.V2, breakdown.V3, breakdown.V4) > VIOLATION_TOL:
        return False
    return sorted(sol.customer_list()) == list(inst.customers())


def run(inst: Instance, cfg: SolverConfig) -> RunStats:
    rng = random.Random(cfg.seed)
    start = time.monotonic()
    deadline = start + cfg.time_limit if cfg.time_limit != INF else None
    consts = ScalingConstants.from_instance(inst)
    penalties = PenaltyState(cfg.kappa)
    nbr = build(inst, NeighborConfig(cfg.theta), consts)
    search_cfg = SearchConfig(depth=cfg.depth, multi_move=cfg.multi_move)
    div_bandit = DiscountedUCB1(DIVERSITY_LEVELS)
    ins_bandit = DiscountedUCB1(len(InsertionOperator))

    stats = RunStats()
    pop = Population(cfg.mu, cfg.xi)
    for sol in initialize_population(inst, cfg.mu, consts, penalties, rng):
        bd = evaluate(sol, penalties, consts, inst)
        feas = _is_feasible(bd, sol, inst)
        pop.add(sol, bd, feas, inst)
        _track_best(stats, sol, bd, feas)

    gen = 0
    stagnation = 0
    full_coverage = list(inst.customers())

    def snapshot_feasible(dist, sol):
        # capture feasible states passed through mid-search
        if dist < stats.best_cost and sorted(sol.customer_list()) == full_coverage:
            stats.feasible_found = True
            stats.best_cost = dist
            stats.best = sol.clone()

    while (gen <= cfg.generations and stagnation <= cfg.patience
           and time.monotonic() - start <= cfg.time_limit):
        prev_best = stats.best_cost
        members = [m.sol for m in pop.members]
        xres = dcrex(members, inst, consts, penalties, div_bandit, ins_bandit, rng)
        offspring = xres.offspring
        local_search(offspring, penalties, search_cfg, nbr, consts, inst, rng,
                     deadline=deadline, on_feasible=snapshot_feasible)
        offspring.meta["generation"] = gen
        bd = evaluate(offspring, penalties, consts, inst)
        feas = _is_feasible(bd, offspring, inst)
        covered = sorted(offspring.customer_list())
        if covered != full_coverage:
            raise AssertionError("offspring lost customer coverage")

        main = pop.members[xres.main_index]
        if feas and main.feasible:
            reward = improvement_reward(main.breakdown.D, bd.D)
        else:
            reward = improvement_reward(main.penalized(penalties),
                                        bd.D if feas else _penalized(bd, penalties))
        div_bandit.update(xres.diversity_level, reward)
        ins_bandit.update(int(xres.insertion_op), reward)

        pop.add(offspring, bd, feas, inst)
        if pop.needs_selection:
            pop.survivor_selection(penalties)

        _track_best(stats, offspring, bd, feas)
        if stats.best_cost < prev_best:
            stagnation = 0
        else:
            stagnation += 1
        gen += 1
        stats.cost_curve.append(stats.best_cost)
        stats.stagnation_trace.append(stagnation)

    stats.generations = gen
    stats.wall_time = time.monotonic() - start
    return stats


def _penalized(bd, penalties: PenaltyState) -> float:
    lam = penalties.lam
    return bd.D + lam[0] * bd.V1 + lam[1] * bd.V2 + lam[2] * bd.V3 + lam[3] * bd.V4


def _track_best(stats: RunStats, sol: Solution, bd, feas: bool) -> None:
    if feas:
        stats.feasible_found = True
        if bd.D < stats.best_cost:
            stats.best_cost = bd.D
            stats.best = sol.clone()
    elif bd.D < stats.best_infeasible_cost:
        stats.best_infeasible_cost = bd.D
        stats.best_infeasible = sol.clone()
