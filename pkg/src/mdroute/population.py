"""Fitness-and-distance population management.

Solutions are ranked both by penalized objective and by average edge-set
distance to their five nearest neighbors; survivors are kept by a biased
fitness score that trades quality against diversity.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .evaluation import EvalBreakdown, PenaltyState
from .model import Instance, Solution, solution_edges

GROWTH_FACTOR = 1.5
NEAREST = 5


def solution_distance(edges1: set, edges2: set) -> float:
    """Percent of non-shared edges relative to the larger edge set (0..100)."""
    if not edges1 and not edges2:
        return 0.0
    inter = len(edges1 & edges2)
    return 100.0 * (1.0 - inter / max(len(edges1), len(edges2)))


def population_distance(index: int, dist_rows: Sequence[Sequence[float]]) -> float:
    """Average distance of one member to its 5 nearest other members."""
    others = [dist_rows[index][j] for j in range(len(dist_rows)) if j != index]
    if not others:
        return 0.0
    others.sort()
    take = others[:NEAREST]
    return sum(take) / len(take)


@dataclass
class Member:
    sol: Solution
    edges: set
    breakdown: EvalBreakdown
    feasible: bool
    birth: int

    def penalized(self, penalties: PenaltyState) -> float:
        b = self.breakdown
        lam = penalties.lam
        return b.D + lam[0] * b.V1 + lam[1] * b.V2 + lam[2] * b.V3 + lam[3] * b.V4


def biased_fitness(costs: Sequence[float], diversities: Sequence[float],
                   births: Sequence[int], xi: float) -> list[float]:
    """Biased fitness per member from penalized cost and population distance.

    Rank 0 goes to the best cost and to the highest diversity; a higher score
    means a fitter member. Ties rank older members first for determinism.
    """
    n = len(costs)
    by_cost = sorted(range(n), key=lambda i: (costs[i], births[i]))
    by_div = sorted(range(n), key=lambda i: (-diversities[i], births[i]))
    rank_f = [0] * n
    rank_d = [0] * n
    for rank, i in enumerate(by_cost):
        rank_f[i] = rank
    for rank, i in enumerate(by_div):
        rank_d[i] = rank
    return [(n - rank_f[i]) / n + xi * (n - rank_d[i]) / n for i in range(n)]


class Population:
    """Holds up to 1.5*mu members; shrinks back to mu by removing the least fit."""

    def __init__(self, mu: int = 20, xi: float = 0.7):
        self.mu = mu
        self.xi = xi
        self.members: list[Member] = []
        self._births = 0

    def __len__(self) -> int:
        return len(self.members)

    def add(self, sol: Solution, breakdown: EvalBreakdown, feasible: bool,
            inst: Instance) -> Member:
        m = Member(sol, solution_edges(sol, inst.open_routes), breakdown, feasible,
                   self._births)
        self._births += 1
        self.members.append(m)
        return m

    @property
    def needs_selection(self) -> bool:
        return len(self.members) >= int(GROWTH_FACTOR * self.mu)

    def distance_matrix(self) -> list[list[float]]:
        n = len(self.members)
        rows = [[0.0] * n for _ in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                d = solution_distance(self.members[i].edges, self.members[j].edges)
                rows[i][j] = rows[j][i] = d
        return rows

    def survivor_selection(self, penalties: PenaltyState) -> None:
        """Iteratively drop the lowest biased-fitness member until mu remain."""
        rows = self.distance_matrix()
        while len(self.members) > self.mu:
            n = len(self.members)
            costs = [m.penalized(penalties) for m in self.members]
            divs = [population_distance(i, rows) for i in range(n)]
            births = [m.birth for m in self.members]
            chi = biased_fitness(costs, divs, births, self.xi)
            worst = min(range(n), key=lambda i: (chi[i], self.members[i].birth))
            del self.members[worst]
            del rows[worst]
            for row in rows:
                del row[worst]

    def best(self, penalties: PenaltyState, feasible_only: bool = True) -> Optional[Member]:
        pool = [m for m in self.members if m.feasible] if feasible_only else self.members
        if not pool:
            return None
        return min(pool, key=lambda m: (m.penalized(penalties), m.birth))
