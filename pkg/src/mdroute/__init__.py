"""Hybrid memetic solver for multi-depot vehicle routing problems.

Supports the classic capacity/duration-constrained problem, the time-window
variant, and the open-route variant, with a penalized search that explores
infeasible space, a route-exchange crossover with learned diversity control,
and a batched best-improvement local search.
"""
from .engine import RunStats, SolverConfig, gap, run
from .model import Instance, Node, Route, Solution, Variant, check_feasible, objective

__all__ = [
    "Instance", "Node", "Route", "Solution", "Variant",
    "SolverConfig", "RunStats", "run", "gap", "objective", "check_feasible",
]
