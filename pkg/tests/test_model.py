import math
import random

import pytest

from mdroute.model import (INF, Instance, Route, Solution, Variant, check_feasible,
                           minimal_duration, objective, route_distance,
                           simulate_from, simulate_route)

from conftest import make_instance, random_solution


def line_instance(variant=Variant.MDVRP, **kw):
    """Two depots and two customers on a line: d0=(0,0), d1=(10,0), c2=(3,0), c3=(7,0)."""
    return Instance.from_coords(variant, [(0, 0), (10, 0)],
                                [(3, 0, 1, 0.0), (7, 0, 1, 0.0)], **kw)


def test_route_distance_empty_closed_is_zero():
    inst = line_instance()
    assert route_distance(Route(0, 0, []), inst) == 0.0


def test_route_distance_out_and_back():
    inst = Instance.from_coords(Variant.MDVRP, [(0, 0)], [(10, 0, 1, 0.0)])
    assert route_distance(Route(0, 0, [1]), inst) == pytest.approx(20.0)


def test_route_distance_open_omits_return():
    inst = Instance.from_coords(Variant.MDOVRP, [(0, 0)], [(3, 0, 1, 0.0), (3, 4, 1, 0.0)])
    # depot -> c1 (3) -> c2 (4), no return arc
    assert route_distance(Route(0, 0, [1, 2]), inst) == pytest.approx(7.0)


def test_objective_is_additive():
    inst = line_instance()
    s = Solution([Route(0, 0, [2]), Route(1, 1, [3])])
    assert objective(s, inst) == pytest.approx(
        route_distance(s.routes[0], inst) + route_distance(s.routes[1], inst))


def test_closed_route_reversal_keeps_distance():
    rng = random.Random(7)
    inst = make_instance(rng, n_customers=9)
    sol = random_solution(rng, inst, scramble_depots=False)
    for r in sol.routes:
        rev = Route(r.depart, r.arrive, r.customers[::-1])
        assert route_distance(rev, inst) == pytest.approx(route_distance(r, inst))


def test_open_route_reversal_may_change_distance():
    inst = Instance.from_coords(Variant.MDOVRP, [(0, 0)], [(1, 0, 1, 0.0), (9, 0, 1, 0.0)])
    a = Route(0, 0, [1, 2])
    b = Route(0, 0, [2, 1])
    assert route_distance(a, inst) != pytest.approx(route_distance(b, inst))


def test_check_feasible_capacity_excess():
    inst = line_instance(capacity=10)
    sol = Solution([Route(0, 0, [2, 3])])
    rep = check_feasible(sol, inst)
    assert rep.all_ok
    inst2 = Instance.from_coords(Variant.MDVRP, [(0, 0)], [(1, 0, 8, 0.0), (2, 0, 7, 0.0)],
                                 capacity=10)
    rep2 = check_feasible(Solution([Route(0, 0, [1, 2])]), inst2)
    assert rep2.capacity_excess == pytest.approx(5.0)
    assert not rep2.all_ok


def test_check_feasible_closure_violation():
    inst = line_instance()
    rep = check_feasible(Solution([Route(0, 1, [2, 3])]), inst)
    assert rep.closure_violations == 1
    assert not rep.all_ok


def test_check_feasible_open_routes_ignore_closure():
    inst = Instance.from_coords(Variant.MDOVRP, [(0, 0), (10, 0)],
                                [(3, 0, 1, 0.0), (7, 0, 1, 0.0)])
    rep = check_feasible(Solution([Route(0, 1, [2, 3])]), inst)
    assert rep.closure_violations == 0


def test_check_feasible_coverage_and_structural():
    inst = line_instance()
    rep = check_feasible(Solution([Route(0, 0, [2])]), inst)
    assert rep.missing == [3]
    rep = check_feasible(Solution([Route(0, 0, [2, 3]), Route(1, 1, [3])]), inst)
    assert rep.duplicated == [3]
    rep = check_feasible(Solution([Route(0, 0, [99])]), inst)
    assert rep.structural_error is not None
    rep = check_feasible(Solution([Route(0, 0, [1])]), inst)  # depot as customer
    assert rep.structural_error is not None


def test_check_feasible_fleet_excess():
    inst = line_instance(fleet_per_depot=1)
    sol = Solution([Route(0, 0, [2]), Route(0, 0, [3])])
    assert check_feasible(sol, inst).fleet_excess == 1


def test_simulation_waits_and_warps():
    inst = Instance.from_coords(
        Variant.MDVRPTW, [(0, 0)], [(10, 0, 1, 5.0, 50.0, 60.0)],
        depot_windows=[(0.0, 1000.0)])
    sim = simulate_route(Route(0, 0, [1]), inst)
    # leave at 0, arrive 10, wait to 50, serve 5, return at 65
    assert sim.time_warp == pytest.approx(0.0)
    assert sim.duration == pytest.approx(65.0)
    # minimal duration departs at 40: 10 travel + 5 service + 10 back
    assert minimal_duration(Route(0, 0, [1]), inst) == pytest.approx(25.0)


def test_simulation_clamps_late_arrivals():
    inst = Instance.from_coords(
        Variant.MDVRPTW, [(0, 0)], [(10, 0, 1, 5.0, 0.0, 6.0)],
        depot_windows=[(0.0, 1000.0)])
    sim = simulate_route(Route(0, 0, [1]), inst)
    assert sim.time_warp == pytest.approx(4.0)
    assert sim.late_count == 1
    # clamped at 6, serve 5, return at 21; duration excludes the warped time
    assert sim.duration == pytest.approx(21.0 + 4.0)


def test_simulate_from_counts_duration_from_service_start():
    inst = Instance.from_coords(
        Variant.MDVRPTW, [(0, 0)], [(10, 0, 1, 0.0, 0.0, 1000.0)],
        depot_windows=[(5.0, 1000.0)])
    early = simulate_from(Route(0, 0, [1]), inst, -50.0)
    late = simulate_from(Route(0, 0, [1]), inst, 5.0)
    assert early.duration == pytest.approx(late.duration)
