import math
import random

import pytest

from mdroute.evaluation import (EvalBreakdown, PenaltyState, ScalingConstants, SeqAttr,
                                adapt_penalties, concat, evaluate, fold_attrs,
                                route_attr, single_attr)
from mdroute.model import (INF, Instance, Route, Solution, Variant, check_feasible,
                           minimal_duration, simulate_from, simulate_route)

from conftest import make_instance, random_solution


def tw_instance(rng, n_customers=8, n_depots=2, **kw):
    return make_instance(rng, Variant.MDVRPTW, n_customers, n_depots, **kw)


# ---------------------------------------------------------------------------- #
# single_attr / concat
# ---------------------------------------------------------------------------- #

def test_single_attr_depot_with_window():
    inst = Instance.from_coords(Variant.MDVRPTW, [(0, 0)],
                                [(1, 0, 5, 10.0, 50.0, 60.0)],
                                depot_windows=[(0.0, 1000.0)])
    a = single_attr(0, inst)
    assert (a.dist, a.load, a.T, a.E, a.L, a.TW) == (0.0, 0.0, 0.0, 0.0, 1000.0, 0.0)
    c = single_attr(1, inst)
    assert (c.load, c.T, c.E, c.L) == (5.0, 10.0, 50.0, 60.0)


def test_single_attr_full_horizon_without_windows():
    inst = Instance.from_coords(Variant.MDVRP, [(0, 0)], [(1, 0, 5, 0.0)])
    a = single_attr(1, inst)
    assert a.E == 0.0 and a.L == INF


def test_concat_identity():
    rng = random.Random(3)
    inst = tw_instance(rng)
    x = fold_attrs([0, 3, 4], inst)
    for merged in (concat(x, SeqAttr.empty(), inst), concat(SeqAttr.empty(), x, inst)):
        assert merged.as_tuple() == x.as_tuple()
        assert (merged.first, merged.last) == (x.first, x.last)


def test_concat_window_free_accumulates_travel():
    inst = Instance.from_coords(Variant.MDVRP, [(0, 0)], [(4, 0, 1, 0.0), (8, 0, 1, 0.0)])
    a = concat(single_attr(1, inst), single_attr(2, inst), inst)
    assert a.T == pytest.approx(4.0)
    assert a.TW == 0.0


def _assert_attr_matches_simulation(route, inst):
    attr = route_attr(route, inst)
    sim = simulate_route(route, inst)
    assert attr.dist == pytest.approx(sim.distance, abs=1e-6)
    assert attr.load == pytest.approx(sim.load, abs=1e-6)
    assert attr.TW == pytest.approx(sim.time_warp, abs=1e-6)
    assert attr.T == pytest.approx(minimal_duration(route, inst), abs=1e-6)
    if inst.has_windows:
        first_e = inst.tw_early[route.sequence(inst.open_routes)[0]]
        # E is the kink where waiting vanishes: duration flat at T above it
        simE = simulate_from(route, inst, attr.E)
        assert simE.duration == pytest.approx(attr.T, abs=1e-6)
        assert simE.time_warp == pytest.approx(attr.TW, abs=1e-6)
        if attr.E > first_e + 1e-9:
            probe = max(attr.E - 7.0, first_e)
            sim_lo = simulate_from(route, inst, probe)
            assert sim_lo.duration == pytest.approx(attr.T + (attr.E - probe), abs=1e-6)
        if math.isfinite(attr.L):
            simL = simulate_from(route, inst, attr.L)
            assert simL.time_warp == pytest.approx(attr.TW, abs=1e-6)
            assert simL.duration == pytest.approx(attr.T, abs=1e-6)
            sim_hi = simulate_from(route, inst, attr.L + 3.0)
            assert sim_hi.time_warp == pytest.approx(attr.TW + 3.0, abs=1e-6)


def test_fold_matches_forward_simulation_on_random_routes():
    rng = random.Random(99)
    checked = 0
    for trial in range(120):
        variant = rng.choice([Variant.MDVRP, Variant.MDVRPTW, Variant.MDOVRP])
        inst = make_instance(rng, variant, n_customers=rng.randint(3, 10))
        sol = random_solution(rng, inst)
        for r in sol.routes:
            _assert_attr_matches_simulation(r, inst)
            checked += 1
    assert checked >= 200


def test_concat_is_associative():
    rng = random.Random(5)
    inst = tw_instance(rng, n_customers=9)
    nodes = list(inst.customers())
    for _ in range(300):
        x, y, z = (single_attr(rng.choice(nodes), inst) for _ in range(3))
        left = concat(concat(x, y, inst), z, inst)
        right = concat(x, concat(y, z, inst), inst)
        for a, b in zip(left.as_tuple(), right.as_tuple()):
            assert a == pytest.approx(b, abs=1e-6)


# ---------------------------------------------------------------------------- #
# scaling constants
# ---------------------------------------------------------------------------- #

def test_gamma_is_one_when_time_equals_distance(rng):
    inst = make_instance(rng)
    consts = ScalingConstants.from_instance(inst)
    assert consts.gamma == pytest.approx(1.0)


def test_theta_direct_formula():
    # distances on a line: arcs {1..10} between consecutive plus longer ones
    inst = Instance.from_coords(Variant.MDVRP, [(0, 0)], [(1, 0, 1, 0.0), (10, 0, 1, 0.0)])
    consts = ScalingConstants.from_instance(inst)
    # arcs: 1, 10, 9 -> theta = 2*10 - 1 = 19
    assert consts.theta == pytest.approx(19.0)


def test_scaling_constants_independent_scan(rng):
    inst = make_instance(rng, n_customers=12, n_depots=3)
    consts = ScalingConstants.from_instance(inst)
    arcs = [inst.dist[i, j] for i in range(inst.n_nodes) for j in range(inst.n_nodes) if i != j]
    assert consts.theta == pytest.approx(2 * max(arcs) - min(arcs))
    assert consts.gamma == pytest.approx(sum(arcs) / sum(arcs))


def test_scaling_constants_degenerate_instance_raises():
    inst = Instance.from_coords(Variant.MDVRP, [(0, 0)], [(0, 0, 1, 0.0)])
    with pytest.raises(ValueError):
        ScalingConstants.from_instance(inst)


# ---------------------------------------------------------------------------- #
# evaluate
# ---------------------------------------------------------------------------- #

def test_feasible_solution_has_zero_penalties(rng):
    inst = Instance.from_coords(Variant.MDVRP, [(0, 0)], [(3, 0, 4, 0.0), (6, 0, 4, 0.0)],
                                capacity=10)
    sol = Solution([Route(0, 0, [1, 2])])
    bd = evaluate(sol, PenaltyState(), ScalingConstants.from_instance(inst), inst)
    assert (bd.V1, bd.V2, bd.V3, bd.V4) == (0.0, 0.0, 0.0, 0.0)
    assert bd.F == bd.D


def test_capacity_penalty_formula():
    inst = Instance.from_coords(Variant.MDVRP, [(0, 0)], [(1, 0, 8, 0.0), (2, 0, 7, 0.0)],
                                capacity=10)
    consts = ScalingConstants(gamma=1.0, theta=19.0)
    bd = evaluate(Solution([Route(0, 0, [1, 2])]), PenaltyState(), consts, inst)
    assert bd.V2 == pytest.approx(19.0 * 5 / 10)


def test_evaluate_matches_forward_recomputation():
    rng = random.Random(17)
    consts_cache = {}
    for trial in range(150):
        variant = rng.choice([Variant.MDVRP, Variant.MDVRPTW, Variant.MDOVRP])
        fleet = rng.choice([None, 1, 2])
        dur = rng.choice([None, 250.0]) if variant is not Variant.MDOVRP else None
        inst = make_instance(rng, variant, n_customers=rng.randint(4, 10),
                             fleet=fleet, max_duration=dur)
        consts = ScalingConstants.from_instance(inst)
        pen = PenaltyState(lam=[rng.uniform(0.1, 5) for _ in range(4)])
        sol = random_solution(rng, inst)
        bd = evaluate(sol, pen, consts, inst)
        # independent recomputation from the simulation oracle
        D = sum(simulate_route(r, inst).distance for r in sol.routes)
        v1 = consts.gamma * sum(simulate_route(r, inst).time_warp for r in sol.routes) \
            if inst.has_windows else 0.0
        v2 = consts.theta * sum(max(simulate_route(r, inst).load - inst.capacity, 0.0)
                                for r in sol.routes) / inst.capacity
        v3 = 0.0
        if inst.max_duration != INF:
            v3 = consts.theta * sum(max(minimal_duration(r, inst) - inst.max_duration, 0.0)
                                    for r in sol.routes) / inst.max_duration
        closures = 0 if inst.open_routes else sum(r.depart != r.arrive for r in sol.routes)
        counts = [0] * inst.n_depots
        for r in sol.routes:
            counts[r.depart] += 1
        fleet_exc = 0 if inst.fleet_per_depot == INF else \
            sum(max(k - inst.fleet_per_depot, 0) for k in counts)
        v4 = consts.theta * (closures + fleet_exc)
        assert bd.D == pytest.approx(D, abs=1e-6)
        assert bd.V1 == pytest.approx(v1, abs=1e-6)
        assert bd.V2 == pytest.approx(v2, abs=1e-6)
        assert bd.V3 == pytest.approx(v3, abs=1e-6)
        assert bd.V4 == pytest.approx(v4, abs=1e-6)
        lam = pen.lam
        assert bd.F == pytest.approx(D + lam[0] * v1 + lam[1] * v2 + lam[2] * v3 + lam[3] * v4,
                                     abs=1e-6)


def test_feasibility_equivalence_with_checker():
    rng = random.Random(23)
    agree = 0
    for trial in range(1000):
        variant = rng.choice([Variant.MDVRP, Variant.MDVRPTW, Variant.MDOVRP])
        inst = make_instance(rng, variant, n_customers=rng.randint(3, 9),
                             fleet=rng.choice([None, 1, 3]),
                             max_duration=None if variant is Variant.MDOVRP
                             else rng.choice([None, 300.0]))
        sol = random_solution(rng, inst)
        consts = ScalingConstants.from_instance(inst)
        bd = evaluate(sol, PenaltyState(), consts, inst)
        zero_pen = max(bd.V1, bd.V2, bd.V3, bd.V4) <= 1e-9
        rep = check_feasible(sol, inst)
        assert zero_pen == rep.all_ok, f"trial {trial}: V={bd.violations()} vs {rep}"
        assert (bd.F == bd.D) == zero_pen or (bd.F - bd.D) <= 1e-9
        agree += 1
    assert agree == 1000


# ---------------------------------------------------------------------------- #
# penalty adaptation
# ---------------------------------------------------------------------------- #

def test_adapt_up_and_down():
    pen = PenaltyState(kappa=0.5, lam=[1.0, 1.0, 1.0, 1.0])
    adapt_penalties(pen, [True, False, True, False])
    assert pen.lam == [2.0, 0.5, 2.0, 0.5]


def test_adapt_respects_bounds():
    rng = random.Random(31)
    pen = PenaltyState(kappa=0.5)
    for _ in range(100):
        adapt_penalties(pen, [rng.random() < 0.5 for _ in range(4)])
        for lam in pen.lam:
            assert pen.lam_min <= lam <= pen.lam_max
    pen2 = PenaltyState(kappa=0.5)
    for _ in range(100):
        adapt_penalties(pen2, [True] * 4)
    assert pen2.lam == [pen2.lam_max] * 4


def test_violations_independent_of_lambda(rng):
    inst = make_instance(rng, Variant.MDVRPTW, n_customers=8)
    sol = random_solution(rng, inst)
    consts = ScalingConstants.from_instance(inst)
    a = evaluate(sol, PenaltyState(lam=[1, 1, 1, 1]), consts, inst)
    b = evaluate(sol, PenaltyState(lam=[9, 7, 5, 3]), consts, inst)
    assert a.violations() == b.violations()
    for v in a.violations():
        assert v >= 0.0
