import math
import random

import pytest

from mdroute.model import INF, Instance, Route, Solution, Variant


def make_instance(rng: random.Random, variant=Variant.MDVRP, n_customers=8, n_depots=2,
                  capacity=None, max_duration=None, fleet=None) -> Instance:
    variant = Variant(variant)
    depot_xy = [(rng.uniform(0, 100), rng.uniform(0, 100)) for _ in range(n_depots)]
    customers = []
    windows = variant is Variant.MDVRPTW
    for _ in range(n_customers):
        x, y = rng.uniform(0, 100), rng.uniform(0, 100)
        q = rng.randint(1, 10)
        if windows:
            s = rng.uniform(5, 15)
            e = rng.uniform(0, 600)
            l = e + rng.uniform(80, 400)
            customers.append((x, y, q, s, e, l))
        else:
            customers.append((x, y, q, 0.0))
    if capacity is None:
        capacity = max(12, 10 * n_customers // (2 * n_depots))
    depot_windows = [(0.0, 1200.0)] * n_depots if windows else None
    return Instance.from_coords(
        variant, depot_xy, customers,
        fleet_per_depot=INF if fleet is None else fleet,
        capacity=capacity,
        max_duration=INF if max_duration is None else max_duration,
        depot_windows=depot_windows,
    )


def random_solution(rng: random.Random, inst: Instance, scramble_depots=True) -> Solution:
    """Random full-coverage solution; may be arbitrarily infeasible."""
    cust = list(inst.customers())
    rng.shuffle(cust)
    routes = []
    i = 0
    while i < len(cust):
        size = rng.randint(1, min(5, len(cust) - i))
        chunk = cust[i:i + size]
        i += size
        depart = rng.randrange(inst.n_depots)
        if scramble_depots and not inst.open_routes and rng.random() < 0.3:
            arrive = rng.randrange(inst.n_depots)
        else:
            arrive = depart
        routes.append(Route(depart, arrive, chunk))
    return Solution(routes)


@pytest.fixture
def rng():
    return random.Random(12345)
