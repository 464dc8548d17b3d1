import random
from itertools import combinations

import pytest

from ktuple.jacobian import build_h, row_rank
from ktuple.netmodel import Flow, Injection, MeasurementSet, full_metering, load_case, network


def random_network(rng: random.Random, n_max: int = 6, extra: int = 4):
    n = rng.randint(2, n_max)
    lines = [(k, rng.randint(1, k - 1)) for k in range(2, n + 1)]
    for _ in range(rng.randint(0, extra)):
        i, j = rng.sample(range(1, n + 1), 2)
        lines.append((i, j))
    rng.shuffle(lines)
    return network(lines, n)


def random_observable_case(rng: random.Random, n_max: int = 6, m_max: int = 20):
    """Random connected network with an observable measurement set of at most m_max rows."""
    while True:
        net = random_network(rng, n_max)
        entries = []
        for b in net.buses:
            entries += [Injection(b)] * rng.choice([0, 0, 1, 1, 2])
        for k in range(len(net.lines)):
            entries += [Flow(k)] * rng.choice([0, 1, 1, 2])
        rng.shuffle(entries)
        entries = entries[:m_max]
        if not entries:
            continue
        ms = MeasurementSet(tuple(entries))
        h = build_h(net, ms)
        if row_rank(h, range(h.m)) == net.n - 1:
            return net, ms, h


def brute_min_cuts(net, weights, s, t):
    """All minimum modified-weight s-t partitions by trying every subset."""
    others = [b for b in net.buses if b not in (s, t)]
    best, sides = None, []
    for k in range(len(others) + 1):
        for extra in combinations(others, k):
            side = frozenset((s,) + extra)
            cost = sum(weights.wtilde[i] for i, (a, b) in enumerate(net.lines)
                       if (a in side) != (b in side))
            if best is None or cost < best:
                best, sides = cost, [side]
            elif cost == best:
                sides.append(side)
    return best, sides


@pytest.fixture(scope="session")
def ieee14_full():
    net, _ = load_case("ieee14")
    ms = full_metering(net, 1)
    return net, ms, build_h(net, ms)


@pytest.fixture(scope="session")
def ieee6():
    net, ms = load_case("ieee6")
    return net, ms, build_h(net, ms)


@pytest.fixture
def two_bus():
    net = network([(1, 2)])
    ms = MeasurementSet((Flow(0),))
    return net, ms, build_h(net, ms)
