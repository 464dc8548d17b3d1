import random

import networkx as nx
import pytest

from ktuple.exact import solve_security_index
from ktuple.jacobian import build_h
from ktuple.maxflow import FlowNetwork
from ktuple.mincut import (MinCutSolver, algorithm1, algorithm2, cut_solution, enumerate_min_cuts,
                           min_cut)
from ktuple.netmodel import (Flow, Injection, MeasurementSet, full_metering, load_case,
                             meter_weights, network)
from ktuple.observability import RefinementFailure, is_critical

from conftest import brute_min_cuts, random_network, random_observable_case


@pytest.fixture
def star3():
    net = network([(1, 2), (1, 3)])
    ms = MeasurementSet((Flow(0), Flow(1), Injection(1), Injection(2)))
    return net, ms


def test_star_cut_true_and_modified_cost(star3):
    net, ms = star3
    w = meter_weights(net, ms)
    cut = cut_solution(net, w, {1}, ms)
    assert cut.cut_lines == (0, 1)
    assert cut.true_cost == 4 and cut.modified_cost == 5
    assert cut.removed_measurements == frozenset(range(4))


def test_star_single_line_cut(star3):
    net, ms = star3
    w = meter_weights(net, ms)
    cut = cut_solution(net, w, {1, 2}, ms)
    assert cut.cut_lines == (1,)
    assert cut.true_cost == cut.modified_cost == 2


def test_maxflow_small():
    g = FlowNetwork(4)
    g.add_edge(0, 1, 3)
    g.add_edge(0, 2, 2)
    g.add_edge(1, 2, 5)
    g.add_edge(1, 3, 2)
    g.add_edge(2, 3, 3)
    assert g.max_flow(0, 3) == 5
    assert g.reachable(0) == {0}


def _nx_graph(net, w):
    g = nx.Graph()
    g.add_nodes_from(net.buses)
    for k, (i, j) in enumerate(net.lines):
        if g.has_edge(i, j):
            g[i][j]["capacity"] += w.wtilde[k]
        else:
            g.add_edge(i, j, capacity=w.wtilde[k])
    return g


def test_min_cut_value_matches_networkx():
    rng = random.Random(4)
    for _ in range(60):
        net = random_network(rng, 9, 6)
        w = meter_weights(net, full_metering(net, rng.randint(1, 2)))
        s, t = rng.sample(list(net.buses), 2)
        value, cut = min_cut(net, w, s, t)
        assert value == nx.minimum_cut_value(_nx_graph(net, w), s, t)
        assert cut.modified_cost == value and s in cut.s_side and t not in cut.s_side


def test_enumeration_matches_brute_force():
    rng = random.Random(8)
    for _ in range(80):
        net = random_network(rng, 7, 5)
        entries = [Flow(k) for k in range(len(net.lines)) if rng.random() < 0.7]
        entries += [Injection(b) for b in net.buses if rng.random() < 0.5]
        ms = MeasurementSet(tuple(entries))
        w = meter_weights(net, ms)
        s, t = rng.sample(list(net.buses), 2)
        best, sides = brute_min_cuts(net, w, s, t)
        got = enumerate_min_cuts(net, w, s, t, ms=ms)
        assert got.value == best and not got.truncated
        assert sorted(sorted(c.s_side) for c in got) == sorted(sorted(x) for x in sides)


def test_enumeration_cap_truncates():
    # a path with equal weights has one minimum cut per line
    net = network([(k, k + 1) for k in range(1, 8)])
    ms = full_metering(net, 1, injections=False)
    w = meter_weights(net, ms)
    assert len(enumerate_min_cuts(net, w, 1, 8)) == 7
    capped = enumerate_min_cuts(net, w, 1, 8, cap=3)
    assert len(capped) == 3 and capped.truncated
    with pytest.raises(ValueError):
        enumerate_min_cuts(net, w, 1, 8, cap=0)


def test_bad_pairs():
    net = network([(1, 2)])
    w = meter_weights(net, MeasurementSet((Flow(0),)))
    with pytest.raises(ValueError):
        min_cut(net, w, 1, 1)
    with pytest.raises(KeyError):
        min_cut(net, w, 1, 5)


def test_cost_identity_on_random_cuts():
    rng = random.Random(12)
    for _ in range(50):
        net = random_network(rng, 8, 5)
        ms = full_metering(net, 1)
        w = meter_weights(net, ms)
        side = {b for b in net.buses if rng.random() < 0.5} | {1}
        cut = cut_solution(net, w, side, ms)
        assert cut.true_cost == len(cut.removed_measurements)
        assert cut.modified_cost >= cut.true_cost
        boundary = {b for k in cut.cut_lines for b in net.lines[k]}
        extra = sum(w.bus(b) * (sum(1 for k in cut.cut_lines if b in net.lines[k]) - 1)
                    for b in boundary)
        assert cut.modified_cost - cut.true_cost == extra


def test_ranked_cuts_are_sorted(ieee14_full):
    net, ms, h = ieee14_full
    solver = MinCutSolver(net, ms, h)
    cuts = solver.ranked_cuts(4, 5)
    keys = [(c.true_cost, sorted(c.removed_measurements)) for c in cuts]
    assert keys == sorted(keys)
    assert solver.ranked_cuts(5, 4) is cuts


def test_every_anchor_of_14_bus_gives_a_critical_tuple(ieee14_full):
    net, ms, h = ieee14_full
    solver = MinCutSolver(net, ms, h)
    for a in range(h.m):
        tup = solver.solve(a)
        assert a in tup.rows and is_critical(h, tup.rows)
    assert not solver.truncated


def test_mincut_never_beats_exact():
    rng = random.Random(2)
    for _ in range(40):
        net, ms, h = random_observable_case(rng, 6, 16)
        solver = MinCutSolver(net, ms, h)
        for a in range(h.m):
            try:
                tup = solver.solve(a)
            except RefinementFailure:
                continue
            assert tup.cardinality >= solve_security_index(h, a).cardinality


def test_algorithm_kind_checks(ieee6):
    net, ms, h = ieee6
    flow = ms.flow_rows()[0]
    inj = ms.injection_rows()[0]
    assert algorithm1(net, ms, h, flow).rows == MinCutSolver(net, ms, h).solve(flow).rows
    assert inj in algorithm2(net, ms, h, inj).rows
    with pytest.raises(ValueError):
        algorithm1(net, ms, h, inj)
    with pytest.raises(ValueError):
        algorithm2(net, ms, h, flow)


def test_injection_picks_the_best_neighbor():
    # bus 1 has a cheap leaf neighbor and an expensive meshed side
    net = network([(1, 2), (1, 3), (3, 4), (4, 1)])
    ms = MeasurementSet((Flow(0), Flow(1), Flow(1), Flow(2), Flow(2), Flow(3), Flow(3),
                         Injection(1)))
    h = build_h(net, ms)
    tup = MinCutSolver(net, ms, h).solve(7)
    assert tup.rows == frozenset({0, 7})


def test_refined_set_tracks_shrunk_anchors():
    net, _ = load_case("ieee118")
    ms = full_metering(net, 1)
    solver = MinCutSolver(net, ms)
    for a in ms.injection_rows()[:20]:
        tup = solver.solve(a)
        assert is_critical(solver.h, tup.rows)
    assert solver.refined <= set(ms.injection_rows()[:20])


def test_cut_cost_before_shrinking():
    # injections only: every critical tuple has two rows, the cheapest cut removes more
    net, _ = load_case("ieee14")
    ms = MeasurementSet(tuple(Injection(b) for b in net.buses))
    solver = MinCutSolver(net, ms)
    for a in range(len(ms)):
        assert solver.solve(a).cardinality == 2
        assert solver.cut_cost(a) >= 2
    assert any(solver.cut_cost(a) > 2 for a in range(len(ms)))


def test_cut_cost_equals_tuple_without_injections():
    net, _ = load_case("ieee14")
    ms = full_metering(net, 1, injections=False)
    solver = MinCutSolver(net, ms)
    for a in range(len(ms)):
        assert solver.cut_cost(a) == solver.solve(a).cardinality
