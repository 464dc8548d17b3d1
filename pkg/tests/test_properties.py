from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from ktuple.exact import solve_security_index
from ktuple.jacobian import build_h, rank_exact, row_rank
from ktuple.mincut import MinCutSolver, enumerate_min_cuts
from ktuple.netmodel import (Flow, Injection, MeasurementSet, meter_weights, network,
                             parse_case, serialize_case)
from ktuple.observability import RefinementFailure, is_critical, is_unobservable

from conftest import brute_min_cuts


@st.composite
def cases(draw, n_max=6, m_max=16):
    n = draw(st.integers(2, n_max))
    lines = [(k, draw(st.integers(1, k - 1))) for k in range(2, n + 1)]
    extra = draw(st.lists(st.tuples(st.integers(1, n), st.integers(1, n))
                          .filter(lambda p: p[0] != p[1]), max_size=4))
    lines += extra
    net = network(lines, n)
    flows = draw(st.lists(st.integers(0, len(lines) - 1), max_size=m_max))
    injs = draw(st.lists(st.integers(1, n), max_size=max(0, m_max - len(flows))))
    entries = [Flow(k) for k in flows] + [Injection(b) for b in injs]
    if not entries:
        entries = [Flow(0)]
    return net, MeasurementSet(tuple(entries))


quick = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@quick
@given(cases())
def test_serialize_round_trip(case):
    net, ms = case
    assert parse_case(serialize_case(net, ms)) == (net, ms)


@quick
@given(cases())
def test_structured_rank_matches_bareiss(case):
    net, ms = case
    h = build_h(net, ms)
    assert rank_exact(h, ()) == rank_exact(h, (), method="bareiss")


@quick
@given(cases(), st.data())
def test_exact_support_is_unobservable_and_critical(case, data):
    net, ms = case
    h = build_h(net, ms)
    assume(row_rank(h, range(h.m)) == net.n - 1)
    a = data.draw(st.integers(0, h.m - 1))
    sol = solve_security_index(h, a)
    assert is_unobservable(h, sol.support)
    assert row_rank(h, [r for r in range(h.m) if r not in sol.support]) < net.n - 1
    assert is_critical(h, sol.to_critical(h).rows)


@quick
@given(cases())
def test_mincut_bounds_exact(case):
    net, ms = case
    h = build_h(net, ms)
    if row_rank(h, range(h.m)) < net.n - 1:
        return
    solver = MinCutSolver(net, ms, h)
    for a in range(h.m):
        try:
            tup = solver.solve(a)
        except RefinementFailure:
            continue
        assert is_critical(h, tup.rows)
        assert tup.cardinality >= solve_security_index(h, a).cardinality


@settings(max_examples=40, deadline=None)
@given(cases(n_max=7), st.data())
def test_enumeration_against_brute_force(case, data):
    net, ms = case
    w = meter_weights(net, ms)
    s = data.draw(st.integers(1, net.n))
    t = data.draw(st.integers(1, net.n).filter(lambda x: x != s))
    best, sides = brute_min_cuts(net, w, s, t)
    got = enumerate_min_cuts(net, w, s, t)
    assert got.value == best
    assert {c.s_side for c in got} == set(sides)
