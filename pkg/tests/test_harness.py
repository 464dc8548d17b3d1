import json
from dataclasses import replace

import pytest

from ktuple.harness import (AnchorRecord, ScenarioConfig, StatsReport, UnobservableScenario,
                            _count, base_measurements, draw_scenario, membership_report,
                            removal_sweep, run_sweep, solve_all, sweep_table_csv, timing_report)
from ktuple.netmodel import full_metering, load_case, network, serialize_case
from ktuple.observability import is_unobservable, verify_critical
from ktuple.jacobian import build_h


def _report(pairs):
    recs = [AnchorRecord(a, f"r{a}", mc, ex) for a, (mc, ex) in enumerate(pairs)]
    return StatsReport("x", {}, 3, len(recs), [], 1, recs)


def test_aggregates_from_records():
    rep = _report([(2, 2), (3, 2), (6, 3), (4, 4)])
    assert rep.percent_overestimated == 50.0
    assert rep.avg_overestimation == 1.0
    assert rep.avg_relative_overestimation == pytest.approx(100 * (0 + 0.5 + 1 + 0) / 4)
    assert rep.avg_relative_overestimation_overestimated == pytest.approx(75.0)


def test_cut_aggregates_use_the_unshrunk_size():
    rep = _report([(2, 2), (2, 2)])
    rep.records[0].cut_k = 4
    rep.records[1].cut_k = 2
    assert rep.percent_overestimated == 0.0
    assert rep.cut_percent_overestimated == 50.0
    assert rep.cut_avg_overestimation == 1.0
    assert rep.cut_avg_relative_overestimation == pytest.approx(50.0)
    assert rep.cut_avg_relative_overestimation_overestimated == pytest.approx(100.0)


def test_aggregates_skip_incomplete_records():
    rep = _report([(2, 2), (None, 1), (3, None)])
    assert rep.percent_overestimated == 0.0
    assert _report([]).percent_overestimated is None


def test_removal_count_rounds_half_up():
    assert [_count(f, 20) for f in (0, 0.1, 0.25, 1)] == [0, 2, 5, 20]
    assert _count(0.5, 5) == 3


def test_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig("ieee14", removal_fraction=1.5)
    with pytest.raises(ValueError):
        ScenarioConfig("ieee14", removal_kind="buses")
    with pytest.raises(ValueError):
        ScenarioConfig("ieee14", solver="milp")
    with pytest.raises(ValueError):
        ScenarioConfig("ieee14", meters_per_line=0)


def test_draws_are_deterministic_and_seed_dependent():
    net, case_ms = load_case("ieee14")
    cfg = ScenarioConfig("ieee14", removal_fraction=0.5, rng_seed=7)
    ms = base_measurements(net, case_ms, cfg)
    a = draw_scenario(net, ms, cfg)[0]
    assert draw_scenario(net, ms, cfg)[0] == a
    others = {tuple(draw_scenario(net, ms, replace(cfg, rng_seed=s))[0]) for s in range(8)}
    assert len(others) > 1
    assert len(a) == 10 and all(ms[r].is_flow for r in a)


def test_injection_and_arbitrary_draws():
    net, case_ms = load_case("ieee14")
    cfg = ScenarioConfig("ieee14", removal_fraction=0.5, removal_kind="injections")
    ms = base_measurements(net, case_ms, cfg)
    removed, kept, _ = draw_scenario(net, ms, cfg)
    assert len(removed) == 7 and not any(ms[r].is_flow for r in removed)
    assert len(kept) == len(ms) - 7
    cfg = replace(cfg, removal_kind="arbitrary", removal_fraction=0.2)
    removed, kept, _ = draw_scenario(net, ms, cfg)
    assert len(removed) == 7 and not is_unobservable(build_h(net, ms), removed)


def test_unobservable_draws_are_reported():
    net, case_ms = load_case("ieee14")
    cfg = ScenarioConfig("ieee14", removal_fraction=0.9, removal_kind="arbitrary", retry_cap=5)
    ms = base_measurements(net, case_ms, cfg)
    with pytest.raises(UnobservableScenario) as err:
        draw_scenario(net, ms, cfg)
    assert err.value.draws == 5


def test_full_removal_of_flows_still_observable():
    net, case_ms = load_case("ieee14")
    cfg = ScenarioConfig("ieee14", removal_fraction=1.0)
    removed, kept, draws = draw_scenario(net, base_measurements(net, case_ms, cfg), cfg)
    assert draws == 1 and all(not e.is_flow for e in kept)


def test_run_sweep_reports_are_byte_identical_without_timing():
    cfg = ScenarioConfig("ieee6", removal_fraction=0.3, rng_seed=3)
    a, b = run_sweep(cfg), run_sweep(cfg)
    assert a.to_json(timing=False) == b.to_json(timing=False)
    doc = json.loads(a.to_json(timing=False))
    assert "solve_time_mincut" not in doc["aggregates"]
    assert all(r["mincut_k"] >= r["exact_k"] for r in doc["records"])


def test_stats_csv_has_one_row_per_anchor():
    rep = run_sweep(ScenarioConfig("ieee6", solver="mincut"))
    lines = rep.to_csv().splitlines()
    assert len(lines) == rep.m + 1 and lines[0].startswith("anchor")


def test_sweep_aborts_only_the_bad_fraction():
    cfg = ScenarioConfig("ieee14", removal_kind="arbitrary", solver="mincut", retry_cap=3)
    points = removal_sweep(cfg, [0.0, 0.9], ensembles=2)
    assert len(points[0].reports) == 2 and not points[0].aborted
    assert not points[1].reports and len(points[1].aborted) == 2
    csv_text = sweep_table_csv(points)
    assert csv_text.splitlines()[2].startswith("0.9,0,2")
    with pytest.raises(ValueError):
        removal_sweep(cfg, [1.2])


def test_solve_all_records_errors_per_anchor():
    net = network([(1, 2), (2, 3)])
    ms = full_metering(net, 1)
    records, truncated = solve_all(net, ms, "both")
    assert not truncated and all(r.error is None for r in records)
    assert all(r.overestimate == 0 for r in records)


def test_membership_single_line(tmp_path):
    net = network([(1, 2)], name="one-line")
    ms = full_metering(net, 1, injections=False)
    path = tmp_path / "one.json"
    path.write_text(serialize_case(net, ms))
    rep = membership_report(str(path))
    assert rep.tuples == [[0]] and rep.counts == [1]


def test_membership_tuples_are_verified(ieee6):
    net, ms, h = ieee6
    rep = membership_report("ieee6")
    assert len(rep.per_anchor) == h.m
    for t in rep.tuples:
        verify_critical(h, t, t[0])
    assert rep.counts[11] <= 2
    assert sum(rep.run_counts) == sum(len(t) for t in rep.per_anchor)
    assert rep.to_csv().count("\n") == h.m + 1


def test_membership_exact_solver():
    rep = membership_report("ieee6", solver="exact")
    assert len(rep.per_anchor) == len(rep.measurements)


def test_timing_report():
    assert timing_report([]) == []
    table = timing_report(["ieee14"], ("mincut", "exact"), meters_per_line=1)
    row = table[0]
    assert row["n"] == 14 and row["m"] == 34
    assert row["mincut_failures"] == 0 and not row["exact_truncated"]
    with pytest.raises(ValueError):
        timing_report(["ieee6"], ("milp",))


def test_all_lines_removed_inflates_the_cut_estimate():
    rep = run_sweep(ScenarioConfig("ieee14", removal_fraction=1.0))
    assert rep.cut_percent_overestimated >= 50
    assert rep.percent_overestimated == 0
    assert rep.refined_count >= sum(r.cut_k > r.mincut_k for r in rep.records)
