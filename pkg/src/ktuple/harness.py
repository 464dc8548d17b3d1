"""Experiment driver: per-anchor sweeps, random meter removal, timing, membership."""
from __future__ import annotations

import csv
import io
import json
import math
import statistics
import time
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Literal, Sequence

import numpy as np

from .exact import NODE_BUDGET, solve_security_index
from .jacobian import IntMatrix, build_h
from .mincut import ENUMERATION_CAP, MinCutSolver
from .netmodel import MeasurementSet, Network, check_measurements, full_metering, load_case
from .observability import is_unobservable, refine_to_critical, verify_critical

RemovalKind = Literal["lines", "injections", "arbitrary"]
SolverChoice = Literal["mincut", "exact", "both"]
RETRY_CAP = 50
STAT_KEYS = ("percent_overestimated", "avg_overestimation", "avg_relative_overestimation",
             "avg_relative_overestimation_overestimated", "cut_percent_overestimated",
             "cut_avg_overestimation", "cut_avg_relative_overestimation",
             "cut_avg_relative_overestimation_overestimated", "refined_count")
TIME_KEYS = ("solve_time_mincut", "solve_time_exact", "time_ratio")


class UnobservableScenario(RuntimeError):
    """Every draw up to the retry cap left the network unobservable."""

    def __init__(self, message: str, draws: int):
        self.draws = draws
        super().__init__(message)


@dataclass(frozen=True)
class ScenarioConfig:
    case: str
    meters_per_line: int | None = 1  # None keeps the measurements listed in the case file
    include_all_injections: bool = True
    removal_fraction: float = 0.0
    removal_kind: RemovalKind = "lines"
    rng_seed: int = 0
    ensemble: int = 0
    solver: SolverChoice = "both"
    enumeration_cap: int = ENUMERATION_CAP
    node_budget: int = NODE_BUDGET
    retry_cap: int = RETRY_CAP

    def __post_init__(self):
        if not 0 <= self.removal_fraction <= 1:
            raise ValueError("removal_fraction must lie in [0, 1]")
        if self.removal_kind not in ("lines", "injections", "arbitrary"):
            raise ValueError(f"unknown removal kind {self.removal_kind!r}")
        if self.solver not in ("mincut", "exact", "both"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.meters_per_line is not None and self.meters_per_line < 1:
            raise ValueError("meters_per_line must be positive")


@dataclass
class AnchorRecord:
    anchor: int
    measurement: str
    mincut_k: int | None = None
    exact_k: int | None = None
    cut_k: int | None = None  # winning cut before shrinking to a critical tuple
    mincut_rows: list[int] | None = None
    exact_rows: list[int] | None = None
    refined: bool = False
    proved_optimal: bool | None = None
    mincut_time: float = 0.0
    exact_time: float = 0.0
    error: str | None = None

    @property
    def overestimate(self) -> int | None:
        if self.mincut_k is None or self.exact_k is None:
            return None
        return self.mincut_k - self.exact_k

    @property
    def cut_overestimate(self) -> int | None:
        if self.cut_k is None or self.exact_k is None:
            return None
        return self.cut_k - self.exact_k


@dataclass
class StatsReport:
    case: str
    config: dict
    n: int
    m: int
    removed: list[int]
    draws: int
    records: list[AnchorRecord] = field(default_factory=list)
    truncated: bool = False

    def _gaps(self, attr: str) -> list[tuple[int, int]]:
        out = []
        for r in self.records:
            gap = getattr(r, attr)
            if gap is not None:
                out.append((gap, r.exact_k))
        return out

    def _percent(self, attr: str) -> float | None:
        gs = self._gaps(attr)
        return 100.0 * sum(g > 0 for g, _ in gs) / len(gs) if gs else None

    def _mean_gap(self, attr: str) -> float | None:
        gs = self._gaps(attr)
        return statistics.fmean(g for g, _ in gs) if gs else None

    def _relative(self, attr: str, only_over: bool) -> float | None:
        gs = self._gaps(attr)
        if not gs:
            return None
        rel = [g / k for g, k in gs if g > 0 or not only_over]
        return 100.0 * statistics.fmean(rel) if rel else 0.0

    @property
    def percent_overestimated(self) -> float | None:
        return self._percent("overestimate")

    @property
    def avg_overestimation(self) -> float | None:
        return self._mean_gap("overestimate")

    @property
    def avg_relative_overestimation(self) -> float | None:
        """Percent, averaged over every compared anchor."""
        return self._relative("overestimate", False)

    @property
    def avg_relative_overestimation_overestimated(self) -> float | None:
        """Percent, averaged only over anchors that Min-Cut overestimates (0 if none)."""
        return self._relative("overestimate", True)

    # the same statistics for the cut itself, before it is shrunk to a critical tuple
    @property
    def cut_percent_overestimated(self) -> float | None:
        return self._percent("cut_overestimate")

    @property
    def cut_avg_overestimation(self) -> float | None:
        return self._mean_gap("cut_overestimate")

    @property
    def cut_avg_relative_overestimation(self) -> float | None:
        return self._relative("cut_overestimate", False)

    @property
    def cut_avg_relative_overestimation_overestimated(self) -> float | None:
        return self._relative("cut_overestimate", True)

    @property
    def solve_time_mincut(self) -> float:
        return sum(r.mincut_time for r in self.records)

    @property
    def solve_time_exact(self) -> float:
        return sum(r.exact_time for r in self.records)

    @property
    def time_ratio(self) -> float | None:
        if self.solve_time_exact <= 0:
            return None
        return self.solve_time_mincut / self.solve_time_exact

    @property
    def refined_count(self) -> int:
        return sum(r.refined for r in self.records)

    def aggregates(self, timing: bool = True) -> dict:
        out: dict = {"anchors": len(self.records)}
        out.update((k, getattr(self, k)) for k in STAT_KEYS)
        if timing:
            out.update(solve_time_mincut=self.solve_time_mincut,
                       solve_time_exact=self.solve_time_exact, time_ratio=self.time_ratio)
        return out

    def to_dict(self, timing: bool = True) -> dict:
        recs = []
        for r in self.records:
            d = asdict(r)
            d["overestimate"] = r.overestimate
            d["cut_overestimate"] = r.cut_overestimate
            if not timing:
                d.pop("mincut_time")
                d.pop("exact_time")
            recs.append(d)
        return {"case": self.case, "config": self.config, "n": self.n, "m": self.m,
                "removed": self.removed, "draws": self.draws, "truncated": self.truncated,
                "aggregates": self.aggregates(timing), "records": recs}

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(["anchor", "measurement", "mincut_k", "cut_k", "exact_k", "overestimate",
                      "refined", "proved_optimal", "mincut_time", "exact_time", "error"])
        for r in self.records:
            out.writerow([r.anchor, r.measurement, _blank(r.mincut_k), _blank(r.cut_k),
                          _blank(r.exact_k), _blank(r.overestimate), int(r.refined),
                          _blank(r.proved_optimal),
                          f"{r.mincut_time:.6f}", f"{r.exact_time:.6f}", r.error or ""])
        return buf.getvalue()


def _blank(x):
    return "" if x is None else x


def _rng(seed: int, ensemble: int, fraction: float) -> np.random.Generator:
    # one independent substream per (ensemble, fraction), keyed by value not list position
    key = (ensemble, int(round(fraction * 1_000_000)))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def _count(fraction: float, total: int) -> int:
    return int(math.floor(fraction * total + 0.5))


def base_measurements(net: Network, case_ms: MeasurementSet, cfg: ScenarioConfig) -> MeasurementSet:
    if cfg.meters_per_line is None:
        return case_ms
    return full_metering(net, cfg.meters_per_line, cfg.include_all_injections)


def _draw(net: Network, ms: MeasurementSet, cfg: ScenarioConfig, rng) -> list[int]:
    entries = list(ms)
    if cfg.removal_kind == "lines":
        lines = sorted({e.ref for e in entries if e.is_flow})
        pick = set(rng.choice(lines, size=_count(cfg.removal_fraction, len(lines)),
                              replace=False).tolist()) if lines else set()
        return [r for r, e in enumerate(entries) if e.is_flow and e.ref in pick]
    if cfg.removal_kind == "injections":
        buses = sorted({e.ref for e in entries if not e.is_flow})
        pick = set(rng.choice(buses, size=_count(cfg.removal_fraction, len(buses)),
                              replace=False).tolist()) if buses else set()
        return [r for r, e in enumerate(entries) if not e.is_flow and e.ref in pick]
    k = _count(cfg.removal_fraction, len(entries))
    return sorted(rng.choice(len(entries), size=k, replace=False).tolist())


def draw_scenario(net: Network, ms: MeasurementSet, cfg: ScenarioConfig):
    """Remove meters at random until the rest keeps the network observable.

    Returns ``(removed rows, kept MeasurementSet, draws used)``. Draws that
    are deterministic (nothing or everything removed) are tried once.
    """
    rng = _rng(cfg.rng_seed, cfg.ensemble, cfg.removal_fraction)
    h = build_h(net, ms)
    for draw in range(1, cfg.retry_cap + 1):
        removed = _draw(net, ms, cfg, rng)
        if len(removed) < len(ms) and not is_unobservable(h, removed):
            kept = [e for r, e in enumerate(ms) if r not in set(removed)]
            return removed, check_measurements(net, kept), draw
        if cfg.removal_fraction in (0, 1):
            break
    raise UnobservableScenario(
        f"{cfg.removal_kind} removal of {cfg.removal_fraction:.0%} left the network "
        f"unobservable in {draw} draw(s)", draw)


def solve_all(net: Network, ms: MeasurementSet, solver: SolverChoice = "both",
              anchors: Iterable[int] | None = None, enumeration_cap: int = ENUMERATION_CAP,
              node_budget: int = NODE_BUDGET, h: IntMatrix | None = None):
    """Run the selected solver(s) on every anchor; returns (records, truncated)."""
    h = h if h is not None else build_h(net, ms)
    mc = MinCutSolver(net, ms, h, enumeration_cap)
    records = []
    truncated = False
    for a in (range(h.m) if anchors is None else anchors):
        rec = AnchorRecord(a, ms[a].describe(net))
        if solver in ("mincut", "both"):
            t0 = time.perf_counter()
            try:
                tup = mc.solve(a)
                rec.mincut_k, rec.mincut_rows = tup.cardinality, tup.sorted_rows()
                rec.refined = a in mc.refined
                rec.cut_k = mc.cut_cost(a)
            except Exception as exc:  # recorded per anchor, the sweep goes on
                rec.error = f"mincut: {exc}"
            rec.mincut_time = time.perf_counter() - t0
        if solver in ("exact", "both"):
            t0 = time.perf_counter()
            try:
                sol = solve_security_index(h, a, rec.mincut_k, node_budget=node_budget)
                rec.exact_k, rec.exact_rows = sol.cardinality, sorted(sol.support)
                rec.proved_optimal = sol.proved_optimal
                truncated |= not sol.proved_optimal
            except Exception as exc:
                rec.error = (rec.error + "; " if rec.error else "") + f"exact: {exc}"
            rec.exact_time = time.perf_counter() - t0
        records.append(rec)
    return records, truncated or mc.truncated


def run_sweep(cfg: ScenarioConfig) -> StatsReport:
    net, case_ms = load_case(cfg.case)
    ms0 = base_measurements(net, case_ms, cfg)
    if cfg.removal_fraction:
        removed, ms, draws = draw_scenario(net, ms0, cfg)
    else:
        if is_unobservable(build_h(net, ms0), ()):
            raise UnobservableScenario("the base measurement set is unobservable", 1)
        removed, ms, draws = [], ms0, 1
    records, truncated = solve_all(net, ms, cfg.solver, None, cfg.enumeration_cap,
                                   cfg.node_budget)
    return StatsReport(net.name or cfg.case, asdict(cfg), net.n, len(ms), removed, draws,
                       records, truncated)


@dataclass
class SweepPoint:
    """All ensemble runs at one removal fraction, with their mean aggregates."""

    fraction: float
    reports: list[StatsReport]
    aborted: list[str]

    def mean(self, key: str) -> float | None:
        vals = [getattr(r, key) for r in self.reports]
        vals = [v for v in vals if v is not None]
        return statistics.fmean(vals) if vals else None

    def to_dict(self, timing: bool = True) -> dict:
        keys = list(STAT_KEYS) + (list(TIME_KEYS) if timing else [])
        return {"fraction": self.fraction, "ensembles": len(self.reports),
                "aborted": self.aborted, "mean": {k: self.mean(k) for k in keys},
                "runs": [r.to_dict(timing) for r in self.reports]}


def removal_sweep(cfg: ScenarioConfig, fractions: Sequence[float],
                  ensembles: int = 5) -> list[SweepPoint]:
    out = []
    for f in fractions:
        if not 0 <= f <= 1:
            raise ValueError(f"fraction {f} outside [0, 1]")
        point = SweepPoint(f, [], [])
        for e in range(ensembles):
            try:
                point.reports.append(run_sweep(replace(cfg, removal_fraction=f, ensemble=e)))
            except UnobservableScenario as exc:
                point.aborted.append(str(exc))
        out.append(point)
    return out


def sweep_table_csv(points: Sequence[SweepPoint]) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    keys = list(STAT_KEYS) + list(TIME_KEYS)
    out.writerow(["fraction", "ensembles", "aborted"] + keys)
    for p in points:
        out.writerow([p.fraction, len(p.reports), len(p.aborted)]
                     + [_blank(p.mean(k)) for k in keys])
    return buf.getvalue()


@dataclass
class MembershipReport:
    case: str
    measurements: list[str]
    per_anchor: list[list[int]]  # tuple found for each anchor run, by anchor
    tuples: list[list[int]]  # distinct tuples, sorted

    @property
    def counts(self) -> list[int]:
        """Distinct tuples containing each measurement."""
        c = Counter(r for t in self.tuples for r in t)
        return [c[r] for r in range(len(self.measurements))]

    @property
    def run_counts(self) -> list[int]:
        """Anchor runs whose tuple contains each measurement."""
        c = Counter(r for t in self.per_anchor for r in t)
        return [c[r] for r in range(len(self.measurements))]

    def to_dict(self) -> dict:
        return {"case": self.case, "tuples_found": len(self.per_anchor),
                "distinct_tuples": len(self.tuples), "tuples": self.tuples,
                "per_anchor": self.per_anchor,
                "membership": [{"row": r, "measurement": d, "distinct": c, "runs": rc}
                               for r, (d, c, rc) in enumerate(
                                   zip(self.measurements, self.counts, self.run_counts))]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(["row", "measurement", "distinct_tuples", "anchor_runs"])
        for r, (d, c, rc) in enumerate(zip(self.measurements, self.counts, self.run_counts)):
            out.writerow([r, d, c, rc])
        return buf.getvalue()


def membership_report(case: str, solver: Literal["mincut", "exact"] = "mincut",
                      meters_per_line: int | None = None,
                      node_budget: int = NODE_BUDGET) -> MembershipReport:
    """Critical tuples found by solving for every anchor, and how often each row appears."""
    net, ms = load_case(case)
    if meters_per_line is not None:
        ms = full_metering(net, meters_per_line)
    h = build_h(net, ms)
    records, _ = solve_all(net, ms, solver, None, node_budget=node_budget, h=h)
    per_anchor = []
    for rec in records:
        rows = rec.mincut_rows if solver == "mincut" else rec.exact_rows
        if rows is None:
            continue
        if solver == "exact":
            rows = refine_to_critical(h, rows, rec.anchor, "exact").sorted_rows()
        else:
            verify_critical(h, rows, rec.anchor, solver)
        per_anchor.append(rows)
    distinct = sorted({tuple(t) for t in per_anchor})
    return MembershipReport(net.name or case, [e.describe(net) for e in ms], per_anchor,
                            [list(t) for t in distinct])


def timing_report(cases: Sequence[str], solvers: Sequence[str] = ("mincut",),
                  meters_per_line: int | None = 2,
                  node_budget: int = NODE_BUDGET) -> list[dict]:
    """Wall time per case and solver over all anchors."""
    table = []
    for case in cases:
        net, ms = load_case(case)
        if meters_per_line is not None:
            ms = full_metering(net, meters_per_line)
        h = build_h(net, ms)
        row: dict = {"case": net.name or case, "n": net.n, "m": h.m}
        for s in solvers:
            if s not in ("mincut", "exact"):
                raise ValueError(f"unknown solver {s!r}")
            t0 = time.perf_counter()
            records, truncated = solve_all(net, ms, s, None, node_budget=node_budget, h=h)
            row[f"{s}_seconds"] = time.perf_counter() - t0
            row[f"{s}_failures"] = sum(r.error is not None for r in records)
            row[f"{s}_truncated"] = truncated
        table.append(row)
    return table
