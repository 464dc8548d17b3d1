"""Min-Cut approximation of the sparsest critical tuple.

Each line gets the modified weight ``wtilde = w + v_i + v_j`` so that the
injection meters of a line's endpoints travel with the line. An s-t minimum
cut under these weights is a cheap surrogate for the true removal count
``delta(S) + delta_inj(S)``: it overcounts an injection meter once for every
extra cut line at the same bus. All minimum cuts are enumerated from the
residual graph of one max-flow, re-scored by their true cost, and the best
one is refined to a critical tuple that still contains the anchor.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Iterator

from .jacobian import IntMatrix, build_h
from .maxflow import FlowNetwork
from .netmodel import MeasurementSet, MeterWeights, Network, meter_weights
from .observability import CriticalTuple, RefinementFailure, refine_to_critical

ENUMERATION_CAP = 10_000


@dataclass(frozen=True)
class CutSolution:
    s_side: frozenset[int]
    cut_lines: tuple[int, ...]
    removed_measurements: frozenset[int]
    true_cost: int
    modified_cost: int

    def to_dict(self) -> dict:
        return {
            "s_side": sorted(self.s_side),
            "cut_lines": list(self.cut_lines),
            "removed_measurements": sorted(self.removed_measurements),
            "true_cost": self.true_cost,
            "modified_cost": self.modified_cost,
        }


@dataclass
class MinCuts:
    """All minimum s-t cuts found, in enumeration order."""

    value: int
    cuts: list[CutSolution] = field(default_factory=list)
    truncated: bool = False

    def __iter__(self) -> Iterator[CutSolution]:
        return iter(self.cuts)

    def __len__(self) -> int:
        return len(self.cuts)


class _Rows:
    """Measurement rows grouped by line and by bus."""

    def __init__(self, net: Network, ms: MeasurementSet | None):
        self.by_line: list[list[int]] = [[] for _ in net.lines]
        self.by_bus: list[list[int]] = [[] for _ in range(net.n + 1)]
        if ms is not None:
            for r, e in enumerate(ms):
                (self.by_line[e.ref] if e.is_flow else self.by_bus[e.ref]).append(r)


def cut_solution(net: Network, weights: MeterWeights, s_side, ms: MeasurementSet | None = None,
                 rows: _Rows | None = None) -> CutSolution:
    s_side = frozenset(s_side)
    cut = tuple(k for k, (i, j) in enumerate(net.lines) if (i in s_side) != (j in s_side))
    boundary = sorted({b for k in cut for b in net.lines[k]})
    true_cost = sum(weights.w[k] for k in cut) + sum(weights.bus(b) for b in boundary)
    modified = sum(weights.wtilde[k] for k in cut)
    removed: frozenset[int] = frozenset()
    if ms is not None:
        rows = rows or _Rows(net, ms)
        removed = frozenset(r for k in cut for r in rows.by_line[k]) | frozenset(
            r for b in boundary for r in rows.by_bus[b])
    return CutSolution(s_side, cut, removed, true_cost, modified)


def _merged_flow(net: Network, weights: MeterWeights) -> tuple[FlowNetwork, dict]:
    cap: dict[tuple[int, int], int] = {}
    for k, (i, j) in enumerate(net.lines):
        key = (min(i, j), max(i, j))
        cap[key] = cap.get(key, 0) + weights.wtilde[k]
    g = FlowNetwork(net.n + 1)
    for (i, j), c in cap.items():
        g.add_edge(i, j, c, c)
    return g, cap


def _check_pair(net: Network, s: int, t: int) -> None:
    if s == t:
        raise ValueError("s and t must differ")
    for b in (s, t):
        if not 1 <= b <= net.n:
            raise KeyError(f"unknown bus {b}")


def min_cut(net: Network, weights: MeterWeights, s: int, t: int,
            ms: MeasurementSet | None = None) -> tuple[int, CutSolution]:
    """Minimum modified-weight s-t cut; the returned S is the source side of the residual graph."""
    _check_pair(net, s, t)
    g, _ = _merged_flow(net, weights)
    value = g.max_flow(s, t)
    return value, cut_solution(net, weights, g.reachable(s), ms)


def _scc(nodes: list[int], succ: dict[int, list[int]]) -> dict[int, int]:
    """Tarjan's strongly connected components (iterative); node -> component id."""
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    comp: dict[int, int] = {}
    stack: list[int] = []
    on: set[int] = set()
    counter = 0
    ncomp = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on.add(root)
        while work:
            u, i = work[-1]
            nbrs = succ.get(u, ())
            if i < len(nbrs):
                work[-1] = (u, i + 1)
                v = nbrs[i]
                if v not in index:
                    index[v] = low[v] = counter
                    counter += 1
                    stack.append(v)
                    on.add(v)
                    work.append((v, 0))
                elif v in on:
                    low[u] = min(low[u], index[v])
                continue
            work.pop()
            if work:
                p = work[-1][0]
                low[p] = min(low[p], low[u])
            if low[u] == index[u]:
                while True:
                    x = stack.pop()
                    on.discard(x)
                    comp[x] = ncomp
                    if x == u:
                        break
                ncomp += 1
    return comp


def _closed_sets(order: list[int], succ: dict[int, set[int]], cap: int):
    """Yield every successor-closed subset of a DAG given in reverse topological order."""
    chosen: list[bool] = [False] * len(order)
    pos = {c: k for k, c in enumerate(order)}
    emitted = 0

    def rec(k: int):
        nonlocal emitted
        if emitted >= cap:
            return
        if k == len(order):
            emitted += 1
            yield [order[i] for i in range(len(order)) if chosen[i]]
            return
        c = order[k]
        if all(chosen[pos[d]] for d in succ[c]):
            chosen[k] = True
            yield from rec(k + 1)
            chosen[k] = False
        yield from rec(k + 1)

    yield from rec(0)


def enumerate_min_cuts(net: Network, weights: MeterWeights, s: int, t: int,
                       cap: int = ENUMERATION_CAP, ms: MeasurementSet | None = None) -> MinCuts:
    """Every minimum s-t cut, via closed sets of the condensed residual graph.

    After a maximum flow, a set S with s in S and t outside is a minimum cut
    exactly when no residual arc leaves S. Nodes reachable from s are always
    in S and nodes that reach t never are; the rest collapse into strongly
    connected components whose successor-closed unions give the other cuts.
    """
    if cap < 1:
        raise ValueError("cap must be at least 1")
    _check_pair(net, s, t)
    g, _ = _merged_flow(net, weights)
    value = g.max_flow(s, t)
    succ: dict[int, list[int]] = {}
    pred: dict[int, list[int]] = {}
    for u, v in g.residual_arcs():
        succ.setdefault(u, []).append(v)
        pred.setdefault(v, []).append(u)
    source = g.reachable(s)
    sink = {t}
    todo = [t]
    while todo:
        u = todo.pop()
        for p in pred.get(u, ()):
            if p not in sink:
                sink.add(p)
                todo.append(p)
    free = [b for b in net.buses if b not in source and b not in sink]
    free_set = set(free)
    sub = {u: [v for v in succ.get(u, ()) if v in free_set] for u in free}
    comp = _scc(free, sub)
    members: dict[int, list[int]] = {}
    for b in free:
        members.setdefault(comp[b], []).append(b)
    dag: dict[int, set[int]] = {c: set() for c in members}
    for u in free:
        for v in sub[u]:
            if comp[u] != comp[v]:
                dag[comp[u]].add(comp[v])
    # Tarjan numbers components in reverse topological order: successors first.
    order = sorted(members)
    rows = _Rows(net, ms) if ms is not None else None
    out = MinCuts(value)
    limit = sys.getrecursionlimit()
    if len(order) + 50 > limit:
        sys.setrecursionlimit(len(order) + 100)
    for chosen in _closed_sets(order, dag, cap + 1):
        if len(out.cuts) >= cap:
            out.truncated = True
            break
        side = set(source)
        for c in chosen:
            side.update(members[c])
        out.cuts.append(cut_solution(net, weights, side, ms, rows))
    return out


class MinCutSolver:
    """Algorithms 1 and 2 over one measurement configuration, caching cuts per bus pair."""

    def __init__(self, net: Network, ms: MeasurementSet, h: IntMatrix | None = None,
                 cap: int = ENUMERATION_CAP):
        self.net = net
        self.ms = ms
        self.h = h if h is not None else build_h(net, ms)
        self.weights = meter_weights(net, ms)
        self.cap = cap
        self.truncated = False
        self.refined: set[int] = set()  # anchors whose winning cut needed shrinking
        self._ranked: dict[tuple[int, int], list[CutSolution]] = {}

    def ranked_cuts(self, s: int, t: int) -> list[CutSolution]:
        """Minimum modified-cost cuts ordered by (true cost, removed set)."""
        key = (min(s, t), max(s, t))
        if key not in self._ranked:
            cuts = enumerate_min_cuts(self.net, self.weights, key[0], key[1], self.cap, self.ms)
            self.truncated |= cuts.truncated
            self._ranked[key] = sorted(
                cuts, key=lambda c: (c.true_cost, sorted(c.removed_measurements)))
        return self._ranked[key]

    def _best_for_pair(self, s: int, t: int, anchor: int) -> tuple[CriticalTuple, bool]:
        for cut in self.ranked_cuts(s, t):
            if anchor not in cut.removed_measurements:
                continue
            try:
                tup = refine_to_critical(self.h, cut.removed_measurements, anchor, "mincut")
            except RefinementFailure:
                continue
            return tup, tup.rows != cut.removed_measurements
        raise RefinementFailure(f"no minimum cut between buses {s} and {t} yields a tuple "
                                f"containing row {anchor}")

    def algorithm1(self, flow_row: int) -> CriticalTuple:
        e = self.ms[flow_row]
        if not e.is_flow:
            raise ValueError(f"row {flow_row} is not a flow measurement")
        s, t = self.net.lines[e.ref]
        return self._record(flow_row, [self._best_for_pair(s, t, flow_row)])

    def _record(self, anchor: int, found) -> CriticalTuple:
        tup, shrunk = min(found, key=lambda f: (f[0].cardinality, f[0].sorted_rows()))
        if shrunk:
            self.refined.add(anchor)
        return tup

    def algorithm2(self, inj_row: int) -> CriticalTuple:
        e = self.ms[inj_row]
        if e.is_flow:
            raise ValueError(f"row {inj_row} is not an injection measurement")
        found = []
        for j in self.net.neighbors(e.ref):
            try:
                found.append(self._best_for_pair(e.ref, j, inj_row))
            except RefinementFailure:
                continue
        if not found:
            raise RefinementFailure(f"no incident line of bus {e.ref} yields a tuple "
                                    f"containing row {inj_row}")
        return self._record(inj_row, found)

    def solve(self, row: int) -> CriticalTuple:
        return self.algorithm1(row) if self.ms[row].is_flow else self.algorithm2(row)

    def cut_cost(self, row: int) -> int:
        """Size of the best cut's measurement set before it is shrunk to a critical tuple.

        Every cut between the ends of a line removes that line and its end
        injections, so the cheapest ranked cut of each candidate pair always
        contains the anchor.
        """
        e = self.ms[row]
        if e.is_flow:
            pairs = [self.net.lines[e.ref]]
        else:
            pairs = [(e.ref, j) for j in self.net.neighbors(e.ref)]
        return min(self.ranked_cuts(s, t)[0].true_cost for s, t in pairs)


def algorithm1(net: Network, ms: MeasurementSet, h: IntMatrix, flow_row: int,
               cap: int = ENUMERATION_CAP) -> CriticalTuple:
    return MinCutSolver(net, ms, h, cap).algorithm1(flow_row)


def algorithm2(net: Network, ms: MeasurementSet, h: IntMatrix, inj_row: int,
               cap: int = ENUMERATION_CAP) -> CriticalTuple:
    return MinCutSolver(net, ms, h, cap).algorithm2(inj_row)
