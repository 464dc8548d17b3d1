"""Exact minimum of card(H theta) subject to H(anchor, :) theta = 1.

The optimum support is the sparsest critical tuple containing the anchor.
The search branches over classes of parallel rows, fixing each class to be
zero (Z) or nonzero (F) under theta. Feasibility and forced zeros come from
an integer basis of the null space of H(Z, :), updated one row at a time.

Bounding uses the network structure recovered from H. Let C be the lines
whose end angles differ. For any threshold between the angles of a pair that
must be separated, the buses above the threshold form a set S with
delta(S) inside C, so the flow meters on delta(S) are lost. A bus on the
boundary of S whose injection still reads zero needs another line in C
leading further away from the threshold. That line is outside delta(S),
and it leads away from only one of its ends, so no two buses share it.
Charging each such bus its cheapest candidate line gives a valid lower
bound as a minimum s-t cut in a hypergraph with one hyperedge per bus
neighbourhood.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import count
from typing import Iterable, Sequence

from .jacobian import IntMatrix
from .maxflow import FlowNetwork
from .observability import CriticalTuple, refine_to_critical

NODE_BUDGET = 10_000_000

UNDECIDED, ZERO, NONZERO = 0, 1, 2


class InfeasibleAnchorError(ValueError):
    """The anchor row is zero, or it is protected."""


class InfeasibleError(ValueError):
    """No theta meets the anchor and protection constraints."""


@dataclass(frozen=True)
class SecurityIndexSolution:
    theta: tuple[Fraction, ...]
    support: frozenset[int]
    anchor: int
    proved_optimal: bool = True
    nodes: int = 0

    @property
    def cardinality(self) -> int:
        return len(self.support)

    def to_dict(self) -> dict:
        return {
            "anchor": self.anchor,
            "cardinality": self.cardinality,
            "support": sorted(self.support),
            "theta": [str(x) for x in self.theta],
            "proved_optimal": self.proved_optimal,
        }

    def to_critical(self, h: IntMatrix) -> CriticalTuple:
        return refine_to_critical(h, self.support, self.anchor, "exact")


class _Kernel:
    """Integer basis B of {theta : H(Z, :) theta = 0} together with H B."""

    __slots__ = ("basis", "values")

    def __init__(self, basis: tuple, values: tuple):
        self.basis = basis
        self.values = values

    @classmethod
    def full(cls, h: IntMatrix) -> "_Kernel":
        basis = tuple(tuple(int(c == k) for c in range(h.n)) for k in range(h.n))
        values = tuple(tuple(row[k] for row in h.rows) for k in range(h.n))
        return cls(basis, values)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def zero(self, r: int) -> bool:
        return not any(col[r] for col in self.values)

    def restrict(self, r: int) -> "_Kernel":
        a = [col[r] for col in self.values]
        nz = [k for k, x in enumerate(a) if x]
        if not nz:
            return self
        k = min(nz, key=lambda j: (abs(a[j]), j))
        ak, bk, vk = a[k], self.basis[k], self.values[k]
        basis, values = [], []
        for j, (b, v) in enumerate(zip(self.basis, self.values)):
            if j == k:
                continue
            aj = a[j]
            if aj:
                b = [ak * x - aj * y for x, y in zip(b, bk)]
                v = [ak * x - aj * y for x, y in zip(v, vk)]
                g = math.gcd(*b)
                if g > 1:
                    b = [x // g for x in b]
                    v = [x // g for x in v]
                b, v = tuple(b), tuple(v)
            basis.append(b)
            values.append(v)
        return _Kernel(tuple(basis), tuple(values))

    def functional(self, r: int) -> tuple[int, ...]:
        """Row r restricted to the kernel, scaled to a primitive vector with positive lead."""
        vec = [col[r] for col in self.values]
        g = math.gcd(*vec)
        if g == 0:
            return tuple(vec)
        lead = next(x for x in vec if x)
        if lead < 0:
            g = -g
        return tuple(x // g for x in vec)


def _primitive(sparse) -> tuple:
    g = math.gcd(*(x for _, x in sparse))
    if sparse and sparse[0][1] < 0:
        g = -g
    return tuple((c, x // g) for c, x in sparse)


@dataclass
class _Class:
    rows: list[int]
    kind: str  # "pair", "bus" or "other"
    ends: tuple[int, int] = (-1, -1)  # 0-based buses of a pair
    bus: int = -1  # 0-based center of an injection row

    @property
    def weight(self) -> int:
        return len(self.rows)

    @property
    def rep(self) -> int:
        return self.rows[0]


class _Structure:
    """Row classes and the graph they induce."""

    def __init__(self, h: IntMatrix):
        self.h = h
        groups: dict[tuple, list[int]] = {}
        for r, sp in enumerate(h.sparse):
            if sp:
                groups.setdefault(_primitive(sp), []).append(r)
        self.zero_rows = [r for r, sp in enumerate(h.sparse) if not sp]
        self.classes: list[_Class] = []
        self.of_row = [-1] * h.m
        self.adj: list[set[int]] = [set() for _ in range(h.n)]
        self.pair_class: dict[tuple[int, int], int] = {}
        self.bus_class: dict[int, int] = {}
        for key, rows in groups.items():
            cid = len(self.classes)
            cls = _Class(rows, "other")
            pos = [c for c, x in key if x > 0]
            neg = [c for c, x in key if x < 0]
            if sum(x for _, x in key) == 0:
                if len(key) == 2 and abs(key[0][1]) == 1:
                    cls.kind, cls.ends = "pair", (key[0][0], key[1][0])
                elif len(pos) == 1 or len(neg) == 1:
                    cls.kind = "bus"
                    cls.bus = pos[0] if len(pos) == 1 else neg[0]
            self.classes.append(cls)
            for r in rows:
                self.of_row[r] = cid
        for cid, cls in enumerate(self.classes):
            if cls.kind == "pair":
                i, j = cls.ends
                self.pair_class[(min(i, j), max(i, j))] = cid
                self.adj[i].add(j)
                self.adj[j].add(i)
            elif cls.kind == "bus":
                self.bus_class[cls.bus] = cid
                for c, _ in h.sparse[cls.rep]:
                    if c != cls.bus:
                        self.adj[cls.bus].add(c)
                        self.adj[c].add(cls.bus)
        self.pairs = sorted({(min(i, j), max(i, j)) for i in range(h.n) for j in self.adj[i]})

    def class_weight(self, cid: int) -> int:
        return self.classes[cid].weight


def _default_order(st: _Structure) -> list[int]:
    """Heavier rows first: modified line weight for flows, degree for injections."""
    h = st.h

    def vbus(b: int) -> int:
        cid = st.bus_class.get(b)
        return st.classes[cid].weight if cid is not None else 0

    key = []
    for r in range(h.m):
        cls = st.classes[st.of_row[r]] if st.of_row[r] >= 0 else None
        if cls is None:
            k = 0
        elif cls.kind == "pair":
            i, j = cls.ends
            k = cls.weight + vbus(i) + vbus(j)
        elif cls.kind == "bus":
            k = len(st.adj[cls.bus])
        else:
            k = len(h.sparse[r])
        key.append((-k, r))
    return [r for _, r in sorted(key)]


class _Search:
    def __init__(self, h: IntMatrix, anchor: int, order: Sequence[int] | None,
                 protected: Iterable[int], hint: int | None, budget: int):
        self.h = h
        self.st = st = _Structure(h)
        self.anchor = anchor
        self.budget = budget
        self.nodes = 0
        order = list(order) if order is not None else _default_order(st)
        if sorted(order) != list(range(h.m)):
            raise ValueError("order must be a permutation of the row indices")
        pos = {r: k for k, r in enumerate(order)}
        self.cpos = [min(pos[r] for r in c.rows) for c in st.classes]
        self.acls = st.of_row[anchor]
        self.best = (hint + 1) if hint is not None else h.m + 1
        self.best_sol: tuple | None = None  # ("theta", vec) or ("zero", rows)

        status = [UNDECIDED] * len(st.classes)
        status[self.acls] = NONZERO
        kern = _Kernel.full(h)
        for r in protected:
            cid = st.of_row[r]
            if cid < 0:
                continue
            if cid == self.acls:
                raise InfeasibleError(f"protected row {r} is parallel to the anchor")
            status[cid] = ZERO
            kern = kern.restrict(st.classes[cid].rep)
        self.root = (status, kern)
        common = kern
        for c in st.classes:
            common = common.restrict(c.rep)
        self.d0 = common.dim

    # -- bounding ---------------------------------------------------------------

    def _components(self, kern: _Kernel) -> list[int]:
        seen: dict[tuple, int] = {}
        comp = []
        basis = kern.basis
        for b in range(self.h.n):
            key = tuple(col[b] for col in basis)
            comp.append(seen.setdefault(key, len(seen)))
        return comp

    def _separations(self, comp: list[int]) -> list[tuple[int, int]]:
        cls = self.st.classes[self.acls]
        if cls.kind == "pair":
            i, j = cls.ends
            return [(comp[i], comp[j])] if comp[i] != comp[j] else []
        if cls.kind == "bus":
            b = cls.bus
            out = []
            for x in sorted(self.st.adj[b]):
                if comp[x] != comp[b] and (comp[b], comp[x]) not in out:
                    out.append((comp[b], comp[x]))
            return out
        return []

    def _cut(self, status, comp, sep, charges: bool, limit):
        """Hypergraph s-t cut; capacities doubled. Returns (value, source comps, boundary)."""
        st = self.st
        ncomp = max(comp) + 1
        s, t = sep
        wu: dict[tuple[int, int], int] = {}
        for p in st.pairs:
            i, j = p
            if comp[i] == comp[j]:
                continue
            cid = st.pair_class.get(p)
            wu[p] = st.classes[cid].weight if cid is not None and status[cid] == UNDECIDED else 0
        need = [False] * self.h.n
        vu = [0] * self.h.n
        for b, cid in st.bus_class.items():
            if status[cid] == ZERO:
                need[b] = True
            elif status[cid] == UNDECIDED:
                need[b] = True
                vu[b] = st.classes[cid].weight
        tb = [0] * self.h.n
        inf = 2 * (sum(wu.values()) + sum(vu)) + 1
        for b in range(self.h.n):
            if not need[b]:
                continue
            if not charges:
                tb[b] = 2 * vu[b]
                continue
            c2 = inf
            for x in st.adj[b]:
                if comp[x] == comp[b] or {comp[b], comp[x]} == {s, t}:
                    continue
                w = wu[(min(b, x), max(b, x))]
                c2 = min(c2, 2 * w)
            tb[b] = c2 if vu[b] == 0 else min(2 * vu[b], c2)

        g = FlowNetwork(ncomp)
        arcs: dict[tuple[int, int], int] = {}
        for (i, j), w in wu.items():
            if w:
                a, b = sorted((comp[i], comp[j]))
                arcs[(a, b)] = arcs.get((a, b), 0) + 2 * w
        for (a, b), c in arcs.items():
            g.add_edge(a, b, c, c)
        for b in range(self.h.n):
            if not tb[b]:
                continue
            members = {comp[b]} | {comp[x] for x in st.adj[b]}
            if len(members) < 2:
                continue
            e_in = len(g.head)
            g.head += [[], []]
            g.n += 2
            g.add_edge(e_in, e_in + 1, tb[b])
            for u in members:
                g.add_edge(u, e_in, inf)
                g.add_edge(e_in + 1, u, inf)
        value = g.max_flow(s, t, limit)
        if value >= limit:
            return value, None, None
        side = {u for u in g.reachable(s) if u < ncomp}
        return value, side, inf

    def _bound(self, status, comp, fixed: int):
        """Lower bound on the node, plus the cut achieving it (or None)."""
        seps = self._separations(comp)
        if not seps:
            return fixed, None
        limit = 2 * (self.best - fixed)
        best_val, best_side = None, None
        for sep in seps:
            value, side, inf = self._cut(status, comp, sep, True, limit)
            if side is not None and value >= inf:
                continue
            if best_val is None or value < best_val:
                best_val, best_side = value, side
                limit = min(limit, value + 1)
        if best_val is None:
            return self.best, None  # every separation infeasible or above incumbent
        return fixed + (best_val + 1) // 2, best_side

    # -- incumbents -------------------------------------------------------------

    def _offer_theta(self, theta: list[int]) -> None:
        h = self.h
        if not h.dot(self.anchor, theta):
            return
        k = sum(1 for r in range(h.m) if h.dot(r, theta))
        if k < self.best:
            self.best = k
            self.best_sol = ("theta", tuple(theta))

    def _offer_cut(self, comp: list[int], side) -> None:
        if side is not None:
            self._offer_theta([1 if comp[b] in side else 0 for b in range(self.h.n)])

    def _offer_zero(self, cost: int, zero_rows) -> None:
        if cost < self.best:
            self.best = cost
            self.best_sol = ("zero", frozenset(zero_rows))

    # -- search -----------------------------------------------------------------

    def _close(self, status, kern):
        """Move classes forced to zero by the kernel into Z; None if infeasible."""
        status = list(status)
        for cid, c in enumerate(self.st.classes):
            if status[cid] != ZERO and kern.zero(c.rep):
                if status[cid] == NONZERO:
                    return None
                status[cid] = ZERO
        return status

    def _zero_rows(self, status) -> list[int]:
        rows = list(self.st.zero_rows)
        for cid, c in enumerate(self.st.classes):
            if status[cid] == ZERO:
                rows += c.rows
        return rows

    def _family(self, status, kern) -> None:
        """Kernel of dimension d0 + 2 at most: pick the best extra zero pattern directly."""
        st = self.st
        groups: dict[tuple, list[int]] = {}
        nonzero = 0
        for cid, c in enumerate(st.classes):
            if status[cid] == ZERO:
                continue
            nonzero += c.weight
            groups.setdefault(kern.functional(c.rep), []).append(cid)
        gain, pick = 0, None
        for cids in groups.values():
            if any(status[c] == NONZERO for c in cids):
                continue
            w = sum(st.classes[c].weight for c in cids)
            if w > gain:
                gain, pick = w, cids
        zero = self._zero_rows(status)
        if pick is not None:
            zero += [r for c in pick for r in st.classes[c].rows]
        self._offer_zero(nonzero - gain, zero)

    def _choose(self, status, comp, side) -> int | None:
        st = self.st
        und = [cid for cid in range(len(st.classes)) if status[cid] == UNDECIDED]
        if not und:
            return None
        pos = self.cpos
        if side is None:
            return min(und, key=lambda c: pos[c])
        ins = [comp[b] in side for b in range(self.h.n)]
        boundary = {b for b in range(self.h.n) if any(ins[x] != ins[b] for x in st.adj[b])}

        def first(cands):
            cands = [c for c in cands if status[c] == UNDECIDED]
            return min(cands, key=lambda c: pos[c]) if cands else None

        pick = first(st.bus_class[b] for b in boundary if b in st.bus_class)
        if pick is not None:
            return pick
        zb = [b for b in boundary if b in st.bus_class and status[st.bus_class[b]] == ZERO]
        esc = [st.pair_class[(min(b, x), max(b, x))] for b in zb for x in st.adj[b]
               if ins[x] == ins[b] and comp[x] != comp[b]
               and (min(b, x), max(b, x)) in st.pair_class]
        pick = first(esc)
        if pick is not None:
            return pick
        cut = [cid for p, cid in st.pair_class.items() if ins[p[0]] != ins[p[1]]]
        pick = first(cut)
        if pick is not None:
            return pick
        touch = [cid for cid in und if any(
            c in boundary for c, _ in self.h.sparse[st.classes[cid].rep])]
        pick = first(touch)
        return pick if pick is not None else min(und, key=lambda c: pos[c])

    def run(self) -> bool:
        """Depth-first search; returns True when the tree was exhausted."""
        st = self.st
        status, kern = self.root
        if kern.zero(self.anchor):
            raise InfeasibleError("the anchor row lies in the span of the protected rows")
        # starting points: the best two-level split ignoring cancellations
        comp0 = self._components(kern)
        for sep in self._separations(comp0):
            _, side, _ = self._cut(status, comp0, sep, False, float("inf"))
            self._offer_cut(comp0, side)

        stack = [(status, kern)]
        while stack:
            if self.nodes >= self.budget:
                return False
            self.nodes += 1
            status, kern = stack.pop()
            status = self._close(status, kern)
            if status is None:
                continue
            fixed = sum(st.classes[c].weight for c in range(len(status)) if status[c] == NONZERO)
            if fixed >= self.best:
                continue
            open_weight = sum(st.classes[c].weight for c in range(len(status))
                              if status[c] != ZERO)
            if kern.dim <= self.d0 + 2:
                self._family(status, kern)
                continue
            self._offer_zero(open_weight, self._zero_rows(status))
            comp = self._components(kern)
            lb, side = self._bound(status, comp, fixed)
            if lb >= self.best:
                continue
            self._offer_cut(comp, side)
            if lb >= self.best:
                continue
            cid = self._choose(status, comp, side)
            if cid is None:
                continue
            nz = list(status)
            nz[cid] = NONZERO
            z = list(status)
            z[cid] = ZERO
            stack.append((nz, kern))
            stack.append((z, kern.restrict(st.classes[cid].rep)))
        return True


def _theta_for_zero_set(h: IntMatrix, zero_rows, anchor: int) -> tuple[Fraction, ...]:
    """A theta vanishing exactly on the span of ``zero_rows`` (generic within the kernel)."""
    kern = _Kernel.full(h)
    for r in zero_rows:
        kern = kern.restrict(r)
    live = [r for r in range(h.m) if not kern.zero(r)]
    for c in count(1):
        x = [c ** k for k in range(kern.dim)]
        if all(sum(xk * col[r] for xk, col in zip(x, kern.values)) for r in live):
            return tuple(sum(xk * col[b] for xk, col in zip(x, kern.basis)) for b in range(h.n))
    raise AssertionError("unreachable")


def _scaled(h: IntMatrix, theta, anchor: int) -> tuple[Fraction, ...]:
    a = h.dot(anchor, theta)
    return tuple(Fraction(x) / a for x in theta)


def solve_security_index(h: IntMatrix, anchor: int, incumbent_hint: int | None = None, *,
                         protected: Iterable[int] = (), order: Sequence[int] | None = None,
                         node_budget: int = NODE_BUDGET) -> SecurityIndexSolution:
    """Minimum-cardinality ``H theta`` with ``H(anchor, :) theta = 1``.

    ``incumbent_hint`` is a known achievable cardinality (for instance from
    Min-Cut); only solutions no larger than it are searched for. Rows in
    ``protected`` are held at zero. ``order`` is a row permutation used to
    break ties when choosing the branching row; it does not change the
    optimum.
    """
    if not 0 <= anchor < h.m:
        raise IndexError(f"anchor {anchor} out of range")
    if not any(h.rows[anchor]):
        raise InfeasibleAnchorError(f"row {anchor} is zero")
    protected = set(protected)
    if anchor in protected:
        raise InfeasibleAnchorError("the anchor cannot be protected")
    if any(not 0 <= r < h.m for r in protected):
        raise IndexError("protected row out of range")
    search = _Search(h, anchor, order, protected, incumbent_hint, node_budget)
    done = search.run()
    if search.best_sol is None:
        if incumbent_hint is not None and done:
            raise ValueError(f"no solution with cardinality at most {incumbent_hint}")
        raise InfeasibleError("no feasible theta found")
    kind, data = search.best_sol
    if kind == "theta":
        theta = _scaled(h, data, anchor)
    else:
        theta = _scaled(h, _theta_for_zero_set(h, data, anchor), anchor)
    support = frozenset(r for r in range(h.m) if h.dot(r, theta))
    assert len(support) == search.best and anchor in support
    return SecurityIndexSolution(theta, support, anchor, done, search.nodes)
