"""Integer DC measurement Jacobian and exact rank / null-space primitives.

Susceptances are fixed at one, so every entry of ``H`` is a small integer
and all rank decisions are made exactly, without pivot tolerances.

Rows of ``H`` that are plain edge rows (``e_i - e_j``) span the zero-sum
vectors on each connected component of the graph they form. Rank and null
space computations therefore contract those components first and only run
elimination on the remaining rows aggregated per component, which keeps the
integer matrices small on realistic cases.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

from .netmodel import MeasurementSet, Network

RowIndexSet = frozenset


@dataclass(frozen=True)
class IntMatrix:
    rows: tuple[tuple[int, ...], ...]
    n: int

    @property
    def m(self) -> int:
        return len(self.rows)

    @cached_property
    def sparse(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        return tuple(tuple((c, x) for c, x in enumerate(r) if x) for r in self.rows)

    @cached_property
    def edges(self) -> tuple[tuple[int, int] | None, ...]:
        """``(i, j)`` for rows equal to ``e_i - e_j`` (0-based), else None."""
        out = []
        for sp in self.sparse:
            if len(sp) == 2 and sp[0][1] + sp[1][1] == 0 and abs(sp[0][1]) == 1:
                out.append((sp[0][0], sp[1][0]))
            else:
                out.append(None)
        return tuple(out)

    @cached_property
    def zero_sum(self) -> bool:
        return all(sum(r) == 0 for r in self.rows)

    def row(self, r: int) -> tuple[int, ...]:
        return self.rows[r]

    def dot(self, r: int, theta: Sequence) -> Fraction | int:
        return sum(x * theta[c] for c, x in self.sparse[r])

    def apply(self, theta: Sequence) -> list:
        return [self.dot(r, theta) for r in range(self.m)]

    def complement(self, rows: Iterable[int]) -> list[int]:
        drop = set(rows)
        return [r for r in range(self.m) if r not in drop]


def build_h(net: Network, ms: MeasurementSet) -> IntMatrix:
    n = net.n
    rows = []
    for e in ms:
        row = [0] * n
        if e.is_flow:
            i, j = net.lines[e.ref]
            row[i - 1] += 1
            row[j - 1] -= 1
        else:
            b = e.ref
            for k in net.incident(b):
                row[b - 1] += 1
                row[net.other_end(k, b) - 1] -= 1
        rows.append(tuple(row))
    return IntMatrix(tuple(rows), n)


def bareiss_rank(rows: Sequence[Sequence[int]]) -> int:
    """Rank of an integer matrix by fraction-free elimination."""
    a = [list(r) for r in rows if any(r)]
    if not a:
        return 0
    ncols = len(a[0])
    rank = 0
    prev = 1
    for col in range(ncols):
        piv = next((r for r in range(rank, len(a)) if a[r][col]), None)
        if piv is None:
            continue
        a[rank], a[piv] = a[piv], a[rank]
        p = a[rank][col]
        for r in range(rank + 1, len(a)):
            f = a[r][col]
            row, top = a[r], a[rank]
            for c in range(col + 1, ncols):
                row[c] = (p * row[c] - f * top[c]) // prev
            row[col] = 0
        prev = p
        rank += 1
        if rank == len(a):
            break
    return rank


class _Components:
    """Union-find over columns, contracted by the edge rows of a row subset."""

    __slots__ = ("parent", "count")

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.count = n

    def find(self, x: int) -> int:
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        self.count -= 1
        return True


def _reduce(mat: IntMatrix, rows: Iterable[int]):
    """Contract edge rows; return (components, root -> slot, aggregated rows)."""
    comp = _Components(mat.n)
    parent = comp.parent
    other = []
    edges = mat.edges
    merged = 0
    for r in rows:
        e = edges[r]
        if e is None:
            other.append(r)
            continue
        a, b = e
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a != b:
            parent[a] = b
            merged += 1
    comp.count -= merged
    slot: dict[int, int] = {}
    for c in range(mat.n):
        root = comp.find(c)
        if root not in slot:
            slot[root] = len(slot)
    agg = []
    for r in other:
        acc: dict[int, int] = {}
        for c, x in mat.sparse[r]:
            s = slot[comp.find(c)]
            acc[s] = acc.get(s, 0) + x
        vec = [0] * len(slot)
        nz = False
        for s, x in acc.items():
            if x:
                vec[s] = x
                nz = True
        if nz:
            agg.append(vec)
    return comp, slot, agg


def row_rank(mat: IntMatrix, rows: Iterable[int]) -> int:
    """Exact rank of ``H(rows, :)``."""
    comp, slot, agg = _reduce(mat, rows)
    return (mat.n - comp.count) + bareiss_rank(agg)


def rank_exact(mat: IntMatrix, drop_rows: Iterable[int] = (), drop_col: int = 1,
               method: str = "auto") -> int:
    """Rank of ``H`` without ``drop_rows`` and without the reference bus column.

    ``drop_col`` is a 1-based bus id. With ``method="bareiss"`` the explicit
    submatrix is eliminated directly; ``"auto"`` uses the contracted form when
    every row sums to zero, where deleting one column cannot change the rank.
    """
    if not 1 <= drop_col <= mat.n:
        raise IndexError(f"reference column {drop_col} out of range")
    keep = mat.complement(drop_rows)
    if method == "auto" and mat.zero_sum:
        return row_rank(mat, keep)
    j = drop_col - 1
    return bareiss_rank([r[:j] + r[j + 1:] for r in (mat.rows[k] for k in keep)])


def rational_null_space(rows: Sequence[Sequence], ncols: int) -> list[list[Fraction]]:
    """Basis of the right null space from the reduced row echelon form."""
    a = [[Fraction(x) for x in r] for r in rows]
    pivots: list[int] = []
    r = 0
    for col in range(ncols):
        piv = next((k for k in range(r, len(a)) if a[k][col]), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        p = a[r][col]
        a[r] = [x / p for x in a[r]]
        for k in range(len(a)):
            if k != r and a[k][col]:
                f = a[k][col]
                a[k] = [x - f * y for x, y in zip(a[k], a[r])]
        pivots.append(col)
        r += 1
        if r == len(a):
            break
    free = [c for c in range(ncols) if c not in set(pivots)]
    basis = []
    for fcol in free:
        v = [Fraction(0)] * ncols
        v[fcol] = Fraction(1)
        for k, pc in enumerate(pivots):
            v[pc] = -a[k][fcol]
        basis.append(v)
    return basis


def null_space_basis(mat: IntMatrix, zero_rows: Iterable[int]) -> list[tuple[Fraction, ...]]:
    """Rational basis of ``{theta : H(zero_rows, :) theta = 0}``."""
    comp, slot, agg = _reduce(mat, zero_rows)
    small = rational_null_space(agg, len(slot))
    where = [slot[comp.find(c)] for c in range(mat.n)]
    return [tuple(v[where[c]] for c in range(mat.n)) for v in small]


class RowSpan:
    """Exact row space of ``H(rows, :)`` supporting repeated membership tests."""

    def __init__(self, mat: IntMatrix, rows: Iterable[int]):
        self.mat = mat
        comp, slot, agg = _reduce(mat, rows)
        self._comp = comp
        self._slot = slot
        self._pivots: list[tuple[int, list[Fraction]]] = []
        for vec in agg:
            self._insert([Fraction(x) for x in vec])
        self.rank = (mat.n - comp.count) + len(self._pivots)

    def _residual(self, vec: list[Fraction]) -> list[Fraction]:
        for col, prow in self._pivots:
            f = vec[col]
            if f:
                vec = [x - f * y for x, y in zip(vec, prow)]
        return vec

    def _insert(self, vec: list[Fraction]) -> bool:
        vec = self._residual(vec)
        col = next((c for c, x in enumerate(vec) if x), None)
        if col is None:
            return False
        p = vec[col]
        vec = [x / p for x in vec]
        # keep earlier pivot rows reduced so residuals can be taken in one pass
        for k, (c, prow) in enumerate(self._pivots):
            f = prow[col]
            if f:
                self._pivots[k] = (c, [x - f * y for x, y in zip(prow, vec)])
        self._pivots.append((col, vec))
        return True

    def _aggregate(self, r: int) -> list[Fraction]:
        vec = [Fraction(0)] * len(self._slot)
        find, slot = self._comp.find, self._slot
        for c, x in self.mat.sparse[r]:
            vec[slot[find(c)]] += x
        return vec

    def __contains__(self, r: int) -> bool:
        e = self.mat.edges[r]
        if e is not None and self._comp.find(e[0]) == self._comp.find(e[1]):
            return True
        vec = self._aggregate(r)
        if not any(vec):
            return True
        return not any(self._residual(vec))


def in_row_span(mat: IntMatrix, rows: Iterable[int], r: int) -> bool:
    return r in RowSpan(mat, rows)


def dump_csv(mat: IntMatrix, net: Network, ms: MeasurementSet, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["measurement"] + [str(net.label(b)) for b in net.buses])
        for e, row in zip(ms, mat.rows):
            out.writerow([e.describe(net)] + list(row))
