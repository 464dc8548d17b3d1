"""Unobservability tests, critical-tuple verification and refinement.

A removal set ``I`` makes the network unobservable when the remaining rows
have rank below ``n - 1``. It is a critical tuple when, in addition, putting
back any single row restores full rank; since rank is monotone in the row
set, that single-restoration test covers every proper subset.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Literal

from .jacobian import IntMatrix, RowSpan, rank_exact, row_rank

EXHAUSTIVE_CAP = 12
ORACLE_MAX_ROWS = 25


class NotUnobservableError(ValueError):
    pass


class NotCriticalError(ValueError):
    def __init__(self, witness: int):
        self.witness = witness
        super().__init__(f"row {witness} can be restored without regaining observability")


class RefinementFailure(RuntimeError):
    """No minimal unobservable subset of the candidate contains the anchor."""


@dataclass(frozen=True)
class CriticalTuple:
    rows: frozenset[int]
    anchor: int
    provenance: Literal["mincut", "exact", "oracle"]

    @property
    def cardinality(self) -> int:
        return len(self.rows)

    def sorted_rows(self) -> list[int]:
        return sorted(self.rows)

    def to_dict(self) -> dict:
        return {"anchor": self.anchor, "cardinality": self.cardinality,
                "rows": self.sorted_rows(), "provenance": self.provenance}


def is_unobservable(h: IntMatrix, removed: Iterable[int], ref: int | None = None) -> bool:
    removed = set(removed)
    if ref is None:
        return row_rank(h, (r for r in range(h.m) if r not in removed)) < h.n - 1
    return rank_exact(h, removed, ref) < h.n - 1


def _witness_in(span: RowSpan, rows: frozenset[int]) -> int | None:
    # Restoring r regains rank n-1 iff the kept rows have rank n-2 and r is
    # outside their span.
    if span.rank < span.mat.n - 2:
        return min(rows)
    for r in sorted(rows):
        if r in span:
            return r
    return None


def _witness(h: IntMatrix, rows: frozenset[int], ref: int | None) -> int | None:
    """Smallest row whose restoration leaves the network unobservable, if any."""
    if ref is not None:
        for r in sorted(rows):
            if is_unobservable(h, rows - {r}, ref):
                return r
        return None
    return _witness_in(RowSpan(h, (r for r in range(h.m) if r not in rows)), rows)


def _kept_span(h: IntMatrix, rows: frozenset[int]) -> RowSpan:
    return RowSpan(h, (r for r in range(h.m) if r not in rows))


def verify_critical(h: IntMatrix, candidate: Iterable[int], anchor: int,
                    provenance: str = "mincut", ref: int | None = None) -> CriticalTuple:
    """Return the candidate as a :class:`CriticalTuple` or raise ``NotCriticalError``."""
    rows = frozenset(candidate)
    if anchor not in rows:
        raise ValueError(f"anchor {anchor} not in candidate")
    if not is_unobservable(h, rows, ref):
        raise NotUnobservableError("removing the candidate leaves the network observable")
    w = _witness(h, rows, ref)
    if w is not None:
        raise NotCriticalError(w)
    return CriticalTuple(rows, anchor, provenance)


def _is_critical(h: IntMatrix, rows: frozenset[int]) -> bool:
    span = _kept_span(h, rows)
    return span.rank == h.n - 2 and not any(r in span for r in rows)


def is_critical(h: IntMatrix, rows: Iterable[int]) -> bool:
    rows = frozenset(rows)
    return bool(rows) and _is_critical(h, rows)


def anchor_reachable(h: IntMatrix, candidate: Iterable[int], anchor: int) -> bool:
    """True when some critical tuple inside ``candidate`` contains ``anchor``.

    That holds exactly when the anchor row is outside the span of the rows
    that are kept.
    """
    cand = set(candidate)
    return anchor not in RowSpan(h, (r for r in range(h.m) if r not in cand))


def refine_to_critical(h: IntMatrix, candidate: Iterable[int], anchor: int,
                       provenance: str = "mincut",
                       exhaustive_cap: int = EXHAUSTIVE_CAP) -> CriticalTuple:
    """Shrink an unobservable candidate to a critical tuple that keeps ``anchor``.

    Small candidates are searched exhaustively by increasing size, so the
    result has minimum cardinality (lexicographically smallest on ties).
    Larger ones are reduced greedily: rows are restored in descending index
    order whenever the anchor stays outside the span of the kept rows, which
    ends on a hyperplane and hence a critical tuple.
    """
    cand = frozenset(candidate)
    if anchor not in cand:
        raise ValueError(f"anchor {anchor} not in candidate")
    span = _kept_span(h, cand)
    if span.rank >= h.n - 1:
        raise NotUnobservableError("removing the candidate leaves the network observable")
    if anchor in span:
        raise RefinementFailure(f"every critical subset of the candidate excludes row {anchor}")
    if span.rank < h.n - 2 and row_rank(h, range(h.m)) < h.n - 1:
        raise RefinementFailure("the full measurement set is already unobservable")
    if span.rank == h.n - 2 and _witness_in(span, cand) is None:
        return CriticalTuple(cand, anchor, provenance)

    others = sorted(cand - {anchor})
    if len(cand) <= exhaustive_cap:
        for size in range(len(others) + 1):
            for combo in combinations(others, size):
                rows = frozenset(combo) | {anchor}
                if _is_critical(h, rows):
                    return CriticalTuple(rows, anchor, provenance)
        raise AssertionError("unreachable: anchor_reachable guaranteed a tuple")

    keep = [r for r in range(h.m) if r not in cand]
    for r in reversed(others):
        trial = keep + [r]
        if row_rank(h, trial + [anchor]) > row_rank(h, trial):
            keep = trial
    rows = frozenset(range(h.m)) - set(keep)
    return CriticalTuple(rows, anchor, provenance)


def oracle_sparsest(h: IntMatrix, anchor: int, max_rows: int = ORACLE_MAX_ROWS) -> CriticalTuple:
    """Sparsest critical tuple containing ``anchor`` by exhaustive subset search."""
    if h.m > max_rows:
        raise ValueError(f"oracle limited to {max_rows} rows, got {h.m}")
    if not any(h.rows[anchor]):
        raise ValueError(f"row {anchor} is zero; no tuple can contain it")
    others = [r for r in range(h.m) if r != anchor]
    for size in range(len(others) + 1):
        for combo in combinations(others, size):
            rows = frozenset(combo) | {anchor}
            if _is_critical(h, rows):
                return CriticalTuple(rows, anchor, "oracle")
    raise ValueError("no critical tuple contains the anchor")
