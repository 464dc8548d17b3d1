"""Big-M mixed-integer model of the sparsest critical tuple, written in LP format.

Variables are ``theta_1..theta_n`` (free) and binaries ``y_1..y_m``. For each
row j there are two rows ``pos_j`` and ``neg_j`` bounding ``|H(j,:) theta|`` by
``M y_j``, then the ``anchor`` equality and one ``fix_j: y_j = 0`` per
protected row. Output ordering is fixed, so identical inputs give identical
files.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .jacobian import IntMatrix


@dataclass(frozen=True)
class MilpModel:
    h: IntMatrix
    anchor: int
    big_m: Fraction
    protected: frozenset[int] = frozenset()

    def __post_init__(self):
        if self.big_m <= 0:
            raise ValueError("big M must be positive")
        if not 0 <= self.anchor < self.h.m:
            raise IndexError(f"anchor {self.anchor} out of range")

    @property
    def n_binary(self) -> int:
        return self.h.m

    @property
    def n_continuous(self) -> int:
        return self.h.n

    @property
    def n_constraints(self) -> int:
        return 2 * self.h.m + 1 + len(self.protected)

    def to_lp(self) -> str:
        h, m_txt = self.h, _number(self.big_m)
        out = [f"\\ sparsest critical tuple, anchor y_{self.anchor + 1}", "Minimize"]
        out.append(" obj: " + " + ".join(f"y_{j + 1}" for j in range(h.m)))
        out.append("Subject To")
        for j in range(h.m):
            expr = _linear(h.sparse[j], 1)
            out.append(f" pos_{j + 1}: {expr} - {m_txt} y_{j + 1} <= 0")
            expr = _linear(h.sparse[j], -1)
            out.append(f" neg_{j + 1}: {expr} - {m_txt} y_{j + 1} <= 0")
        out.append(f" anchor: {_linear(h.sparse[self.anchor], 1)} = 1")
        for j in sorted(self.protected):
            out.append(f" fix_{j + 1}: y_{j + 1} = 0")
        out.append("Bounds")
        out += [f" theta_{c + 1} free" for c in range(h.n)]
        out.append("Binary")
        out += [f" y_{j + 1}" for j in range(h.m)]
        out.append("End")
        return "\n".join(out) + "\n"

    def arrays(self):
        """Dense (c, A, lower, upper, integrality) over ``[theta, y]`` for array-based solvers."""
        h = self.h
        nv = h.n + h.m
        c = [0] * h.n + [1] * h.m
        a, lo, hi = [], [], []
        inf = float("inf")
        for j in range(h.m):
            for sign in (1, -1):
                row = [0.0] * nv
                for col, x in h.sparse[j]:
                    row[col] = float(sign * x)
                row[h.n + j] = -float(self.big_m)
                a.append(row)
                lo.append(-inf)
                hi.append(0.0)
        row = [0.0] * nv
        for col, x in h.sparse[self.anchor]:
            row[col] = float(x)
        a.append(row)
        lo.append(1.0)
        hi.append(1.0)
        for j in sorted(self.protected):
            row = [0.0] * nv
            row[h.n + j] = 1.0
            a.append(row)
            lo.append(0.0)
            hi.append(0.0)
        integrality = [0] * h.n + [1] * h.m
        return c, a, lo, hi, integrality


def _number(x: Fraction) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return repr(float(x))


def _linear(sparse, sign: int) -> str:
    parts = []
    for col, x in sparse:
        x *= sign
        mag = "" if abs(x) == 1 else f"{abs(x)} "
        op = "-" if x < 0 else "+"
        parts.append((op, f"{mag}theta_{col + 1}"))
    if not parts:
        return "0 theta_1"
    first_op, first = parts[0]
    text = ("- " if first_op == "-" else "") + first
    return text + "".join(f" {op} {term}" for op, term in parts[1:])


def build_milp(h: IntMatrix, anchor: int, big_m=100) -> MilpModel:
    return MilpModel(h, anchor, Fraction(big_m))


def export_milp(h: IntMatrix, anchor: int, big_m, path, protected: Iterable[int] = ()) -> MilpModel:
    model = build_milp(h, anchor, big_m)
    if protected:
        model = protected_set_constraint(model, protected)
    Path(path).write_text(model.to_lp())
    return model


def protected_set_constraint(model: MilpModel, protected: Iterable[int]) -> MilpModel:
    """Forbid removal of the given rows (``y_j = 0``)."""
    protected = frozenset(protected)
    if model.anchor in protected:
        raise ValueError("the anchor cannot be protected")
    bad = [j for j in protected if not 0 <= j < model.h.m]
    if bad:
        raise IndexError(f"protected rows out of range: {sorted(bad)}")
    return replace(model, protected=model.protected | protected)


def guess_big_m(h: IntMatrix, theta0: Sequence, alpha=2) -> Fraction:
    """``alpha * max|H theta0| / min nonzero |H theta0|`` for a feasible ``theta0``."""
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    vals = [abs(Fraction(v)) for v in h.apply(theta0)]
    nz = [v for v in vals if v]
    if not nz:
        raise ValueError("H theta0 is identically zero")
    return Fraction(alpha) * max(nz) / min(nz)
