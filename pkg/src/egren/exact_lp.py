"""Exact two-phase simplex over the rationals.

Small dense tableaux only: the cone queries this serves have at most a few
dozen variables. Bland's rule guarantees termination.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

__all__ = ["LPResult", "linprog_exact", "feasible_nonneg"]


@dataclass(frozen=True)
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: tuple[Fraction, ...] | None = None
    value: Fraction | None = None

    @property
    def feasible(self) -> bool:
        return self.status != "infeasible"


def _pivot(T, basis, row, col):
    piv = T[row][col]
    T[row] = [v / piv for v in T[row]]
    for r in range(len(T)):
        if r != row and T[r][col] != 0:
            f = T[r][col]
            T[r] = [a - f * b for a, b in zip(T[r], T[row])]
    basis[row] = col


def _simplex(T, basis, cost, allowed):
    """Minimize ``cost . x`` on tableau ``T`` (last column is rhs), in place."""
    m = len(T)
    while True:
        # reduced costs: c_j - c_B B^-1 A_j
        red = []
        for j in allowed:
            rc = cost[j] - sum(cost[basis[r]] * T[r][j] for r in range(m))
            red.append((j, rc))
        entering = next((j for j, rc in red if rc < 0), None)
        if entering is None:
            return "optimal"
        best = None
        for r in range(m):
            a = T[r][entering]
            if a > 0:
                ratio = T[r][-1] / a
                if best is None or ratio < best[0] or (ratio == best[0] and basis[r] < basis[best[1]]):
                    best = (ratio, r)
        if best is None:
            return "unbounded"
        _pivot(T, basis, best[1], entering)


def linprog_exact(
    c: Sequence,
    A_eq: Sequence[Sequence] = (),
    b_eq: Sequence = (),
    A_ub: Sequence[Sequence] = (),
    b_ub: Sequence = (),
    maximize: bool = False,
) -> LPResult:
    """Solve ``min/max c.x`` s.t. ``A_eq x = b_eq``, ``A_ub x <= b_ub``, ``x >= 0``.

    All data are converted to :class:`fractions.Fraction`; the returned point
    is exact.
    """
    n = len(c)
    rows = [[Fraction(v) for v in r] + [Fraction(0)] * len(A_ub) + [Fraction(b)] for r, b in zip(A_eq, b_eq)]
    for k, (r, b) in enumerate(zip(A_ub, b_ub)):
        slack = [Fraction(0)] * len(A_ub)
        slack[k] = Fraction(1)
        rows.append([Fraction(v) for v in r] + slack + [Fraction(b)])
    nx = n + len(A_ub)
    for r in rows:
        if r[-1] < 0:
            r[:] = [-v for v in r]
    m = len(rows)
    # phase I: artificials
    T = [r[:-1] + [Fraction(int(i == k)) for k in range(m)] + [r[-1]] for i, r in enumerate(rows)]
    basis = [nx + i for i in range(m)]
    cost1 = [Fraction(0)] * nx + [Fraction(1)] * m
    _simplex(T, basis, cost1, list(range(nx + m)))
    if sum(T[r][-1] for r in range(m) if basis[r] >= nx) != 0:
        return LPResult("infeasible")
    # drive remaining artificials out of the basis
    keep = []
    for r in range(m):
        if basis[r] >= nx:
            col = next((j for j in range(nx) if T[r][j] != 0), None)
            if col is None:
                continue
            _pivot(T, basis, r, col)
        keep.append(r)
    T = [T[r][:nx] + [T[r][-1]] for r in keep]
    basis = [basis[r] for r in keep]
    sign = -1 if maximize else 1
    cost2 = [sign * Fraction(v) for v in c] + [Fraction(0)] * (nx - n)
    status = _simplex(T, basis, cost2, list(range(nx)))
    if status == "unbounded":
        return LPResult("unbounded")
    x = [Fraction(0)] * nx
    for r, j in enumerate(basis):
        x[j] = T[r][-1]
    value = sum(Fraction(ci) * xi for ci, xi in zip(c, x[:n]))
    return LPResult("optimal", tuple(x[:n]), value)


def feasible_nonneg(A_eq, b_eq, A_ub=(), b_ub=()) -> tuple[Fraction, ...] | None:
    """Return an exact nonnegative solution of the system, or ``None``."""
    n = len(A_eq[0]) if A_eq else len(A_ub[0])
    res = linprog_exact([0] * n, A_eq, b_eq, A_ub, b_ub)
    return res.x if res.status == "optimal" else None
