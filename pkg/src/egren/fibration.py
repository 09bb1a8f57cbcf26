"""Centre-of-mass fibration of ``(R^d)^n`` around the total diagonal.

Coordinates ``(X, eta)``: ``X`` in ``R^d`` is the centre of mass and
``eta = (eta_1 ... eta_{n-1})`` are coefficients of the relative positions
in an orthonormal basis of ``{v in R^n : sum v = 0}`` (Helmert basis). An
optional shear ``S`` moves the base point by ``S eta``; it fixes the diagonal
pointwise and changes the complement used for transversal scaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import sympy as sp

from .dsl import coordinate_symbols

__all__ = ["SurfaceFibration", "AffineSlice", "helmert_basis"]


def helmert_basis(n: int, exact: bool = False):
    """``n x (n-1)`` matrix with orthonormal columns orthogonal to ``(1, ..., 1)``."""
    rows = []
    for k in range(1, n):
        col = [0] * n
        norm = sp.sqrt(sp.Integer(k * (k + 1)))
        for i in range(k):
            col[i] = 1 / norm
        col[k] = -sp.Integer(k) / norm
        rows.append(col)
    Q = sp.Matrix(rows).T
    return Q if exact else np.array(Q.evalf(20).tolist(), dtype=float)


@dataclass(frozen=True)
class SurfaceFibration:
    """Fibration of ``R^{d n}`` over the total diagonal.

    Args:
        d: dimension of one factor.
        n: number of factors.
        shear: optional ``d x d(n-1)`` matrix; base point becomes ``X + shear @ eta``.
    """

    d: int
    n: int
    shear: tuple[tuple[float, ...], ...] | None = field(default=None)

    def __post_init__(self):
        if self.n < 2 or self.d < 1:
            raise ValueError("need n >= 2 and d >= 1")
        if self.shear is not None:
            S = np.asarray(self.shear, dtype=float)
            if S.shape != (self.d, self.codim):
                raise ValueError(f"shear must have shape ({self.d}, {self.codim})")

    @property
    def total_dim(self) -> int:
        return self.d * self.n

    @property
    def codim(self) -> int:
        return self.d * (self.n - 1)

    @property
    def jacobian(self) -> float:
        """``|det d x / d(X, eta)|``; the shear does not change it."""
        return float(self.n) ** (self.d / 2)

    @cached_property
    def base_matrix(self) -> np.ndarray:
        return np.kron(np.ones((self.n, 1)), np.eye(self.d))

    @cached_property
    def orthonormal_fiber(self) -> np.ndarray:
        return np.kron(helmert_basis(self.n), np.eye(self.d))

    @cached_property
    def fiber_matrix(self) -> np.ndarray:
        """``M`` with ``x = B X + M eta`` (``B`` the diagonal embedding)."""
        M = self.orthonormal_fiber.copy()
        if self.shear is not None:
            M = M + self.base_matrix @ np.asarray(self.shear, dtype=float)
        return M

    def to_full(self, X: np.ndarray, H: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(self.d, -1)
        H = np.asarray(H, dtype=float).reshape(self.codim, -1)
        return self.base_matrix @ X + self.fiber_matrix @ H

    def from_full(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float).reshape(self.total_dim, -1)
        H = self.orthonormal_fiber.T @ x
        X = x.reshape(self.n, self.d, -1).mean(axis=0)
        if self.shear is not None:
            X = X - np.asarray(self.shear, dtype=float) @ H
        return X, H

    def distance_to_surface(self, x) -> float:
        x = np.asarray(x, dtype=float).ravel()
        return float(np.linalg.norm(self.orthonormal_fiber.T @ x))

    def compose(self, expr: sp.Expr) -> sp.Expr:
        """Rewrite an expression in ``x1 ... x_{dn}`` in fibration coordinates.

        The result uses ``x1 ... xd`` for ``X`` and ``x_{d+1} ... x_{dn}`` for ``eta``.
        """
        D = self.total_dim
        syms = coordinate_symbols(D)
        Xs = syms[: self.d]
        Hs = sp.Matrix(syms[self.d :])
        Q = helmert_basis(self.n, exact=True)
        F = sp.kronecker_product(Q, sp.eye(self.d))
        base = sp.Matrix(Xs)
        if self.shear is not None:
            base = base + sp.Matrix(self.shear).applyfunc(sp.nsimplify) * Hs
        full = sp.Matrix.vstack(*([base] * self.n)) + F * Hs
        return expr.xreplace(dict(zip(syms, list(full))))

    def depends_on_base(self, expr: sp.Expr) -> bool:
        return bool(expr.free_symbols & set(coordinate_symbols(self.d)))

    def slice_at(self, probe, X) -> "AffineSlice":
        """The fiber function ``eta -> probe(B X + M eta)``."""
        p = self.base_matrix @ np.asarray(X, dtype=float).reshape(self.d)
        return AffineSlice(probe, p, self.fiber_matrix)

    def describe(self) -> dict:
        return {"d": self.d, "n": self.n, "shear": None if self.shear is None else [list(r) for r in self.shear]}


class AffineSlice:
    """Pullback ``eta -> phi(p + M eta)`` of a test function along an affine map."""

    __test__ = False

    def __init__(self, phi, p: np.ndarray, M: np.ndarray):
        self.phi = phi
        self.p = np.asarray(p, dtype=float)
        self.M = np.asarray(M, dtype=float)
        self.dim = self.M.shape[1]

    def __call__(self, H):
        H = np.asarray(H, dtype=float).reshape(self.dim, -1)
        return self.phi(self.p[:, None] + self.M @ H)

    def taylor(self, point=None, order: int = 8, M=None):
        if point is not None or M is not None:
            raise NotImplementedError("slices expand at their own origin only")
        return self.phi.taylor(self.p, order, self.M)

    def derivative_at(self, alpha, point=None):
        import math

        s = self.taylor(order=sum(alpha))
        return math.prod(math.factorial(a) for a in alpha) * s.coefficient(tuple(alpha))

    def support_ball(self) -> tuple[np.ndarray, float, float]:
        c, r = self.phi.center_array, self.phi.radius
        rel = c - self.p
        sv = np.linalg.svd(self.M, compute_uv=False)
        Hc, *_ = np.linalg.lstsq(self.M, rel, rcond=None)
        resid = float(np.linalg.norm(rel - self.M @ Hc))
        if resid >= r:
            return Hc, 0.0, 0.0
        radius = float(np.sqrt(r * r - resid * resid) / sv.min())
        inner = max((r - float(np.linalg.norm(rel))) / sv.max(), 0.0)
        return Hc, radius, inner

    def contains_origin(self) -> bool:
        return self.support_ball()[2] > 0

    def is_empty(self) -> bool:
        return self.support_ball()[1] == 0.0
