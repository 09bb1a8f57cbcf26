"""Compactly supported probes: polynomial-times-bump test functions.

A :class:`TestFunction` is ``P(x) * b((x - c) / r)`` with the standard bump
``b(y) = exp(-1 / (1 - |y|^2))`` on the open unit ball. ``P`` is kept in the
absolute coordinates ``x``, so dilation and multiplication by monomials stay
inside the class.

Taylor data at a point are computed by truncated power-series arithmetic
(no finite differences), which is what "exact at the origin" means here.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product as iproduct
from typing import Iterable, Mapping

import numpy as np
import sympy as sp
from scipy.signal import convolve

from .dsl import coordinate_symbols

__all__ = [
    "MultiIndex",
    "multi_indices",
    "Series",
    "TestFunction",
    "ProductTestFunction",
    "Cutoff",
    "make_bump",
    "default_probes",
    "random_probe",
]

MultiIndex = tuple[int, ...]


@lru_cache(maxsize=None)
def multi_indices(d: int, max_order: int, exact: bool = False) -> tuple[MultiIndex, ...]:
    """All ``alpha`` in ``N^d`` with ``|alpha| <= max_order`` (graded, then lex)."""
    out = []
    for total in range(0 if not exact else max_order, max_order + 1):
        for a in iproduct(range(total + 1), repeat=d):
            if sum(a) == total:
                out.append(a)
    return tuple(out)


def _factorial(alpha: MultiIndex) -> int:
    return math.prod(math.factorial(a) for a in alpha)


def _binom(alpha: MultiIndex, beta: MultiIndex) -> int:
    return math.prod(math.comb(a, b) for a, b in zip(alpha, beta))


def _leq(beta: MultiIndex, alpha: MultiIndex) -> bool:
    return all(b <= a for a, b in zip(alpha, beta))


def _sub(alpha: MultiIndex, beta: MultiIndex) -> MultiIndex:
    return tuple(a - b for a, b in zip(alpha, beta))


def _add(alpha: MultiIndex, beta: MultiIndex) -> MultiIndex:
    return tuple(a + b for a, b in zip(alpha, beta))


# ---------------------------------------------------------------------------
# truncated multivariate power series
# ---------------------------------------------------------------------------


class Series:
    """Power series in ``k`` variables truncated at total degree ``order``."""

    __slots__ = ("c", "order")

    def __init__(self, coeffs: np.ndarray, order: int):
        self.c = coeffs
        self.order = order

    @staticmethod
    def _mask(k: int, order: int) -> np.ndarray:
        idx = np.indices((order + 1,) * k).sum(axis=0)
        return idx <= order

    @classmethod
    def constant(cls, value: float, k: int, order: int) -> "Series":
        c = np.zeros((order + 1,) * k)
        c[(0,) * k] = value
        return cls(c, order)

    @classmethod
    def linear(cls, const: float, grad: Iterable[float], order: int) -> "Series":
        grad = list(grad)
        k = len(grad)
        s = cls.constant(const, k, order)
        if order >= 1:
            for j, g in enumerate(grad):
                e = [0] * k
                e[j] = 1
                s.c[tuple(e)] = g
        return s

    @property
    def k(self) -> int:
        return self.c.ndim

    @property
    def const(self) -> float:
        return float(self.c[(0,) * self.k])

    def __add__(self, other):
        if isinstance(other, Series):
            return Series(self.c + other.c, self.order)
        out = self.c.copy()
        out[(0,) * self.k] += other
        return Series(out, self.order)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other if isinstance(other, Series) else self + (-other)

    def __rmul__(self, scalar):
        return Series(scalar * self.c, self.order)

    def __mul__(self, other):
        if not isinstance(other, Series):
            return Series(other * self.c, self.order)
        n = self.order + 1
        full = convolve(self.c, other.c, method="direct")
        out = full[(slice(0, n),) * self.k] * self._mask(self.k, self.order)
        return Series(out, self.order)

    def _nilpotent_power_sum(self, weights) -> "Series":
        # sum_j w_j * g^j for g with zero constant term
        acc = Series.constant(weights[0], self.k, self.order)
        p = Series.constant(1.0, self.k, self.order)
        for j in range(1, self.order + 1):
            p = p * self
            acc = acc + weights[j] * p
        return acc

    def exp(self) -> "Series":
        a = self.const
        g = self - a
        w = [1.0 / math.factorial(j) for j in range(self.order + 1)]
        return math.exp(a) * g._nilpotent_power_sum(w)

    def reciprocal_one_minus(self) -> "Series":
        """Series of ``1 / (1 - self)``; requires ``self.const != 1``."""
        s0 = self.const
        g = (self - s0) * (1.0 / (1.0 - s0))
        return (1.0 / (1.0 - s0)) * g._nilpotent_power_sum([1.0] * (self.order + 1))

    def coefficient(self, alpha: MultiIndex) -> float:
        if sum(alpha) > self.order:
            raise ValueError("multi-index beyond truncation order")
        return float(self.c[tuple(alpha)])

    def items(self):
        for alpha in multi_indices(self.k, self.order):
            v = self.c[alpha]
            if v != 0:
                yield alpha, float(v)

    def evaluate(self, H: np.ndarray, min_order: int = 0) -> np.ndarray:
        """Evaluate at points ``H`` of shape ``(k, N)``, skipping degrees below ``min_order``."""
        H = np.atleast_2d(H)
        out = np.zeros(H.shape[1], dtype=np.result_type(self.c, H))
        for alpha, v in self.items():
            if sum(alpha) < min_order:
                continue
            term = np.full(H.shape[1], v)
            for j, a in enumerate(alpha):
                if a:
                    term = term * H[j] ** a
            out = out + term
        return out


def _bump_series(y0: np.ndarray, A: np.ndarray, order: int) -> Series:
    """Series in ``eta`` of ``b(y0 + A eta)`` where ``b`` is the unit bump."""
    k = A.shape[1]
    s = Series.constant(0.0, k, order)
    for i in range(A.shape[0]):
        yi = Series.linear(float(y0[i]), A[i], order)
        s = s + yi * yi
    if s.const >= 1.0:
        return Series.constant(0.0, k, order)
    u = s.reciprocal_one_minus()
    return (-1.0 * u).exp()


def _poly_series(poly: Mapping[MultiIndex, float], p: np.ndarray, M: np.ndarray, order: int) -> Series:
    k = M.shape[1]
    lin = [Series.linear(float(p[i]), M[i], order) for i in range(M.shape[0])]
    acc = Series.constant(0.0, k, order)
    for alpha, coef in poly.items():
        term = Series.constant(coef, k, order)
        for i, a in enumerate(alpha):
            for _ in range(a):
                term = term * lin[i]
        acc = acc + term
    return acc


# ---------------------------------------------------------------------------
# bump derivatives at arbitrary points (symbolic, cached per multi-index)
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _radial_factor_poly(k: int) -> np.poly1d:
    """``Q_k`` with ``F^(k)(s) = Q_k(u) F(s)`` for ``F(s) = exp(-1/(1-s))``, ``u = 1/(1-s)``."""
    # F' = -u^2 F and u' = u^2, hence Q_{k+1} = u^2 (Q_k' - Q_k)
    q = np.poly1d([1.0])
    u2 = np.poly1d([1.0, 0.0, 0.0])
    for _ in range(k):
        q = u2 * (q.deriv() - q)
    return q


@lru_cache(maxsize=None)
def _square_chain(b: int) -> tuple[tuple[int, float], ...]:
    """``(d/dy)^b H(y^2) = sum_m c_m (2y)^(2m-b) H^(m)(y^2)``; returns ``(m, c_m)``."""
    return tuple((m, math.factorial(b) / (math.factorial(2 * m - b) * math.factorial(b - m)))
                 for m in range((b + 1) // 2, b + 1))


def _bump_deriv_values(beta: MultiIndex, Y: np.ndarray) -> np.ndarray:
    """``d^beta`` of ``exp(-1/(1-|y|^2))`` at points ``Y`` of shape ``(d, N)``."""
    s = np.sum(Y * Y, axis=0)
    inside = s < 1.0
    out = np.zeros(Y.shape[1])
    if not inside.any():
        return out
    Yi = Y[:, inside]
    u = 1.0 / (1.0 - s[inside])
    F = np.exp(-u)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        acc = np.zeros(Yi.shape[1])
        for ms in itertools.product(*(_square_chain(int(b)) for b in beta)):
            k = sum(m for m, _ in ms)
            term = np.full(Yi.shape[1], math.prod(c for _, c in ms))
            for j, ((m, _), b) in enumerate(zip(ms, beta)):
                if 2 * m - b:
                    term = term * (2.0 * Yi[j]) ** (2 * m - b)
            acc = acc + term * _radial_factor_poly(k)(u) * F
    out[inside] = np.nan_to_num(acc, nan=0.0, posinf=0.0, neginf=0.0)
    return out


def _poly_eval(poly: Mapping[MultiIndex, float], X: np.ndarray) -> np.ndarray:
    out = np.zeros(X.shape[1])
    for alpha, coef in poly.items():
        term = np.full(X.shape[1], float(coef))
        for j, a in enumerate(alpha):
            if a:
                term = term * X[j] ** a
        out = out + term
    return out


def _poly_derivative(poly: Mapping[MultiIndex, float], beta: MultiIndex) -> dict:
    out: dict[MultiIndex, float] = {}
    for alpha, coef in poly.items():
        if not _leq(beta, alpha):
            continue
        fac = math.prod(math.perm(a, b) for a, b in zip(alpha, beta))
        key = _sub(alpha, beta)
        out[key] = out.get(key, 0.0) + coef * fac
    return out


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------


def _normalize_poly(d: int, poly) -> dict[MultiIndex, float]:
    if poly is None:
        return {(0,) * d: 1.0}
    if isinstance(poly, Mapping):
        items = poly.items()
    elif d == 1 and all(np.isscalar(v) for v in poly):
        items = (((k,), v) for k, v in enumerate(poly))
    else:
        items = ((tuple(a), v) for a, v in poly)
    out: dict[MultiIndex, float] = {}
    for alpha, v in items:
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != d or min(alpha) < 0:
            raise ValueError(f"bad multi-index {alpha} for dimension {d}")
        if v != 0:
            out[alpha] = out.get(alpha, 0.0) + float(v)
    return out


@dataclass(frozen=True, eq=False)
class TestFunction:
    """``P(x) * exp(-1/(1-|y|^2))``, ``y = (x - center) / radius``, supported in the closed ball."""

    __test__ = False  # not a pytest class

    dim: int
    center: tuple[float, ...]
    radius: float
    poly: Mapping[MultiIndex, float] = field(default_factory=dict)
    max_order: int = 24

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if len(self.center) != self.dim:
            raise ValueError("center has wrong dimension")

    # support ---------------------------------------------------------------
    @property
    def center_array(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    def contains_origin(self) -> bool:
        """Origin strictly inside the support ball (on the boundary all derivatives vanish)."""
        return float(np.linalg.norm(self.center_array)) < self.radius

    def outer_radius(self) -> float:
        return float(np.linalg.norm(self.center_array)) + self.radius

    def support_ball(self) -> tuple[np.ndarray, float, float]:
        """(centre, radius, radius of the largest ball about 0 inside the support)."""
        c = self.center_array
        return c, self.radius, max(self.radius - float(np.linalg.norm(c)), 0.0)

    # evaluation --------------------------------------------------------------
    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(self.dim, -1)
        Y = (X - self.center_array[:, None]) / self.radius
        return _bump_deriv_values((0,) * self.dim, Y) * _poly_eval(self.poly, X)

    def derivative(self, alpha: MultiIndex, X: np.ndarray) -> np.ndarray:
        """``d^alpha phi`` at points ``X`` of shape ``(dim, N)``."""
        alpha = tuple(alpha)
        X = np.asarray(X, dtype=float).reshape(self.dim, -1)
        if not any(alpha):
            return self(X)
        Y = (X - self.center_array[:, None]) / self.radius
        out = np.zeros(X.shape[1])
        for beta in multi_indices(self.dim, sum(alpha)):
            if not _leq(beta, alpha):
                continue
            dp = _poly_derivative(self.poly, _sub(alpha, beta))
            if not dp:
                continue
            coef = _binom(alpha, beta) * self.radius ** (-sum(beta))
            out += coef * _bump_deriv_values(beta, Y) * _poly_eval(dp, X)
        return out

    def taylor(self, point=None, order: int = 8, M: np.ndarray | None = None) -> Series:
        """Taylor series of ``eta -> phi(point + M eta)`` truncated at ``order``."""
        p = np.zeros(self.dim) if point is None else np.asarray(point, dtype=float)
        M = np.eye(self.dim) if M is None else np.asarray(M, dtype=float)
        y0 = (p - self.center_array) / self.radius
        b = _bump_series(y0, M / self.radius, order)
        return b * _poly_series(self.poly, p, M, order)

    def derivative_at(self, alpha: MultiIndex, point=None) -> float:
        """``d^alpha phi(point)`` in closed form; default point is the origin."""
        p = np.zeros(self.dim) if point is None else np.asarray(point, dtype=float)
        return float(self.derivative(tuple(alpha), p.reshape(self.dim, 1))[0])

    # transformations -----------------------------------------------------------
    def dilate(self, lam: float) -> "TestFunction":
        """``lam^-d phi(x / lam)``."""
        if not lam > 0:
            raise ValueError("dilation parameter must be positive")
        poly = {a: v * lam ** (-self.dim - sum(a)) for a, v in self.poly.items()}
        return TestFunction(self.dim, tuple(lam * c for c in self.center), lam * self.radius, poly, self.max_order)

    def times_monomial(self, alpha: MultiIndex, coef: float = 1.0) -> "TestFunction":
        poly = {_add(a, tuple(alpha)): v * coef for a, v in self.poly.items()}
        return TestFunction(self.dim, self.center, self.radius, poly, self.max_order)

    def scaled(self, factor: float) -> "TestFunction":
        poly = {a: v * factor for a, v in self.poly.items()}
        return TestFunction(self.dim, self.center, self.radius, poly, self.max_order)

    def sympy_expr(self, offset: int = 0) -> sp.Expr:
        """Piecewise sympy form over ``x{offset+1} ...``."""
        x = coordinate_symbols(offset + self.dim)[offset:]
        s = sum(((xi - ci) / sp.nsimplify(self.radius)) ** 2 for xi, ci in zip(x, map(sp.nsimplify, self.center)))
        P = sum(sp.nsimplify(v) * sp.Mul(*[xi**a for xi, a in zip(x, alpha)]) for alpha, v in self.poly.items())
        return sp.Piecewise((P * sp.exp(-1 / (1 - s)), s < 1), (0, True))

    def describe(self) -> dict:
        return {
            "dim": self.dim,
            "center": [float(c) for c in self.center],
            "radius": float(self.radius),
            "poly": [[list(a), float(v)] for a, v in sorted(self.poly.items())],
        }


def make_bump(d: int, c=None, r: float = 1.0, poly=None) -> TestFunction:
    """Bump of radius ``r`` at ``c`` times an optional polynomial.

    ``poly`` is a mapping ``multi-index -> coefficient``, a list of
    ``(multi-index, coefficient)`` pairs, or in ``d = 1`` a plain coefficient
    list ``[a0, a1, ...]`` for ``a0 + a1 x + ...``.
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    c = (0.0,) * d if c is None else tuple(float(v) for v in np.atleast_1d(c))
    return TestFunction(d, c, float(r), _normalize_poly(d, poly))


class ProductTestFunction:
    """Tensor product ``phi_1(x') phi_2(x'') ...`` of test functions on disjoint blocks."""

    __test__ = False

    def __init__(self, factors):
        self.factors = tuple(factors)
        self.dims = tuple(f.dim for f in self.factors)
        self.dim = sum(self.dims)
        self.center = tuple(c for f in self.factors for c in f.center)
        self.radius = float(np.sqrt(sum(f.radius**2 for f in self.factors)))

    @property
    def center_array(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    def contains_origin(self) -> bool:
        return all(f.contains_origin() for f in self.factors)

    def outer_radius(self) -> float:
        return float(np.sqrt(sum(f.outer_radius() ** 2 for f in self.factors)))

    def support_ball(self) -> tuple[np.ndarray, float, float]:
        return self.center_array, self.radius, min(f.support_ball()[2] for f in self.factors)

    def _slices(self):
        start = 0
        for n in self.dims:
            yield slice(start, start + n)
            start += n

    def __call__(self, X):
        X = np.asarray(X, dtype=float).reshape(self.dim, -1)
        out = np.ones(X.shape[1])
        for f, sl in zip(self.factors, self._slices()):
            out = out * f(X[sl])
        return out

    def derivative(self, alpha, X):
        X = np.asarray(X, dtype=float).reshape(self.dim, -1)
        out = np.ones(X.shape[1])
        for f, sl in zip(self.factors, self._slices()):
            out = out * f.derivative(tuple(alpha)[sl], X[sl])
        return out

    def derivative_at(self, alpha, point=None):
        point = np.zeros(self.dim) if point is None else np.asarray(point, dtype=float)
        return math.prod(
            f.derivative_at(tuple(alpha)[sl], point[sl]) for f, sl in zip(self.factors, self._slices())
        )

    def taylor(self, point=None, order: int = 8, M=None) -> Series:
        if M is not None:
            raise NotImplementedError("affine pullback of a product probe")
        point = np.zeros(self.dim) if point is None else np.asarray(point, dtype=float)
        parts = [f.taylor(point[sl], order) for f, sl in zip(self.factors, self._slices())]
        c = parts[0].c
        for p in parts[1:]:
            c = np.multiply.outer(c, p.c)
        return Series(c * Series._mask(self.dim, order), order)

    def dilate(self, lam: float) -> "ProductTestFunction":
        return ProductTestFunction(f.dilate(lam) for f in self.factors)

    def describe(self) -> dict:
        return {"product": [f.describe() for f in self.factors]}


@dataclass(frozen=True)
class Cutoff:
    """Radial plateau function: 1 for ``|x| <= eps``, 0 for ``|x| >= R``, smooth between."""

    eps: float = 0.5
    R: float = 1.0

    def __post_init__(self):
        if not 0 < self.eps < self.R:
            raise ValueError("cutoff needs 0 < eps < R")

    @staticmethod
    def _step(t: np.ndarray) -> np.ndarray:
        # smooth transition 0 -> 1 on [0, 1]
        t = np.clip(t, 0.0, 1.0)
        with np.errstate(divide="ignore", over="ignore", under="ignore"):
            f = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
            g = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
        return f / (f + g)

    def radial(self, rho: np.ndarray) -> np.ndarray:
        return self._step((self.R - np.asarray(rho, dtype=float)) / (self.R - self.eps))

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.radial(np.sqrt(np.sum(X * X, axis=0)))

    def scaled(self, lam: float) -> "Cutoff":
        """The function ``x -> theta(lam * x)``."""
        return Cutoff(self.eps / lam, self.R / lam)


def default_probes(d: int, off_origin: bool = False) -> list[TestFunction]:
    """Five probes: radii {1, 1/2, 1/4} with factors {1, x1}.

    With ``off_origin`` the same shapes are shifted along ``x1`` so that their
    supports avoid the origin; these probe distributions defined only off 0.
    """
    e1 = np.zeros(d)
    e1[0] = 1.0
    x1 = tuple(int(i == 0) for i in range(d))
    one = (0,) * d
    specs = [(1.0, one), (1.0, x1), (0.5, one), (0.5, x1), (0.25, one)]
    out = []
    for k, (r, mono) in enumerate(specs):
        if off_origin:
            sign = 1.0 if k % 2 == 0 else -1.0
            c = sign * 1.5 * r * e1
            out.append(TestFunction(d, tuple(c), 0.5 * r, {mono: 1.0}))
        else:
            out.append(TestFunction(d, (0.0,) * d, r, {mono: 1.0}))
    return out


def random_probe(d: int, rng: np.random.Generator, contain_origin: bool = True) -> TestFunction:
    """Random bump with a quadratic polynomial factor.

    With ``contain_origin`` the centre is drawn so the origin lies well inside
    the support.
    """
    r = float(rng.uniform(0.6, 1.4))
    if contain_origin:
        direction = rng.normal(size=d)
        direction /= np.linalg.norm(direction)
        c = direction * rng.uniform(0.0, 0.5) * r
    else:
        direction = rng.normal(size=d)
        direction /= np.linalg.norm(direction)
        c = direction * rng.uniform(1.3, 2.5) * r
    poly = {(0,) * d: float(rng.uniform(0.5, 1.5))}
    for alpha in multi_indices(d, 2):
        if sum(alpha) >= 1:
            poly[alpha] = float(rng.normal(scale=0.5))
    return TestFunction(d, tuple(float(v) for v in c), r, poly)
