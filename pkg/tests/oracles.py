"""Independent reference computations used by the test suite.

Everything here is built on scipy quadrature, direct definitions or naive
enumeration, never on the package's own quadrature or search code.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
from scipy import integrate


def probe_1d(phi):
    return lambda x: float(phi(np.array([[x]]))[0])


def probe_2d(phi):
    return lambda x, y: float(phi(np.array([[x], [y]]))[0])


def pair_power_1d(a: float, phi) -> float:
    """``int |x|^-a phi(x) dx`` with the algebraic weight handled by QUADPACK."""
    f = probe_1d(phi)
    c, r = phi.center[0], phi.radius
    total = 0.0
    hi = c + r
    if hi > 0:
        lo = max(c - r, 0.0)
        if lo == 0.0:
            total += integrate.quad(f, 0.0, hi, weight="alg", wvar=(-a, 0.0), epsabs=0, epsrel=1e-12, limit=200)[0]
        else:
            total += integrate.quad(lambda x: f(x) * x**-a, lo, hi, epsabs=0, epsrel=1e-12, limit=200)[0]
    lo = c - r
    if lo < 0:
        hi2 = max(-(c + r), 0.0)
        g = lambda u: f(-u)
        if hi2 == 0.0:
            total += integrate.quad(g, 0.0, -lo, weight="alg", wvar=(-a, 0.0), epsabs=0, epsrel=1e-12, limit=200)[0]
        else:
            total += integrate.quad(lambda u: g(u) * u**-a, hi2, -lo, epsabs=0, epsrel=1e-12, limit=200)[0]
    return total


def pair_power_2d(a: float, phi) -> float:
    """``int |x|^-a phi`` on the plane in polar coordinates about the origin."""
    f = probe_2d(phi)
    R = float(np.linalg.norm(phi.center)) + phi.radius

    def ring(theta):
        ct, st = math.cos(theta), math.sin(theta)
        return integrate.quad(lambda r: f(r * ct, r * st), 0.0, R, weight="alg", wvar=(1.0 - a, 0.0),
                              epsabs=0, epsrel=1e-11, limit=200)[0]

    return integrate.quad(ring, 0.0, 2 * math.pi, epsabs=0, epsrel=1e-10, limit=200)[0]


def plateau(eps: float, R: float):
    """The same smooth plateau shape as the package cutoff, written out directly."""

    def step(t):
        if t <= 0:
            return 0.0
        if t >= 1:
            return 1.0
        f, g = math.exp(-1 / t), math.exp(-1 / (1 - t))
        return f / (f + g)

    return lambda r: step((R - abs(r)) / (R - eps))


def subtracted_inverse_abs_1d(phi, eps: float, R: float, c0: float = 0.0) -> float:
    """``int (phi(x) - phi(0) w(x)) / |x| dx + c0 phi(0)`` with ``w`` the plateau weight."""
    f = probe_1d(phi)
    w = plateau(eps, R)
    f0 = f(0.0)
    L = max(abs(phi.center[0]) + phi.radius, R)
    g = lambda x: (f(x) - f0 * w(x)) / abs(x)
    right = integrate.quad(g, 0.0, L, points=[eps, R], epsabs=1e-13, epsrel=1e-12, limit=400)[0]
    left = integrate.quad(lambda u: g(-u), 0.0, L, points=[eps, R], epsabs=1e-13, epsrel=1e-12, limit=400)[0]
    return right + left + c0 * f0


def weight_shift_1d(w1: tuple[float, float], w2: tuple[float, float]) -> float:
    """``<1/|x|, (w2 - w1)>``: how a change of Taylor weight moves the delta coefficient."""
    p1, p2 = plateau(*w1), plateau(*w2)
    hi = max(w1[1], w2[1])
    return 2 * integrate.quad(lambda x: (p2(x) - p1(x)) / x, 0.0, hi, points=[w1[0], w2[0], w1[1], w2[1]],
                              epsabs=1e-14, epsrel=1e-12, limit=400)[0]


def surface_pair_power(a: float, phi) -> float:
    """``int |x1 - x2|^-a phi(x1, x2)`` in the rotated coordinates ``u = x1 - x2``, ``s = x1 + x2``."""
    f = probe_2d(phi)
    c1, c2 = phi.center
    r = phi.radius
    s0, u0 = c1 + c2, c1 - c2
    half = math.sqrt(2.0) * r

    def inner(s):
        h2 = 2 * r * r - (s - s0) ** 2
        if h2 <= 0:
            return 0.0
        h = math.sqrt(h2)
        lo, hi = u0 - h, u0 + h
        g = lambda u: f(0.5 * (s + u), 0.5 * (s - u))
        out = 0.0
        if hi > 0:
            if lo >= 0:
                out += integrate.quad(lambda u: g(u) * u**-a, lo, hi, epsrel=1e-12, limit=200)[0]
            else:
                out += integrate.quad(g, 0.0, hi, weight="alg", wvar=(-a, 0.0), epsrel=1e-12, limit=200)[0]
        if lo < 0:
            if hi <= 0:
                out += integrate.quad(lambda v: g(-v) * v**-a, -hi, -lo, epsrel=1e-12, limit=200)[0]
            else:
                out += integrate.quad(lambda v: g(-v), 0.0, -lo, weight="alg", wvar=(-a, 0.0),
                                      epsrel=1e-12, limit=200)[0]
        return out

    return 0.5 * integrate.quad(inner, s0 - half, s0 + half, epsrel=1e-10, limit=200)[0]


# ---------------------------------------------------------------------------
# causal structure by definition
# ---------------------------------------------------------------------------


def in_causal_past(y, x) -> bool:
    """``y`` in ``J^-(x)``: ``x - y`` is future-pointing causal or zero."""
    dt = Fraction(x[0]) - Fraction(y[0])
    dx2 = sum((Fraction(a) - Fraction(b)) ** 2 for a, b in zip(x[1:], y[1:]))
    return dt >= 0 and dt * dt >= dx2


def spacelike(x, y) -> bool:
    dt = Fraction(x[0]) - Fraction(y[0])
    dx2 = sum((Fraction(a) - Fraction(b)) ** 2 for a, b in zip(x[1:], y[1:]))
    return dx2 > dt * dt


def in_c_i(points, I) -> bool:
    """No ``x_i`` (``i`` in ``I``, 1-based) in the causal past of any ``x_j`` outside ``I``."""
    n = len(points)
    rest = [j for j in range(1, n + 1) if j not in I]
    return all(not in_causal_past(points[i - 1], points[j - 1]) for i in I for j in rest)


# ---------------------------------------------------------------------------
# Wick contractions by naive enumeration
# ---------------------------------------------------------------------------


def naive_pairings(degrees, saturated_only=False) -> dict:
    """Enumerate every partial matching of labelled legs between distinct vertices.

    Returns counts keyed by the upper triangle of the multiplicity matrix.
    Exponential; only for small total degree.
    """
    legs = [v for v, m in enumerate(degrees) for _ in range(m)]
    n = len(degrees)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    index = {p: t for t, p in enumerate(pairs)}
    counts: dict = {}

    def rec(free: list[int], key: list[int]):
        if not free:
            k = tuple(key)
            counts[k] = counts.get(k, 0) + 1
            return
        first, rest = free[0], free[1:]
        if not saturated_only:
            rec(rest, key)
        for pos, other in enumerate(rest):
            if legs[other] == legs[first]:
                continue
            t = index[(min(legs[first], legs[other]), max(legs[first], legs[other]))]
            key[t] += 1
            rec(rest[:pos] + rest[pos + 1:], key)
            key[t] -= 1

    rec(list(range(len(legs))), [0] * len(pairs))
    return counts
