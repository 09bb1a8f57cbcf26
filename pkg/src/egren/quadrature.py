"""Quadrature for kernels singular at the origin against compactly supported functions.

The integrand ``f = K * g`` is split with a radial plateau function ``s``:

* ``s * f`` is integrated in polar coordinates about the origin on dyadic
  shells ``[R 2^-(j+1), R 2^-j]``; the shell sums of an asymptotically
  homogeneous singularity form a geometric sequence, whose tail is
  extrapolated;
* ``(1 - s) * f`` has no singularity and is integrated in polar coordinates
  about the centre of the support ball, with panels graded toward its rim.

Refinement doubles the panel count and the angular resolution together; the
difference between two consecutive levels is the reported error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .testfunctions import Cutoff

__all__ = [
    "QuadConfig",
    "Support",
    "Rule",
    "QuadResult",
    "NonIntegrable",
    "build_rule",
    "integrate",
    "sphere_rule",
    "sphere_area",
    "annulus_rules",
]


class NonIntegrable(ArithmeticError):
    """Shell sums do not decay, or refinement fails to settle."""


@dataclass(frozen=True)
class QuadConfig:
    """Tolerances and resolution of the polar quadrature.

    Attributes:
        rtol: relative tolerance, measured against ``int |f|``.
        depth: number of dyadic shells toward the singular point.
        gauss: Gauss-Legendre nodes per radial panel.
        sphere: base angular resolution (nodes per half great circle).
        min_level, max_level: refinement levels tried.
    """

    rtol: float = 1e-8
    atol: float = 0.0
    depth: int = 40
    gauss: int = 16
    sphere: int = 8
    min_level: int = 0
    max_level: int = 3

    def cheaper(self) -> "QuadConfig":
        return replace(self, rtol=max(self.rtol, 1e-6), gauss=12, max_level=2)

    def for_dim(self, d: int) -> "QuadConfig":
        """Coarser angular rules in ``d >= 4``, where sphere nodes grow like ``n^(d-1)``."""
        if d < 4:
            return self
        return replace(self, sphere=min(self.sphere, 4), max_level=min(self.max_level, 1))


DEFAULT_CONFIG = QuadConfig()


@dataclass(frozen=True)
class Support:
    """Bounding ball of an integrand plus the radius of a smooth ball around 0.

    ``inner`` is the radius of a ball about the origin on which the
    non-kernel factor is smooth (inside its support); 0 if the origin is
    outside the support.
    """

    center: np.ndarray
    radius: float
    inner: float

    @classmethod
    def of(cls, probe) -> "Support":
        c, r, inner = probe.support_ball()
        return cls(np.asarray(c, dtype=float), float(r), float(inner))


@lru_cache(maxsize=None)
def _leggauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def sphere_area(k: int) -> float:
    """Surface measure of the unit sphere in ``R^k``."""
    return 2.0 * math.pi ** (k / 2) / math.gamma(k / 2)


@lru_cache(maxsize=None)
def sphere_rule(k: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes (shape ``(k, M)``) and weights on the unit sphere in ``R^k``.

    ``n`` is the number of nodes per half great circle. The rule integrates
    trigonometric polynomials of degree ``< 2n`` exactly.
    """
    if k == 1:
        return np.array([[-1.0, 1.0]]), np.array([1.0, 1.0])
    if k == 2:
        m = 2 * n
        th = (np.arange(m) + 0.5) * (2 * math.pi / m)
        return np.vstack([np.cos(th), np.sin(th)]), np.full(m, 2 * math.pi / m)
    a = (k - 3) / 2
    z, wz = roots_jacobi(n, a, a)
    sub, wsub = sphere_rule(k - 1, n)
    s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    nodes = np.vstack(
        [np.repeat(z, sub.shape[1]), (s[:, None, None] * sub[None, :, :]).transpose(1, 0, 2).reshape(k - 1, -1)]
    )
    weights = np.outer(wz, wsub).ravel()
    return nodes, weights


def _panels(breaks, nodes_per_panel, sub):
    x, w = _leggauss(nodes_per_panel)
    xs, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        edges = np.linspace(a, b, sub + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            xs.append(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
            ws.append(0.5 * (hi - lo) * w)
    return np.concatenate(xs), np.concatenate(ws)


@dataclass
class Rule:
    """Fixed cubature nodes; ``shell[i] >= 0`` marks nodes of dyadic shell ``i``."""

    X: np.ndarray
    W: np.ndarray
    shell: np.ndarray
    n_shells: int
    extrapolate: bool

    def integrate(self, values: np.ndarray) -> tuple[complex, complex, float, float]:
        """Return ``(value, tail, tail_error, scale)``."""
        contrib = self.W * values
        scale = float(np.sum(np.abs(contrib)))
        total = np.sum(contrib)
        tail, tail_err = 0.0, 0.0
        if self.extrapolate and self.n_shells >= 3:
            S = np.zeros(self.n_shells, dtype=contrib.dtype)
            mask = self.shell >= 0
            np.add.at(S, self.shell[mask], contrib[mask])
            tail, tail_err = _geometric_tail(S, scale)
        return total + tail, tail, tail_err, scale


def _geometric_tail(S: np.ndarray, scale: float) -> tuple[complex, float]:
    s2, s1, s0 = S[-3], S[-2], S[-1]
    tiny = 1e-15 * max(scale, 1e-300)
    if abs(s0) <= tiny and abs(s1) <= tiny:
        return 0.0, tiny
    if abs(s1) <= tiny:
        raise NonIntegrable("shell sums fail to decay toward the singular point")
    q = s0 / s1
    q_prev = s1 / s2 if abs(s2) > tiny else q
    if abs(q) >= 0.999:
        raise NonIntegrable("shell sums fail to decay toward the singular point")
    tail = s0 * q / (1 - q)
    err = abs(tail) * abs(q - q_prev) / abs(1 - q) + 1e-12 * abs(tail)
    return tail, float(err)


def build_rule(
    support: Support,
    d: int,
    level: int,
    cfg: QuadConfig = DEFAULT_CONFIG,
    window: tuple[float, float] | None = None,
    singular: bool = True,
) -> Rule:
    """Cubature rule for integrands supported in ``support`` (and in the radial ``window``)."""
    c = np.asarray(support.center, dtype=float)
    r = float(support.radius)
    sub = 2**level
    use_inner = singular and support.inner > 0
    lo, hi = (0.0, math.inf) if window is None else window
    parts_X, parts_W, parts_S = [], [], []
    n_shells = 0
    extrapolate = False

    if use_inner:
        R_in = 0.5 * support.inner
        part = Cutoff(0.5 * R_in, R_in)
        top = min(R_in, hi)
        if top > lo:
            omega, w_omega = sphere_rule(d, cfg.sphere * sub)
            radii, wr = [], []
            shell_id = []
            j = 0
            upper = top
            while True:
                lower = upper / 2
                if lo > 0 and lower <= lo:
                    lower = lo
                rho, w = _panels([lower, upper], cfg.gauss, 1 if j > 0 else sub)
                radii.append(rho)
                wr.append(w * rho ** (d - 1))
                shell_id.append(np.full(rho.size, j))
                j += 1
                upper = lower
                if lo > 0 and lower <= lo:
                    break
                if lo == 0 and j >= cfg.depth:
                    break
            rho = np.concatenate(radii)
            wr = np.concatenate(wr)
            sid = np.concatenate(shell_id)
            X = (rho[None, :, None] * omega[:, None, :]).reshape(d, -1)
            W = (wr[:, None] * w_omega[None, :]).ravel()
            W = W * part(X)
            parts_X.append(X)
            parts_W.append(W)
            parts_S.append(np.repeat(sid, omega.shape[1]))
            n_shells = j
            extrapolate = lo == 0

    need_outer = not use_inner or hi > 0.25 * support.inner
    if need_outer:
        eps_s = 0.25 * support.inner if use_inner else r
        h = min(r / 4, eps_s / 2)
        body = np.arange(0.0, 0.75 * r, h)
        breaks = np.concatenate([body, r * (1 - 0.25 * 0.5 ** np.arange(0, 6)), [r]])
        breaks = np.unique(breaks)
        rho, wr = _panels(breaks, cfg.gauss, sub)
        wr = wr * rho ** (d - 1)
        factor = max(1, int(math.ceil(r / (4 * h))))
        omega, w_omega = sphere_rule(d, cfg.sphere * sub * factor)
        X = c[:, None] + (rho[None, :, None] * omega[:, None, :]).reshape(d, -1)
        W = (wr[:, None] * w_omega[None, :]).ravel()
        if use_inner:
            W = W * (1.0 - Cutoff(0.25 * support.inner, 0.5 * support.inner)(X))
        if window is not None:
            rr = np.sqrt(np.sum(X * X, axis=0))
            W = np.where((rr >= lo) & (rr <= hi), W, 0.0)
        keep = W != 0
        parts_X.append(X[:, keep])
        parts_W.append(W[keep])
        parts_S.append(np.full(int(keep.sum()), -1))

    if not parts_X:
        return Rule(np.zeros((d, 0)), np.zeros(0), np.zeros(0, dtype=int), 0, False)
    return Rule(np.hstack(parts_X), np.concatenate(parts_W), np.concatenate(parts_S), n_shells, extrapolate)


@dataclass
class QuadResult:
    value: complex
    error: float
    scale: float
    level: int
    rules: tuple[Rule, Rule]


def integrate(
    fn,
    support: Support,
    d: int,
    cfg: QuadConfig = DEFAULT_CONFIG,
    window: tuple[float, float] | None = None,
    singular: bool = True,
) -> QuadResult:
    """Integrate ``fn`` (vectorized over columns of a ``(d, N)`` array) over ``R^d``."""

    def run(level):
        rule = build_rule(support, d, level, cfg, window, singular)
        vals = fn(rule.X) if rule.X.shape[1] else np.zeros(0)
        if not np.all(np.isfinite(vals)):
            raise NonIntegrable("integrand is not finite at a quadrature node")
        v, tail, tail_err, scale = rule.integrate(vals)
        return rule, v, tail_err, scale

    coarse = run(cfg.min_level)
    level = cfg.min_level + 1
    while True:
        fine = run(level)
        scale = max(fine[3], coarse[3])
        err = abs(fine[1] - coarse[1]) + fine[2]
        tol = max(cfg.rtol * scale, cfg.atol, 1e-300)
        if err <= tol or level >= cfg.max_level:
            break
        coarse = fine
        level += 1
    if err > max(math.sqrt(cfg.rtol) * scale, cfg.atol, 1e-300):
        raise NonIntegrable(f"quadrature did not settle (error {err:.3g}, scale {scale:.3g})")
    value = fine[1]
    if np.iscomplexobj(value) and value.imag == 0:
        value = value.real
    return QuadResult(value, float(err), scale, level, (coarse[0], fine[0]))


@lru_cache(maxsize=None)
def _reference_annulus(d: int, ratio: float, level: int, gauss: int, sphere: int):
    # shells of [ratio, 1], dyadic from the outer radius down
    radii, wr = [], []
    upper = 1.0
    while upper > ratio:
        lower = max(upper / 2, ratio)
        rho, w = _panels([lower, upper], gauss, 2**level)
        radii.append(rho)
        wr.append(w * rho ** (d - 1))
        upper = lower
    rho = np.concatenate(radii)
    wr = np.concatenate(wr)
    omega, w_omega = sphere_rule(d, sphere * 2**level)
    X = (rho[None, :, None] * omega[:, None, :]).reshape(d, -1)
    W = (wr[:, None] * w_omega[None, :]).ravel()
    return X, W


def annulus_rules(d: int, a: float, b: float, cfg: QuadConfig = DEFAULT_CONFIG, levels=(0, 1)) -> list[Rule]:
    """Origin-centred rules on ``a <= |x| <= b`` (integrand smooth on spheres)."""
    out = []
    for level in levels:
        X, W = _reference_annulus(d, a / b, level, cfg.gauss, cfg.sphere)
        out.append(Rule(b * X, W * b**d, np.full(W.size, -1), 0, False))
    return out
