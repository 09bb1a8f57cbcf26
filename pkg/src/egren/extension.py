"""Extension of distributions across a point or the total diagonal.

Below the critical order (``sd < d``) the extension is unique and is computed
as the telescoping cutoff series

    <t, phi> = <t0, (1 - th) phi> + sum_m <t0, (th_{2^m} - th_{2^{m+1}}) phi>

with a geometric tail. At or above it, test functions are first projected by
``W phi = phi - sum_{|a| <= rho} w_a d^a phi(0)`` (weights ``w_a = w x^a / a!``
with ``w = 1`` near 0); the same series applied to ``W phi`` converges, and the
free constants ``c_a = <t, w_a>`` are added back as ``sum c_a d^a phi(0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np
import sympy as sp

from .distributions import (
    DistributionKernel,
    Inconclusive,
    NeedsExtension,
    PairingValue,
    Term,
    Block,
    DyadicScalingReport,
    _realify,
    pair,
    scaling_degree_estimate,
    surface_integral,
)
from .dsl import coordinate_symbols, compile_expr
from .fibration import SurfaceFibration
from .quadrature import DEFAULT_CONFIG, NonIntegrable, QuadConfig, Support, annulus_rules, integrate, _leggauss
from .testfunctions import Cutoff, ProductTestFunction, TestFunction, default_probes, make_bump, multi_indices, _factorial

__all__ = [
    "CutoffFamily",
    "WOperator",
    "WProjected",
    "WeightProbe",
    "ExtensionResult",
    "ExtendedKernel",
    "NeedsSubtraction",
    "NotConverged",
    "extend_unique",
    "build_w_operator",
    "extend_with_w",
    "transversal_scaling_degree",
    "extend_at_surface",
    "ambiguity_dimension",
    "SurfaceFibration",
]


class NeedsSubtraction(ValueError):
    """``sd >= d``: a unique extension does not exist; use a W-operator."""


class NotConverged(ArithmeticError):
    """The cutoff series did not reach its tolerance within ``n_max`` pieces."""


def ambiguity_dimension(d_or_codim: int, sd: float) -> int:
    """Number of free constants, ``C(floor(sd - d) + d, d)``, or 0 when ``sd < d``."""
    if not math.isfinite(sd):
        raise ValueError("scaling degree must be finite")
    if sd < d_or_codim:
        return 0
    rho = math.floor(sd - d_or_codim + 1e-12)
    return math.comb(rho + d_or_codim, d_or_codim)


@dataclass(frozen=True)
class CutoffFamily:
    """Plateau cutoff ``th`` (1 on ``|x| < eps``, 0 on ``|x| > R``) and its dyadic rescalings."""

    eps: float = 0.5
    R: float = 1.0

    def __post_init__(self):
        Cutoff(self.eps, self.R)

    @property
    def base(self) -> Cutoff:
        return Cutoff(self.eps, self.R)

    def at(self, m: int) -> Cutoff:
        """``x -> th(2^m x)``."""
        return self.base.scaled(2.0**m)

    def window(self, m: int) -> tuple[float, float]:
        """Radial support of ``th_{2^m} - th_{2^{m+1}}``."""
        return self.eps * 2.0 ** (-m - 1), self.R * 2.0**-m

    def piece_weight(self, m: int, X: np.ndarray) -> np.ndarray:
        rho = np.sqrt(np.sum(X * X, axis=0))
        if m < 0:
            return 1.0 - self.base.radial(rho)
        return self.base.radial(rho * 2.0**m) - self.base.radial(rho * 2.0 ** (m + 1))


# ---------------------------------------------------------------------------
# W operator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WOperator:
    """Taylor subtraction of order ``order`` with weights ``w x^a / a!``.

    ``weight`` is a plateau :class:`Cutoff`; it equals 1 on ``|x| < weight.eps``,
    which makes ``d^a w_b (0) = delta_ab`` exact.
    """

    d: int
    order: int
    weight: Cutoff = Cutoff(0.5, 1.0)

    @property
    def multi_indices(self) -> tuple[tuple[int, ...], ...]:
        return multi_indices(self.d, self.order)

    def weight_function(self, alpha) -> Callable[[np.ndarray], np.ndarray]:
        """``w_alpha(x) = w(x) x^alpha / alpha!``."""
        alpha = tuple(alpha)
        fact = _factorial(alpha)

        def f(X):
            X = np.atleast_2d(X)
            mono = np.prod([X[i] ** a for i, a in enumerate(alpha)], axis=0) if any(alpha) else 1.0
            return self.weight(X) * mono / fact

        return f

    @staticmethod
    def weight_derivative_at_origin(alpha, beta) -> int:
        """``d^alpha w_beta (0)``: exactly ``delta_{alpha beta}`` since ``w = 1`` near 0."""
        return int(tuple(alpha) == tuple(beta))

    def apply(self, phi) -> "WProjected":
        return WProjected(phi, self)

    def describe(self) -> dict:
        return {"d": self.d, "order": self.order, "weight": {"eps": self.weight.eps, "R": self.weight.R},
                "n_weights": len(self.multi_indices)}


def build_w_operator(d: int, rho: float, weight: Cutoff | None = None) -> WOperator:
    """W-operator of order ``floor(rho)`` on ``R^d``."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    weight = weight or Cutoff(0.5, 1.0)
    return WOperator(d, int(math.floor(rho + 1e-12)), weight)


class WeightProbe:
    """The weight ``w_alpha`` as a test function (for checking ``<t, w_alpha> = c_alpha``)."""

    __test__ = False

    def __init__(self, W: WOperator, alpha):
        self.W = W
        self.alpha = tuple(alpha)
        self.dim = W.d
        self._f = W.weight_function(self.alpha)

    def __call__(self, X):
        return self._f(np.atleast_2d(np.asarray(X, dtype=float)))

    def taylor(self, point=None, order: int = 8, M=None):
        from .testfunctions import Series

        if point is not None or M is not None:
            raise NotImplementedError
        # w = 1 near the origin, so the expansion is the monomial itself
        s = Series.constant(0.0, self.dim, order)
        if sum(self.alpha) <= order:
            s.c[self.alpha] = 1.0 / _factorial(self.alpha)
        return s

    def derivative_at(self, alpha, point=None):
        if point is not None:
            raise NotImplementedError
        return float(tuple(alpha) == self.alpha)

    def support_ball(self):
        R = self.W.weight.R
        return np.zeros(self.dim), R, R

    def describe(self) -> dict:
        return {"weight": list(self.alpha), "W": self.W.describe()}


class WProjected:
    """``W phi``; near the origin evaluated from the Taylor remainder of ``phi``."""

    __test__ = False
    EXTRA_ORDER = 12

    def __init__(self, phi, W: WOperator):
        self.phi = phi
        self.W = W
        self.dim = W.d
        order = W.order + self.EXTRA_ORDER
        self.series = phi.taylor(order=order)
        self.jet = {a: phi.derivative_at(a) for a in W.multi_indices}
        c, r, inner = phi.support_ball()
        self.phi_ball = (np.asarray(c, dtype=float), float(r), float(inner))
        # the remainder is accurate well inside the radius of convergence
        self.h = min(W.weight.eps, 0.05 * inner) if inner > 0 else 0.0
        if isinstance(phi, WProjected):
            # a projected probe is smooth, but its own series radius still governs
            self.h = min(self.h, phi.h)

    def weight_part(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        acc = np.zeros(X.shape[1])
        w = self.W.weight(X)
        for a, v in self.jet.items():
            if v == 0:
                continue
            mono = np.prod([X[i] ** k for i, k in enumerate(a)], axis=0) if any(a) else 1.0
            acc = acc + v * mono / _factorial(a)
        return w * acc

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = self.phi(X) - self.weight_part(X)
        if self.h > 0:
            rho = np.sqrt(np.sum(X * X, axis=0))
            near = rho < self.h
            if near.any():
                out[near] = self.series.evaluate(X[:, near], min_order=self.W.order + 1)
        return out

    def derivative_at(self, alpha, point=None) -> float:
        if point is not None:
            raise NotImplementedError
        alpha = tuple(alpha)
        if sum(alpha) <= self.W.order:
            return 0.0
        return self.phi.derivative_at(alpha)

    def taylor(self, point=None, order: int = 8, M=None):
        if point is not None or M is not None:
            raise NotImplementedError
        s = self.phi.taylor(order=order)
        c = s.c.copy()
        for a in self.W.multi_indices:
            if sum(a) <= order:
                c[a] = 0.0
        return type(s)(c, order)

    def support_ball(self):
        c, r, inner = self.phi_ball
        R = max(self.W.weight.R, float(np.linalg.norm(c)) + r)
        return np.zeros(self.dim), R, R


# ---------------------------------------------------------------------------
# the cutoff series
# ---------------------------------------------------------------------------


@dataclass
class SeriesSettings:
    n_max: int = 40
    stop_rtol: float = 1e-10
    tail_rtol: float = 1e-3


def _split_probe(g):
    """``(phi, weight_part or None)`` for a probe or a W-projected probe."""
    if isinstance(g, WProjected):
        return g.phi, g
    return g, None


def _series_pairing(K, g, d: int, family: CutoffFamily, sd_eff: float, cfg: QuadConfig,
                    settings: SeriesSettings) -> tuple[PairingValue, dict]:
    """Telescoping cutoff series for ``<K, g>``; ``K`` is a callable kernel on ``R^d``.

    ``sd_eff`` is the decay exponent used for the majorant of the tail:
    pieces are bounded by ``C 2^{m (sd_eff - d)}``.
    """
    phi, wproj = _split_probe(g)
    c, r, inner = phi.support_ball()
    c = np.asarray(c, dtype=float)
    outer = float(np.linalg.norm(c)) + r
    R_total = max(outer, wproj.W.weight.R if wproj is not None else 0.0)
    if R_total == 0:
        return PairingValue(0.0, 0.0, 0.0), {"pieces": 0}

    def g_eval(X):
        return g(X)

    def piece(m: int) -> tuple[complex, float, float]:
        if m < 0:
            a, b = family.eps, math.inf
        else:
            a, b = family.window(m)
        if a >= R_total:
            return 0.0, 0.0, 0.0
        b_eff = min(b, R_total)
        total_v, total_e, total_s = 0.0, 0.0, 0.0
        smooth_on_spheres = (inner > 0 and b_eff <= inner) or a >= outer
        if smooth_on_spheres:
            rules = annulus_rules(d, a, b_eff, cfg)
            vals = []
            for rule in rules:
                f = K(rule.X) * family.piece_weight(m, rule.X) * g_eval(rule.X)
                vals.append(rule.integrate(f))
            v, s = vals[1][0], vals[1][3]
            return v, abs(v - vals[0][0]), s
        # straddling annulus: the probe part on its own ball, the weights on spheres
        if r > 0 and a < outer:
            sup = Support(c, r, inner)
            res = integrate(lambda X: K(X) * family.piece_weight(m, X) * phi(X), sup, d, cfg, window=(a, b))
            total_v, total_e, total_s = res.value, res.error, res.scale
        if wproj is not None and a < wproj.W.weight.R:
            rules = annulus_rules(d, a, min(b, wproj.W.weight.R), cfg, levels=(1, 2))
            vals = []
            for rule in rules:
                f = K(rule.X) * family.piece_weight(m, rule.X) * wproj.weight_part(rule.X)
                vals.append(rule.integrate(f))
            total_v -= vals[1][0]
            total_e += abs(vals[1][0] - vals[0][0])
            total_s += vals[1][3]
        return total_v, total_e, total_s

    value, err, scale = piece(-1)
    m0 = 0
    if family.eps / 2 > R_total:
        m0 = max(0, int(math.floor(math.log2(family.eps / R_total))) - 1)
    feature = min(inner, outer) if inner > 0 else outer
    m_in = max(m0, int(math.ceil(math.log2(family.R / max(feature, 1e-300)))) + 1)
    pieces = []
    small = 0
    m = m0
    m_last = m_in + settings.n_max
    while m <= m_last:
        v, e, s = piece(m)
        pieces.append(v)
        value += v
        err += e
        scale += s
        ref = max(scale, abs(value), 1e-300)
        small = small + 1 if abs(v) <= settings.stop_rtol * ref else 0
        if m > m_in and small >= 2:
            break
        m += 1
    q = 2.0 ** (sd_eff - d)
    last = pieces[-1] if pieces else 0.0
    majorant = abs(last) * q / (1 - q) if q < 1 else math.inf
    signed = 0.0
    if len(pieces) >= 2 and pieces[-2] != 0:
        q_emp = pieces[-1] / pieces[-2]
        if abs(q_emp) < 1:
            signed = pieces[-1] * q_emp / (1 - q_emp)
    ref = max(scale, abs(value), 1e-300)
    diag = {
        "pieces": len(pieces) + 1,
        "first_piece": m0,
        "inner_scale_index": m_in,
        "tail_signed": complex(signed).real if complex(signed).imag == 0 else complex(signed),
        "tail_majorant": majorant,
        "ratio_bound": q,
    }
    if majorant > settings.tail_rtol * ref:
        raise NotConverged(
            f"tail majorant {majorant:.3g} exceeds tolerance after {len(pieces)} pieces (ratio bound {q:.4f})"
        )
    value = value + signed
    return PairingValue(value, err + majorant, scale), diag


# ---------------------------------------------------------------------------
# extended kernels and results
# ---------------------------------------------------------------------------


class ExtendedKernel:
    """Pairing closure of an extension; behaves like a kernel in :func:`scaling_degree_estimate`."""

    def __init__(self, t0: DistributionKernel, expr: sp.Expr, family: CutoffFamily, sd: float,
                 W: WOperator | None = None, constants: Mapping | None = None,
                 cfg: QuadConfig | None = None, settings: SeriesSettings | None = None):
        self.t0 = t0
        self.dim = t0.dim
        self.expr = expr
        self.family = family
        self.sd = sd
        self.W = W
        self.constants = {tuple(k): v for k, v in (constants or {}).items()}
        self.cfg = cfg or DEFAULT_CONFIG
        self.settings = settings or SeriesSettings()
        self._K = compile_expr(expr, self.dim)
        self._off = DistributionKernel(self.dim, [Term(1.0, (0,) * self.dim, (Block(self.dim, expr, None),))],
                                       label=t0.label)
        self.last_diagnostics: dict = {}

    def K(self, X):
        eps = None if self.t0.eps0 is None else self.t0.eps0
        return self._K(X, eps)

    def pair(self, phi) -> PairingValue:
        c, r, inner = phi.support_ball()
        if inner == 0:
            # support avoids the point: the extension is t0 itself
            self.last_diagnostics = {"mode": "off-locus"}
            return pair(self._off, phi, self.cfg)
        if self.W is None:
            value, diag = _series_pairing(self.K, phi, self.dim, self.family, self.sd, self.cfg, self.settings)
        else:
            g = self.W.apply(phi)
            sd_eff = self.sd - (self.W.order + 1)
            value, diag = _series_pairing(self.K, g, self.dim, self.family, sd_eff, self.cfg, self.settings)
            extra = sum(cv * phi.derivative_at(a) for a, cv in self.constants.items())
            value = PairingValue(value.value + extra, value.error, value.scale)
        self.last_diagnostics = diag
        return _realify(value)

    def describe(self) -> dict:
        return {"dim": self.dim, "kernel": str(self.expr), "sd": self.sd,
                "cutoff": {"eps": self.family.eps, "R": self.family.R},
                "W": None if self.W is None else self.W.describe()}


@dataclass
class ExtensionResult:
    """Extended distribution, its mode, and the renormalization constants."""

    kernel: object
    mode: str  # "Unique" | "Ambiguous"
    constants: dict
    ambiguity_dimension: int
    diagnostics: dict = field(default_factory=dict)

    def pair(self, phi) -> PairingValue:
        return self.kernel.pair(phi)

    def estimate_sd(self, probes=None, n_max: int = 40) -> DyadicScalingReport:
        if probes is None:
            probes = default_probes(self.kernel.dim)[:3]
        return scaling_degree_estimate(self.kernel, probes, n_max=n_max)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "ambiguity_dimension": self.ambiguity_dimension,
            "constants": [[list(k), v] for k, v in sorted(self.constants.items())],
            "diagnostics": self.diagnostics,
        }


def _resolve_sd(t0: DistributionKernel, sd, fib: SurfaceFibration | None = None) -> tuple[float, str]:
    if sd is not None:
        return float(sd), "override"
    if t0.sd is not None:
        return float(t0.sd), "declared"
    if fib is None:
        rep = scaling_degree_estimate(_off_locus_kernel(t0), default_probes(t0.dim, off_origin=True))
    else:
        rep = transversal_scaling_degree(t0, fib)
    return float(rep.estimate), "estimated"


def _off_locus_kernel(t0: DistributionKernel) -> DistributionKernel:
    expr = t0.off_locus_expr()
    return DistributionKernel(t0.dim, [Term(1.0, (0,) * t0.dim, (Block(t0.dim, expr, None),))],
                              eps0=t0.eps0, label=t0.label)


def _drop_note(t0: DistributionKernel) -> list[str]:
    if any(any(b.is_delta for b in term.blocks) for term in t0.terms):
        return ["terms supported at the point were dropped: an extension only sees t0 off the point"]
    return []


def extend_unique(t0: DistributionKernel, family: CutoffFamily | None = None, n_max: int = 40,
                  sd: float | None = None, cfg: QuadConfig | None = None) -> ExtensionResult:
    """Unique extension of ``t0`` across the origin (requires ``sd < d``).

    Raises:
        NeedsSubtraction: if ``sd >= d``.
    """
    family = family or CutoffFamily()
    sd_val, source = _resolve_sd(t0, sd)
    if sd_val >= t0.dim:
        raise NeedsSubtraction(f"sd = {sd_val} >= d = {t0.dim}; use extend_with_w")
    kern = ExtendedKernel(t0, t0.off_locus_expr(), family, sd_val, cfg=cfg, settings=SeriesSettings(n_max=n_max))
    diag = {"sd": sd_val, "sd_source": source, "cutoff": {"eps": family.eps, "R": family.R}, "n_max": n_max,
            "notes": _drop_note(t0)}
    return ExtensionResult(kern, "Unique", {}, 0, diag)


def extend_with_w(t0: DistributionKernel, W: WOperator, constants: Mapping | None = None,
                  family: CutoffFamily | None = None, sd: float | None = None, n_max: int = 40,
                  cfg: QuadConfig | None = None) -> ExtensionResult:
    """Extension with Taylor subtraction: ``<t, phi> = <t0, W phi> + sum c_a d^a phi(0)``.

    Constants default to 0 for every ``|a| <= W.order``; the result satisfies
    ``<t, w_a> = c_a``.

    Raises:
        ValueError: ``sd < d`` or ``floor(sd - d) != W.order``.
    """
    family = family or CutoffFamily()
    sd_val, source = _resolve_sd(t0, sd)
    if sd_val < t0.dim:
        raise ValueError(f"sd = {sd_val} < d: the extension is unique, use extend_unique")
    rho = math.floor(sd_val - t0.dim + 1e-12)
    if W.d != t0.dim or W.order != rho:
        raise ValueError(f"W order {W.order} (d={W.d}) does not match floor(sd - d) = {rho} (d={t0.dim})")
    consts = {a: 0.0 for a in W.multi_indices}
    for k, v in (constants or {}).items():
        k = tuple(k)
        if k not in consts:
            raise ValueError(f"constant for {k} is outside |alpha| <= {W.order}")
        consts[k] = float(v)
    kern = ExtendedKernel(t0, t0.off_locus_expr(), family, sd_val, W, consts, cfg, SeriesSettings(n_max=n_max))
    diag = {"sd": sd_val, "sd_source": source, "rho": rho, "W": W.describe(),
            "cutoff": {"eps": family.eps, "R": family.R}, "n_max": n_max, "notes": _drop_note(t0)}
    return ExtensionResult(kern, "Ambiguous", consts, ambiguity_dimension(t0.dim, sd_val), diag)


# ---------------------------------------------------------------------------
# surfaces: the total diagonal
# ---------------------------------------------------------------------------


def _fiber_symbols_expr(composed: sp.Expr, fib: SurfaceFibration) -> sp.Expr:
    """Rename the fiber variables ``x_{d+1} ...`` of a base-independent expression to ``x1 ...``."""
    syms = coordinate_symbols(fib.total_dim)
    return composed.xreplace(dict(zip(syms[fib.d :], coordinate_symbols(fib.codim))))


def transversal_scaling_degree(t: DistributionKernel, fib: SurfaceFibration, probes=None, n_max: int = 48,
                               base_probe: TestFunction | None = None, cfg: QuadConfig | None = None
                               ) -> DyadicScalingReport:
    """Scaling degree at the diagonal, dilating only the fiber coordinates.

    Probes are products ``chi(X) psi(eta)`` in fibration coordinates; pass
    fiber probes ``psi`` (and optionally ``base_probe`` for ``chi``), or
    :class:`ProductTestFunction` instances with factors ``(chi, psi)``.
    """
    if t.dim != fib.total_dim:
        raise ValueError("kernel dimension does not match the fibration")
    composed = fib.compose(t.off_locus_expr())
    chi = base_probe or make_bump(fib.d, None, 1.0)
    fiber_probes, chis = [], []
    for p in probes if probes is not None else default_probes(fib.codim):
        if isinstance(p, ProductTestFunction):
            chis.append(p.factors[0])
            fiber_probes.append(p.factors[1])
        else:
            chis.append(chi)
            fiber_probes.append(p)
    if not fib.depends_on_base(composed):
        fiber_kernel = DistributionKernel(
            fib.codim, [Term(1.0, (0,) * fib.codim, (Block(fib.codim, _fiber_symbols_expr(composed, fib), t.sd),))],
            eps0=t.eps0, label=f"fiber[{t.label}]")
        rep = scaling_degree_estimate(fiber_kernel, fiber_probes if probes is not None else None,
                                      n_max=n_max, cfg=cfg)
        rep.notes.append("kernel is independent of the base point in fibration coordinates")
        rep.notes.append(f"fibration: {fib.describe()}")
        return rep
    # base-dependent: quadrature over the base with a fiber kernel per node
    kernel = _BaseSumKernel(fib, composed, t, chi, {id(psi): c for c, psi in zip(chis, fiber_probes)})
    rep = scaling_degree_estimate(kernel, fiber_probes if probes is not None else None, n_max=n_max, cfg=cfg)
    rep.notes.append("kernel depends on the base point; base integral by tensor Gauss-Legendre")
    rep.notes.append(f"fibration: {fib.describe()}")
    return rep


class _BaseSumKernel:
    """Fiber functional ``psi -> J sum_q w_q chi(X_q) <K(X_q, .), psi>`` for base-dependent kernels."""

    def __init__(self, fib: SurfaceFibration, composed: sp.Expr, t: DistributionKernel, chi, chis: dict):
        self.fib = fib
        self.dim = fib.codim
        self.composed = composed
        self.t = t
        self.chi = chi
        self.chis = chis
        self._nodes = {}

    def _nodes_for(self, chi):
        key = id(chi)
        if key not in self._nodes:
            fib = self.fib
            k = 12 if fib.d <= 2 else 6
            x, w = _leggauss(k)
            c, r, _ = chi.support_ball()
            grids = np.meshgrid(*([x] * fib.d), indexing="ij")
            wg = np.meshgrid(*([w] * fib.d), indexing="ij")
            Xn = np.vstack([g.ravel() for g in grids]) * r + np.asarray(c, dtype=float)[:, None]
            Wn = np.prod(np.vstack([g.ravel() for g in wg]), axis=0) * r**fib.d
            syms = coordinate_symbols(fib.total_dim)
            nodes = []
            for X, wq, cv in zip(Xn.T, Wn, chi(Xn)):
                if cv == 0:
                    continue
                e = self.composed.xreplace({s: sp.Float(v, 17) for s, v in zip(syms[: fib.d], X)})
                kern = DistributionKernel(
                    fib.codim,
                    [Term(1.0, (0,) * fib.codim, (Block(fib.codim, _fiber_symbols_expr(e, fib), self.t.sd),))],
                    eps0=self.t.eps0)
                nodes.append((wq * cv * fib.jacobian, kern))
            self._nodes[key] = nodes
        return self._nodes[key]

    def plan(self, probe, cfg):
        from .distributions import _Plan

        chi = self.chis.get(id(probe), self.chi)
        plans = [(wq, _Plan(k, probe, cfg)) for wq, k in self._nodes_for(chi)]

        def value(lam):
            total = PairingValue(0.0, 0.0, 0.0)
            for wq, pl in plans:
                total = total + pl(lam).scaled(wq)
            return _realify(total)

        return value

    def pair(self, probe, cfg=None):
        return self.plan(probe, cfg or DEFAULT_CONFIG)(1.0)


def extend_at_surface(t0: DistributionKernel, fib: SurfaceFibration, W: WOperator | None = None,
                      constants: Mapping | None = None, family: CutoffFamily | None = None,
                      sd: float | None = None, n_max: int = 40, cfg: QuadConfig | None = None) -> ExtensionResult:
    """Fiberwise extension across the total diagonal.

    Each fiber is extended at ``eta = 0`` (uniquely if ``sd < codim``, with
    the W-operator otherwise) and the fiber pairings are integrated over the
    base. Constants ``c_a`` add ``c_a J int d_eta^a (phi o alpha)(X, 0) dX``.
    """
    family = family or CutoffFamily()
    cfg = cfg or DEFAULT_CONFIG
    if t0.dim != fib.total_dim:
        raise ValueError("kernel dimension does not match the fibration")
    sd_val, source = _resolve_sd(t0, sd, fib)
    codim = fib.codim
    expr = t0.off_locus_expr()
    if sd_val < codim:
        mode, amb, consts, Wf = "Unique", 0, {}, None
    else:
        rho = math.floor(sd_val - codim + 1e-12)
        Wf = W or build_w_operator(codim, rho)
        if Wf.d != codim or Wf.order != rho:
            raise ValueError(f"W order {Wf.order} (d={Wf.d}) does not match floor(sd - codim) = {rho}")
        consts = {a: 0.0 for a in Wf.multi_indices}
        for k, v in (constants or {}).items():
            consts[tuple(k)] = float(v)
        mode, amb = "Ambiguous", ambiguity_dimension(codim, sd_val)
    kern = SurfaceExtendedKernel(t0, fib, expr, family, sd_val, Wf, consts, cfg, SeriesSettings(n_max=n_max))
    diag = {"sd": sd_val, "sd_source": source, "codim": codim, "fibration": fib.describe(),
            "cutoff": {"eps": family.eps, "R": family.R}, "notes": _drop_note(t0)}
    return ExtensionResult(kern, mode, consts, amb, diag)


class SurfaceExtendedKernel:
    """Pairing closure of a fiberwise extension across the diagonal."""

    def __init__(self, t0, fib, expr, family, sd, W, constants, cfg, settings):
        self.t0 = t0
        self.fib = fib
        self.dim = fib.total_dim
        self.expr = expr
        self.family = family
        self.sd = sd
        self.W = W
        self.constants = constants
        self.cfg = cfg
        self.settings = settings

    def pair(self, phi) -> PairingValue:
        fib = self.fib
        c, r, _ = phi.support_ball()
        if fib.distance_to_surface(c) >= r:
            off = DistributionKernel(self.dim, [Term(1.0, (0,) * self.dim, (Block(self.dim, self.expr, None),))],
                                     locus=fib)
            return pair(off, phi, self.cfg)
        codim = fib.codim
        W = self.W
        sd_eff = self.sd if W is None else self.sd - (W.order + 1)
        # slices near the rim of the support carry vanishing mass; judge them absolutely
        cfg = replace(self.cfg, atol=max(self.cfg.atol, 1e-15))

        def fiber_pairing(KX, g):
            if g.support_ball()[2] == 0:
                sup = Support.of(g)
                res = integrate(lambda H: KX(H) * g(H), sup, codim, cfg)
                return res.value, res.error
            gg = g if W is None else W.apply(g)
            val, _ = _series_pairing(KX, gg, codim, self.family, sd_eff, cfg, self.settings)
            extra = sum(cv * g.derivative_at(a) for a, cv in self.constants.items()) if W is not None else 0.0
            return val.value + extra, val.error

        res = surface_integral(self.expr, fib, lambda X: fib.slice_at(phi, X), c, r, self.cfg, fiber_pairing)
        return _realify(res)

    def describe(self) -> dict:
        return {"dim": self.dim, "kernel": str(self.expr), "sd": self.sd, "fibration": self.fib.describe(),
                "W": None if self.W is None else self.W.describe()}
