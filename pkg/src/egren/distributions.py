"""Distributions on R^d as pairing engines, and their scaling degree.

A :class:`DistributionKernel` is a finite sum of terms

    c * d^beta-moved  [ K_1(x_1) (x) K_2(x_2) (x) ... ] * s(x)

where each block ``K_b`` is either a kernel expression (singular at the
block origin) or a Dirac delta, ``s`` is a smooth factor, and ``beta`` is a
derivative that has been moved onto the test function:
``<term, phi> = c * int prod K_b * s * d^beta phi``. Single-block kernels from
the DSL are the common case; tensor products and derivatives stay in this
form so that every pairing is an absolutely convergent integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from itertools import product as iproduct
from typing import Iterable, Sequence

import numpy as np
import sympy as sp

from .dsl import EPS, coordinate_symbols, compile_expr, parse_kernel_dsl
from .fibration import SurfaceFibration
from .quadrature import DEFAULT_CONFIG, NonIntegrable, QuadConfig, Support, build_rule, integrate, _leggauss
from .testfunctions import (
    ProductTestFunction,
    TestFunction,
    default_probes,
    make_bump,
    multi_indices,
    _binom,
    _leq,
    _sub,
    _add,
)

__all__ = [
    "NeedsExtension",
    "Inconclusive",
    "NonIntegrable",
    "Block",
    "Term",
    "DistributionKernel",
    "PairingValue",
    "DyadicScalingReport",
    "DecayResult",
    "pair",
    "dilate",
    "make_bump",
    "derive_kernel",
    "multiply_monomial",
    "multiply_smooth",
    "tensor",
    "scaling_degree_estimate",
    "fit_dyadic_slope",
    "fourier_decay_probe",
]


class NeedsExtension(ValueError):
    """The probe meets the singular locus of a kernel that is not locally integrable."""


class Inconclusive(ArithmeticError):
    """The numerical evidence does not support a verdict."""


@dataclass(frozen=True)
class PairingValue:
    """A pairing with its absolute error estimate; ``scale`` is ``int |integrand|``."""

    value: complex
    error: float
    scale: float = 0.0

    def __float__(self) -> float:
        return float(np.real(self.value))

    def __add__(self, other: "PairingValue") -> "PairingValue":
        return PairingValue(self.value + other.value, self.error + other.error, self.scale + other.scale)

    def scaled(self, a: complex) -> "PairingValue":
        return PairingValue(a * self.value, abs(a) * self.error, abs(a) * self.scale)

    def to_dict(self) -> dict:
        v = complex(self.value)
        out = {"value": v.real, "error": self.error}
        if v.imag:
            out["value_imag"] = v.imag
        return out


# ---------------------------------------------------------------------------
# kernel representation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Block:
    """One tensor factor: kernel expression in local ``x1 ... x_size``, or ``None`` for delta."""

    size: int
    expr: sp.Expr | None
    sd: float | None = None

    @property
    def is_delta(self) -> bool:
        return self.expr is None


@dataclass(frozen=True)
class Term:
    coef: complex
    beta: tuple[int, ...]
    blocks: tuple[Block, ...]
    smooth: sp.Expr = sp.S.One

    @property
    def dim(self) -> int:
        return sum(b.size for b in self.blocks)

    @property
    def is_delta(self) -> bool:
        return all(b.is_delta for b in self.blocks)

    def offsets(self) -> list[int]:
        out, k = [], 0
        for b in self.blocks:
            out.append(k)
            k += b.size
        return out


def _shift(expr: sp.Expr, offset: int, size: int) -> sp.Expr:
    """Rename local ``x1 ... x_size`` to ``x_{offset+1} ...``."""
    if offset == 0:
        return expr
    src = coordinate_symbols(size)
    dst = coordinate_symbols(offset + size)[offset:]
    return expr.xreplace(dict(zip(src, dst)))


def _monomial(alpha: Sequence[int], offset: int = 0) -> sp.Expr:
    syms = coordinate_symbols(offset + len(alpha))[offset:]
    return sp.Mul(*[s**a for s, a in zip(syms, alpha)])


class DistributionKernel:
    """A distribution on ``R^dim``, evaluated through its pairing with test functions.

    Args:
        dim: ambient dimension.
        terms: the term list (see module docstring).
        locus: ``"origin"`` or a :class:`SurfaceFibration` (singular on the total diagonal).
        sd: declared scaling degree (metadata, used for the integrability check).
        eps0: value of the regulator ``eps`` at scale 1; under dilation it is
            coupled as ``eps = eps0 * lam``.
        label: free-form name carried into reports.
    """

    def __init__(self, dim: int, terms: Iterable[Term], locus="origin", sd: float | None = None,
                 eps0: float | None = None, label: str = ""):
        self.dim = int(dim)
        self.terms = tuple(terms)
        self.locus = locus
        self.sd = sd
        self.eps0 = eps0
        self.label = label
        for t in self.terms:
            if t.dim != self.dim or len(t.beta) != self.dim:
                raise ValueError("term dimension mismatch")
        if isinstance(locus, SurfaceFibration):
            if locus.total_dim != self.dim:
                raise ValueError("fibration dimension mismatch")
            if any(len(t.blocks) != 1 for t in self.terms if not t.is_delta):
                raise ValueError("surface kernels must be single-block")

    # constructors ----------------------------------------------------------
    @classmethod
    def from_dsl(cls, text, dim: int, delta: Sequence[dict] | None = None, sd: float | None = None,
                 eps0: float | None = None, locus="origin", label: str = "") -> "DistributionKernel":
        """Kernel from DSL text (or a sympy expression) plus an optional delta list.

        ``delta`` entries are ``{"alpha": [...], "coeff": c}`` meaning ``c * d^alpha delta``.
        """
        expr = parse_kernel_dsl(text, dim) if isinstance(text, str) else sp.sympify(text)
        if EPS in expr.free_symbols and eps0 is None:
            raise ValueError("kernel uses eps; supply eps0")
        terms = []
        if expr != 0:
            terms.append(Term(1.0, (0,) * dim, (Block(dim, expr, sd),)))
        for entry in delta or ():
            alpha = tuple(int(a) for a in entry.get("alpha", [0] * dim))
            if len(alpha) != dim:
                raise ValueError("delta multi-index has wrong length")
            c = complex(entry.get("coeff", 1.0))
            c = c.real if c.imag == 0 else c
            # <c d^alpha delta, phi> = c (-1)^|alpha| d^alpha phi(0)
            terms.append(Term(c * (-1) ** sum(alpha), alpha, (Block(dim, None),)))
        if delta and sd is None and expr == 0:
            sd = dim + max(sum(e.get("alpha", [0] * dim)) for e in delta)
        return cls(dim, terms, locus, sd, eps0, label or (text if isinstance(text, str) else str(text)))

    @classmethod
    def delta(cls, d: int, alpha: Sequence[int] | None = None, coeff: float = 1.0) -> "DistributionKernel":
        alpha = tuple(alpha) if alpha is not None else (0,) * d
        return cls.from_dsl("0", d, delta=[{"alpha": list(alpha), "coeff": coeff}], label="delta")

    # structure -----------------------------------------------------------------
    @property
    def is_delta_only(self) -> bool:
        return all(t.is_delta for t in self.terms)

    def block_sizes(self) -> tuple[int, ...] | None:
        sizes = {tuple(b.size for b in t.blocks) for t in self.terms}
        return sizes.pop() if len(sizes) == 1 else None

    def off_locus_expr(self) -> sp.Expr:
        """Pointwise kernel away from the locus: delta terms dropped, derivatives taken symbolically."""
        total = sp.S.Zero
        for t in self.terms:
            if any(b.is_delta for b in t.blocks):
                continue
            e = t.smooth
            for b, off in zip(t.blocks, t.offsets()):
                e = e * _shift(b.expr, off, b.size)
            syms = coordinate_symbols(self.dim)
            for s, k in zip(syms, t.beta):
                if k:
                    e = sp.diff(e, s, k)
            total += sp.nsimplify(t.coef) * (-1) ** sum(t.beta) * e
        return total

    def regulator_note(self) -> str | None:
        if self.eps0 is None:
            return None
        return (f"regulated kernel: eps coupled to dilation as eps = {self.eps0} * lambda; "
                "agreement with the unregulated scaling degree is not guaranteed")

    def describe(self) -> dict:
        return {"dim": self.dim, "label": self.label, "sd": self.sd, "terms": len(self.terms),
                "locus": "origin" if self.locus == "origin" else self.locus.describe()}

    # pairing ---------------------------------------------------------------------
    def pair(self, probe, cfg: QuadConfig | None = None) -> PairingValue:
        return pair(self, probe, cfg)

    def __repr__(self) -> str:
        return f"DistributionKernel(dim={self.dim}, label={self.label!r}, terms={len(self.terms)}, sd={self.sd})"


# ---------------------------------------------------------------------------
# arithmetic
# ---------------------------------------------------------------------------


def _sd_add(a, b):
    return None if a is None or b is None else a + b


def derive_kernel(t: DistributionKernel, alpha: Sequence[int]) -> DistributionKernel:
    """``d^alpha t``, realized by moving the derivative onto the test function."""
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != t.dim:
        raise ValueError("multi-index has wrong length")
    x = coordinate_symbols(t.dim)
    for term in t.terms:
        for b, off in zip(term.blocks, term.offsets()):
            if b.is_delta:
                continue
            e = _shift(b.expr, off, b.size)
            for s, k in zip(x, alpha):
                if k and s in e.free_symbols:
                    deriv = sp.diff(e, s, k)
                    if deriv.has(sp.Derivative) or deriv.has(sp.Subs):
                        raise ValueError(f"kernel is not differentiable in {s}: {e}")
    terms = [replace(term, coef=term.coef * (-1) ** sum(alpha), beta=_add(term.beta, alpha)) for term in t.terms]
    return DistributionKernel(t.dim, terms, t.locus, _sd_add(t.sd, sum(alpha)), t.eps0,
                              f"d^{list(alpha)}[{t.label}]")


def _leibniz(term: Term, factor_derivative) -> list[tuple[tuple[int, ...], float, object]]:
    """Split ``<term, f phi>``: yields ``(gamma, binomial, d^(beta-gamma) f)``."""
    out = []
    for gamma in multi_indices(len(term.beta), sum(term.beta)):
        if not _leq(gamma, term.beta):
            continue
        df = factor_derivative(_sub(term.beta, gamma))
        if df is None:
            continue
        out.append((gamma, _binom(term.beta, gamma), df))
    return out


def multiply_monomial(t: DistributionKernel, alpha: Sequence[int], coeff: float = 1.0) -> DistributionKernel:
    """``x^alpha t``. The monomial is folded into each block, lowering its declared sd."""
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != t.dim:
        raise ValueError("multi-index has wrong length")

    def mono_derivative(mu):
        if not _leq(mu, alpha):
            return None
        c = math.prod(math.perm(a, m) for a, m in zip(alpha, mu))
        return c, _sub(alpha, mu)

    terms = []
    for term in t.terms:
        for gamma, binom, (c, rest) in _leibniz(term, mono_derivative):
            blocks = []
            dead = False
            for b, off in zip(term.blocks, term.offsets()):
                local = rest[off : off + b.size]
                if b.is_delta:
                    if any(local):
                        dead = True
                    blocks.append(b)
                    continue
                sd = None if b.sd is None else b.sd - sum(local)
                blocks.append(Block(b.size, sp.powsimp(b.expr * _monomial(local)), sd))
            if dead:
                continue
            terms.append(Term(term.coef * binom * c * coeff, gamma, tuple(blocks), term.smooth))
    sd = None if t.sd is None else t.sd - sum(alpha)
    return DistributionKernel(t.dim, terms, t.locus, sd, t.eps0, f"x^{list(alpha)}*[{t.label}]")


def _as_sympy(f, dim: int) -> sp.Expr:
    if isinstance(f, str):
        return parse_kernel_dsl(f, dim)
    if isinstance(f, TestFunction):
        return f.sympy_expr()
    return sp.sympify(f)


def multiply_smooth(t: DistributionKernel, f) -> DistributionKernel:
    """``f t`` for smooth ``f`` (DSL text, sympy expression or a :class:`TestFunction`)."""
    f = _as_sympy(f, t.dim)
    x = coordinate_symbols(t.dim)

    def f_derivative(mu):
        e = f
        for s, k in zip(x, mu):
            if k:
                e = sp.diff(e, s, k)
        return None if e == 0 else e

    terms = []
    for term in t.terms:
        for gamma, binom, df in _leibniz(term, f_derivative):
            terms.append(Term(term.coef * binom, gamma, term.blocks, term.smooth * df))
    return DistributionKernel(t.dim, terms, t.locus, t.sd, t.eps0, f"f*[{t.label}]")


def tensor(t1: DistributionKernel, t2: DistributionKernel) -> DistributionKernel:
    """``t1 (x) t2`` on ``R^{d1 + d2}`` (variables of ``t2`` are shifted)."""
    if t1.locus != "origin" or t2.locus != "origin":
        raise ValueError("tensor products are defined for point-singular kernels")
    if t1.eps0 is not None and t2.eps0 is not None and t1.eps0 != t2.eps0:
        raise ValueError("factors use different regulators")
    d1 = t1.dim
    terms = []
    for a in t1.terms:
        for b in t2.terms:
            terms.append(Term(a.coef * b.coef, a.beta + b.beta, a.blocks + b.blocks,
                              a.smooth * _shift(b.smooth, d1, t2.dim)))
    return DistributionKernel(d1 + t2.dim, terms, "origin", _sd_add(t1.sd, t2.sd),
                              t1.eps0 if t1.eps0 is not None else t2.eps0, f"[{t1.label}]x[{t2.label}]")


def dilate(phi, lam: float):
    """``lam^-d phi(x / lam)``."""
    return phi.dilate(lam)


# ---------------------------------------------------------------------------
# pairing plans: fixed rules chosen at lam = 1 and reused along the dilation
# ---------------------------------------------------------------------------


def _probe_derivative(probe, beta):
    if any(beta):
        return lambda X: probe.derivative(beta, X)
    return probe


def _slice_support(probe, keep: list[int]) -> Support:
    c, r, inner = probe.support_ball()
    c = np.asarray(c, dtype=float)
    rest = np.delete(c, keep)
    ck = c[keep]
    if isinstance(probe, TestFunction):
        rr = r * r - float(rest @ rest)
        if rr <= 0:
            return Support(ck, 0.0, 0.0)
        rad = math.sqrt(rr)
        return Support(ck, rad, max(rad - float(np.linalg.norm(ck)), 0.0))
    return Support(ck, r, inner)


class _QuadFactor:
    """``int K(lam y) g(y) dy`` on a fixed pair of rules (coarse, fine)."""

    def __init__(self, fn, support: Support, d: int, cfg: QuadConfig):
        self.fn = fn
        self.d = d
        if support.radius == 0:
            self.rules = None
            return
        res = integrate(lambda X: fn(X, 1.0), support, d, cfg)
        self.rules = res.rules
        # the probe factor sits at fixed nodes; only the kernel is rescaled
        split = getattr(fn, "split", None)
        self.probe_values = None if split is None else [split[0](rule.X) for rule in self.rules]
        self.kernel_part = None if split is None else split[1]

    def __call__(self, lam: float) -> tuple[complex, float, float]:
        if self.rules is None:
            return 0.0, 0.0, 0.0
        coarse, fine = self.rules
        vals = []
        for k, rule in enumerate((coarse, fine)):
            if self.probe_values is None:
                f = self.fn(rule.X, lam)
            else:
                f = self.kernel_part(rule.X, lam) * self.probe_values[k]
            if not np.all(np.isfinite(f)):
                raise NonIntegrable("integrand is not finite at a quadrature node")
            vals.append(rule.integrate(f))
        v, _, tail_err, scale = vals[1]
        return v, abs(v - vals[0][0]) + tail_err, scale


class _TermPlan:
    def __init__(self, kernel: DistributionKernel, term: Term, probe, cfg: QuadConfig):
        self.term = term
        self.D = kernel.dim
        self.beta_order = sum(term.beta)
        self.factors = []  # callables lam -> (value, err, scale)
        self.power = -self.beta_order - sum(b.size for b in term.blocks if b.is_delta)
        self.coef = term.coef
        eps0 = kernel.eps0
        x = coordinate_symbols(self.D)
        smooth_const = term.smooth == 1

        if term.is_delta:
            s0 = complex(term.smooth.subs({s: 0 for s in x}))
            val = s0 * (probe.derivative_at(term.beta) if s0 != 0 else 0.0)
            self.factors.append(lambda lam, v=val: (v, 0.0, abs(v)))
            return

        _check_integrable(kernel, term, probe)
        regular = [i for i, b in enumerate(term.blocks) if not b.is_delta]
        offs = term.offsets()
        is_product = (
            isinstance(probe, ProductTestFunction)
            and probe.dims == tuple(b.size for b in term.blocks)
            and smooth_const
        )
        if is_product:
            for b, off, f in zip(term.blocks, offs, probe.factors):
                beta_b = term.beta[off : off + b.size]
                if b.is_delta:
                    v = f.derivative_at(beta_b)
                    self.factors.append(lambda lam, v=v: (v, 0.0, abs(v)))
                else:
                    K = compile_expr(b.expr, b.size)
                    g = _probe_derivative(f, beta_b)
                    fn = _kernel_times(K, g, eps0)
                    self.factors.append(_QuadFactor(fn, Support.of(f), b.size, cfg))
            return

        keep = [k for i in regular for k in range(offs[i], offs[i] + term.blocks[i].size)]
        m = len(keep)
        Ks = [(compile_expr(term.blocks[i].expr, term.blocks[i].size), offs[i], term.blocks[i].size) for i in regular]
        S = None if smooth_const else compile_expr(term.smooth, self.D)
        g = _probe_derivative(probe, term.beta)
        D = self.D
        keep_arr = np.array(keep)
        local_pos = {i: [keep.index(k) for k in range(offs[i], offs[i] + term.blocks[i].size)] for i in regular}

        def embed(Y):
            Xf = np.zeros((D, Y.shape[1]))
            Xf[keep_arr] = Y
            return Xf

        def probe_part(Y):
            return g(embed(Y))

        def kernel_part(Y, lam):
            eps = None if eps0 is None else eps0 * lam
            val = 1.0
            for (K, off, size), i in zip(Ks, regular):
                val = val * K(lam * Y[local_pos[i]], eps)
            if S is not None:
                val = val * S(lam * embed(Y), eps)
            return val

        def fn(Y, lam):
            return kernel_part(Y, lam) * probe_part(Y)

        fn.split = (probe_part, kernel_part)

        if len(regular) == 1:
            self.factors.append(_QuadFactor(fn, _slice_support(probe, keep), m, cfg))
        else:
            self.factors.append(_GridFactor(fn, probe, [(offs[i], term.blocks[i].size) for i in regular], keep, cfg))

    def __call__(self, lam: float) -> tuple[complex, float, float]:
        vals = [f(lam) for f in self.factors]
        value = self.coef * math.prod(v for v, _, _ in vals)
        err = 0.0
        for i, (v, e, _) in enumerate(vals):
            others = math.prod(abs(w) for j, (w, _, _) in enumerate(vals) if j != i)
            err += e * others
        scale = abs(self.coef) * math.prod(max(s, abs(v)) for v, _, s in vals)
        f = lam**self.power
        return value * f, abs(self.coef) * err * f, scale * f


class _GridFactor:
    """Tensor grid of per-block polar rules for non-product probes on tensor kernels."""

    MAX_NODES = 6_000_000

    def __init__(self, fn, probe, blocks, keep, cfg):
        self.fn = fn
        c, r, inner = probe.support_ball()
        c = np.asarray(c, dtype=float)
        self.grids = []
        for level in (0, 1):
            rules = []
            for off, size in blocks:
                cb = c[off : off + size]
                sup = Support(cb, r, max(inner, 0.0))
                rules.append(build_rule(sup, size, level, replace(cfg, gauss=10)))
            total = math.prod(rl.X.shape[1] for rl in rules)
            if total > self.MAX_NODES:
                raise Inconclusive("tensor-grid quadrature too large; pair with a product probe instead")
            self.grids.append(rules)

    def _eval(self, rules, lam):
        Xs = [rl.X for rl in rules]
        Ws = [rl.W for rl in rules]
        idx = np.meshgrid(*[np.arange(x.shape[1]) for x in Xs], indexing="ij")
        Y = np.vstack([x[:, i.ravel()] for x, i in zip(Xs, idx)])
        W = np.ones(Y.shape[1])
        for w, i in zip(Ws, idx):
            W = W * w[i.ravel()]
        vals = self.fn(Y, lam) * W
        return np.sum(vals), float(np.sum(np.abs(vals)))

    def __call__(self, lam):
        (v0, _), (v1, s1) = (self._eval(g, lam) for g in self.grids)
        return v1, abs(v1 - v0), s1


def _kernel_times(K, g, eps0):
    def kernel_part(Y, lam):
        eps = None if eps0 is None else eps0 * lam
        return K(lam * Y, eps)

    def fn(Y, lam):
        return kernel_part(Y, lam) * g(Y)

    fn.split = (g, kernel_part)
    return fn


def _check_integrable(kernel, term, probe):
    if kernel.locus == "origin":
        c, r, inner = probe.support_ball()
        offs = term.offsets()
        for b, off in zip(term.blocks, offs):
            if b.is_delta or b.sd is None or b.sd < b.size:
                continue
            if isinstance(probe, ProductTestFunction) and probe.dims == tuple(bb.size for bb in term.blocks):
                meets = probe.factors[term.blocks.index(b)].support_ball()[2] > 0
            else:
                meets = inner > 0
            if meets:
                raise NeedsExtension(
                    f"probe support meets the singular point and the kernel block has sd {b.sd} >= {b.size}"
                )


# ---------------------------------------------------------------------------
# public pairing
# ---------------------------------------------------------------------------


def pair(t: DistributionKernel, phi, cfg: QuadConfig | None = None) -> PairingValue:
    """``<t, phi>`` with an absolute error estimate.

    Raises:
        NeedsExtension: the support meets the locus and the declared sd is ``>= d``.
        NonIntegrable: quadrature failed to converge.
    """
    cfg = cfg or DEFAULT_CONFIG
    if getattr(phi, "dim", t.dim) != t.dim:
        raise ValueError("probe dimension does not match kernel")
    if isinstance(t.locus, SurfaceFibration):
        return _pair_surface(t, phi, cfg)
    total = PairingValue(0.0, 0.0, 0.0)
    for term in t.terms:
        v, e, s = _TermPlan(t, term, phi, cfg)(1.0)
        total = total + PairingValue(v, e, s)
    return _realify(total)


def _realify(p: PairingValue) -> PairingValue:
    v = p.value
    if isinstance(v, complex) or np.iscomplexobj(v):
        v = complex(v)
        if v.imag == 0:
            v = v.real
    else:
        v = float(v)
    return PairingValue(v, float(p.error), float(p.scale))


class _Plan:
    """Reusable evaluator ``lam -> <t, phi^lam>`` for point-singular kernels."""

    def __init__(self, t: DistributionKernel, probe, cfg: QuadConfig):
        self.parts = [_TermPlan(t, term, probe, cfg) for term in t.terms]

    def __call__(self, lam: float) -> PairingValue:
        total = PairingValue(0.0, 0.0, 0.0)
        for p in self.parts:
            v, e, s = p(lam)
            total = total + PairingValue(v, e, s)
        return _realify(total)


def _surface_base_nodes(center, radius, d, panels):
    x, w = _leggauss(12)
    edges = np.linspace(-radius, radius, panels + 1)
    nodes = np.concatenate([0.5 * (b - a) * x + 0.5 * (a + b) for a, b in zip(edges[:-1], edges[1:])])
    weights = np.concatenate([0.5 * (b - a) * w for a, b in zip(edges[:-1], edges[1:])])
    grids = np.meshgrid(*([nodes] * d), indexing="ij")
    wgrid = np.meshgrid(*([weights] * d), indexing="ij")
    X = np.vstack([g.ravel() for g in grids]) + np.asarray(center, dtype=float)[:, None]
    W = np.prod(np.vstack([g.ravel() for g in wgrid]), axis=0)
    return X, W


def _pair_surface(t: DistributionKernel, phi, cfg: QuadConfig) -> PairingValue:
    fib: SurfaceFibration = t.locus
    c, r, _ = phi.support_ball()
    meets = fib.distance_to_surface(c) < r
    for term in t.terms:
        b = term.blocks[0]
        if not b.is_delta and b.sd is not None and b.sd >= fib.codim and meets:
            raise NeedsExtension("probe support meets the diagonal and the kernel sd is >= codimension")
    total = PairingValue(0.0, 0.0, 0.0)
    regular = [term for term in t.terms if not term.is_delta]
    delta_terms = [term for term in t.terms if term.is_delta]
    for term in delta_terms:
        total = total + PairingValue(*_TermPlan(t, term, phi, cfg)(1.0))
    if not regular:
        return _realify(total)
    expr = DistributionKernel(t.dim, regular, "origin").off_locus_expr()
    fiber_value = surface_integral(expr, fib, lambda X: fib.slice_at(phi, X), c, r, cfg)
    return _realify(total + fiber_value)


def surface_integral(expr, fib: SurfaceFibration, slice_of, center, radius, cfg, fiber_pairing=None):
    """``J int dX int d eta  K(alpha(X, eta)) g_X(eta)`` over base nodes.

    ``slice_of(X)`` returns the fiber function at base point ``X``;
    ``fiber_pairing(K_X, g_X)`` (default: plain quadrature) evaluates the
    inner integral and returns ``(value, error)``.
    """
    composed = fib.compose(expr)
    K = compile_expr(composed, fib.total_dim)
    Xc, _ = fib.from_full(np.asarray(center, dtype=float))
    L = np.linalg.norm(np.linalg.pinv(np.hstack([fib.base_matrix, fib.fiber_matrix]))[: fib.d], 2)
    R = float(L * radius)

    def inner(X):
        g = slice_of(X)
        sup = Support.of(g)
        if sup.radius == 0:
            return 0.0, 0.0

        def KX(H, Xv=X):
            full = np.vstack([np.repeat(Xv.reshape(-1, 1), H.shape[1], axis=1), H])
            return K(full)

        if fiber_pairing is not None:
            return fiber_pairing(KX, g)
        res = integrate(lambda H: KX(H) * g(H), sup, fib.codim, cfg)
        return res.value, res.error

    results = []
    for panels in (2, 4):
        Xn, Wn = _surface_base_nodes(Xc[:, 0], R, fib.d, panels)
        v, e = 0.0, 0.0
        for X, w in zip(Xn.T, Wn):
            fv, fe = inner(X)
            v += w * fv
            e += w * fe
        results.append((v * fib.jacobian, e * fib.jacobian))
    (v0, _), (v1, e1) = results
    return PairingValue(v1, e1 + abs(v1 - v0), abs(v1))


# ---------------------------------------------------------------------------
# scaling degree
# ---------------------------------------------------------------------------


@dataclass
class DyadicScalingReport:
    """Samples ``(lam_n, |<t_lam_n, phi>|)`` per probe and the fitted estimate.

    ``estimate`` is the max over probes of minus the least-squares slope of
    ``log2|value|`` against ``log2 lam`` on the tail half of the samples.
    """

    estimate: float
    slopes: list[float]
    residuals: list[float]
    samples: list[list[tuple[float, float]]]
    method: str
    probes: list[dict] = field(default_factory=list)
    dropped: list[int] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    n_max: int = 0

    @property
    def residual(self) -> float:
        return max(self.residuals) if self.residuals else 0.0

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "method": self.method,
            "slopes": self.slopes,
            "residuals": self.residuals,
            "residual": self.residual,
            "n_max": self.n_max,
            "dropped_probes": self.dropped,
            "notes": self.notes,
            "probes": self.probes,
            "samples": [[[lam, v] for lam, v in s] for s in self.samples],
        }


SLOPE_FLOOR = 1e-9


def _lsq_slope(lams, values) -> tuple[float, float]:
    x = np.log2(np.asarray(lams, dtype=float))
    y = np.log2(np.abs(np.asarray(values, dtype=float)))
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    slope = float(coef[0])
    if abs(slope) < SLOPE_FLOOR:
        slope = 0.0
    return slope, float(np.sqrt(np.mean(resid**2)))


def fit_dyadic_slope(lams: Sequence[float], values: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of ``log2 |v|`` vs ``log2 lam`` on the tail half; returns ``(slope, rms residual)``."""
    start = len(lams) // 2
    return _lsq_slope(list(lams)[start:], list(values)[start:])


def _default_probes_for(t) -> list:
    sizes = t.block_sizes() if isinstance(t, DistributionKernel) else None
    if sizes and len(sizes) > 1:
        per_block = [default_probes(s) for s in sizes]
        return [ProductTestFunction(fs) for fs in zip(*per_block)]
    return default_probes(t.dim)


def _off_origin_probes_for(t) -> list:
    sizes = t.block_sizes() if isinstance(t, DistributionKernel) else None
    if sizes and len(sizes) > 1:
        per_block = [default_probes(s, off_origin=True) for s in sizes]
        return [ProductTestFunction(fs) for fs in zip(*per_block)]
    return default_probes(t.dim, off_origin=True)


def scaling_degree_estimate(
    t,
    probes: Sequence | None = None,
    n_max: int = 64,
    cfg: QuadConfig | None = None,
    zero_rtol: float = 1e-10,
) -> DyadicScalingReport:
    """Estimate the scaling degree at the origin from dyadic dilations ``lam_n = 2^-n``.

    Purely distributional kernels take an exact path (``d + max |alpha|``).
    Otherwise each probe gives the samples ``|<t, phi^lam>|``; probes whose
    pairings vanish (below ``zero_rtol`` times the integrand scale) are
    dropped. If the centred default probes cannot be paired because the
    kernel is not locally integrable, probes supported away from the origin
    are used instead.

    Args:
        t: a :class:`DistributionKernel`, or any object with ``dim`` and ``pair``.
        probes: test functions; defaults to five bumps (radii 1, 1/2, 1/4; factors 1, x1).
        n_max: last dyadic exponent (``>= 8``).
    """
    if n_max < 8:
        raise ValueError("n_max must be at least 8")
    cfg = (cfg or DEFAULT_CONFIG.cheaper()).for_dim(t.dim)
    lams = [2.0**-n for n in range(n_max + 1)]
    notes = []
    is_kernel = isinstance(t, DistributionKernel) and t.locus == "origin"
    if isinstance(t, DistributionKernel) and t.regulator_note():
        notes.append(t.regulator_note())

    if is_kernel and t.is_delta_only:
        return _exact_delta_report(t, probes, lams, n_max)

    user_probes = probes is not None
    probe_list = list(probes) if user_probes else _default_probes_for(t)

    def evaluators(plist):
        out = []
        for p in plist:
            if is_kernel:
                out.append(_Plan(t, p, cfg))
            elif hasattr(t, "plan"):
                out.append(t.plan(p, cfg))
            else:
                out.append(lambda lam, p=p: _realify(t.pair(p.dilate(lam)) if lam != 1.0 else t.pair(p)))
        return out

    try:
        evals = evaluators(probe_list)
        samples_full = [[ev(lam) for lam in lams] for ev in evals]
    except (NeedsExtension, NonIntegrable):
        if user_probes:
            raise
        probe_list = _off_origin_probes_for(t)
        notes.append("kernel not integrable at the origin; probes supported away from it were used")
        evals = evaluators(probe_list)
        samples_full = [[ev(lam) for lam in lams] for ev in evals]

    slopes, residuals, samples, dropped, kept = [], [], [], [], []
    for k, vals in enumerate(samples_full):
        mags = [abs(v.value) for v in vals]
        zero = [abs(v.value) <= zero_rtol * max(v.scale, 1e-300) + v.error for v in vals]
        samples.append(list(zip(lams, mags)))
        tail = range(len(lams) // 2, len(lams))
        if sum(zero[i] for i in tail) > len(tail) // 2:
            dropped.append(k)
            slopes.append(float("nan"))
            residuals.append(float("nan"))
            continue
        tail_start = len(lams) // 2
        fit = [i for i in range(tail_start, len(lams)) if not zero[i]]
        slope, res = _lsq_slope([lams[i] for i in fit], [mags[i] for i in fit])
        slopes.append(slope)
        residuals.append(res)
        kept.append(k)
    if not kept:
        raise Inconclusive("all probe pairings vanish; no scaling information")
    estimate = max(-slopes[k] for k in kept)
    return DyadicScalingReport(
        estimate=float(estimate) + 0.0,
        slopes=slopes,
        residuals=residuals,
        samples=samples,
        method="numeric",
        probes=[p.describe() for p in probe_list],
        dropped=dropped,
        notes=notes,
        n_max=n_max,
    )


def _exact_delta_report(t: DistributionKernel, probes, lams, n_max) -> DyadicScalingReport:
    x = coordinate_symbols(t.dim)
    orders = []
    for term in t.terms:
        s0 = complex(term.smooth.subs({s: 0 for s in x}))
        if term.coef != 0 and s0 != 0:
            orders.append(t.dim + sum(term.beta))
    if not orders:
        raise Inconclusive("delta part vanishes identically")
    est = float(max(orders))
    probe_list = list(probes) if probes is not None else default_probes(t.dim)
    samples = []
    for p in probe_list:
        plan = _Plan(t, p, DEFAULT_CONFIG)
        samples.append([(lam, abs(plan(lam).value)) for lam in lams])
    return DyadicScalingReport(
        estimate=est,
        slopes=[-est] * len(probe_list),
        residuals=[0.0] * len(probe_list),
        samples=samples,
        method="exact",
        probes=[p.describe() for p in probe_list],
        notes=["delta part: sd = d + max|alpha| over nonvanishing terms"],
        n_max=n_max,
    )


# ---------------------------------------------------------------------------
# directional Fourier decay
# ---------------------------------------------------------------------------


@dataclass
class DecayResult:
    direction: tuple[float, ...]
    exponent: float
    status: str  # "power" | "rapid" | "inconclusive"
    samples: list[tuple[float, float]]
    residual: float = 0.0

    def to_dict(self) -> dict:
        return {
            "direction": list(self.direction),
            "exponent": self.exponent if math.isfinite(self.exponent) else ("inf" if self.exponent > 0 else "nan"),
            "status": self.status,
            "residual": self.residual,
            "samples": [list(s) for s in self.samples],
        }


def _graded_panels(a: float, b: float, s_max: float, toward_zero: bool, gauss: int = 16, depth: int = 60):
    """Gauss nodes on ``[a, b]`` (``a < b``), dyadically graded toward 0 if requested."""
    x, w = _leggauss(gauss)
    length = b - a
    if length <= 0:
        return np.zeros(0), np.zeros(0)
    breaks = [0.0]
    if toward_zero:
        breaks = [length * 2.0**-j for j in range(depth, -1, -1)]
        breaks = [0.0] + breaks
    else:
        breaks = [0.0, length]
    nodes, weights = [], []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        n_sub = max(1, int(math.ceil((hi - lo) * s_max / math.pi)))
        edges = np.linspace(lo, hi, n_sub + 1)
        for p, q in zip(edges[:-1], edges[1:]):
            nodes.append(0.5 * (q - p) * x + 0.5 * (p + q))
            weights.append(0.5 * (q - p) * w)
    u = np.concatenate(nodes)
    return u, np.concatenate(weights)


def _line_nodes(lo: float, hi: float, s_max: float):
    """Nodes on ``[lo, hi]`` graded toward 0 when 0 lies inside."""
    if lo < 0 < hi:
        u1, w1 = _graded_panels(0.0, hi, s_max, True)
        u2, w2 = _graded_panels(0.0, -lo, s_max, True)
        return np.concatenate([u1, -u2]), np.concatenate([w1, w2])
    if lo >= 0:
        u, w = _graded_panels(0.0, hi - lo, s_max, lo == 0)
        return u + lo, w
    u, w = _graded_panels(0.0, hi - lo, s_max, hi == 0)
    return hi - u, w


def fourier_decay_probe(
    t: DistributionKernel,
    chi: TestFunction,
    directions: Sequence[Sequence[float]],
    N: int = 10,
    noise_rtol: float = 1e-11,
) -> list[DecayResult]:
    """Decay exponents of ``s -> sup |F(chi t)(s xi)|`` along rays ``xi``.

    Frequencies run over octaves ``s in [2^j, 2^(j+1))`` for ``j = 0 .. N``;
    the sup over four samples per octave is fitted on the tail half. An
    exponent of ``inf`` means the transform fell below the noise floor or kept steepening
    (rapid decay). Supports ``d <= 2`` and single-block kernels.
    """
    d = t.dim
    if d > 2 or t.locus != "origin":
        raise ValueError("the decay probe supports point-singular kernels in d <= 2")
    if any(len(term.blocks) != 1 for term in t.terms):
        raise ValueError("tensor kernels are not supported by the decay probe")
    s_values = np.array([2.0**j * 2.0 ** (i / 4) for j in range(N + 1) for i in range(4)])
    s_max = float(s_values.max())
    results = []
    for xi in directions:
        xi = np.asarray(xi, dtype=float)
        xi = xi / np.linalg.norm(xi)
        F = np.zeros(s_values.size, dtype=complex)
        scale = 0.0
        for term in t.terms:
            Fi, sc = _term_fourier(t, term, chi, xi, s_values, s_max)
            F += Fi
            scale += sc
        mags = np.abs(F).reshape(N + 1, 4).max(axis=1)
        octaves = 2.0 ** np.arange(N + 1)
        samples = list(zip(octaves.tolist(), mags.tolist()))
        tail = mags[(N + 1) // 2 :]
        floor = noise_rtol * max(scale, mags.max(), 1e-300)
        if np.any(tail <= floor):
            results.append(DecayResult(tuple(xi), math.inf, "rapid", samples))
            continue
        local = np.diff(np.log2(tail))
        if local.size >= 3 and local.max() < -2.0 and local[-1] < local[0] - 1.0:
            # slopes keep steepening: faster than any fixed power on this window
            results.append(DecayResult(tuple(xi), math.inf, "rapid", samples))
            continue
        slope, res = fit_dyadic_slope(octaves, mags)
        if res > 0.3:
            results.append(DecayResult(tuple(xi), math.nan, "inconclusive", samples, res))
        else:
            results.append(DecayResult(tuple(xi), -slope + 0.0, "power", samples, res))
    return results


def _term_fourier(t, term: Term, chi, xi, s_values, s_max):
    """Contribution of one term to ``F(s) = <term, chi e^{-i s xi.x}>``."""
    d = t.dim
    # Leibniz: d^beta (chi e) = sum_gamma C(beta,gamma) d^(beta-gamma) chi (-i s xi)^gamma e
    pieces = []
    for gamma in multi_indices(d, sum(term.beta)):
        if not _leq(gamma, term.beta):
            continue
        c = _binom(term.beta, gamma) * math.prod(x**g for x, g in zip(xi, gamma))
        if c == 0:
            continue
        pieces.append((_sub(term.beta, gamma), sum(gamma), c))
    x = coordinate_symbols(d)
    if term.is_delta:
        s0 = complex(term.smooth.subs({s: 0 for s in x}))
        F = np.zeros(s_values.size, dtype=complex)
        for mu, order, c in pieces:
            F += term.coef * s0 * c * chi.derivative_at(mu) * (-1j * s_values) ** order
        return F, float(np.abs(F).max())
    expr = term.smooth * term.blocks[0].expr
    K = compile_expr(expr, d)
    eps = None if t.eps0 is None else t.eps0
    c0 = chi.center_array
    r = chi.radius
    if d == 1:
        u, w = _line_nodes(c0[0] - r, c0[0] + r, s_max)
        X = u[None, :]
        proj = {mu: w * K(X, eps) * chi.derivative(mu, X) for mu, _, _ in pieces}
    else:
        perp = np.array([-xi[1], xi[0]])
        uc, vc = float(xi @ c0), float(perp @ c0)
        u, wu = _line_nodes(uc - r, uc + r, s_max)
        proj = {mu: np.zeros(u.size, dtype=complex) for mu, _, _ in pieces}
        for k, (uk, wk) in enumerate(zip(u, wu)):
            half = math.sqrt(max(r * r - (uk - uc) ** 2, 0.0))
            if half == 0:
                continue
            v, wv = _line_nodes(vc - half, vc + half, 0.0) if not (vc - half < 0 < vc + half) else _v_nodes(vc - half, vc + half, abs(uk))
            X = np.outer(xi, np.full(v.size, uk)) + np.outer(perp, v)
            kv = K(X, eps)
            for mu in proj:
                proj[mu][k] = wk * np.sum(wv * kv * chi.derivative(mu, X))
    F = np.zeros(s_values.size, dtype=complex)
    scale = 0.0
    for mu, order, c in pieces:
        P = proj[mu]
        phase = np.exp(-1j * np.outer(s_values, u))
        F += term.coef * c * (-1j * s_values) ** order * (phase @ P)
        scale += abs(term.coef * c) * float(np.sum(np.abs(P)))
    return F, scale


def _v_nodes(lo: float, hi: float, u_abs: float):
    """Nodes for the transverse integral, graded toward ``v = 0`` at scale ``|u|``."""
    x, w = _leggauss(16)
    nodes, weights = [], []
    for sign, b in ((1.0, hi), (-1.0, -lo)):
        if b <= 0:
            continue
        h = max(u_abs, 1e-300)
        breaks = [0.0] + [h * 2.0**k for k in range(-4, 200) if h * 2.0**k < b] + [b]
        for p, q in zip(breaks[:-1], breaks[1:]):
            edges = np.linspace(p, q, max(1, int(math.ceil(32 * (q - p) / b))) + 1)
            for lo_, hi_ in zip(edges[:-1], edges[1:]):
                nodes.append(sign * (0.5 * (hi_ - lo_) * x + 0.5 * (lo_ + hi_)))
                weights.append(0.5 * (hi_ - lo_) * w)
    return np.concatenate(nodes), np.concatenate(weights)
