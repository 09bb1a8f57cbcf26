"""Contraction graphs, Wick expansion coefficients and power counting.

A contraction graph on ``n`` vertices is a symmetric multiplicity matrix
``a`` with zero diagonal; vertex ``i`` carries ``m_i`` legs of which
``|E_i| = sum_j a_ij`` are contracted and ``j_i = m_i - |E_i|`` remain.
Each edge contributes the two-point scaling degree ``d - 2``; the superficial
degree of divergence at the total diagonal is ``rho = omega - d (n - 1)``.
"""

from __future__ import annotations

import enum
import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .extension import ambiguity_dimension

__all__ = [
    "ContractionGraph",
    "WickTerm",
    "Verdict",
    "ClassificationReport",
    "enumerate_saturated_graphs",
    "enumerate_graphs",
    "wick_coefficient",
    "brute_force_pairings",
    "wick_expand",
    "graph_scaling_degree",
    "divergence_degree",
    "classify_interaction",
    "critical_power",
    "random_connected_multigraph",
]


@dataclass(frozen=True)
class ContractionGraph:
    """Multigraph given by its symmetric multiplicity matrix."""

    a: tuple[tuple[int, ...], ...]

    def __init__(self, a: Sequence[Sequence[int]]):
        a = tuple(tuple(int(v) for v in row) for row in a)
        n = len(a)
        if any(len(row) != n for row in a):
            raise ValueError("multiplicity matrix must be square")
        for i in range(n):
            if a[i][i] != 0:
                raise ValueError("self-loops are not allowed")
            for j in range(n):
                if a[i][j] < 0 or a[i][j] != a[j][i]:
                    raise ValueError("multiplicities must be symmetric and nonnegative")
        object.__setattr__(self, "a", a)

    @classmethod
    def _from_upper(cls, n: int, upper: tuple[int, ...]) -> "ContractionGraph":
        """Trusted constructor from a nonnegative upper triangle; skips validation."""
        a = [[0] * n for _ in range(n)]
        t = 0
        for i in range(n):
            for j in range(i + 1, n):
                a[i][j] = a[j][i] = upper[t]
                t += 1
        g = cls.__new__(cls)
        object.__setattr__(g, "a", tuple(map(tuple, a)))
        object.__setattr__(g, "_upper", upper)
        return g

    @classmethod
    def from_edges(cls, n: int, edges: Mapping[tuple[int, int], int]) -> "ContractionGraph":
        """From ``{(i, j): a_ij}`` with 0-based vertices."""
        a = [[0] * n for _ in range(n)]
        for (i, j), m in edges.items():
            a[i][j] += m
            a[j][i] += m
        return cls(a)

    @property
    def n(self) -> int:
        return len(self.a)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(sum(row) for row in self.a)

    @property
    def edge_count(self) -> int:
        """``I = sum_{i<j} a_ij``."""
        return sum(self.a[i][j] for i in range(self.n) for j in range(i + 1, self.n))

    def upper(self) -> tuple[int, ...]:
        cached = self.__dict__.get("_upper")
        if cached is not None:
            return cached
        a = self.a
        return tuple(v for i, row in enumerate(a) for v in row[i + 1:])

    def components(self) -> list[list[int]]:
        seen, comps = set(), []
        for s in range(self.n):
            if s in seen:
                continue
            stack, comp = [s], []
            seen.add(s)
            while stack:
                v = stack.pop()
                comp.append(v)
                for w in range(self.n):
                    if self.a[v][w] and w not in seen:
                        seen.add(w)
                        stack.append(w)
            comps.append(sorted(comp))
        return comps

    def is_connected(self) -> bool:
        return len(self.components()) == 1

    @property
    def loops(self) -> int:
        """``L = I - n + (number of components)``."""
        return self.edge_count - self.n + len(self.components())

    def subgraph(self, vertices: Sequence[int]) -> "ContractionGraph":
        return ContractionGraph([[self.a[i][j] for j in vertices] for i in vertices])

    def to_json(self) -> dict:
        return {"a": [list(r) for r in self.a]}


@dataclass(frozen=True)
class WickTerm:
    graph: ContractionGraph
    coefficient: int
    residual: tuple[int, ...]

    def to_json(self) -> dict:
        return {"a": [list(r) for r in self.graph.a], "coefficient": self.coefficient, "residual": list(self.residual)}


def _uppers(caps: Sequence[int], exact: bool) -> list[tuple[int, ...]]:
    """Upper triangles of all graphs with degrees bounded by (or equal to) ``caps``."""
    n = len(caps)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    last = [-1] * n
    for k, (i, j) in enumerate(pairs):
        last[i] = last[j] = k
    rem = list(caps)
    vals = [0] * len(pairs)
    out: list[tuple[int, ...]] = []

    def rec(k):
        if k == len(pairs):
            if not exact or not any(rem):
                out.append(tuple(vals))
            return
        i, j = pairs[k]
        top = min(rem[i], rem[j])
        choices = range(top + 1)
        if exact:
            # a vertex whose last pair is this one must be filled now
            forced = {rem[v] for v in (i, j) if last[v] == k}
            if len(forced) > 1 or (forced and max(forced) > top):
                return
            if forced:
                choices = forced
        for m in choices:
            rem[i] -= m
            rem[j] -= m
            vals[k] = m
            rec(k + 1)
            rem[i] += m
            rem[j] += m
        vals[k] = 0

    if exact and (sum(caps) % 2 or any(c < 0 for c in caps)):
        return out
    if n == 1:
        if not exact or caps[0] == 0:
            out.append(())
        return out
    rec(0)
    out.sort()
    return out


def _graphs(caps: Sequence[int], exact: bool) -> list[ContractionGraph]:
    return [ContractionGraph._from_upper(len(caps), u) for u in _uppers(caps, exact)]


def enumerate_saturated_graphs(degrees: Sequence[int]) -> list[ContractionGraph]:
    """All graphs with ``|E_i| = m_i``, in lexicographic order of the upper triangle."""
    if any(m < 0 for m in degrees):
        raise ValueError("degrees must be nonnegative")
    return _graphs(list(degrees), exact=True)


def enumerate_graphs(degrees: Sequence[int]) -> list[ContractionGraph]:
    """All graphs with ``|E_i| <= m_i``, in lexicographic order of the upper triangle."""
    if any(m < 0 for m in degrees):
        raise ValueError("degrees must be nonnegative")
    return _graphs(list(degrees), exact=False)


def wick_coefficient(g: ContractionGraph, degrees: Sequence[int]) -> int:
    """Number of leg pairings realizing ``g``: ``prod m_i! / j_i!  /  prod_{i<j} a_ij!``.

    Raises:
        ValueError: some vertex has more edges than legs.
    """
    if len(degrees) != g.n:
        raise ValueError("one degree per vertex is required")
    num = 1
    for m, e in zip(degrees, g.degrees):
        if e > m:
            raise ValueError("graph uses more legs than available")
        num *= math.perm(m, e)
    den = math.prod(math.factorial(v) for v in g.upper() if v > 1)
    q, r = divmod(num, den)
    assert r == 0
    return q


def brute_force_pairings(degrees: Sequence[int], saturated_only: bool = False) -> dict[tuple[int, ...], int]:
    """Count partial matchings of labelled legs across distinct vertices, keyed by graph upper triangle.

    Independent of :func:`wick_coefficient`: legs are taken one at a time and
    either left free or joined to any remaining leg of another vertex; counts
    are memoized on the remaining-leg vector.
    """
    n = len(degrees)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    index = {p: t for t, p in enumerate(pairs)}
    memo: dict[tuple[int, ...], dict[tuple[int, ...], int]] = {}

    def completions(rem: tuple[int, ...]) -> dict[tuple[int, ...], int]:
        if rem in memo:
            return memo[rem]
        v = next((i for i, r in enumerate(rem) if r), None)
        if v is None:
            out = {tuple([0] * len(pairs)): 1}
            memo[rem] = out
            return out
        out: dict[tuple[int, ...], int] = {}
        left = list(rem)
        left[v] -= 1
        if not saturated_only:
            for key, c in completions(tuple(left)).items():
                out[key] = out.get(key, 0) + c
        for w in range(n):
            if w == v or rem[w] == 0:
                continue
            nxt = list(left)
            nxt[w] -= 1
            t = index[(min(v, w), max(v, w))]
            for key, c in completions(tuple(nxt)).items():
                k2 = list(key)
                k2[t] += 1
                k2 = tuple(k2)
                # rem[w] choices for the partner leg
                out[k2] = out.get(k2, 0) + c * rem[w]
        memo[rem] = out
        return out

    return dict(completions(tuple(int(m) for m in degrees)))


def wick_expand(degrees: Sequence[int]) -> list[WickTerm]:
    """All contraction patterns with coefficients and residual powers ``j_i``."""
    degrees = [int(m) for m in degrees]
    if any(m < 0 for m in degrees):
        raise ValueError("degrees must be nonnegative")
    n = len(degrees)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    terms = []
    for u in _uppers(degrees, exact=False):
        res = list(degrees)
        den = 1
        for (i, j), m in zip(pairs, u):
            if m:
                res[i] -= m
                res[j] -= m
                if m > 1:
                    den *= math.factorial(m)
        num = math.prod(math.factorial(m) // math.factorial(r) for m, r in zip(degrees, res))
        terms.append(WickTerm(ContractionGraph._from_upper(n, u), num // den, tuple(res)))
    return terms


def graph_scaling_degree(g: ContractionGraph, d: int, lower: Iterable[float] | Mapping | None = None) -> float:
    """``omega = sum_{i<j} a_ij (d - 2)`` plus optional lower-order contributions."""
    if d < 2:
        raise ValueError("d must be at least 2")
    extra = 0.0
    if lower is not None:
        extra = sum(lower.values()) if isinstance(lower, Mapping) else sum(lower)
    return g.edge_count * (d - 2) + extra


def divergence_degree(g: ContractionGraph, d: int, lower=None) -> float:
    """``rho = omega - d (n - 1)``, summed over connected components."""
    total = 0.0
    comps = g.components()
    for comp in comps:
        sub = g.subgraph(comp)
        total += graph_scaling_degree(sub, d) - d * (len(comp) - 1)
    if lower is not None:
        total += sum(lower.values()) if isinstance(lower, Mapping) else sum(lower)
    return total


class Verdict(enum.Enum):
    SUPERRENORMALIZABLE = "Superrenormalizable"
    RENORMALIZABLE = "Renormalizable"
    NONRENORMALIZABLE = "NonRenormalizable"


_ORDER = {Verdict.SUPERRENORMALIZABLE: 0, Verdict.RENORMALIZABLE: 1, Verdict.NONRENORMALIZABLE: 2}


def critical_power(d: int) -> Fraction | None:
    """``k* = 2d / (d - 2)``; ``None`` for ``d = 2`` (no threshold)."""
    if d == 2:
        return None
    return Fraction(2 * d, d - 2)


@dataclass
class ClassificationReport:
    d: int
    powers: tuple[int, ...]
    verdict: Verdict
    threshold: Fraction | None
    table: list[dict] = field(default_factory=list)
    growth: Fraction = Fraction(0)
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "powers": list(self.powers),
            "verdict": self.verdict.value,
            "threshold": None if self.threshold is None else str(self.threshold),
            "growth_per_order": str(self.growth),
            "table": self.table,
            "notes": self.notes,
        }


def classify_interaction(d: int, powers: Sequence[int] | int, n_max: int = 8,
                         lower_sd: Fraction | int = 0) -> ClassificationReport:
    """Power-counting verdict from ``rho(n) = n k (d - 2)/2 - d (n - 1)`` with ``k`` the largest power.

    ``rho`` is affine in ``n`` with slope ``k (d - 2)/2 - d``: positive slope
    means unbounded growth, zero slope a constant nonnegative ``rho``, and
    negative slope eventual decrease to ``-infinity``.

    ``lower_sd`` is added to ``omega`` at every order; it stands for the
    scaling degree carried in from lower-order products (0 for Wick
    monomials with smooth coefficients). It shifts the table, not the verdict.
    """
    if isinstance(powers, int):
        powers = (powers,)
    powers = tuple(int(k) for k in powers)
    if d < 2 or not powers or min(powers) < 1:
        raise ValueError("need d >= 2 and powers >= 1")
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    k = max(powers)
    per_vertex = Fraction(k * (d - 2), 2)
    slope = per_vertex - d
    table = []
    for n in range(2, n_max + 1):
        omega = n * per_vertex + Fraction(lower_sd)
        rho = omega - d * (n - 1)
        codim = d * (n - 1)
        table.append({
            "n": n,
            "omega": str(omega),
            "rho": str(rho),
            "ambiguity_dimension": ambiguity_dimension(codim, float(omega)),
        })
    notes = []
    if d == 2:
        notes.append("d = 2: edges carry scaling degree 0, so rho(n) = -2(n - 1) for every interaction")
    if slope > 0:
        verdict = Verdict.NONRENORMALIZABLE
    elif slope == 0:
        verdict = Verdict.RENORMALIZABLE
    else:
        verdict = Verdict.SUPERRENORMALIZABLE
    return ClassificationReport(d, powers, verdict, critical_power(d), table, slope, notes)


def random_connected_multigraph(rng: random.Random, n: int, extra_edges: int, max_mult: int = 4) -> ContractionGraph:
    """Random spanning tree plus ``extra_edges`` further edges (multiplicity capped)."""
    a = [[0] * n for _ in range(n)]
    for v in range(1, n):
        u = rng.randrange(v)
        a[u][v] += 1
        a[v][u] += 1
    added = 0
    tries = 0
    while added < extra_edges and tries < 100 * (extra_edges + 1) and n > 1:
        tries += 1
        i, j = rng.sample(range(n), 2)
        if a[i][j] < max_mult:
            a[i][j] += 1
            a[j][i] += 1
            added += 1
    return ContractionGraph(a)


def verdict_rank(v: Verdict) -> int:
    """Order: super < renormalizable < non-renormalizable."""
    return _ORDER[v]
