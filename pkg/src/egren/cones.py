"""Wave-front cones over Minkowski point configurations, decided exactly.

Covectors are written in the same global components as points; a null
covector "along" a null separation ``v`` means ``k = c v`` componentwise, and
parallel transport in flat space leaves components unchanged. A covector is
future directed when ``k_0 > 0`` and ``k`` lies in the closed forward cone.
All decisions reduce to rational linear feasibility (:mod:`egren.exact_lp`).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .causal import Relation, classify_pair
from .exact_lp import linprog_exact

__all__ = [
    "CovectorConfig",
    "ConeGenerators",
    "EdgeSlot",
    "Witness",
    "Feasible",
    "Infeasible",
    "IncompleteSearch",
    "is_null",
    "is_future",
    "in_closed_future_cone",
    "null_rays_2d",
    "wf_commutator_member",
    "wf2_hadamard_member",
    "wf_feynman_member",
    "hormander_product_check",
    "restriction_allowed",
    "edge_slots",
    "gamma_to_member",
    "digamma_member",
    "saturated_multigraphs",
    "feynman_diagonal_generators",
    "future_null_generators",
]


Vec = tuple[Fraction, ...]


def _vec(v) -> Vec:
    return tuple(Fraction(str(a)) if isinstance(a, str) else Fraction(a) for a in v)


def _minkowski_square(v: Vec) -> Fraction:
    return v[0] * v[0] - sum(a * a for a in v[1:])


def is_null(k: Sequence) -> bool:
    """Nonzero and lightlike."""
    k = _vec(k)
    return any(k) and _minkowski_square(k) == 0


def in_closed_future_cone(k: Sequence) -> bool:
    """``k_0 >= |k_vec|`` (includes 0)."""
    k = _vec(k)
    return k[0] >= 0 and _minkowski_square(k) >= 0


def is_future(k: Sequence) -> bool:
    """Nonzero element of the closed forward cone."""
    k = _vec(k)
    return any(k) and in_closed_future_cone(k)


def _parallel(a: Vec, b: Vec) -> Fraction | None:
    """``c`` with ``a = c b`` (``b`` nonzero), else ``None``."""
    j = next(i for i, v in enumerate(b) if v != 0)
    c = a[j] / b[j]
    return c if all(x == c * y for x, y in zip(a, b)) else None


def null_rays_2d() -> tuple[Vec, Vec]:
    """The two future null directions in ``d = 2``."""
    return (Fraction(1), Fraction(1)), (Fraction(1), Fraction(-1))


# ---------------------------------------------------------------------------
# two-point wave-front predicates
# ---------------------------------------------------------------------------


def _related(x, k, xp, kp) -> bool:
    """``(x, k) ~ (x', k')``: joined by a null geodesic along which ``k`` is transported."""
    x, k, xp, kp = map(_vec, (x, k, xp, kp))
    if not is_null(k) or k != kp:
        return False
    v = tuple(b - a for a, b in zip(x, xp))
    if not any(v):
        return True
    if _minkowski_square(v) != 0:
        return False
    return _parallel(k, v) is not None


def wf_commutator_member(x, k, xp, kp) -> bool:
    """Membership of ``(x, k; x', -k')`` in the wave-front set of the commutator function."""
    if not any(_vec(k)) and not any(_vec(kp)):
        return False
    return _related(x, k, xp, kp)


def wf2_hadamard_member(x, k, xp, kp) -> bool:
    """As :func:`wf_commutator_member`, restricted to future-directed ``k``."""
    return wf_commutator_member(x, k, xp, kp) and is_future(k)


def wf_feynman_member(x, k, xp, kp) -> bool:
    """Off-diagonal piece (time-ordered sign rule) or diagonal piece (``x = x'``, ``k = k' != 0``)."""
    x, k, xp, kp = map(_vec, (x, k, xp, kp))
    if not any(k) and not any(kp):
        return False
    if x == xp:
        return k == kp and any(k)
    if not _related(x, k, xp, kp):
        return False
    rel = classify_pair(xp, x)  # x relative to x'
    if rel.in_future_cone:
        return is_future(k)
    return is_future(tuple(-a for a in k))


# ---------------------------------------------------------------------------
# cones and conic feasibility
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConeGenerators:
    """Conic hull (without 0) of finitely many covectors at a base point."""

    base: Vec
    generators: tuple[Vec, ...]

    def __init__(self, base: Sequence, generators: Iterable[Sequence]):
        gens = tuple(_vec(g) for g in generators)
        base = _vec(base)
        if any(not any(g) for g in gens):
            raise ValueError("generators must be nonzero")
        if any(len(g) != len(base) for g in gens):
            raise ValueError("generator and base dimensions differ")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "generators", gens)

    @property
    def dim(self) -> int:
        return len(self.base)

    def with_generators(self, extra: Iterable[Sequence]) -> "ConeGenerators":
        return ConeGenerators(self.base, self.generators + tuple(_vec(g) for g in extra))


def future_null_generators(base: Sequence) -> ConeGenerators:
    """Both future null rays at ``base`` (``d = 2``)."""
    if len(base) != 2:
        raise ValueError("explicit null-cone generators are provided for d = 2")
    return ConeGenerators(base, null_rays_2d())


def feynman_diagonal_generators(base: Sequence) -> ConeGenerators:
    """All directions: ``+-e_j`` span every covector."""
    d = len(base)
    gens = []
    for j in range(d):
        for s in (1, -1):
            e = [0] * d
            e[j] = s
            gens.append(e)
    return ConeGenerators(base, gens)


def _nonzero_combination_in(columns: list[Vec], constraints: list[Vec], dim: int) -> tuple | None:
    """Nonnegative ``lam`` such that ``v = sum lam_j col_j`` is annihilated by every constraint row
    and ``v`` is nonzero in one of its first ``dim`` components.

    Returns ``lam`` or ``None``. Nonzero-ness is imposed as ``+-v_i >= 1`` for
    some ``i``, which loses nothing because cones are scale invariant.
    """
    if not columns:
        return None
    m = len(columns)
    A_eq = [[row_dot(c, r) for c in columns] for r in constraints]
    b_eq = [0] * len(constraints)
    for i in range(dim):
        for s in (1, -1):
            A_ub = [[-s * c[i] for c in columns]]
            res = linprog_exact([0] * m, A_eq, b_eq, A_ub, [-1])
            if res.status == "optimal":
                return res.x
    return None


def row_dot(a: Sequence, b: Sequence) -> Fraction:
    return sum((Fraction(x) * Fraction(y) for x, y in zip(a, b)), Fraction(0))


def hormander_product_check(A: ConeGenerators, B: ConeGenerators) -> bool:
    """``True`` iff no ``a in cone(A)``, ``b in cone(B)`` with ``a + b = 0``, ``a != 0``.

    Raises:
        ValueError: different base points.
    """
    if A.base != B.base:
        raise ValueError("cones must share a base point")
    d = A.dim
    # columns stack (a-part, (a+b)-part); require a + b = 0 and a != 0
    cols = [tuple(g) + tuple(g) for g in A.generators] + [tuple([Fraction(0)] * d) + tuple(g) for g in B.generators]
    # constraint rows: (a + b)_i = 0 ; the first d components carry a
    constraints = []
    for i in range(d):
        r = [Fraction(0)] * (2 * d)
        r[d + i] = Fraction(1)
        constraints.append(tuple(r))
    return _nonzero_combination_in(cols, constraints, d) is None


def restriction_allowed(cones: Sequence[ConeGenerators], subspace: Sequence[Sequence]) -> bool:
    """``True`` iff no cone based on the subspace meets its conormal space.

    Args:
        cones: generators at base points of ``R^D``.
        subspace: rational basis vectors of a linear subspace ``V``.
    """
    basis = [_vec(v) for v in subspace]
    for cone in cones:
        if not cone.generators:
            continue
        if basis and not _in_span(cone.base, basis):
            continue
        if not basis and any(cone.base):
            continue
        cols = [tuple(g) for g in cone.generators]
        if _nonzero_combination_in(cols, basis, cone.dim) is not None:
            return False
    return True


def _in_span(p: Vec, basis: list[Vec]) -> bool:
    import sympy as sp

    M = sp.Matrix([list(b) for b in basis]).T
    aug = M.row_join(sp.Matrix(list(p)))
    return M.rank() == aug.rank()


# ---------------------------------------------------------------------------
# graph immersions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CovectorConfig:
    """Points ``x_i`` with covectors ``k_i``; not all ``k_i`` vanish."""

    d: int
    points: tuple[Vec, ...]
    covectors: tuple[Vec, ...]

    def __init__(self, d: int, points: Iterable[Sequence], covectors: Iterable[Sequence]):
        pts = tuple(_vec(p) for p in points)
        ks = tuple(_vec(k) for k in covectors)
        if len(pts) != len(ks) or not pts:
            raise ValueError("need one covector per point")
        if any(len(v) != d for v in pts + ks):
            raise ValueError(f"entries must have {d} components")
        if not any(any(k) for k in ks):
            raise ValueError("at least one covector must be nonzero")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "covectors", ks)

    @property
    def n(self) -> int:
        return len(self.points)

    @classmethod
    def from_json(cls, obj: dict) -> "CovectorConfig":
        return cls(int(obj["d"]), obj["points"], obj["covectors"])


@dataclass(frozen=True)
class EdgeSlot:
    """Admissible edge ``s < r`` with direction ``u`` (future null); ``free`` allows either sign."""

    s: int
    r: int
    direction: Vec
    free: bool


@dataclass
class Witness:
    """Graph immersion: edges ``(s, r, k_e)`` with multiplicity matrix."""

    n: int
    edges: list[tuple[int, int, Vec]]
    multiplicity_bound: int

    @property
    def multiplicity(self) -> list[list[int]]:
        a = [[0] * self.n for _ in range(self.n)]
        for s, r, _ in self.edges:
            a[s][r] += 1
            a[r][s] += 1
        return a

    def covector_sums(self, d: int) -> list[Vec]:
        """``k_i = sum_{s(e)=i} k_e - sum_{r(e)=i} k_e``."""
        out = [[Fraction(0)] * d for _ in range(self.n)]
        for s, r, k in self.edges:
            for c in range(d):
                out[s][c] += k[c]
                out[r][c] -= k[c]
        return [tuple(v) for v in out]

    def to_json(self) -> dict:
        return {
            "multiplicity": self.multiplicity,
            "edges": [{"s": s + 1, "r": r + 1, "k": [str(v) for v in k]} for s, r, k in self.edges],
            "multiplicity_bound": self.multiplicity_bound,
        }


@dataclass
class Feasible:
    witness: Witness

    verdict = "Feasible"

    def __bool__(self) -> bool:
        return True


@dataclass
class Infeasible:
    reason: str = ""
    multiplicity_bound: int | None = None

    verdict = "Infeasible"

    def __bool__(self) -> bool:
        return False


@dataclass
class IncompleteSearch:
    """Search space exhausted without a witness, but it was not complete."""

    reason: str = ""
    multiplicity_bound: int | None = None

    verdict = "IncompleteSearch"

    def __bool__(self) -> bool:
        return False


def edge_slots(cc: CovectorConfig, direction_grid: Sequence[Sequence] | None = None,
               all_future: bool = False) -> tuple[list[EdgeSlot], bool]:
    """Admissible edge slots and whether the direction domains are complete.

    Distinct null-related points admit the single ray along their separation;
    coincident points admit every future null ray (both rays in ``d = 2``,
    otherwise the supplied grid). An edge must be future directed when
    ``x_s`` is not in ``J^-(x_r)``; otherwise either sign is allowed.
    """
    slots = []
    complete = True
    grid = None
    if cc.d == 2:
        grid = list(null_rays_2d())
    elif direction_grid is not None:
        grid = [_vec(g) for g in direction_grid]
        for g in grid:
            if not is_future(g) or not is_null(g):
                raise ValueError("direction grid entries must be future null")
    for s in range(cc.n):
        for r in range(s + 1, cc.n):
            xs, xr = cc.points[s], cc.points[r]
            rel = classify_pair(xr, xs)  # x_s relative to x_r
            free = (not all_future) and rel.in_past_cone
            if rel.relation is Relation.EQUAL:
                if grid is None:
                    complete = False
                    continue
                if cc.d != 2:
                    complete = False
                for u in grid:
                    slots.append(EdgeSlot(s, r, u, free))
            elif rel.relation is Relation.LIGHTLIKE:
                v = tuple(b - a for a, b in zip(xs, xr))
                u = v if v[0] > 0 else tuple(-a for a in v)
                slots.append(EdgeSlot(s, r, u, free))
    return slots, complete


def _equations(cc: CovectorConfig, columns: list[tuple[int, int, Vec, int]]):
    """Rows of ``k_i = sum_{s=i} k_e - sum_{r=i} k_e`` over signed columns."""
    A, b = [], []
    for i in range(cc.n):
        for c in range(cc.d):
            row = []
            for s, r, u, sign in columns:
                coef = Fraction(0)
                if s == i:
                    coef += sign * u[c]
                if r == i:
                    coef -= sign * u[c]
                row.append(coef)
            A.append(row)
            b.append(cc.covectors[i][c])
    return A, b


def gamma_to_member(cc: CovectorConfig, multiplicity_bound: int = 4,
                    direction_grid: Sequence[Sequence] | None = None):
    """Decide membership in the time-ordered cone by one exact feasibility problem.

    Every admissible multigraph uses edges from :func:`edge_slots`; parallel
    edges on one slot add, so the union over graphs equals the conic
    combinations of the slot covectors (future slots) and their signed
    combinations (free slots). A solution's nonzero slots form the witness
    graph, with at most one edge per slot.
    """
    slots, complete = edge_slots(cc, direction_grid)
    per_pair = {}
    for sl in slots:
        per_pair[(sl.s, sl.r)] = per_pair.get((sl.s, sl.r), 0) + 1
    if per_pair and max(per_pair.values()) > multiplicity_bound:
        # a witness may use one edge per slot; more slots than the bound would exceed it
        raise ValueError("direction grid has more rays per pair than the multiplicity bound")
    columns = []
    for sl in slots:
        columns.append((sl.s, sl.r, sl.direction, 1))
        if sl.free:
            columns.append((sl.s, sl.r, sl.direction, -1))
    if columns:
        A, b = _equations(cc, columns)
        res = linprog_exact([0] * len(columns), A, b)
    else:
        res = None
    if res is not None and res.status == "optimal":
        net = {}
        for (s, r, u, sign), beta in zip(columns, res.x):
            net[(s, r, u)] = net.get((s, r, u), Fraction(0)) + sign * beta
        edges = [(s, r, tuple(beta * a for a in u)) for (s, r, u), beta in net.items() if beta != 0]
        return Feasible(Witness(cc.n, edges, multiplicity_bound))
    if not columns and all(not any(k) for k in cc.covectors):
        raise AssertionError("unreachable: configuration has a nonzero covector")
    if complete:
        return Infeasible("no admissible immersion reproduces the covectors", multiplicity_bound)
    return IncompleteSearch("coincident-point edge directions are not enumerable without a complete grid",
                            multiplicity_bound)


def saturated_multigraphs(degrees: Sequence[int], allowed: set[tuple[int, int]] | None = None,
                          multiplicity_bound: int | None = None):
    """Symmetric multiplicity matrices with zero diagonal and row sums ``degrees``.

    ``allowed`` restricts the pairs ``(i, j)``, ``i < j``, that may carry edges.
    Matrices are generated in lexicographic order of their upper triangles.
    """
    n = len(degrees)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if allowed is None or (i, j) in allowed]
    if sum(degrees) % 2:
        return
    remaining = list(degrees)
    a = {}

    def rec(k):
        if k == len(pairs):
            if all(v == 0 for v in remaining):
                yield {p: m for p, m in a.items() if m}
            return
        i, j = pairs[k]
        # remaining capacity of i must be absorbed by later pairs containing i
        top = min(remaining[i], remaining[j])
        if multiplicity_bound is not None:
            top = min(top, multiplicity_bound)
        for m in range(top, -1, -1):
            remaining[i] -= m
            remaining[j] -= m
            a[(i, j)] = m
            if _can_finish(k + 1):
                yield from rec(k + 1)
            remaining[i] += m
            remaining[j] += m
        a.pop((i, j), None)

    def _can_finish(k):
        later = {}
        for i, j in pairs[k:]:
            later[i] = later.get(i, 0) + 1
            later[j] = later.get(j, 0) + 1
        return all(remaining[v] == 0 or later.get(v, 0) > 0 for v in range(n))

    yield from rec(0)


def _positive_solution(A, b, m: int):
    """Solve ``A beta = b`` with every ``beta_e > 0`` (maximize a common lower bound)."""
    # variables (beta_1..beta_m, t): beta_e - t >= 0, t <= 1
    A_eq = [row + [Fraction(0)] for row in A]
    A_ub = []
    b_ub = []
    for e in range(m):
        r = [Fraction(0)] * (m + 1)
        r[e] = Fraction(-1)
        r[m] = Fraction(1)
        A_ub.append(r)
        b_ub.append(0)
    r = [Fraction(0)] * (m + 1)
    r[m] = Fraction(1)
    A_ub.append(r)
    b_ub.append(1)
    c = [0] * m + [1]
    res = linprog_exact(c, A_eq, b, A_ub, b_ub, maximize=True)
    if res.status == "optimal" and res.value > 0:
        return res.x[:m]
    return None


def digamma_member(cc: CovectorConfig, degrees: Sequence[int], multiplicity_bound: int = 4,
                   direction_grid: Sequence[Sequence] | None = None):
    """Membership in the Wightman-product cone over saturated graphs with future edge covectors.

    Each saturated multigraph (vertex ``i`` of degree ``m_i``) is tried; every
    edge carries a nonzero future null covector along its slot direction.
    """
    degrees = [int(m) for m in degrees]
    if len(degrees) != cc.n:
        raise ValueError("one degree per point is required")
    if sum(degrees) % 2:
        return Infeasible("odd total degree: no saturated graph exists", multiplicity_bound)
    slots, complete = edge_slots(cc, direction_grid, all_future=True)
    by_pair = {}
    for sl in slots:
        by_pair.setdefault((sl.s, sl.r), []).append(sl.direction)
    found_graph = False
    for graph in saturated_multigraphs(degrees, set(by_pair), multiplicity_bound):
        found_graph = True
        # assign directions: for each pair, how many of its edges use each direction
        choices = []
        for (i, j), mult in sorted(graph.items()):
            dirs = by_pair[(i, j)]
            options = [c for c in itertools.product(range(mult + 1), repeat=len(dirs)) if sum(c) == mult]
            choices.append([((i, j), dirs, c) for c in options])
        for assignment in itertools.product(*choices):
            cols = []
            for (i, j), dirs, counts in assignment:
                for u, cnt in zip(dirs, counts):
                    cols.extend([(i, j, u, 1)] * cnt)
            A, b = _equations(cc, cols)
            beta = _positive_solution(A, b, len(cols))
            if beta is not None:
                edges = [(s, r, tuple(bv * a for a in u)) for (s, r, u, _), bv in zip(cols, beta)]
                return Feasible(Witness(cc.n, edges, multiplicity_bound))
    if not found_graph:
        return Infeasible("no saturated multigraph on the admissible pairs", multiplicity_bound)
    if complete:
        return Infeasible("no saturated immersion reproduces the covectors", multiplicity_bound)
    return IncompleteSearch("coincident-point edge directions limited to the supplied grid", multiplicity_bound)
