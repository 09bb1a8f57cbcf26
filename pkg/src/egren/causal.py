"""Exact causal structure of point configurations in Minkowski space.

Points live in ``R^{1,d-1}`` with signature ``(+,-,...,-)`` and rational
coordinates; every predicate is decided in exact arithmetic. Causal cones are
closed (lightlike separations count as causal) and a point lies in its own
causal past.
"""

from __future__ import annotations

import enum
import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

__all__ = [
    "Relation",
    "CausalVerdict",
    "PointConfig",
    "OnDiagonal",
    "OnDiagonalError",
    "TOWord",
    "PartitionWeights",
    "classify_pair",
    "in_causal_past",
    "c_i_member",
    "cover_witness",
    "members",
    "partition_weights",
    "causal_factorize",
    "normal_form",
    "glue_consistency",
    "random_config",
]


def _q(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, float):
        # floats are accepted only when they are exactly representable as given
        return Fraction(v)
    return Fraction(str(v)) if isinstance(v, str) else Fraction(v)


class Relation(enum.Enum):
    """Position of a point ``y`` relative to a reference point ``x``."""

    STRICTLY_FUTURE = "StrictlyFuture"
    LIGHTLIKE = "Lightlike"
    STRICTLY_PAST = "StrictlyPast"
    SPACELIKE = "Spacelike"
    EQUAL = "Equal"


@dataclass(frozen=True)
class CausalVerdict:
    """Relation of ``y`` to ``x``; ``direction`` is the sign of ``t_y - t_x`` (0 unless causal)."""

    relation: Relation
    direction: int = 0

    @property
    def in_future_cone(self) -> bool:
        """``y`` in ``J^+(x)`` (closed cone, ``x`` itself included)."""
        return self.relation is Relation.EQUAL or (
            self.relation in (Relation.STRICTLY_FUTURE, Relation.LIGHTLIKE) and self.direction > 0
        )

    @property
    def in_past_cone(self) -> bool:
        """``y`` in ``J^-(x)``."""
        return self.relation is Relation.EQUAL or (
            self.relation in (Relation.STRICTLY_PAST, Relation.LIGHTLIKE) and self.direction < 0
        )

    def swapped(self) -> "CausalVerdict":
        """Verdict with the roles of ``x`` and ``y`` exchanged."""
        flip = {Relation.STRICTLY_FUTURE: Relation.STRICTLY_PAST, Relation.STRICTLY_PAST: Relation.STRICTLY_FUTURE}
        return CausalVerdict(flip.get(self.relation, self.relation), -self.direction)

    def __str__(self) -> str:
        if self.relation is Relation.LIGHTLIKE:
            return "Lightlike future" if self.direction > 0 else "Lightlike past"
        return self.relation.value


def classify_pair(x: Sequence, y: Sequence) -> CausalVerdict:
    """Classify ``y`` relative to ``x`` from the exact Minkowski interval.

    Raises:
        ValueError: dimension mismatch.
    """
    if len(x) != len(y):
        raise ValueError("points have different dimensions")
    dx = [_q(b) - _q(a) for a, b in zip(x, y)]
    if all(v == 0 for v in dx):
        return CausalVerdict(Relation.EQUAL, 0)
    dt = dx[0]
    interval = dt * dt - sum(v * v for v in dx[1:])
    sign = (dt > 0) - (dt < 0)
    if interval < 0:
        return CausalVerdict(Relation.SPACELIKE, 0)
    if interval == 0:
        return CausalVerdict(Relation.LIGHTLIKE, sign)
    return CausalVerdict(Relation.STRICTLY_FUTURE if sign > 0 else Relation.STRICTLY_PAST, sign)


def in_causal_past(y: Sequence, x: Sequence) -> bool:
    """``y in J^-(x)``."""
    return classify_pair(x, y).in_past_cone


@dataclass(frozen=True)
class PointConfig:
    """``n`` points of ``R^{1,d-1}`` with exact rational coordinates ``(t, x_1, ...)``."""

    d: int
    points: tuple[tuple[Fraction, ...], ...]

    def __init__(self, d: int, points: Iterable[Sequence]):
        pts = tuple(tuple(_q(v) for v in p) for p in points)
        if d < 2:
            raise ValueError("d must be at least 2")
        if not pts:
            raise ValueError("a configuration needs at least one point")
        if any(len(p) != d for p in pts):
            raise ValueError(f"every point needs {d} coordinates")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return len(self.points)

    def relation(self, i: int, j: int) -> CausalVerdict:
        """Relation of point ``j`` to point ``i`` (0-based)."""
        return classify_pair(self.points[i], self.points[j])

    def on_total_diagonal(self) -> bool:
        return all(p == self.points[0] for p in self.points)

    def on_partial_diagonal(self, K: Iterable[int]) -> bool:
        K = [k - 1 for k in K]
        return all(self.points[k] == self.points[K[0]] for k in K)

    @classmethod
    def from_json(cls, obj: dict) -> "PointConfig":
        return cls(int(obj["d"]), [[Fraction(str(v)) for v in p] for p in obj["points"]])

    def to_json(self) -> dict:
        return {"d": self.d, "points": [[str(v) for v in p] for p in self.points]}


class OnDiagonal:
    """Verdict: all points coincide, so no causal splitting exists."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "OnDiagonal"

    def __bool__(self) -> bool:
        return False


class OnDiagonalError(ValueError):
    """Operation undefined on the total diagonal."""


def _check_subset(cfg: PointConfig, I) -> frozenset:
    I = frozenset(int(i) for i in I)
    if not I or len(I) >= cfg.n or not I <= set(range(1, cfg.n + 1)):
        raise ValueError(f"I must be a proper nonempty subset of 1..{cfg.n}")
    return I


def _complement(cfg: PointConfig, I: frozenset) -> frozenset:
    return frozenset(range(1, cfg.n + 1)) - I


def _separated(cfg: PointConfig, A: Iterable[int], B: Iterable[int]) -> bool:
    """No point of ``A`` lies in the causal past of a point of ``B`` (1-based)."""
    return all(not cfg.relation(j - 1, i - 1).in_past_cone for i in A for j in B)


def c_i_member(cfg: PointConfig, I) -> bool:
    """Membership of ``cfg`` in ``C_I``: ``x_i`` not in ``J^-(x_j)`` for ``i in I``, ``j`` outside ``I``.

    ``I`` uses 1-based point labels.
    """
    I = _check_subset(cfg, I)
    return _separated(cfg, I, _complement(cfg, I))


def _proper_subsets(n: int):
    """Proper nonempty subsets of ``1..n``, by size then lexicographically."""
    for k in range(1, n):
        for S in itertools.combinations(range(1, n + 1), k):
            yield frozenset(S)


def members(cfg: PointConfig) -> list[frozenset]:
    """All ``I`` with ``cfg`` in ``C_I`` (exhaustive scan)."""
    return [I for I in _proper_subsets(cfg.n) if c_i_member(cfg, I)]


def cover_witness(cfg: PointConfig):
    """Some ``I`` with ``cfg`` in ``C_I``, or :class:`OnDiagonal` if all points coincide.

    Raises:
        RuntimeError: no witness for a non-coincident configuration (never
            expected; it would contradict the cover property).
    """
    if cfg.on_total_diagonal():
        return OnDiagonal()
    for I in _proper_subsets(cfg.n):
        if c_i_member(cfg, I):
            return I
    raise RuntimeError("no covering set found for a non-coincident configuration")


# ---------------------------------------------------------------------------
# partition weights
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PartitionWeights:
    """Exact weights ``f_I`` over proper nonempty subsets ``I``."""

    weights: dict

    def total(self) -> Fraction:
        return sum(self.weights.values(), Fraction(0))

    def support(self) -> list[frozenset]:
        return [I for I, w in self.weights.items() if w > 0]

    def to_json(self) -> dict:
        return {",".join(map(str, sorted(I))): str(w) for I, w in self.weights.items()}


def _pair_margin(x_i, x_j) -> Fraction:
    """Separation of ``x_i`` from ``J^-(x_j)``: spacelike gap or future lead of ``x_i``."""
    v = classify_pair(x_j, x_i)
    if v.relation is Relation.SPACELIKE:
        dx = [_q(a) - _q(b) for a, b in zip(x_i, x_j)]
        return sum(c * c for c in dx[1:]) - dx[0] * dx[0]
    if v.in_future_cone and v.relation is not Relation.EQUAL:
        return _q(x_i[0]) - _q(x_j[0])
    return Fraction(0)


def partition_weights(cfg: PointConfig) -> PartitionWeights:
    """Margin weights ``f_I = m_I / sum m_J``, with ``m_I`` the least pair margin across ``I x I^c``.

    Raises:
        OnDiagonalError: all points coincide.
    """
    if cfg.on_total_diagonal():
        raise OnDiagonalError("no partition of unity on the total diagonal")
    margins = {}
    for I in _proper_subsets(cfg.n):
        Ic = _complement(cfg, I)
        m = min(_pair_margin(cfg.points[i - 1], cfg.points[j - 1]) for i in I for j in Ic)
        margins[I] = m if m > 0 else Fraction(0)
    total = sum(margins.values(), Fraction(0))
    return PartitionWeights({I: m / total for I, m in margins.items()})


# ---------------------------------------------------------------------------
# words of time-ordered factors
# ---------------------------------------------------------------------------


def _key(S: frozenset) -> tuple:
    return tuple(sorted(S))


@dataclass(frozen=True)
class TOWord:
    """Product of time-ordered factors ``T(S_1) T(S_2) ...`` with disjoint label sets."""

    factors: tuple[frozenset, ...]
    trace: tuple[str, ...] = field(default=(), compare=False)

    def __init__(self, factors: Iterable[Iterable[int]], trace: Iterable[str] = ()):
        fs = tuple(frozenset(int(i) for i in f) for f in factors)
        if any(not f for f in fs):
            raise ValueError("factors must be nonempty")
        seen = set()
        for f in fs:
            if seen & f:
                raise ValueError("factors must be pairwise disjoint")
            seen |= f
        object.__setattr__(self, "factors", fs)
        object.__setattr__(self, "trace", tuple(trace))

    @property
    def support(self) -> frozenset:
        return frozenset().union(*self.factors) if self.factors else frozenset()

    def __str__(self) -> str:
        return "".join("T({" + ",".join(map(str, _key(f))) + "})" for f in self.factors)

    def to_json(self) -> list:
        return [list(_key(f)) for f in self.factors]


def _admissible_splits(cfg: PointConfig, S: frozenset) -> list[tuple[frozenset, frozenset]]:
    out = []
    elems = _key(S)
    for k in range(1, len(elems)):
        for A in itertools.combinations(elems, k):
            A = frozenset(A)
            B = S - A
            if _separated(cfg, A, B):
                out.append((A, B))
    out.sort(key=lambda ab: _key(ab[0]))
    return out


def _mutually_spacelike(cfg: PointConfig, A: frozenset, B: frozenset) -> bool:
    return all(cfg.relation(i - 1, j - 1).relation is Relation.SPACELIKE for i in A for j in B)


def normal_form(cfg: PointConfig, factors: Sequence[frozenset]) -> tuple[frozenset, ...]:
    """Lexicographically least representative modulo commuting mutually spacelike neighbours.

    Letters commute iff their label sets are mutually spacelike; the least
    representative of such a commutation class is unique.
    """
    rest = list(factors)
    out = []
    while rest:
        movable = [
            k for k in range(len(rest)) if all(_mutually_spacelike(cfg, rest[k], rest[m]) for m in range(k))
        ]
        k = min(movable, key=lambda k: _key(rest[k]))
        out.append(rest.pop(k))
    return tuple(out)


def causal_factorize(word: TOWord, cfg: PointConfig, rng: random.Random | None = None,
                     record: bool = False) -> TOWord:
    """Split factors by causal factorization until none splits, then take the normal form.

    ``T(S) -> T(A) T(S - A)`` applies whenever no point of ``A`` lies in the
    causal past of a point of ``S - A``. By default the lexicographically least
    split of the leftmost splittable factor is used; with ``rng`` the factor
    and the split are drawn at random (for confluence checks). Factors of
    coincident points admit no split and are kept.
    """
    if not word.support <= set(range(1, cfg.n + 1)):
        raise ValueError("word refers to points outside the configuration")
    factors = list(word.factors)
    trace = []
    while True:
        options = [(k, _admissible_splits(cfg, f)) for k, f in enumerate(factors)]
        options = [(k, sp) for k, sp in options if sp]
        if not options:
            break
        if rng is None:
            k, splits = options[0]
            A, B = splits[0]
        else:
            k, splits = rng.choice(options)
            A, B = rng.choice(splits)
        if record:
            trace.append(f"T({{{','.join(map(str, _key(factors[k])))}}}) -> "
                         f"T({{{','.join(map(str, _key(A)))}}})T({{{','.join(map(str, _key(B)))}}})")
        factors[k : k + 1] = [A, B]
    nf = normal_form(cfg, factors)
    if record:
        trace.append(f"normal form {TOWord(nf)}")
    return TOWord(nf, trace)


def glue_consistency(cfg: PointConfig, I1, I2) -> bool:
    """Whether ``T(I1)T(I1^c)`` and ``T(I2)T(I2^c)`` reduce to the same normal form.

    Raises:
        ValueError: ``cfg`` is not in both ``C_I1`` and ``C_I2``.
    """
    I1, I2 = _check_subset(cfg, I1), _check_subset(cfg, I2)
    if not (c_i_member(cfg, I1) and c_i_member(cfg, I2)):
        raise ValueError("configuration must lie in both C_I1 and C_I2")
    w1 = causal_factorize(TOWord([I1, _complement(cfg, I1)]), cfg)
    w2 = causal_factorize(TOWord([I2, _complement(cfg, I2)]), cfg)
    return w1.factors == w2.factors


def random_config(rng: random.Random, n: int, d: int, denominator: int = 4, span: int = 3,
                  coincide: float = 0.0) -> PointConfig:
    """Random rational configuration; ``coincide`` is the chance a point repeats an earlier one.

    Coordinates are ``k / denominator`` with ``|k| <= span * denominator``, so
    lightlike and coincident pairs occur with positive probability.
    """
    pts = []
    for _ in range(n):
        if pts and rng.random() < coincide:
            pts.append(rng.choice(pts))
        else:
            pts.append([Fraction(rng.randint(-span * denominator, span * denominator), denominator) for _ in range(d)])
    return PointConfig(d, pts)
