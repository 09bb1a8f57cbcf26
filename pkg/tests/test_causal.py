import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from egren.causal import (
    OnDiagonal,
    OnDiagonalError,
    PointConfig,
    Relation,
    TOWord,
    c_i_member,
    causal_factorize,
    classify_pair,
    cover_witness,
    glue_consistency,
    members,
    partition_weights,
)

coord = st.integers(-6, 6).map(lambda k: Fraction(k, 2))


@st.composite
def configs(draw, n_min=2, n_max=4, d_values=(2, 3)):
    d = draw(st.sampled_from(d_values))
    n = draw(st.integers(n_min, n_max))
    pts = []
    for _ in range(n):
        if pts and draw(st.booleans()) and draw(st.booleans()):
            pts.append(list(draw(st.sampled_from(pts))))
        else:
            pts.append([draw(coord) for _ in range(d)])
    return PointConfig(d, pts)


def test_pair_relations():
    o = (0, 0)
    assert classify_pair(o, (1, 0)).relation is Relation.STRICTLY_FUTURE
    assert classify_pair(o, (-1, 0)).relation is Relation.STRICTLY_PAST
    assert classify_pair(o, (0, 1)).relation is Relation.SPACELIKE
    assert classify_pair(o, o).relation is Relation.EQUAL
    assert str(classify_pair(o, (1, 1))) == "Lightlike future"
    assert str(classify_pair(o, (-1, 1))) == "Lightlike past"


def test_exact_rational_lightlike_detection():
    assert classify_pair((Fraction(1, 3), 0), (Fraction(4, 3), Fraction(-1))).relation is Relation.LIGHTLIKE


@given(st.lists(coord, min_size=3, max_size=3), st.lists(coord, min_size=3, max_size=3))
def test_classification_matches_definition(x, y):
    v = classify_pair(x, y)
    assert v.in_past_cone == oracles.in_causal_past(y, x)
    assert v.in_future_cone == oracles.in_causal_past(x, y)
    assert (v.relation is Relation.SPACELIKE) == oracles.spacelike(x, y)
    w = classify_pair(y, x)
    assert w == v.swapped()


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        classify_pair((0, 0), (0, 0, 0))


@given(configs())
def test_membership_matches_definition(cfg):
    pts = [list(p) for p in cfg.points]
    got = set(members(cfg))
    want = set()
    for k in range(1, cfg.n):
        for I in itertools.combinations(range(1, cfg.n + 1), k):
            if oracles.in_c_i(pts, set(I)):
                want.add(frozenset(I))
    assert got == want


@given(configs(n_max=5, d_values=(2, 3, 4)))
def test_cover_lemma(cfg):
    w = cover_witness(cfg)
    if cfg.on_total_diagonal():
        assert w is OnDiagonal() and not w
    else:
        assert w in members(cfg)
        assert w == members(cfg)[0]


@given(configs())
def test_complement_law_for_spacelike_pairs(cfg):
    for I in members(cfg):
        Ic = frozenset(range(1, cfg.n + 1)) - I
        all_spacelike = all(cfg.relation(i - 1, j - 1).relation is Relation.SPACELIKE for i in I for j in Ic)
        if all_spacelike:
            assert c_i_member(cfg, Ic)


@given(configs())
def test_partition_weights(cfg):
    if cfg.on_total_diagonal():
        with pytest.raises(OnDiagonalError):
            partition_weights(cfg)
        return
    w = partition_weights(cfg)
    assert w.total() == 1
    assert all(v >= 0 for v in w.weights.values())
    assert all(c_i_member(cfg, I) for I in w.support())


@given(configs(n_min=3, n_max=4, d_values=(2,)))
@settings(max_examples=60)
def test_gluing_consistency(cfg):
    ms = members(cfg)
    for a in ms:
        for b in ms:
            assert glue_consistency(cfg, a, b)


@given(configs(n_min=3, n_max=4, d_values=(2,)), st.integers(0, 10**6))
@settings(max_examples=60)
def test_normal_form_confluence(cfg, seed):
    word = TOWord([range(1, cfg.n + 1)])
    base = causal_factorize(word, cfg)
    rng = random.Random(seed)
    for _ in range(5):
        assert causal_factorize(word, cfg, rng=rng).factors == base.factors


def test_glue_requires_joint_membership():
    cfg = PointConfig(2, [[0, 0], [1, 0]])
    with pytest.raises(ValueError):
        glue_consistency(cfg, {1}, {2})


def test_factorization_trace_and_rendering():
    cfg = PointConfig(2, [[0, 0], [2, 0], [Fraction(1, 2), 3]])
    nf = causal_factorize(TOWord([[1, 2, 3]]), cfg, record=True)
    assert str(nf) == "T({2})T({1})T({3})"
    assert nf.trace[-1].startswith("normal form")


def test_coincident_factor_does_not_split():
    cfg = PointConfig(2, [[0, 0], [0, 0], [5, 0]])
    nf = causal_factorize(TOWord([[1, 2, 3]]), cfg)
    assert nf.factors == (frozenset({3}), frozenset({1, 2}))


def test_json_round_trip():
    cfg = PointConfig(3, [[Fraction(1, 3), 0, 2], [0, Fraction(-5, 2), 1]])
    assert PointConfig.from_json(cfg.to_json()) == cfg
