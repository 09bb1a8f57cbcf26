from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from egren.cones import (
    ConeGenerators,
    CovectorConfig,
    Feasible,
    IncompleteSearch,
    Infeasible,
    digamma_member,
    feynman_diagonal_generators,
    future_null_generators,
    gamma_to_member,
    hormander_product_check,
    in_closed_future_cone,
    restriction_allowed,
    saturated_multigraphs,
    wf2_hadamard_member,
    wf_commutator_member,
    wf_feynman_member,
)
from egren.wick import enumerate_saturated_graphs

small = st.integers(-3, 3)
vec2 = st.tuples(small, small)
future2 = st.tuples(st.integers(0, 4), st.integers(-4, 4)).filter(lambda v: v[0] >= abs(v[1]))


@st.composite
def covector_configs(draw, future_only=False, coincident=False):
    n = draw(st.integers(2, 4))
    if coincident:
        p = draw(vec2)
        pts = [p] * n
    else:
        pts = [draw(st.tuples(st.integers(0, 3), st.integers(0, 3))) for _ in range(n)]
    ks = [draw(future2 if future_only else vec2) for _ in range(n)]
    assume(any(any(k) for k in ks))
    return CovectorConfig(2, pts, ks)


def check_witness(cc, verdict):
    w = verdict.witness
    assert w.covector_sums(cc.d) == [tuple(Fraction(c) for c in k) for k in cc.covectors]
    for s, r, k in w.edges:
        assert any(k)
        # every edge covector is null
        assert k[0] * k[0] == sum(c * c for c in k[1:])


def test_two_point_examples():
    o, x = (0, 0), (1, 1)
    assert wf_commutator_member(o, (1, 1), x, (1, 1))
    assert wf_commutator_member(o, (-1, -1), x, (-1, -1))
    assert not wf2_hadamard_member(o, (-1, -1), x, (-1, -1))
    assert wf2_hadamard_member(o, (1, 1), x, (1, 1))
    assert not wf_commutator_member(o, (1, -1), x, (1, -1))  # transverse to the separation
    assert not wf_commutator_member(o, (1, 1), (2, 0), (1, 1))  # timelike separation
    assert wf_feynman_member(o, (2, 0), o, (2, 0))  # diagonal piece allows any nonzero k
    assert not wf_feynman_member(o, (0, 0), o, (0, 0))


@given(vec2, vec2, vec2, vec2)
def test_hadamard_inside_commutator(x, k, xp, kp):
    if wf2_hadamard_member(x, k, xp, kp):
        assert wf_commutator_member(x, k, xp, kp) and in_closed_future_cone(k)
    assert wf_commutator_member(x, k, xp, kp) == wf_commutator_member(xp, kp, x, k)


def test_hormander_examples():
    o = (0, 0)
    assert hormander_product_check(future_null_generators(o), future_null_generators(o))
    assert not hormander_product_check(feynman_diagonal_generators(o), feynman_diagonal_generators(o))


@given(st.lists(vec2, min_size=1, max_size=3), st.lists(vec2, min_size=1, max_size=3), st.lists(vec2, max_size=2))
@settings(max_examples=80)
def test_hormander_symmetric_and_monotone(ga, gb, extra):
    assume(all(any(g) for g in ga + gb + extra))
    A, B = ConeGenerators((0, 0), ga), ConeGenerators((0, 0), gb)
    ab = hormander_product_check(A, B)
    assert ab == hormander_product_check(B, A)
    if not ab:
        assert not hormander_product_check(A.with_generators(extra), B)


def test_hormander_needs_common_base():
    with pytest.raises(ValueError):
        hormander_product_check(future_null_generators((0, 0)), future_null_generators((1, 0)))


def test_restriction_to_diagonal():
    diag = [(1, 0, 1, 0), (0, 1, 0, 1)]
    hadamard = ConeGenerators((0, 0, 0, 0), [(1, 1, -1, -1), (1, -1, -1, 1)])
    assert not restriction_allowed([hadamard], diag)
    assert restriction_allowed([ConeGenerators((0, 0, 0, 0), [])], diag)
    off_conormal = ConeGenerators((0, 0, 0, 0), [(1, 1, 1, 1)])
    assert restriction_allowed([off_conormal], diag)
    # cones based off the subspace do not matter
    assert restriction_allowed([ConeGenerators((1, 0, 0, 0), [(1, 1, -1, -1)])], diag)


def test_gamma_to_coincident_pair():
    cc = CovectorConfig(2, [(0, 0), (0, 0)], [(1, 1), (-1, -1)])
    v = gamma_to_member(cc)
    assert isinstance(v, Feasible)
    check_witness(cc, v)


def test_gamma_to_spacelike_pair_is_infeasible():
    cc = CovectorConfig(2, [(0, 0), (0, 3)], [(1, 1), (-1, -1)])
    assert isinstance(gamma_to_member(cc), Infeasible)


def test_gamma_to_needs_grid_in_higher_dimension():
    cc = CovectorConfig(3, [(0, 0, 0), (0, 0, 0)], [(1, 1, 0), (-1, -1, 0)])
    assert isinstance(gamma_to_member(cc), IncompleteSearch)
    grid = [(1, 1, 0), (1, -1, 0), (1, 0, 1), (1, 0, -1)]
    v = gamma_to_member(cc, direction_grid=grid)
    assert isinstance(v, Feasible)
    check_witness(cc, v)
    with pytest.raises(ValueError):
        gamma_to_member(cc, multiplicity_bound=2, direction_grid=grid)


def test_digamma_example_two_edges():
    cc = CovectorConfig(2, [(0, 0), (1, 1)], [(2, 2), (-2, -2)])
    v = digamma_member(cc, [2, 2])
    assert isinstance(v, Feasible)
    assert v.witness.multiplicity == [[0, 2], [2, 0]]
    check_witness(cc, v)


def test_digamma_odd_degree_sum():
    cc = CovectorConfig(2, [(0, 0), (1, 1)], [(1, 1), (-1, -1)])
    assert isinstance(digamma_member(cc, [1, 2]), Infeasible)


@given(covector_configs(future_only=True))
@settings(max_examples=150)
def test_no_all_future_members(cc):
    assert not isinstance(gamma_to_member(cc), Feasible)


@given(covector_configs())
@settings(max_examples=150)
def test_lp_soundness(cc):
    v = gamma_to_member(cc)
    if isinstance(v, Feasible):
        check_witness(cc, v)


@given(covector_configs(coincident=True))
@settings(max_examples=80)
def test_coincident_witnesses_sum_to_zero(cc):
    v = gamma_to_member(cc)
    if isinstance(v, Feasible):
        total = [sum(k[c] for k in cc.covectors) for c in range(2)]
        assert total == [0, 0]


@given(covector_configs(), st.lists(st.integers(0, 3), min_size=4, max_size=4))
@settings(max_examples=100)
def test_digamma_inside_gamma_to(cc, degrees):
    v = digamma_member(cc, degrees[: cc.n])
    if isinstance(v, Feasible):
        check_witness(cc, v)
        assert isinstance(gamma_to_member(cc), Feasible)


@given(st.lists(st.integers(0, 4), min_size=2, max_size=4))
def test_saturated_multigraphs_match_wick_enumeration(degrees):
    mine = sorted(tuple(sorted(g.items())) for g in saturated_multigraphs(degrees))
    n = len(degrees)
    other = []
    for g in enumerate_saturated_graphs(degrees):
        other.append(tuple(sorted(((i, j), g.a[i][j]) for i in range(n) for j in range(i + 1, n) if g.a[i][j])))
    assert mine == sorted(other)
