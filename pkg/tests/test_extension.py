import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from egren.distributions import DistributionKernel, pair
from egren.extension import (
    CutoffFamily,
    NeedsSubtraction,
    WeightProbe,
    ambiguity_dimension,
    build_w_operator,
    extend_at_surface,
    extend_unique,
    extend_with_w,
)
from egren.fibration import SurfaceFibration
from egren.testfunctions import Cutoff, make_bump, multi_indices, random_probe


def rel_err(v, ref, scale=0.0):
    return abs(v - ref) / max(abs(ref), scale, 1e-300)


@pytest.mark.parametrize("d,sd,expected", [(1, 0.5, 0), (1, 1, 1), (1, 2.5, 2), (2, 2, 1), (2, 3, 3), (4, 6, 15)])
def test_ambiguity_dimension(d, sd, expected):
    assert ambiguity_dimension(d, sd) == expected


def test_unique_extension_matches_integral_1d():
    t = DistributionKernel.from_dsl("pow(abs(x1), -0.5)", 1, sd=0.5)
    ext = extend_unique(t)
    assert ext.mode == "Unique" and ext.ambiguity_dimension == 0
    for c, r in [(0.0, 1.0), (0.2, 0.6), (-0.3, 1.3)]:
        phi = make_bump(1, [c], r, [((1,), 1.0), ((0,), 1.0)])
        assert rel_err(ext.pair(phi).value, oracles.pair_power_1d(0.5, phi)) < 1e-8


def test_unique_extension_matches_integral_2d():
    t = DistributionKernel.from_dsl("pow(x1^2 + x2^2, -0.75)", 2, sd=1.5)
    phi = make_bump(2, [0.15, -0.1], 0.9)
    assert rel_err(extend_unique(t).pair(phi).value, oracles.pair_power_2d(1.5, phi)) < 1e-7


def test_unique_extension_is_cutoff_independent():
    t = DistributionKernel.from_dsl("pow(abs(x1), -0.7)", 1, sd=0.7)
    e1, e2 = extend_unique(t, CutoffFamily(0.5, 1.0)), extend_unique(t, CutoffFamily(0.2, 2.0))
    rng = np.random.default_rng(11)
    for _ in range(5):
        phi = random_probe(1, rng)
        a, b = e1.pair(phi), e2.pair(phi)
        assert rel_err(a.value, b.value, a.scale) < 1e-6


def test_off_locus_pairing_is_the_original():
    t = DistributionKernel.from_dsl("pow(abs(x1), -1)", 1, sd=1)
    ext = extend_with_w(t, build_w_operator(1, 0))
    phi = make_bump(1, [1.5], 0.5)
    assert ext.pair(phi).value == pair(t, phi).value


def test_unique_refuses_subtraction_case():
    with pytest.raises(NeedsSubtraction):
        extend_unique(DistributionKernel.from_dsl("pow(abs(x1), -1)", 1, sd=1))


def test_w_order_must_match():
    t = DistributionKernel.from_dsl("pow(abs(x1), -1)", 1, sd=1)
    with pytest.raises(ValueError):
        extend_with_w(t, build_w_operator(1, 1))
    with pytest.raises(ValueError):
        extend_with_w(t, build_w_operator(1, 0), constants={(1,): 1.0})


@pytest.mark.parametrize("weight,c0", [((0.5, 1.0), 0.0), ((0.3, 1.5), 1.7)])
def test_subtracted_extension_matches_oracle(weight, c0):
    t = DistributionKernel.from_dsl("pow(abs(x1), -1)", 1, sd=1)
    W = build_w_operator(1, 0, Cutoff(*weight))
    ext = extend_with_w(t, W, {(0,): c0})
    for c, r in [(0.0, 1.0), (0.3, 0.9), (-0.2, 1.4)]:
        phi = make_bump(1, [c], r, [((0,), 1.0), ((1,), -0.5)])
        got = ext.pair(phi)
        ref = oracles.subtracted_inverse_abs_1d(phi, *weight, c0)
        assert abs(got.value - ref) < 1e-7 * max(got.scale, 1.0)


def test_weight_change_shifts_delta_coefficient():
    t = DistributionKernel.from_dsl("pow(abs(x1), -1)", 1, sd=1)
    w1, w2 = (0.5, 1.0), (0.25, 1.0)
    e1 = extend_with_w(t, build_w_operator(1, 0, Cutoff(*w1)))
    e2 = extend_with_w(t, build_w_operator(1, 0, Cutoff(*w2)))
    shift = oracles.weight_shift_1d(w1, w2)
    phi = make_bump(1, [0.1], 1.0)
    diff = e1.pair(phi).value - e2.pair(phi).value
    assert diff == pytest.approx(shift * phi.derivative_at((0,)), rel=1e-8)


@pytest.mark.parametrize("d,text,sd", [(1, "pow(abs(x1), -2)", 2), (2, "pow(x1^2 + x2^2, -1.25)", 2.5)])
def test_constants_are_reproduced(d, text, sd):
    t = DistributionKernel.from_dsl(text, d, sd=sd)
    W = build_w_operator(d, sd - d)
    consts = {a: 0.5 + k for k, a in enumerate(W.multi_indices)}
    ext = extend_with_w(t, W, consts)
    for a in W.multi_indices:
        got = ext.pair(WeightProbe(W, a))
        assert got.value == pytest.approx(consts[a], abs=1e-7 * max(got.scale, 1.0))


@given(st.floats(-0.4, 0.4), st.floats(-0.4, 0.4), st.floats(0.8, 1.4), st.integers(0, 2))
@settings(max_examples=20)
def test_w_idempotent(cx, cy, r, order):
    W = build_w_operator(2, order)
    phi = make_bump(2, [cx, cy], r, [((1, 0), 1.0), ((0, 2), 0.5), ((0, 0), 0.2)])
    once = W.apply(phi)
    twice = W.apply(once)
    X = np.random.default_rng(0).uniform(-1.5, 1.5, (2, 200))
    X[:, :40] *= 0.02
    assert np.array_equal(once(X), twice(X))
    for a in multi_indices(2, order + 2):
        assert twice.derivative_at(a) == once.derivative_at(a)
    for a in W.multi_indices:
        assert once.derivative_at(a) == 0.0


def test_surface_extension_against_rotated_oracle():
    fib = SurfaceFibration(1, 2)
    t = DistributionKernel.from_dsl("pow(abs(x1 - x2), -0.5)", 2, locus=fib, sd=0.5)
    ext = extend_at_surface(t, fib)
    assert ext.mode == "Unique"
    phi = make_bump(2, [0.1, -0.1], 1.0)
    assert rel_err(ext.pair(phi).value, oracles.surface_pair_power(0.5, phi)) < 1e-5


def test_surface_subtraction_is_ambiguous():
    fib = SurfaceFibration(1, 2)
    t = DistributionKernel.from_dsl("pow(abs(x1 - x2), -1)", 2, locus=fib, sd=1)
    ext = extend_at_surface(t, fib)
    assert ext.mode == "Ambiguous" and ext.ambiguity_dimension == 1


def test_delta_terms_are_dropped_with_a_note():
    t = DistributionKernel.from_dsl("pow(abs(x1), -0.5)", 1, delta=[{"alpha": [0], "coeff": 3.0}], sd=1)
    ext = extend_unique(t, sd=0.5)
    assert any("dropped" in n for n in ext.diagnostics["notes"])
    phi = make_bump(1, [0.0], 1.0)
    assert rel_err(ext.pair(phi).value, oracles.pair_power_1d(0.5, phi)) < 1e-8
