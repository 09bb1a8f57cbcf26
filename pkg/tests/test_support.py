import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from egren.distributions import DistributionKernel, fourier_decay_probe
from egren.fibration import SurfaceFibration
from egren.quadrature import QuadConfig
from egren.testfunctions import Cutoff, make_bump, multi_indices, random_probe

coords = st.floats(-0.5, 0.5)


@given(st.lists(coords, min_size=2, max_size=2), st.sampled_from([(1, 0), (0, 1), (2, 1), (1, 2)]))
@settings(max_examples=25)
def test_derivative_matches_finite_differences(c, alpha):
    phi = make_bump(2, [0.1, -0.1], 1.0, [((1, 0), 1.0), ((0, 0), 0.5)])
    x = np.array(c, dtype=float)
    h = 1e-3
    # central differences, one coordinate at a time
    def fd(f, axis, k):
        if k == 0:
            return f
        e = np.zeros(2)
        e[axis] = h
        g = fd(f, axis, k - 1)
        return lambda y: (g(y + e) - g(y - e)) / (2 * h)

    f = lambda y: float(phi(y.reshape(2, 1))[0])
    approx = fd(fd(f, 0, alpha[0]), 1, alpha[1])(x)
    exact = float(phi.derivative(alpha, x.reshape(2, 1))[0])
    assert exact == pytest.approx(approx, rel=1e-4, abs=1e-5)


def test_taylor_series_reproduces_values():
    phi = make_bump(2, [0.2, 0.1], 1.0, [((0, 1), 2.0), ((0, 0), 1.0)])
    s = phi.taylor(order=14)
    H = np.array([[0.05, -0.03, 0.02], [0.01, 0.04, -0.05]])
    assert np.allclose(s.evaluate(H), phi(H), rtol=1e-10, atol=1e-13)


def test_taylor_coefficients_are_derivatives():
    phi = make_bump(2, [0.3, -0.2], 1.1, [((1, 1), 1.0)])
    s = phi.taylor(order=4)
    for a in multi_indices(2, 4):
        fact = math.factorial(a[0]) * math.factorial(a[1])
        assert fact * s.coefficient(a) == pytest.approx(phi.derivative_at(a), rel=1e-9, abs=1e-12)


@given(st.floats(0.05, 0.9), st.floats(0.0, 3.0))
def test_cutoff_plateau(eps_frac, r):
    c = Cutoff(eps_frac, 1.0)
    v = float(c.radial(np.array([r]))[0])
    if r <= eps_frac:
        assert v == 1.0
    elif r >= 1.0:
        assert v == 0.0
    else:
        assert 0.0 <= v <= 1.0


def test_dilated_probe_keeps_mass():
    phi = make_bump(2, [0.2, 0.0], 0.7)
    lam = 0.25
    psi = phi.dilate(lam)
    X = np.array([[0.1], [0.02]])
    assert float(psi(X * lam)[0]) == pytest.approx(float(phi(X)[0]) / lam**2)


def test_random_probe_contains_origin():
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = random_probe(3, rng)
        assert np.linalg.norm(p.center) < p.radius


@given(st.integers(1, 3), st.integers(2, 4), st.floats(-1, 1))
def test_fibration_round_trip(d, n, shear_entry):
    codim = d * (n - 1)
    shear = tuple(tuple(shear_entry if i == j else 0.0 for j in range(codim)) for i in range(d))
    fib = SurfaceFibration(d, n, shear)
    rng = np.random.default_rng(0)
    X, H = rng.normal(size=(d, 5)), rng.normal(size=(codim, 5))
    X2, H2 = fib.from_full(fib.to_full(X, H))
    assert np.allclose(X, X2) and np.allclose(H, H2)
    diag = fib.to_full(X, np.zeros((codim, 5)))
    assert all(fib.distance_to_surface(diag[:, k]) < 1e-12 for k in range(5))


def test_for_dim_coarsens_only_high_dimensions():
    cfg = QuadConfig()
    assert cfg.for_dim(3) == cfg
    assert cfg.for_dim(4).sphere <= 4 and cfg.for_dim(4).max_level <= 1


def test_fourier_decay_power_and_rapid():
    chi = make_bump(1, None, 1.0)
    t = DistributionKernel.from_dsl("pow(abs(x1), -0.5)", 1)
    (r,) = fourier_decay_probe(t, chi, [(1.0,)], N=8)
    assert r.status == "power" and r.exponent == pytest.approx(0.5, abs=0.05)
    (r,) = fourier_decay_probe(DistributionKernel.from_dsl("cos(x1)", 1), chi, [(1.0,)], N=8)
    assert r.status == "rapid"


def test_fourier_decay_rejects_surface_kernels():
    fib = SurfaceFibration(1, 2)
    t = DistributionKernel.from_dsl("pow(abs(x1 - x2), -0.5)", 2, locus=fib)
    with pytest.raises(ValueError):
        fourier_decay_probe(t, make_bump(2), [(1.0, 0.0)])
