import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from musb import heat as H
from musb.errors import TruncationError
from musb.polygauss import PolyGauss, dunkl, mu_translate

from conftest import MU_GRID

# rho at mu=1, t=0.5, z=0.4+0.3i, q=1.1 through mpmath's 1F1 (40 digits)
RHO_COMPLEX_ORACLE = 0.43717649452160023488 + 0.041998068456947485416j

mus = st.floats(-0.49, 4.0)
ts = st.floats(0.05, 5.0)
reals = st.floats(-3.0, 3.0)


def test_rho_classical_origin():
    assert H.rho(H.HeatKernelParams(0.0, 1.0), 0.0, 0.0).real == pytest.approx((2 * math.pi) ** -0.5, rel=1e-15)


@given(mus, ts)
def test_rho_origin_normalisation(mu, t):
    p = H.HeatKernelParams(mu, t)
    expected = math.exp(-(mu + 0.5) * math.log(2 * t) - math.lgamma(mu + 0.5))
    assert H.rho(p, 0.0, 0.0).real == pytest.approx(expected, rel=1e-14)


def test_rho_complex_argument():
    assert H.rho(H.HeatKernelParams(1.0, 0.5), 0.4 + 0.3j, 1.1) == pytest.approx(RHO_COMPLEX_ORACLE, rel=1e-13)


def test_sigma_examples():
    assert H.sigma(H.HeatKernelParams(0.0, 1.0), 0.0) == pytest.approx((2 * math.pi) ** -0.5, rel=1e-15)
    assert H.sigma(H.HeatKernelParams(0.5, 1.0), 0.0) == pytest.approx(0.5, rel=1e-15)
    expected = 4.0 ** -1.5 / math.gamma(1.5) * math.exp(-0.25)
    assert H.sigma(H.HeatKernelParams(1.0, 2.0), 1.0) == pytest.approx(expected, rel=1e-14)


@given(mus, ts, reals)
def test_sigma_is_rho_at_origin(mu, t, q):
    p = H.HeatKernelParams(mu, t)
    s = H.sigma(p, q)
    assert s > 0 or q * q / (2 * t) > 700
    assert H.rho(p, 0.0, q).real == pytest.approx(s, rel=1e-14, abs=1e-300)


@given(mus, ts, reals, reals)
def test_symmetry_and_parity(mu, t, x, q):
    p = H.HeatKernelParams(mu, t)
    r = H.rho(p, x, q)
    assert abs(r.imag) == 0.0
    assert r.real >= 0.0
    assert H.rho(p, q, x) == pytest.approx(r, rel=1e-14, abs=1e-300)
    assert H.rho(p, -x, -q) == pytest.approx(r, rel=1e-14, abs=1e-300)


@pytest.mark.parametrize("t", [0.25, 1.0, 4.0])
def test_classical_reduction(t):
    x = np.linspace(-3, 3, 13)[:, None]
    q = np.linspace(-2.5, 2.5, 11)[None, :]
    classical = (2 * math.pi * t) ** -0.5 * np.exp(-(x - q) ** 2 / (2 * t))
    np.testing.assert_allclose(H.rho(H.HeatKernelParams(0.0, t), x, q).real, classical, rtol=1e-13)


@pytest.mark.parametrize("mu", MU_GRID)
@pytest.mark.parametrize("x", [-2.0, 0.0, 0.7, 3.0])
def test_kernel_mass(mu, x):
    p = H.HeatKernelParams(mu, 0.8)
    assert H.heat_kernel_mass(p, x).real == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("mu", [-0.3, 0.0, 2.0])
def test_constant_initial_data_is_stationary(mu):
    p = H.HeatKernelParams(mu, 1.3)
    for x in (-1.0, 0.4, 2.5):
        assert H.heat_solve(PolyGauss([1.0], 0.0), p, x).real == pytest.approx(1.0, abs=1e-10)


def test_classical_gaussian_evolution():
    p = H.HeatKernelParams(0.0, 1.0)
    for x in (0.0, 0.5, -1.7):
        val = H.heat_solve(PolyGauss([1.0], 0.5), p, x)
        assert val == pytest.approx(math.exp(-x * x / 4) / math.sqrt(2), abs=1e-13)


@pytest.mark.parametrize("t", [0.5, 2.0])
def test_convolution_classical(t):
    p = H.HeatKernelParams(0.0, t)
    for x in (0.0, 1.2, -0.4):
        val = H.mu_convolve(p, PolyGauss([1.0], 1.0), 0.0, x)
        assert val == pytest.approx(math.exp(-x * x / (1 + 2 * t)) / math.sqrt(1 + 2 * t), abs=1e-13)


@pytest.mark.parametrize("mu", [-0.4, 0.5, 3.0])
def test_convolution_of_constant(mu):
    p = H.HeatKernelParams(mu, 0.6)
    assert H.mu_convolve(p, PolyGauss([1.0], 0.0), mu, 0.9) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("mu", MU_GRID)
def test_routes_agree(mu):
    p = H.HeatKernelParams(mu, 1.0)
    probe = PolyGauss([0.3, -1.0, 0.5, 0.2j], 0.4)
    for x in (-1.5, 0.0, 0.8, 0.5 + 0.5j):
        a = H.heat_solve(probe, p, x)
        assert abs(a - H.mu_convolve(p, probe, mu, x)) <= 1e-10
        assert abs(a - H.heat_solve_moments(probe, p, x)) <= 1e-10


def test_series_convolution_on_polynomial():
    # g = 1 + q/2 translates to 1 + x/2 - q/2; the odd part integrates to 0
    mu, x = 0.5, 0.7
    val = H.mu_convolve(PolyGauss([1.0, 0.5], 0.0), PolyGauss([1.0], 1.0), mu, x)
    assert val == pytest.approx((1 + x / 2) * math.gamma(mu + 0.5), rel=1e-13)


def test_series_convolution_rejects_divergent_tail():
    p = H.HeatKernelParams(0.0, 1.0)
    with pytest.raises(TruncationError):
        H.mu_convolve(H.sigma_polygauss(p), PolyGauss([1.0], 0.5), 0.0, 0.3, terms=40)


def test_series_convolution_input_checks():
    with pytest.raises(ValueError):
        H.mu_convolve(PolyGauss([1.0], 0.5), PolyGauss([1.0], 0.0), 0.0, 0.3)
    with pytest.raises(TypeError):
        H.mu_convolve(lambda q: q, PolyGauss([1.0], 0.5), 0.0, 0.3)
    with pytest.raises(ValueError):
        H.mu_convolve(H.HeatKernelParams(0.5, 1.0), PolyGauss([1.0], 0.5), 0.0, 0.3)


@pytest.mark.parametrize("mu", [-0.1, 0.0, 1.0])
def test_translation_series(mu):
    p = H.HeatKernelParams(mu, 1.0)
    grid = np.linspace(-1.5, 1.5, 7)
    for x in grid:
        f = mu_translate(H.sigma_polygauss(p), x, mu, 60)
        np.testing.assert_allclose(f(grid), H.rho(p, x, grid), rtol=1e-8)


def test_semigroup_examples():
    assert H.semigroup_defect(0.0, 0.5, 0.5, 0.0, 0.0) <= 1e-10
    assert H.semigroup_defect(1.0, 0.3, 0.7, 0.5, -0.2) <= 1e-8


@given(mus, st.floats(0.1, 3.0), st.floats(0.1, 3.0), st.floats(-2, 2), st.floats(-2, 2))
def test_semigroup_property(mu, s, t, x, y):
    ref = H.rho(H.HeatKernelParams(mu, s + t), x, y).real
    assert H.semigroup_defect(mu, s, t, x, y) <= 1e-10 * max(1.0, ref)


def test_continuity_in_t():
    gaps = [abs(H.rho((0.7, 1.0 + e), 0.3, -0.8) - H.rho((0.7, 1.0), 0.3, -0.8)) for e in (1e-2, 1e-4, 1e-6)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-6


def test_pde_examples():
    assert H.pde_residual(H.HeatKernelParams(0.0, 1.0), 0.5, 0.2, 1e-3) <= 1e-6
    assert H.pde_residual(H.HeatKernelParams(1.5, 0.7), 1.1, -0.4, 1e-3) <= 1e-5


@pytest.mark.parametrize("mu", [-0.4, 0.0, 1.5])
def test_pde_second_order(mu):
    p = H.HeatKernelParams(mu, 1.0)
    xs = np.linspace(-1.2, 1.3, 5)
    qs = np.linspace(0.9, -1.1, 5)
    assert H.richardson_ratio(p, xs, qs, 1e-2) == pytest.approx(4.0, abs=0.1)


def test_dunkl_of_kernel_matches_polygauss():
    # rho(., 0.4) is the translate of sigma by 0.4; differentiate its series instead
    mu, t, x = 0.8, 1.0, 0.6
    p = H.HeatKernelParams(mu, t)
    series = dunkl(mu_translate(H.sigma_polygauss(p), 0.4, mu, 80), mu)
    assert H.rho_dunkl(p, x, 0.4) == pytest.approx(complex(series(x)), rel=1e-10)


def test_pde_step_validated():
    with pytest.raises(ValueError):
        H.pde_residual(H.HeatKernelParams(0.0, 0.5), 0.1, 0.1, 0.6)


def test_moment_route_zero_probe():
    assert H.heat_solve_moments(PolyGauss.zero(0.5), H.HeatKernelParams(0.0, 1.0), 0.3) == 0
