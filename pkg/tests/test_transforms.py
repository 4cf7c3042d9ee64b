import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from musb import heat as H
from musb import spaces as S
from musb import transforms as T
from musb.polygauss import PolyGauss

from conftest import MU_GRID, T_GRID

mus = st.floats(-0.49, 4.0)
ts = st.floats(0.1, 5.0)
parts = st.floats(-2.5, 2.5)


def gaussian_image_A(mu, t, c, z):
    """A image of exp(-c q^2) via int |q|^{2mu} e^{-a q^2} exp_mu(b q) dq = Gamma(mu+1/2) a^{-mu-1/2} e^{b^2/4a}."""
    a = 0.25 / t + c
    b = z / t
    pref = (2 * t) ** -(mu / 2 + 0.25) * math.gamma(mu + 0.5) ** -0.5
    return pref * np.exp(-z * z / (2 * t)) * math.gamma(mu + 0.5) * a ** -(mu + 0.5) * np.exp(b * b / (4 * a))


def test_kernel_at_origin_example():
    assert T.kernel("A", 0.5, 1.0, 0.0, 1.0) == pytest.approx(2 ** -0.5 * math.exp(-0.25), rel=1e-15)


@given(mus, ts, parts)
def test_kernel_at_z_zero(mu, t, q):
    expected = (2 * t) ** -(mu / 2 + 0.25) * math.gamma(mu + 0.5) ** -0.5 * math.exp(-q * q / (4 * t))
    assert T.kernel("A", mu, t, 0.0, q).real == pytest.approx(expected, rel=1e-13)


def test_classical_kernel():
    z = (np.linspace(-2, 2, 10)[:, None] + 1j * np.linspace(-2, 2, 10)[None, :]).ravel()[:, None]
    q = np.linspace(-3, 3, 7)[None, :]
    classical = (2 * math.pi) ** -0.25 * np.exp(-z * z / 2 - q * q / 4 + q * z)
    np.testing.assert_allclose(T.kernel("A", 0.0, 1.0, z, q), classical, rtol=1e-12)


@pytest.mark.parametrize("t", [0.5, 2.0])
def test_version_c_classical(t):
    z = np.linspace(-2, 2, 9)[:, None]
    q = np.linspace(-2, 2, 5)[None, :]
    expected = (2 * math.pi * t) ** -0.5 * np.exp(-(z - q) ** 2 / (2 * t))
    np.testing.assert_allclose(T.kernel("C", 0.0, t, z, q).real, expected, rtol=1e-13)


@pytest.mark.parametrize("mu", MU_GRID)
@pytest.mark.parametrize("t", T_GRID)
def test_kernel_coherence(mu, t):
    z = (np.linspace(-2, 2, 5)[:, None] + 1j * np.linspace(-2, 2, 5)[None, :]).ravel()[:, None]
    q = np.linspace(-2, 2, 10)[None, :]
    a, b = T.kernel("A", mu, t, z, q), T.kernel("B", mu, t, z, q)
    c, d = T.kernel("C", mu, t, z, q), T.kernel("D", mu, t, z, q)
    root = np.sqrt(H.sigma(H.HeatKernelParams(mu, t), q))
    np.testing.assert_allclose(b * root, a, rtol=1e-13)
    np.testing.assert_allclose(a * root, c, rtol=1e-13)
    np.testing.assert_array_equal(d, a)
    assert T.kernel_route_gap(mu, t, z, q) <= 1e-12


def test_kernel_eval_record():
    rec = T.kernel_eval("b", 0.3, 2.0, 1 + 1j, -0.5)
    assert rec.version == "B"
    assert rec.value == T.kernel("B", 0.3, 2.0, 1 + 1j, -0.5)
    with pytest.raises(ValueError):
        T.kernel("E", 0.3, 2.0, 0.0, 0.0)


def test_ac_identity_examples():
    assert T.ac_identity_residual(0.0, 1.0, 0.3 + 0.4j, 0.7) <= 1e-12
    assert T.ac_identity_residual(1.5, 0.5, -1 + 2j, -0.3) <= 1e-12
    for mu, t, q in [(0.0, 1.0, 0.4), (-0.3, 2.5, -1.0), (2.0, 0.3, 1.5)]:
        assert T.ac_identity_residual(mu, t, 0.0, q) <= 1e-14


def test_ac_identity_grid():
    grid_mu = np.linspace(-0.45, 3.0, 5)
    grid_t = np.geomspace(0.25, 4.0, 5)
    z = (np.linspace(-2, 2, 5) + 1j * np.linspace(-1.5, 2.5, 5))[:, None]
    q = np.linspace(-2, 2, 5)[None, :]
    worst = max(T.ac_identity_residual(mu, t, z, q) for mu, t in itertools.product(grid_mu, grid_t))
    assert worst <= 1e-12


@pytest.mark.parametrize("mu,t,c", [(0.0, 1.0, 0.5), (0.7, 0.8, 0.3), (-0.3, 2.0, 1.0), (2.5, 0.5, 0.25)])
def test_gaussian_image_closed_form(mu, t, c):
    z = np.array([0.0, 0.6 + 0.4j, -1.2 + 0.1j, 1.5j])
    got = T.apply("A", PolyGauss([1.0], c), mu, t, z)
    np.testing.assert_allclose(got, gaussian_image_A(mu, t, c, z), rtol=1e-11)


def test_classical_ground_state_image():
    z = np.array([0.0, 1.0, 0.5 - 0.5j])
    expected = (2 * math.pi) ** -0.25 * math.sqrt(4 * math.pi / 3) * np.exp(-z * z / 6)
    np.testing.assert_allclose(T.apply("A", T.hermite_probes(1.0)[0], 0.0, 1.0, z), expected, rtol=1e-12)


@pytest.mark.parametrize("mu,t,s", [(0.0, 1.0, 0.5), (0.8, 0.6, 1.1), (-0.35, 1.5, 0.4)])
def test_c_of_sigma_is_semigroup(mu, t, s):
    psi = H.sigma_polygauss(H.HeatKernelParams(mu, s))
    z = np.array([0.2, -0.9 + 0.3j, 1.1j])
    expected = H.rho(H.HeatKernelParams(mu, t + s), z, 0.0)
    np.testing.assert_allclose(T.apply("C", psi, mu, t, z), expected, rtol=1e-11)


@pytest.mark.parametrize("mu", [-0.25, 0.0, 1.5])
def test_b_is_a_after_inverse_change(mu):
    t = 0.9
    z = np.array([0.3, -0.4 + 1.0j])
    for psi in T.hermite_probes(t, 4):
        b = T.apply("B", psi, mu, t, z)
        a = T.apply("A", S.change_of_measure(psi, mu, t, "from_ground_state"), mu, t, z)
        np.testing.assert_allclose(b, a, rtol=1e-10)
        d = T.apply("D", psi, mu, t, z)
        c = T.apply("C", S.change_of_measure(psi, mu, t, "from_ground_state"), mu, t, z)
        np.testing.assert_allclose(d, c, rtol=1e-10)


@pytest.mark.parametrize("mu", [-0.25, 0.5])
def test_c_matches_convolution(mu):
    t = 1.2
    for psi in T.hermite_probes(t, 3):
        for z in (0.4, -0.7 + 0.6j):
            assert T.apply_C_by_convolution(psi, mu, t, z) == pytest.approx(T.apply("C", psi, mu, t, z),
                                                                            rel=1e-10, abs=1e-13)


def test_factorization_examples():
    assert T.factorization_residual(0.7, 1.0, PolyGauss([1.0, 1.0], 0.5), np.array([0.3, 1j])) <= 1e-14
    assert T.factorization_residual(0.0, 2.0, PolyGauss([1.0], 1.0), 0.5j) <= 1e-9
    assert T.factorization_residual(1.0, 0.5, PolyGauss([0.0, 1.0], 1.0), 1.0) <= 1e-9


@pytest.mark.parametrize("mu", [-0.4, 0.5, 3.0])
def test_parity_covariance(mu):
    z = np.array([0.3 + 0.2j, -1.0, 1.5j])
    for psi in T.hermite_probes(1.0, 4):
        for v in T.VERSIONS:
            assert T.parity_residual(v, psi, mu, 1.0, z) <= 1e-10


@pytest.mark.parametrize("mu", [-0.1, 1.0])
def test_holomorphy(mu):
    for psi in T.hermite_probes(0.8, 3):
        assert T.holomorphy_residual("A", psi, mu, 0.8, 0.3 + 0.2j) <= 1e-8
    # a non-holomorphic function fails the same probe
    w = np.exp(2j * math.pi * np.arange(8) / 8)
    vals = np.conj(0.3 + 0.05 * w)
    assert abs(np.sum(vals * w)) / np.sum(np.abs(vals)) > 1e-3


def test_unitarity_examples():
    probes = T.hermite_probes(1.0, 4)
    assert T.unitarity_report("A", 0.0, 1.0, probes).defect <= 1e-6
    assert T.unitarity_report("C", 0.5, 1.0, probes).defect <= 1e-6


@pytest.mark.slow
@pytest.mark.parametrize("mu", [-0.25, 1.5])
def test_unitarity_all_versions(mu):
    out = T.unitarity_reports(mu, 0.7)
    for v, rep in out.items():
        assert rep.defect <= 1e-6, v
        assert rep.refinement_gap <= 1e-6, v
        assert len(rep.per_probe) == 6


def test_gram_domain_is_hermitian():
    g = T.gram_matrices(0.3, 1.0, versions=["A"])["A"]
    np.testing.assert_allclose(g.domain, g.domain.conj().T, rtol=0, atol=1e-15)
    np.testing.assert_allclose(g.range, g.range.conj().T, rtol=1e-12, atol=1e-15)
