"""Measures and Hilbert-space structure on the line and on the plane.

Planar side: the even/odd Macdonald densities, the Gaussian density, the
``B^2_{mu,t}`` inner product (with ``lam = 1/t``), the twist ``G`` and the
``C^2_{mu,t}`` inner product.  Line side: the probability density of
``d rho_{mu,t}`` and the change of measure ``U``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import QuadratureError
from .heat import HeatKernelParams, sigma
from .polygauss import PolyGauss
from .quadrature import (
    DEFAULT_RTOL, PLANE_CUTOFF, START_LEVEL, QuadResult, integrate_line_weighted, max_level, plane_rule,
)
from .special import check_mu, check_t, log_bessel_k_of_log

# ---------------------------------------------------------------------------
# planar densities
# ---------------------------------------------------------------------------


def _log_density(mu: float, lam: float, log_r: np.ndarray, order: float) -> np.ndarray:
    log_x = math.log(lam) + 2.0 * np.asarray(log_r, dtype=float)
    return (
        math.log(lam) + (0.5 - mu) * math.log(2.0) - math.log(math.pi) - math.lgamma(mu + 0.5)
        + log_bessel_k_of_log(order, log_x) + (2.0 * mu + 1.0) * (0.5 * math.log(lam) + log_r)
    )


def _radius(z) -> np.ndarray:
    r = np.abs(np.asarray(z, dtype=np.complex128))
    if np.any(r == 0.0):
        raise ValueError("planar densities are defined for z != 0 only")
    return r


def _density(mu, lam, z, order_shift):
    mu = check_mu(mu)
    lam = check_t(lam, "lambda")
    r = _radius(z)
    v = np.exp(_log_density(mu, lam, np.log(r), mu + order_shift))
    return float(v) if v.ndim == 0 else v


def density_even(mu: float, lam: float, z):
    """Even-sector density: ``K_{mu-1/2}(lam|z|^2)`` weighted by ``(sqrt(lam)|z|)^{2mu+1}``."""
    return _density(mu, lam, z, -0.5)


def density_odd(mu: float, lam: float, z):
    """Odd-sector density: as :func:`density_even` with ``K_{mu+1/2}``."""
    return _density(mu, lam, z, 0.5)


def gauss_density(hbar: float, z):
    """``exp(-|z|^2/hbar) / (pi hbar)``."""
    hbar = check_t(hbar, "hbar")
    v = np.exp(-np.abs(np.asarray(z, dtype=np.complex128)) ** 2 / hbar) / (math.pi * hbar)
    return float(v) if v.ndim == 0 else v


def density_power(mu: float) -> float:
    """Exponent ``p`` with ``r * density ~ r^{p-1}`` near 0, used to place radial nodes."""
    return min(4.0 * mu + 2.0, 2.0)


# ---------------------------------------------------------------------------
# holomorphic samples and the B^2 / C^2 inner products
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HoloSample:
    """A holomorphic function given by a vectorised callable.

    ``rate`` (optional) declares ``|f(z)| <= C (1 + |z|)^degree exp(rate |z|^2)``;
    it is used to choose the planar cutoff.  ``parity`` may be ``'even'`` or
    ``'odd'`` when known.
    """

    func: Callable
    rate: Optional[float] = None
    degree: int = 0
    parity: Optional[str] = None

    def __call__(self, z):
        return np.asarray(self.func(np.asarray(z, dtype=np.complex128)), dtype=np.complex128)


def as_sample(f) -> HoloSample:
    return f if isinstance(f, HoloSample) else HoloSample(f)


def _plane_cutoff(lam: float, scale: float, samples) -> float:
    rates = [s.rate for s in samples]
    if any(r is None for r in rates):
        return PLANE_CUTOFF * scale
    decay = lam - sum(rates)
    if decay <= 0.0:
        raise ValueError("sample growth is too fast for this space")
    deg = sum(s.degree for s in samples)
    big = 1.0
    while decay * big * big - deg * math.log(big) < 60.0:
        big *= 1.1
    return max(big, 4.0 * scale)


def inner_B2(f, g, mu: float, t: float, *, level: Optional[int] = None, rtol: float = 1e-10,
             full_output: bool = False):
    """``<f_e, g_e>`` in the even density plus ``<f_o, g_o>`` in the odd density at ``lam = 1/t``.

    Conjugate-linear in ``f``.  The plane rule is refined until two successive
    levels agree to ``rtol`` relative to the integral of the absolute integrand.
    """
    mu = check_mu(mu)
    t = check_t(t)
    f, g = as_sample(f), as_sample(g)
    lam = 1.0 / t
    scale = math.sqrt(t)
    cutoff = _plane_cutoff(lam, scale, [f, g])
    top = max_level() if level is None else int(level)
    est = prev = None
    lvl = START_LEVEL
    while True:
        rule = plane_rule(lvl, scale=scale, cutoff=cutoff, power=density_power(mu))
        val, l1 = _b2_on_rule(rule, mu, lam, f(rule.z), g(rule.z))
        prev, est = est, val
        if prev is not None and abs(est - prev) <= rtol * max(l1, np.finfo(float).tiny):
            break
        if lvl >= top:
            raise QuadratureError(f"B2 inner product not converged at level {lvl}",
                                  (prev if prev is not None else est, est))
        lvl += 1
    res = QuadResult(est, abs(est - prev), lvl, l1)
    return res if full_output else res.value


def sector_weights(rule, mu: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-node weights including the even and odd densities."""
    we = np.exp(rule.log_node_weight(_log_density(mu, lam, rule.log_radii, mu - 0.5)))
    wo = np.exp(rule.log_node_weight(_log_density(mu, lam, rule.log_radii, mu + 0.5)))
    return we, wo


def _b2_on_rule(rule, mu, lam, fv, gv):
    we, wo = sector_weights(rule, mu, lam)
    fe = 0.5 * (fv + fv[rule.antipode])
    fo = 0.5 * (fv - fv[rule.antipode])
    ge = 0.5 * (gv + gv[rule.antipode])
    go = 0.5 * (gv - gv[rule.antipode])
    te = np.conj(fe) * ge
    to = np.conj(fo) * go
    val = complex(np.sum(we * te) + np.sum(wo * to))
    l1 = float(np.sum(we * np.abs(te)) + np.sum(wo * np.abs(to)))
    return val, l1


def norm_B2(f, mu: float, t: float, **kw) -> float:
    return math.sqrt(max(inner_B2(f, f, mu, t, **kw).real, 0.0))


def monomial_norm_sq(n: int, mu: float, t: float) -> float:
    """``||z^n||^2`` in ``B^2_{mu,t}`` from the radial Mellin integral of ``K``.

    Even ``n``: ``t^n 2^n Gamma(n/2 + 1) Gamma(n/2 + mu + 1/2) / Gamma(mu + 1/2)``;
    odd ``n``: ``t^n 2^n Gamma((n+1)/2) Gamma((n+2)/2 + mu) / Gamma(mu + 1/2)``.
    Both equal ``t^n gamma_mu(n)``.
    """
    mu = check_mu(mu)
    t = check_t(t)
    if n % 2 == 0:
        lg = math.lgamma(n / 2 + 1) + math.lgamma(n / 2 + mu + 0.5)
    else:
        lg = math.lgamma((n + 1) / 2) + math.lgamma((n + 2) / 2 + mu)
    return math.exp(n * math.log(2.0 * t) + lg - math.lgamma(mu + 0.5))


def dilate(f, lam: float) -> HoloSample:
    """``(T_lam f)(z) = f(sqrt(lam) z)``."""
    lam = check_t(lam, "lambda")
    f = as_sample(f)
    s = math.sqrt(lam)
    return HoloSample(lambda z: f(s * np.asarray(z)), None if f.rate is None else f.rate * lam,
                      f.degree, f.parity)


def M(z, mu: float, t: float):
    """``exp(-z^2/4t) / (2^{mu+1/2} t^{mu/2+1/4} Gamma(mu+1/2)^{1/2})``."""
    mu = check_mu(mu)
    t = check_t(t)
    logc = -(mu + 0.5) * math.log(2.0) - (0.5 * mu + 0.25) * math.log(t) - 0.5 * math.lgamma(mu + 0.5)
    z = np.asarray(z, dtype=np.complex128)
    v = np.exp(logc - z * z / (4.0 * t))
    return complex(v) if v.ndim == 0 else v


def G(f, mu: float, t: float) -> HoloSample:
    """``(Gf)(z) = f(2z) / M(2z)``."""
    f = as_sample(f)
    return HoloSample(lambda z: f(2.0 * np.asarray(z)) / M(2.0 * np.asarray(z), mu, t))


def inner_C2(f1, f2, mu: float, t: float, **kw):
    """``<G f1, G f2>`` in ``B^2_{mu, t/2}``."""
    t = check_t(t)
    return inner_B2(G(f1, mu, t), G(f2, mu, t), mu, 0.5 * t, **kw)


# ---------------------------------------------------------------------------
# the line measures
# ---------------------------------------------------------------------------


def measure_rho_density(mu: float, t: float, q):
    """Density of ``d rho_{mu,t}``: ``sigma(q) |q|^{2mu}``."""
    p = HeatKernelParams(mu, t)
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore"):
        v = sigma(p, q) * np.abs(q) ** (2.0 * p.mu)
    return float(v) if v.ndim == 0 else v


def rho_measure_integral(g, mu: float, t: float, **kw):
    """``int g d rho_{mu,t}``."""
    p = HeatKernelParams(mu, t)
    return integrate_line_weighted(lambda q: sigma(p, q) * np.asarray(g(q)), p.mu,
                                   scale=math.sqrt(p.t), **kw)


def rho_measure_mass(mu: float, t: float, **kw):
    return rho_measure_integral(lambda q: np.ones(np.shape(q)), mu, t, **kw)


def change_of_measure(psi: PolyGauss, mu: float, t: float, direction: str) -> PolyGauss:
    """``U psi = psi / sqrt(sigma)`` (``to_ground_state``) or its inverse (``from_ground_state``).

    ``sqrt(sigma) = sqrt(rho(0,0)) exp(-q^2/4t)``, so within the class this
    only rescales the coefficients and shifts the rate by ``1/4t``.
    """
    p = HeatKernelParams(mu, t)
    root = math.sqrt(p.norm)
    shift = 1.0 / (4.0 * p.t)
    if direction == "to_ground_state":
        rate = psi.rate - shift
        if rate < -1e-15 * shift:
            raise ValueError("psi decays too slowly for U to stay in the PolyGauss class")
        return PolyGauss(psi.coeffs / root, max(rate, 0.0))
    if direction == "from_ground_state":
        return PolyGauss(psi.coeffs * root, psi.rate + shift)
    raise ValueError(f"direction must be 'to_ground_state' or 'from_ground_state', got {direction!r}")


def ground_state(mu: float, t: float) -> PolyGauss:
    """``sqrt(sigma_{mu,t})``."""
    p = HeatKernelParams(mu, t)
    return PolyGauss([math.sqrt(p.norm)], 1.0 / (4.0 * p.t))


def inner_L2_mu(f: PolyGauss, g: PolyGauss, mu: float, **kw) -> complex:
    """``int |q|^{2mu} conj(f) g dq`` by quadrature."""
    prod = f.conj() * g
    scale = 1.0 / math.sqrt(2.0 * prod.rate) if prod.rate > 0 else 1.0
    return integrate_line_weighted(prod, mu, scale=scale, **kw)


def inner_L2_rho(f: PolyGauss, g: PolyGauss, mu: float, t: float, **kw) -> complex:
    """``int conj(f) g d rho_{mu,t}`` by quadrature."""
    prod = f.conj() * g
    p = HeatKernelParams(mu, t)
    scale = 1.0 / math.sqrt(2.0 * prod.rate + 1.0 / p.t)
    return integrate_line_weighted(lambda q: sigma(p, q) * prod(q), p.mu, scale=scale, **kw)
