"""Deformed heat kernel, its semigroup and convolution, and the PDE check.

``rho(x, q) = (2t)^{-(mu+1/2)} / Gamma(mu+1/2) * exp(-(x^2+q^2)/2t) * exp_mu(xq/t)``
is evaluated in closed form; complex ``x`` gives the analytic continuation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import TruncationError
from .polygauss import PolyGauss, dunkl_powers
from .quadrature import LINE_CUTOFF, integrate_line_weighted
from .special import MuParam, check_mu, check_t, exp_mu, exp_mu_prime


@dataclass(frozen=True)
class HeatKernelParams(MuParam):
    """Parameters of the heat kernel; same validation as :class:`MuParam`."""

    @property
    def log_norm(self) -> float:
        return -(self.mu + 0.5) * math.log(2.0 * self.t) - math.lgamma(self.mu + 0.5)

    @property
    def norm(self) -> float:
        """``rho(0, 0)``."""
        return math.exp(self.log_norm)


def _params(p) -> HeatKernelParams:
    if isinstance(p, HeatKernelParams):
        return p
    if isinstance(p, MuParam):
        return HeatKernelParams(p.mu, p.t)
    mu, t = p
    return HeatKernelParams(mu, t)


def _out(v):
    v = np.asarray(v)
    return complex(v) if v.ndim == 0 else v


def rho(p: HeatKernelParams, z, q):
    """Heat kernel at complex ``z`` and real ``q`` (broadcasting)."""
    p = _params(p)
    z = np.asarray(z, dtype=np.complex128)
    q = np.asarray(q, dtype=float)
    z, q = np.broadcast_arrays(z, q)
    gauss = np.exp(p.log_norm - (z * z + q * q) / (2.0 * p.t))
    return _out(gauss * exp_mu(z * q / p.t, p.mu))


def sigma(p: HeatKernelParams, q):
    """``rho(0, q)``: a centred Gaussian of variance ``t`` times the normalisation."""
    p = _params(p)
    q = np.asarray(q, dtype=float)
    v = np.exp(p.log_norm - q * q / (2.0 * p.t))
    return float(v) if v.ndim == 0 else v


def sigma_polygauss(p: HeatKernelParams) -> PolyGauss:
    p = _params(p)
    return PolyGauss([p.norm], 1.0 / (2.0 * p.t))


def translate_sigma(p: HeatKernelParams, x, q):
    """Closed-form translate ``(T_x sigma)(q) = rho(x, q)`` for real shift ``x``.

    The evaluation point ``q`` may be complex; the kernel is symmetric, so it
    goes into the continued slot.
    """
    return rho(p, q, np.asarray(x, dtype=float))


def rho_dunkl(p: HeatKernelParams, x, q):
    """``D_mu`` of ``rho(., q)`` at ``x``: ``((q - x)/t) rho(x, q)``."""
    p = _params(p)
    return (np.asarray(q) - np.asarray(x)) / p.t * rho(p, x, q)


def rho_dunkl2(p: HeatKernelParams, x, q):
    """``D_mu^2`` of ``rho(., q)`` at ``x``, from the closed first derivative.

    ``D^2 rho = (q/t) D rho - (1/t) D(x rho)`` with
    ``D(x rho)(x) = rho(x) + x rho'(x) + mu (rho(x) + rho(-x))``.
    """
    p = _params(p)
    x = np.asarray(x, dtype=np.complex128)
    q = np.asarray(q, dtype=float)
    r = rho(p, x, q)
    rm = rho(p, -x, q)
    g = np.exp(p.log_norm - (x * x + q * q) / (2.0 * p.t))
    e = exp_mu(x * q / p.t, p.mu)
    de = exp_mu_prime(x * q / p.t, p.mu)
    r_prime = g * (-(x / p.t) * e + (q / p.t) * de)
    dxr = r + x * r_prime + p.mu * (r + rm)
    return _out(q / p.t * (q - x) / p.t * r - dxr / p.t)


def pde_residual(p: HeatKernelParams, x: float, q0: float, h: float) -> float:
    """``|d_t rho - D_mu^2 rho / 2|`` at ``(x, q0, t)``; ``d_t`` by central differences of step ``h``."""
    p = _params(p)
    h = check_t(h, "h")
    if h >= p.t:
        raise ValueError("step h must be smaller than t")
    up = HeatKernelParams(p.mu, p.t + h)
    dn = HeatKernelParams(p.mu, p.t - h)
    dt = (rho(up, x, q0) - rho(dn, x, q0)) / (2.0 * h)
    return abs(dt - 0.5 * rho_dunkl2(p, x, q0))


def richardson_ratio(p: HeatKernelParams, xs, qs, h: float) -> float:
    """Ratio of RMS residuals at ``h`` and ``h/2`` over the sample points; ~4 for a second-order scheme."""
    a = np.array([pde_residual(p, x, q, h) for x, q in zip(xs, qs)])
    b = np.array([pde_residual(p, x, q, 0.5 * h) for x, q in zip(xs, qs)])
    return float(math.sqrt(np.mean(a * a)) / math.sqrt(np.mean(b * b)))


# ---------------------------------------------------------------------------
# integrals against the kernel
# ---------------------------------------------------------------------------


def _window(p: HeatKernelParams, centre: float, rate: float):
    # integrand ~ exp(-(q - centre)^2/2t - rate q^2)
    width = 1.0 / math.sqrt(1.0 / p.t + 2.0 * rate)
    return width, abs(centre) + LINE_CUTOFF * width


def heat_solve(phi0, p: HeatKernelParams, x, *, level: int | None = None, full_output: bool = False):
    """``int |q|^{2mu} rho(x, q) phi0(q) dq``; ``x`` may be complex.

    ``phi0`` is a :class:`PolyGauss` (or any vectorised callable, treated as
    rate 0).
    """
    p = _params(p)
    x = complex(x)
    rate = phi0.rate if isinstance(phi0, PolyGauss) else 0.0
    scale, cutoff = _window(p, x.real, rate)
    return integrate_line_weighted(
        lambda q: rho(p, x, q) * np.asarray(phi0(q)),
        p.mu, level, scale=scale, cutoff=cutoff, full_output=full_output,
    )


def heat_kernel_mass(p: HeatKernelParams, x, *, level: int | None = None, full_output: bool = False):
    """``int |q|^{2mu} rho(x, q) dq``; equals 1."""
    p = _params(p)
    scale, cutoff = _window(p, float(x), 0.0)
    return integrate_line_weighted(lambda q: rho(p, x, q), p.mu, level, scale=scale, cutoff=cutoff,
                                   full_output=full_output)


def mu_convolve(psi1, psi2: PolyGauss, mu: float, x, *, terms: int = 60, tol: float = 1e-10,
                level: int | None = None):
    """``int |q|^{2mu} (T_q psi1)(x) psi2(q) dq``.

    ``psi1`` is either :class:`HeatKernelParams` (the kernel ``sigma``, whose
    translate is ``rho`` in closed form) or a :class:`PolyGauss`, translated by
    its truncated series.  In the series case the last retained term is
    integrated too, and :class:`TruncationError` is raised when it exceeds
    ``tol`` relative to the integral of ``|integrand|``.
    """
    mu = check_mu(mu)
    if isinstance(psi1, MuParam):
        p = _params(psi1)
        if p.mu != mu:
            raise ValueError(f"kernel has mu={p.mu}, convolution asked for mu={mu}")
        x = complex(x)
        scale, cutoff = _window(p, x.real, psi2.rate)
        # (T_q sigma)(x): the translation amount is the integration variable
        return integrate_line_weighted(
            lambda q: translate_sigma(p, q, x) * np.asarray(psi2(q)),
            mu, level, scale=scale, cutoff=cutoff,
        )
    if not isinstance(psi1, PolyGauss):
        raise TypeError("psi1 must be HeatKernelParams or PolyGauss")
    if psi2.rate <= 0.0:
        raise ValueError("the series route needs a decaying psi2")
    x = complex(x)
    derivs = np.array([complex(d(x)) for d in dunkl_powers(psi1, mu, terms)])
    coef = np.empty(terms, dtype=np.complex128)
    g = 1.0
    for n in range(terms):
        if n:
            g *= n + 2.0 * mu * (n % 2)
        coef[n] = derivs[n] / g

    def translate(q):
        # (T_q psi1)(x) = sum (-q)^n D^n psi1(x) / gamma_mu(n)
        return np.polynomial.polynomial.polyval(-np.asarray(q), coef)

    width = 1.0 / math.sqrt(2.0 * psi2.rate)
    # q^n exp(-q^2 / 2 width^2) peaks at sqrt(n) widths
    cutoff = (LINE_CUTOFF + math.sqrt(terms + max(psi2.degree, 0))) * width
    tail = integrate_line_weighted(
        lambda q: np.abs(coef[-1] * np.asarray(q, dtype=float) ** (terms - 1) * np.asarray(psi2(q))),
        mu, level, scale=width, cutoff=cutoff,
    )
    # the tail is checked first: a divergent series also stalls the main quadrature
    l1 = integrate_line_weighted(lambda q: np.abs(translate(q) * np.asarray(psi2(q))), mu, level,
                                 scale=width, cutoff=cutoff, rtol=1e-6)
    if not math.isfinite(abs(tail)) or abs(tail) > tol * max(abs(l1), np.finfo(float).tiny):
        raise TruncationError(
            f"translation series with {terms} terms leaves a tail of {abs(tail):.3e} "
            f"against an integral of size {abs(l1):.3e}"
        )
    res = integrate_line_weighted(lambda q: translate(q) * np.asarray(psi2(q)), mu, level,
                                  scale=width, cutoff=cutoff, full_output=True)
    return res.value


def heat_solve_moments(phi0: PolyGauss, p: HeatKernelParams, x, *, rtol: float = 1e-16,
                       max_terms: int = 2000) -> complex:
    """Heat solution from Gamma moments instead of quadrature.

    Expanding ``exp_mu(xq/t)`` and integrating term by term against
    ``|q|^{2mu} q^k exp(-a q^2)`` with ``a = 1/2t + rate`` gives
    ``sum_n (x/t)^n / gamma_mu(n) * sum_k c_k m_{n+k}``, where
    ``m_j = Gamma((j + 2mu + 1)/2) / a^{(j + 2mu + 1)/2}`` for even ``j`` and 0
    otherwise.  The series is entire in ``x``.
    """
    p = _params(p)
    x = complex(x)
    a = 1.0 / (2.0 * p.t) + phi0.rate
    c = phi0.coeffs
    if c.size == 0:
        return 0.0j
    mu = p.mu

    def log_moment(j):
        s = 0.5 * (j + 2.0 * mu + 1.0)
        return math.lgamma(s) - s * math.log(a)

    total = 0.0j
    small = 0
    log_ratio = 0.0  # log |x/t|^n / gamma_mu(n), tracked with the phase separately
    phase = 1.0 + 0.0j
    u = x / p.t
    for n in range(max_terms):
        if n:
            if u == 0:
                break
            log_ratio += math.log(abs(u)) - math.log(n + 2.0 * mu * (n % 2))
            phase *= u / abs(u)
        inner = 0.0j
        for k, ck in enumerate(c):
            if (n + k) % 2 == 0 and ck != 0:
                inner += ck * math.exp(log_ratio + log_moment(n + k))
        term = phase * inner
        total += term
        if n > c.size and abs(term) <= rtol * abs(total):
            small += 1
            if small >= 3:
                break
        else:
            small = 0
    else:
        raise TruncationError("moment series did not settle")
    return complex(p.norm * np.exp(-x * x / (2.0 * p.t)) * total)


def semigroup_defect(mu: float, s: float, t: float, x: float, y: float, *, level: int | None = None) -> float:
    """``|int |q|^{2mu} rho_s(x, q) rho_t(q, y) dq - rho_{s+t}(x, y)|``."""
    ps, pt, pst = HeatKernelParams(mu, s), HeatKernelParams(mu, t), HeatKernelParams(mu, s + t)
    width = 1.0 / math.sqrt(1.0 / s + 1.0 / t)
    centre = (x / s + y / t) * width * width
    val = integrate_line_weighted(lambda q: rho(ps, x, q) * rho(pt, q, y), mu, level,
                                  scale=width, cutoff=abs(centre) + LINE_CUTOFF * width)
    return abs(val - rho(pst, x, y))
