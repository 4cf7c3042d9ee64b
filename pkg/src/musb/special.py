"""Scalar special functions: deformed factorial and exponential, Gamma, Macdonald K.

``exp_mu`` is the workhorse.  Its power series is cheap and exact in exact
arithmetic but cancels catastrophically off the positive real axis, so the
evaluator here picks a route per point:

* ``mu == 0``: the ordinary exponential;
* ``|z| >= 20``: a two-sided asymptotic expansion (relative accuracy ~1e-16);
* otherwise the series, unless its cancellation ratio exceeds ``COND_LIMIT``,
  in which case ``mu >= MU_INTEGRAL_MIN`` uses the integral representation
  ``exp_mu(z) = c * int_{-1}^{1} e^{zs} (1-s)^{mu-1} (1+s)^mu ds`` by
  tanh-sinh quadrature, and smaller ``mu`` lifts to ``mu + 1`` through
  ``exp_mu(z) = ((1 + 2z/(2mu+1)) exp_{mu+1}(z) + exp_{mu+1}(-z)) / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConvergenceError, TruncationError

COND_LIMIT = 1e2
# below this mu the integral route's Beta weight is too singular; lift to mu + 1 instead
MU_INTEGRAL_MIN = 1e-3
SMALL_Z_DERIVATIVE = 1.0


def check_mu(mu: float) -> float:
    mu = float(mu)
    if not math.isfinite(mu) or mu <= -0.5:
        raise ValueError(f"mu must satisfy mu > -1/2, got {mu!r}")
    return mu


def check_t(t: float, name: str = "t") -> float:
    t = float(t)
    if not math.isfinite(t) or t <= 0.0:
        raise ValueError(f"{name} must be positive, got {t!r}")
    return t


@dataclass(frozen=True)
class MuParam:
    """Deformation parameter ``mu > -1/2`` with time ``t > 0`` (``lam = 1/t``)."""

    mu: float
    t: float = 1.0
    lam: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "mu", check_mu(self.mu))
        object.__setattr__(self, "t", check_t(self.t))
        object.__setattr__(self, "lam", 1.0 / self.t)


# ---------------------------------------------------------------------------
# factorial and Gamma
# ---------------------------------------------------------------------------


def gamma_mu(n: int, mu: float) -> float:
    """Deformed factorial: ``gamma_mu(0) = 1``, odd steps multiply by ``n + 2mu``.

    Overflows to ``inf`` past the double range; use :func:`log_gamma_mu` there.
    """
    mu = check_mu(mu)
    n = _check_order(n)
    g = 1.0
    for k in range(1, n + 1):
        g *= k + 2.0 * mu * (k % 2)
    return g


def log_gamma_mu(n: int, mu: float) -> float:
    mu = check_mu(mu)
    n = _check_order(n)
    return math.fsum(math.log(k + 2.0 * mu * (k % 2)) for k in range(1, n + 1))


def _check_order(n) -> int:
    if isinstance(n, bool) or int(n) != n or n < 0:
        raise ValueError(f"order must be a nonnegative integer, got {n!r}")
    return int(n)


def gamma_euler(x: float) -> float:
    """Euler Gamma for ``x > 0``."""
    x = float(x)
    if not (x > 0.0) or not math.isfinite(x):
        raise ValueError(f"gamma_euler needs a finite x > 0, got {x!r}")
    return math.gamma(x)


# ---------------------------------------------------------------------------
# deformed exponential
# ---------------------------------------------------------------------------


def exp_mu_series(z: complex, mu: float, *, eps: float = 1e-15, max_terms: int = _kernels.SERIES_CAP) -> complex:
    """Plain partial sum of ``sum z^n / gamma_mu(n)``.

    Stops once three consecutive terms fall below ``eps`` times the partial
    sum.  Raises :class:`TruncationError` if ``max_terms`` is reached first.
    """
    mu = check_mu(mu)
    z = complex(z)
    s = term = 1.0 + 0.0j
    small = 0
    for n in range(1, max_terms + 1):
        term = term * z / (n + 2.0 * mu * (n % 2))
        s += term
        if abs(term) < eps * abs(s):
            small += 1
            if small >= 3:
                return s
        else:
            small = 0
    raise TruncationError(f"exp_mu series did not settle within {max_terms} terms at z={z}")


def exp_mu(z, mu: float):
    """Deformed exponential ``sum z^n / gamma_mu(n)`` at complex ``z``.

    Accepts a scalar or an array; the result is complex with the shape of ``z``.
    """
    mu = check_mu(mu)
    zarr = np.asarray(z, dtype=np.complex128)
    out = _exp_mu_flat(zarr.ravel(), mu).reshape(zarr.shape)
    return complex(out) if out.ndim == 0 else out


def _exp_mu_flat(z: np.ndarray, mu: float) -> np.ndarray:
    if mu == 0.0:
        return np.exp(z)
    val, cond = _kernels.exp_mu_array(z, mu)
    bad = ~(cond <= COND_LIMIT)
    if bad.any():
        val = val.copy()
        if mu >= MU_INTEGRAL_MIN:
            val[bad] = _intertwiner(z[bad], mu)
        else:
            zb = z[bad]
            up = _exp_mu_flat(np.concatenate([zb, -zb]), mu + 1.0)
            val[bad] = 0.5 * ((1.0 + 2.0 * zb / (2.0 * mu + 1.0)) * up[: zb.size] + up[zb.size:])
    real = z.imag == 0.0
    val[real] = val[real].real
    return val


def _intertwiner(z: np.ndarray, mu: float, chunk: int = 256) -> np.ndarray:
    """``exp_mu`` for ``mu > 0`` via tanh-sinh quadrature of its integral form."""
    logc = math.lgamma(mu + 0.5) - math.lgamma(mu) - 0.5 * math.log(math.pi)
    spread = 40.0 + 2.0 * float(np.max(np.abs(z.real), initial=0.0))
    tau_hi = math.asinh(2.0 * (spread / (2.0 * mu)) / math.pi)
    tau_lo = math.asinh(2.0 * (spread / (2.0 * (mu + 1.0))) / math.pi)
    out = np.empty(z.size, dtype=np.complex128)
    for lo in range(0, z.size, chunk):
        zc = z[lo:lo + chunk]
        prev = None
        for level in range(2, 12):
            h = 2.0 ** -level
            tau = np.arange(-math.ceil(tau_lo / h), math.ceil(tau_hi / h) + 1) * h
            u = 0.5 * math.pi * np.sinh(tau)
            s = np.tanh(u)
            logw = (
                mu * (math.log(2.0) - np.logaddexp(0.0, 2.0 * u))
                + (mu + 1.0) * (math.log(2.0) - np.logaddexp(0.0, -2.0 * u))
                + np.log(0.5 * math.pi * np.cosh(tau))
                + logc
            )
            terms = np.exp(logw[None, :] + zc[:, None] * s[None, :])
            cur = h * terms.sum(axis=1)
            floor = np.maximum(1e-14 * np.abs(cur), 4e-16 * h * np.abs(terms).sum(axis=1))
            if prev is not None and np.all(np.abs(cur - prev) <= floor):
                break
            prev = cur
        else:
            raise ConvergenceError("exp_mu integral route did not converge")
        out[lo:lo + chunk] = cur
    return out


def exp_mu_prime(z, mu: float):
    """Derivative ``sum n z^{n-1} / gamma_mu(n)``.

    Small ``|z|`` sums the differentiated series; elsewhere the eigen-relation
    ``f' = f - (mu/z)(f(z) - f(-z))`` is used with the robust ``exp_mu``.
    """
    mu = check_mu(mu)
    zarr = np.asarray(z, dtype=np.complex128)
    flat = zarr.ravel()
    out = np.empty(flat.shape, dtype=np.complex128)
    near = np.abs(flat) < SMALL_Z_DERIVATIVE
    for i in np.nonzero(near)[0]:
        out[i] = _prime_series(complex(flat[i]), mu)
    far = ~near
    if far.any():
        zf = flat[far]
        both = _exp_mu_flat(np.concatenate([zf, -zf]), mu)
        f, fm = both[: zf.size], both[zf.size:]
        out[far] = f - mu * (f - fm) / zf
    out = out.reshape(zarr.shape)
    return complex(out) if out.ndim == 0 else out


def _prime_series(z: complex, mu: float) -> complex:
    # term_n = z^{n-1} / gamma_mu(n); accumulate n * term_n
    s = 0.0 + 0.0j
    term = 1.0 / (1.0 + 2.0 * mu)
    s += term
    small = 0
    for n in range(2, _kernels.SERIES_CAP):
        term = term * z / (n + 2.0 * mu * (n % 2))
        add = n * term
        s += add
        if abs(add) < 1e-16 * abs(s):
            small += 1
            if small >= 3:
                return s
        else:
            small = 0
    raise TruncationError("exp_mu_prime series did not settle")


# ---------------------------------------------------------------------------
# Macdonald function
# ---------------------------------------------------------------------------


def bessel_k(nu: float, x):
    """Macdonald function ``K_nu(x)`` for real order ``|nu| <= 50`` and ``x > 0``.

    Computed from ``int_0^inf exp(-x cosh u) cosh(nu u) du`` by the trapezoid
    rule in ``u``, which converges exponentially for this integrand.
    """
    return _wrap(np.exp(log_bessel_k(nu, x)), x)


def bessel_k_scaled(nu: float, x):
    """``exp(x) * K_nu(x)``; stays finite for large ``x``."""
    xa = np.asarray(x, dtype=float)
    return _wrap(np.exp(log_bessel_k(nu, x) + xa), x)


def log_bessel_k(nu: float, x):
    """``log K_nu(x)``; finite even where ``K_nu`` itself over- or underflows."""
    nu = abs(float(nu))
    if not nu <= 50.0:
        raise ValueError(f"bessel_k supports |nu| <= 50, got {nu!r}")
    xa = np.asarray(x, dtype=float)
    if xa.size and not np.all(xa > 0.0) or not np.all(np.isfinite(xa)):
        raise ValueError("bessel_k needs finite x > 0")
    flat = xa.ravel()
    out = np.empty(flat.shape)
    for lo in range(0, flat.size, 256):
        out[lo:lo + 256] = _log_k_block(nu, flat[lo:lo + 256])
    out = out.reshape(xa.shape)
    return float(out) if out.ndim == 0 else out


# below this argument the two-term small-x form of K is exact to ~1e-22
SMALL_K_ARG = 1e-12


def log_bessel_k_of_log(nu: float, log_x):
    """``log K_nu(x)`` from ``log x``; works for arguments far below the double range.

    Small ``x`` uses ``K_nu = (1/2)[Gamma(nu) (x/2)^-nu + Gamma(-nu) (x/2)^nu]``
    (``-log(x/2) - Euler gamma`` at ``nu = 0``), whose neglected terms are
    ``O(x^2)`` relative.
    """
    nu = abs(float(nu))
    la = np.asarray(log_x, dtype=float)
    flat = la.ravel()
    out = np.empty(flat.shape)
    small = flat < math.log(SMALL_K_ARG)
    if (~small).any():
        out[~small] = log_bessel_k(nu, np.exp(flat[~small]))
    if small.any():
        half = flat[small] - math.log(2.0)
        if nu == 0.0:
            out[small] = np.log(-half - 0.5772156649015329)
        else:
            lead = math.lgamma(nu) - math.log(2.0) - nu * half
            if nu < 1.0:
                # Gamma(-nu) / Gamma(nu) carries the sign of the second term
                ratio = math.gamma(-nu) / math.gamma(nu)
                lead = lead + np.log1p(ratio * np.exp(2.0 * nu * half))
            out[small] = lead
    out = out.reshape(la.shape)
    return float(out) if out.ndim == 0 else out


def _log_k_block(nu: float, x: np.ndarray) -> np.ndarray:
    # integrand log: -x cosh u + log cosh(nu u), shifted by x so large x is safe
    xmin = float(x.min())
    # past u_max the integrand is below e^-45 of its peak for every x in the block
    u_max = 1.0
    while _k_decay(xmin, u_max) - nu * u_max < 45.0 + nu * math.log1p(nu / xmin):
        u_max *= 1.25
    prev = None
    h = 0.5
    while True:
        u = np.arange(0.0, u_max + h, h)
        logcosh = nu * u + np.log1p(np.exp(-2.0 * nu * u)) - math.log(2.0)
        with np.errstate(over="ignore"):
            # cosh overflowing to inf only zeroes terms that are negligible anyway
            lg = -x[:, None] * (np.cosh(u)[None, :] - 1.0) + logcosh[None, :]
        w = np.full(u.size, h)
        w[0] = 0.5 * h
        peak = lg.max(axis=1)
        cur = peak + np.log((np.exp(lg - peak[:, None]) * w).sum(axis=1)) - x
        if prev is not None and np.all(np.abs(cur - prev) <= 1e-14 * np.maximum(1.0, np.abs(cur))):
            return cur
        if h < 1e-3:
            raise ConvergenceError("bessel_k trapezoid did not converge")
        prev = cur
        h *= 0.5


def _k_decay(x: float, u: float) -> float:
    # x (cosh u - 1) without overflowing cosh for the tiny x of near-origin radii
    if u < 30.0:
        return x * (math.cosh(u) - 1.0)
    return math.exp(min(math.log(x) + u - math.log(2.0), 700.0))


def _wrap(val, like):
    return float(val) if np.ndim(like) == 0 else val
