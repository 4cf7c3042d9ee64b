"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``MUSB_DISABLE_NUMBA`` is unset (or ``0``).  Both paths implement
the same algorithms:

* the deformed exponential ``exp_mu`` by its power series for ``|z| < 20``
  and by a two-sided asymptotic expansion beyond that radius;
* the fused kernel pass ``F[k, i] = sum_j exp(-z_k^2/2t) exp_mu(q_j z_k/t) WP[j, i]``
  shared by every transform version.

The series branch here is only *absolutely* accurate where it cancels
(``|z| - |Re z|`` large).  :func:`musb.special.exp_mu` re-evaluates those
points through a well-conditioned route; the hot pass does not need to,
because every caller multiplies by Gaussian factors that dominate the
cancellation error.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_DISABLE = os.environ.get("MUSB_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}
USE_NUMBA = numba is not None and not _DISABLE

# |z| at and beyond which the asymptotic expansion replaces the series
ASYMPTOTIC_RADIUS = 20.0
SERIES_CAP = 10_000
SERIES_EPS = 1e-15


def jit(fn):
    """``numba.njit(cache=True)`` when acceleration is enabled, identity otherwise."""
    if USE_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


def asymptotic_constants(mu: float) -> tuple[float, float]:
    """Prefactors Gamma(2mu+1)/Gamma(mu+1) and Gamma(2mu+1)/Gamma(mu)."""
    lg = math.lgamma(2.0 * mu + 1.0)
    c1 = math.exp(lg - math.lgamma(mu + 1.0))
    if mu == 0.0:
        return c1, 0.0
    # Gamma(mu) < 0 on (-1/2, 0); lgamma keeps tiny |mu| from overflowing
    sign = -1.0 if mu < 0.0 else 1.0
    return c1, sign * math.exp(lg - math.lgamma(mu))


# ---------------------------------------------------------------------------
# scalar cores (compiled when numba is on, plain Python otherwise)
# ---------------------------------------------------------------------------


@jit
def series_scalar(z, mu, eps):
    """Partial sum of sum z^n / gamma_mu(n).

    Returns ``(value, abs_sum, nterms)``; ``abs_sum`` is the sum of term
    moduli, so ``abs_sum / |value|`` measures cancellation.  Stops after three
    consecutive terms below ``eps * |partial sum|``; ``nterms`` is negative
    when the hard cap was hit first.
    """
    s = 1.0 + 0.0j
    term = 1.0 + 0.0j
    abs_sum = 1.0
    small = 0
    n = 1
    while n <= SERIES_CAP:
        term = term * z / (n + 2.0 * mu * (n % 2))
        s += term
        at = abs(term)
        abs_sum += at
        if at < eps * abs(s):
            small += 1
            if small >= 3:
                return s, abs_sum, n
        else:
            small = 0
        n += 1
    return s, abs_sum, -SERIES_CAP


@jit
def _kummer_tail(a1, a2, x):
    # sum_s (a1)_s (a2)_s / (s! x^s), stopped at the smallest term
    inv = 1.0 / x
    s = 1.0 + 0.0j
    term = 1.0 + 0.0j
    prev = 1e300
    for k in range(1, 400):
        term = term * (((a1 + k - 1) * (a2 + k - 1) / k) * inv)
        at = term.real * term.real + term.imag * term.imag
        if at == 0.0 or at > prev:
            break
        s += term
        prev = at
        if at < 1e-36 * (s.real * s.real + s.imag * s.imag):
            break
    return s


# beyond this |Re z| the subdominant exponential is below 1e-17 relative
_DOMINANT = 20.0


@jit
def asymptotic_scalar(z, mu, c1, c2):
    """exp_mu(z) for large |z| from exp_mu(z) = e^{-z} M(mu+1, 2mu+1, 2z)."""
    w = 2.0 * z
    lw = np.log(w)
    t1 = 0.0j
    if z.real > -_DOMINANT or c2 == 0.0:
        t1 = c1 * np.exp(z - mu * lw) * _kummer_tail(mu, -mu, w)
    if c2 == 0.0 or z.real > _DOMINANT:
        return t1
    # branch side must match the principal log above
    sgn = 1.0 if math.atan2(w.imag, w.real) >= 0.0 else -1.0
    t2 = c2 * np.exp(-z - (mu + 1.0) * lw + sgn * 1j * math.pi * (mu + 1.0)) \
        * _kummer_tail(mu + 1.0, 1.0 - mu, -w)
    return t1 + t2


@jit
def exp_mu_fast_scalar(z, mu, c1, c2):
    """Fast exp_mu.  Returns ``(value, cond)`` with ``cond`` the series cancellation ratio."""
    if mu == 0.0:
        return np.exp(z), 1.0
    az = abs(z)
    if az >= ASYMPTOTIC_RADIUS:
        return asymptotic_scalar(z, mu, c1, c2), 1.0
    s, abs_sum, _ = series_scalar(z, mu, SERIES_EPS)
    a = abs(s)
    return s, (abs_sum / a if a > 0.0 else np.inf)


# ---------------------------------------------------------------------------
# array kernels: numba loops
# ---------------------------------------------------------------------------


@jit
def _exp_mu_array_loop(z, mu, c1, c2):
    n = z.shape[0]
    out = np.empty(n, dtype=np.complex128)
    cond = np.empty(n, dtype=np.float64)
    for k in range(n):
        v, c = exp_mu_fast_scalar(z[k], mu, c1, c2)
        out[k] = v
        cond[k] = c
    return out, cond


@jit
def _kernel_pass_loop(Z, Q, WP, mu, t, c1, c2):
    nz = Z.shape[0]
    nq = Q.shape[0]
    npr = WP.shape[1]
    F = np.zeros((nz, npr), dtype=np.complex128)
    for k in range(nz):
        z = Z[k]
        gz = np.exp(-z * z / (2.0 * t))
        zt = z / t
        for j in range(nq):
            e, _ = exp_mu_fast_scalar(Q[j] * zt, mu, c1, c2)
            for i in range(npr):
                F[k, i] += e * WP[j, i]
        for i in range(npr):
            F[k, i] *= gz
    return F


def reciprocal_table(mu: float, size: int = 256) -> np.ndarray:
    """``1 / (n + 2 mu [n odd])`` for ``n < size`` (entry 0 unused)."""
    n = np.arange(size, dtype=np.float64)
    d = n + 2.0 * mu * (n % 2)
    d[0] = 1.0
    return 1.0 / d


@jit
def exp_mu_pair(w, mu, c1, c2, inv):
    """``(exp_mu(w), exp_mu(-w))`` sharing one series through its even and odd parts."""
    if mu == 0.0:
        e = np.exp(w)
        return e, np.exp(-w)
    if abs(w) >= ASYMPTOTIC_RADIUS:
        return asymptotic_scalar(w, mu, c1, c2), asymptotic_scalar(-w, mu, c1, c2)
    even = 1.0 + 0.0j
    odd = 0.0j
    term = 1.0 + 0.0j
    small = 0
    eps2 = SERIES_EPS * SERIES_EPS
    for n in range(1, inv.shape[0]):
        term = term * w * inv[n]
        if n % 2:
            odd += term
        else:
            even += term
        at = term.real * term.real + term.imag * term.imag
        big = max(even.real * even.real + even.imag * even.imag, odd.real * odd.real + odd.imag * odd.imag)
        if at < eps2 * big:
            small += 1
            if small >= 3:
                break
        else:
            small = 0
    return even + odd, even - odd


@jit
def _kernel_pass_pairs(Z, Qh, WPp, WPm, mu, t, c1, c2, inv):
    # nodes +Qh[j] and -Qh[j] with their own weight rows
    nz = Z.shape[0]
    nq = Qh.shape[0]
    npr = WPp.shape[1]
    F = np.zeros((nz, npr), dtype=np.complex128)
    for k in range(nz):
        z = Z[k]
        gz = np.exp(-z * z / (2.0 * t))
        zt = z / t
        for j in range(nq):
            ep, em = exp_mu_pair(Qh[j] * zt, mu, c1, c2, inv)
            for i in range(npr):
                F[k, i] += ep * WPp[j, i] + em * WPm[j, i]
        for i in range(npr):
            F[k, i] *= gz
    return F


# ---------------------------------------------------------------------------
# array kernels: numpy fallback
# ---------------------------------------------------------------------------


def _series_numpy(z, mu):
    s = np.ones_like(z)
    term = np.ones_like(z)
    abs_sum = np.ones(z.shape)
    small = np.zeros(z.shape, dtype=np.int64)
    active = np.ones(z.shape, dtype=bool)
    n = 1
    while active.any() and n <= SERIES_CAP:
        idx = np.nonzero(active)[0]
        term[idx] = term[idx] * z[idx] / (n + 2.0 * mu * (n % 2))
        s[idx] += term[idx]
        at = np.abs(term[idx])
        abs_sum[idx] += at
        hit = at < SERIES_EPS * np.abs(s[idx])
        small[idx] = np.where(hit, small[idx] + 1, 0)
        active[idx[small[idx] >= 3]] = False
        n += 1
    return s, abs_sum


def _kummer_tail_numpy(a1, a2, x):
    s = np.ones_like(x)
    term = np.ones_like(x)
    prev = np.full(x.shape, np.inf)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, 400):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        nxt = term[idx] * (a1 + k - 1) * (a2 + k - 1) / (k * x[idx])
        at = np.abs(nxt)
        grow = (at == 0.0) | (at > prev[idx])
        keep = ~grow
        ki = idx[keep]
        term[ki] = nxt[keep]
        s[ki] += nxt[keep]
        prev[ki] = at[keep]
        done = grow.copy()
        done[keep] = at[keep] < 1e-18 * np.abs(s[ki])
        active[idx[done]] = False
    return s


def _asymptotic_numpy(z, mu, c1, c2):
    w = 2.0 * z
    lw = np.log(w)
    sgn = np.where(np.arctan2(w.imag, w.real) >= 0.0, 1.0, -1.0)
    out = c1 * np.exp(z - mu * lw) * _kummer_tail_numpy(mu, -mu, w)
    if c2 != 0.0:
        phase = sgn * 1j * math.pi * (mu + 1.0)
        out = out + c2 * np.exp(-z - (mu + 1.0) * lw + phase) * _kummer_tail_numpy(mu + 1.0, 1.0 - mu, -w)
    return out


def _exp_mu_array_numpy(z, mu, c1, c2):
    out = np.empty(z.shape, dtype=np.complex128)
    cond = np.ones(z.shape)
    if mu == 0.0:
        return np.exp(z), cond
    big = np.abs(z) >= ASYMPTOTIC_RADIUS
    if big.any():
        out[big] = _asymptotic_numpy(z[big], mu, c1, c2)
    small = ~big
    if small.any():
        s, abs_sum = _series_numpy(z[small], mu)
        out[small] = s
        a = np.abs(s)
        with np.errstate(divide="ignore"):
            cond[small] = np.where(a > 0.0, abs_sum / np.where(a > 0.0, a, 1.0), np.inf)
    return out, cond


def _kernel_pass_numpy(Z, Q, WP, mu, t, c1, c2, chunk=512):
    F = np.empty((Z.shape[0], WP.shape[1]), dtype=np.complex128)
    for lo in range(0, Z.shape[0], chunk):
        z = Z[lo:lo + chunk]
        arg = (z[:, None] * Q[None, :] / t).ravel()
        e, _ = _exp_mu_array_numpy(arg, mu, c1, c2)
        F[lo:lo + chunk] = (e.reshape(z.shape[0], Q.shape[0]) @ WP) * np.exp(-z * z / (2.0 * t))[:, None]
    return F


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def exp_mu_array(z, mu: float, *, backend: str | None = None):
    """Fast exp_mu over a flat complex array; returns ``(values, cond)``."""
    z = np.ascontiguousarray(z, dtype=np.complex128).ravel()
    c1, c2 = asymptotic_constants(mu)
    if _pick(backend) == "numba":
        return _exp_mu_array_loop(z, float(mu), c1, c2)
    return _exp_mu_array_numpy(z, float(mu), c1, c2)


def kernel_pass(Z, Q, WP, mu: float, t: float, *, backend: str | None = None):
    """``F[k, i] = exp(-Z_k^2/2t) * sum_j exp_mu(Q_j Z_k / t) * WP[j, i]``."""
    Z = np.ascontiguousarray(Z, dtype=np.complex128).ravel()
    Q = np.ascontiguousarray(Q, dtype=np.float64).ravel()
    WP = np.ascontiguousarray(WP, dtype=np.complex128)
    if WP.ndim == 1:
        WP = WP[:, None]
    c1, c2 = asymptotic_constants(mu)
    if _pick(backend) == "numpy":
        return _kernel_pass_numpy(Z, Q, WP, float(mu), float(t), c1, c2)
    pairs = _split_pairs(Q, WP)
    if pairs is None:
        return _kernel_pass_loop(Z, Q, WP, float(mu), float(t), c1, c2)
    Qh, WPp, WPm = pairs
    return _kernel_pass_pairs(Z, Qh, WPp, WPm, float(mu), float(t), c1, c2, reciprocal_table(mu))


def _split_pairs(Q, WP):
    """Fold nodes symmetric about 0 into ``(|q|, weights at +q, weights at -q)``; None if not symmetric."""
    n = Q.shape[0]
    if n == 0 or not np.array_equal(Q, -Q[::-1]):
        return None
    half = n // 2
    Qh = np.ascontiguousarray(Q[n - half:])
    WPp = np.ascontiguousarray(WP[n - half:])
    WPm = np.ascontiguousarray(WP[half - 1::-1]) if half else WP[:0]
    if n % 2:
        # the node at 0 rides along as a pair with an empty partner
        Qh = np.concatenate([[0.0], Qh])
        WPp = np.concatenate([WP[half:half + 1], WPp])
        WPm = np.concatenate([np.zeros_like(WP[:1]), WPm])
    return Qh, WPp, WPm


def _pick(backend):
    if backend is None:
        return "numba" if USE_NUMBA else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not USE_NUMBA:
        raise RuntimeError("numba backend requested but acceleration is disabled")
    return backend
