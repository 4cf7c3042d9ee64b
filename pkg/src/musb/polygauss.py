"""Exact algebra of ``p(q) exp(-b q^2)`` with complex polynomial ``p``.

The class is closed under the Dunkl operator, the parity ``J``, position and
momentum, so every algebraic identity can be checked on coefficients instead
of on sampled values.
"""

from __future__ import annotations

import math
from numbers import Number

import numpy as np

from .special import check_mu, check_t, gamma_mu

_I = 1j
_SQRT_HALF = math.sqrt(0.5)


class PolyGauss:
    """``(sum_k coeffs[k] q^k) * exp(-rate q^2)`` with ``rate >= 0``.

    Trailing zero coefficients are dropped, so the zero function has an
    empty coefficient array and compares compatible with any rate.
    """

    __slots__ = ("coeffs", "rate")

    def __init__(self, coeffs, rate: float = 0.0):
        c = np.atleast_1d(np.asarray(coeffs, dtype=np.complex128)).copy()
        if c.ndim != 1:
            raise ValueError("coeffs must be one-dimensional")
        if not np.all(np.isfinite(c)):
            raise ValueError("coeffs must be finite")
        rate = float(rate)
        if not math.isfinite(rate) or rate < 0.0:
            raise ValueError(f"rate must be a finite nonnegative number, got {rate!r}")
        nz = np.nonzero(c)[0]
        c = c[: nz[-1] + 1] if nz.size else c[:0]
        c.setflags(write=False)
        self.coeffs = c
        self.rate = rate

    # -- construction helpers -------------------------------------------------

    @classmethod
    def monomial(cls, k: int, rate: float = 0.0, scale: complex = 1.0) -> "PolyGauss":
        c = np.zeros(k + 1, dtype=np.complex128)
        c[k] = scale
        return cls(c, rate)

    @classmethod
    def zero(cls, rate: float = 0.0) -> "PolyGauss":
        return cls([], rate)

    # -- basic properties -----------------------------------------------------

    @property
    def degree(self) -> int:
        """Polynomial degree; -1 for the zero function."""
        return self.coeffs.size - 1

    def is_zero(self, tol: float = 0.0) -> bool:
        return self.coeffs.size == 0 or float(np.max(np.abs(self.coeffs))) <= tol

    def coeff_norm(self) -> float:
        """Largest coefficient modulus (0 for the zero function)."""
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def padded(self, n: int) -> np.ndarray:
        out = np.zeros(max(n, self.coeffs.size), dtype=np.complex128)
        out[: self.coeffs.size] = self.coeffs
        return out

    def __call__(self, q):
        return evaluate(self, q)

    def __repr__(self) -> str:
        return f"PolyGauss(coeffs={self.coeffs.tolist()!r}, rate={self.rate!r})"

    # -- arithmetic -------------------------------------------------------------

    def _rate_with(self, other: "PolyGauss") -> float:
        if self.is_zero():
            return other.rate
        if other.is_zero() or self.rate == other.rate:
            return self.rate
        raise ValueError(f"cannot add PolyGauss with rates {self.rate} and {other.rate}")

    def __add__(self, other):
        if isinstance(other, Number):
            other = PolyGauss([other], self.rate)
        if not isinstance(other, PolyGauss):
            return NotImplemented
        n = max(self.coeffs.size, other.coeffs.size)
        return PolyGauss(self.padded(n) + other.padded(n), self._rate_with(other))

    __radd__ = __add__

    def __neg__(self):
        return PolyGauss(-self.coeffs, self.rate)

    def __sub__(self, other):
        if isinstance(other, Number):
            other = PolyGauss([other], self.rate)
        if not isinstance(other, PolyGauss):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, PolyGauss):
            if self.is_zero() or other.is_zero():
                return PolyGauss.zero(self.rate + other.rate)
            return PolyGauss(np.convolve(self.coeffs, other.coeffs), self.rate + other.rate)
        if isinstance(other, Number):
            return PolyGauss(self.coeffs * complex(other), self.rate)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Number):
            return PolyGauss(self.coeffs / complex(other), self.rate)
        return NotImplemented

    def conj(self) -> "PolyGauss":
        """Complex conjugate as a function of real ``q``."""
        return PolyGauss(np.conj(self.coeffs), self.rate)

    def close_to(self, other: "PolyGauss", tol: float = 1e-12) -> bool:
        return (self - other).is_zero(tol)


# ---------------------------------------------------------------------------
# evaluation and the elementary operators
# ---------------------------------------------------------------------------


def evaluate(f: PolyGauss, q):
    """Horner evaluation times the Gaussian factor; accepts scalars or arrays."""
    qa = np.asarray(q)
    if f.coeffs.size == 0:
        out = np.zeros(qa.shape, dtype=np.complex128)
    else:
        out = np.full(qa.shape, f.coeffs[-1], dtype=np.complex128)
        for c in f.coeffs[-2::-1]:
            out = out * qa + c
        if f.rate:
            out = out * np.exp(-f.rate * qa * qa)
    return complex(out) if out.ndim == 0 else out


def dunkl(f: PolyGauss, mu: float) -> PolyGauss:
    """``D_mu f = f' + (mu/q)(f(q) - f(-q))``, exactly within the class.

    On ``q^k e^{-bq^2}`` this gives ``(k + 2mu[k odd]) q^{k-1} - 2b q^{k+1}``
    times the same Gaussian.
    """
    mu = check_mu(mu)
    c = f.coeffs
    if c.size == 0:
        return PolyGauss.zero(f.rate)
    out = np.zeros(c.size + 1, dtype=np.complex128)
    k = np.arange(c.size)
    lower = (k + 2.0 * mu * (k % 2)) * c
    out[: c.size - 1] += lower[1:]
    if f.rate:
        out[1:] += -2.0 * f.rate * c
    return PolyGauss(out, f.rate)


def parity(f: PolyGauss) -> PolyGauss:
    """``(Jf)(q) = f(-q)``."""
    sign = np.where(np.arange(f.coeffs.size) % 2 == 0, 1.0, -1.0)
    return PolyGauss(f.coeffs * sign, f.rate)


def even_odd_split(f: PolyGauss) -> tuple[PolyGauss, PolyGauss]:
    mask = np.arange(f.coeffs.size) % 2 == 0
    return PolyGauss(np.where(mask, f.coeffs, 0), f.rate), PolyGauss(np.where(mask, 0, f.coeffs), f.rate)


def position(f: PolyGauss) -> PolyGauss:
    """Multiplication by ``q``."""
    if f.coeffs.size == 0:
        return f
    return PolyGauss(np.concatenate([[0.0], f.coeffs]), f.rate)


def momentum(f: PolyGauss, mu: float, hbar: float = 1.0) -> PolyGauss:
    """``(hbar / i) D_mu f``."""
    hbar = check_t(hbar, "hbar")
    return dunkl(f, mu) * (-_I * hbar)


def commutator_defect(f: PolyGauss, mu: float) -> PolyGauss:
    """``i[P, Q] f - f - 2 mu J f`` at ``hbar = 1``; the zero function when the relation holds."""
    comm = momentum(position(f), mu) - position(momentum(f, mu))
    return comm * _I - f - parity(f) * (2.0 * mu)


def ladder(f: PolyGauss, mu: float, kind: str) -> PolyGauss:
    """Annihilation ``(Q + iP)/sqrt 2`` or creation ``(Q - iP)/sqrt 2`` at ``hbar = 1``."""
    ip = momentum(f, mu) * _I
    if kind == "annihilate":
        return (position(f) + ip) * _SQRT_HALF
    if kind == "create":
        return (position(f) - ip) * _SQRT_HALF
    raise ValueError(f"kind must be 'annihilate' or 'create', got {kind!r}")


def ladder_commutator(f: PolyGauss, mu: float) -> PolyGauss:
    """``[a, a*] f``."""
    return ladder(ladder(f, mu, "create"), mu, "annihilate") - ladder(ladder(f, mu, "annihilate"), mu, "create")


def ladder_defect(f: PolyGauss, mu: float) -> PolyGauss:
    """``[a, a*] f - f - 2 mu J f``."""
    return ladder_commutator(f, mu) - f - parity(f) * (2.0 * mu)


# ---------------------------------------------------------------------------
# translation and the eigenfunction series
# ---------------------------------------------------------------------------


def dunkl_powers(f: PolyGauss, mu: float, count: int) -> list[PolyGauss]:
    """``[f, D f, D^2 f, ..., D^{count-1} f]``."""
    out = [f]
    for _ in range(count - 1):
        out.append(dunkl(out[-1], mu))
    return out


def mu_translate(f: PolyGauss, x: float, mu: float, terms: int = 60, *, full_output: bool = False):
    """Truncated deformed translation ``sum_{n<terms} (-x)^n D^n f / gamma_mu(n)``.

    With ``full_output`` returns ``(result, last)`` where ``last`` is the
    coefficient norm of the final included term, a proxy for the truncation
    error.
    """
    mu = check_mu(mu)
    if terms < 1:
        raise ValueError("terms must be positive")
    x = float(x)
    acc = PolyGauss.zero(f.rate)
    last = 0.0
    cur = f
    scale = 1.0
    for n in range(terms):
        if n:
            cur = dunkl(cur, mu)
            scale *= -x / (n + 2.0 * mu * (n % 2))
        term = cur * scale
        acc = acc + term
        last = term.coeff_norm()
    return (acc, last) if full_output else acc


def exp_mu_truncated(lam: float, mu: float, order: int) -> PolyGauss:
    """``sum_{n<=order} (lam x)^n / gamma_mu(n)`` as a polynomial in ``x``."""
    mu = check_mu(mu)
    c = np.empty(order + 1)
    c[0] = 1.0
    for n in range(1, order + 1):
        c[n] = c[n - 1] * lam / (n + 2.0 * mu * (n % 2))
    return PolyGauss(c, 0.0)


def eigen_truncation_defect(order: int, lam: float, mu: float) -> float:
    """Largest relative coefficient gap between ``D e_N - lam e_N`` and ``-lam^{N+1} x^N / gamma_mu(N)``."""
    e = exp_mu_truncated(lam, mu, order)
    lhs = dunkl(e, mu) - e * lam
    rhs = PolyGauss.monomial(order, 0.0, -(lam ** (order + 1)) / gamma_mu(order, mu))
    n = max(lhs.coeffs.size, rhs.coeffs.size)
    a, b = lhs.padded(n), rhs.padded(n)
    # each coefficient is judged against the size of the terms that produced it
    ref = np.maximum(np.abs(b), np.abs(lam) * np.abs(e.padded(n)))
    ref = np.where(ref > 0, ref, 1.0)
    return float(np.max(np.abs(a - b) / ref))
