"""The four Segal-Bargmann-type transforms and their identity checks.

Every kernel has the shape ``pref * exp(-z^2/2t) * exp(-a q^2) * exp_mu(qz/t)``:

====  ==============================  ============================  =========
name  kernel                          domain measure                range
====  ==============================  ============================  =========
A     ``rho(z,q) / sqrt(sigma(q))``   ``|q|^{2mu} dq``              ``B^2_t``
B     ``rho(z,q) / sigma(q)``         ``d rho_t = sigma |q|^{2mu}``  ``B^2_t``
C     ``rho(z,q)``                    ``|q|^{2mu} dq``              ``C^2_t``
D     ``rho(z,q) / sqrt(sigma(q))``   ``d rho_t``                   ``C^2_t``
====  ==============================  ============================  =========

``B = A U^{-1}`` and ``D = C U^{-1}`` with ``U psi = psi / sqrt(sigma)``.
Images are computed with the fused kernel pass of :mod:`musb._kernels`; the
unitarity check evaluates all probes for A and B in one pass over the
``B^2_t`` rule and C and D in one pass over the ``B^2_{t/2}`` rule.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .errors import QuadratureError
from .heat import HeatKernelParams, mu_convolve, rho, sigma
from .polygauss import PolyGauss, parity
from .quadrature import (
    LINE_CUTOFF, PLANE_BASE_LEVEL, PLANE_CUTOFF, START_LEVEL, coarsen, line_rule, max_level, plane_rule,
)
from .spaces import M, density_power, inner_L2_mu, inner_L2_rho, sector_weights
from .special import check_mu, check_t, exp_mu

VERSIONS = ("A", "B", "C", "D")
# images off the real axis come from cancelling sums, so the weighted norm of
# the level-to-level change bottoms out near 1e-10
GRAM_RTOL = 1e-9


def _check_version(version: str) -> str:
    v = str(version).upper()
    if v not in VERSIONS:
        raise ValueError(f"version must be one of A, B, C, D; got {version!r}")
    return v


def _log_pref_A(mu: float, t: float) -> float:
    return -(0.5 * mu + 0.25) * math.log(2.0 * t) - 0.5 * math.lgamma(mu + 0.5)


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelEval:
    version: str
    mu: float
    t: float
    z: complex
    q: float
    value: complex


def kernel(version: str, mu: float, t: float, z, q):
    """Kernel value of the given version at complex ``z`` and real ``q`` (broadcasting)."""
    v = _check_version(version)
    mu, t = check_mu(mu), check_t(t)
    z = np.asarray(z, dtype=np.complex128)
    q = np.asarray(q, dtype=float)
    z, q = np.broadcast_arrays(z, q)
    if v == "C":
        out = np.asarray(rho(HeatKernelParams(mu, t), z, q))
    else:
        out = np.exp(_log_pref_A(mu, t) - z * z / (2.0 * t) - q * q / (4.0 * t)) * exp_mu(q * z / t, mu)
        if v == "B":
            out = out / np.sqrt(sigma(HeatKernelParams(mu, t), q))
    out = np.asarray(out)
    return complex(out) if out.ndim == 0 else out


def kernel_eval(version: str, mu: float, t: float, z: complex, q: float) -> KernelEval:
    return KernelEval(_check_version(version), float(mu), float(t), complex(z), float(q),
                      kernel(version, mu, t, complex(z), float(q)))


def kernel_A_ratio(mu: float, t: float, z, q):
    """A through heat kernels: ``rho(z, q) / sqrt(rho(0, q))``."""
    p = HeatKernelParams(mu, t)
    return rho(p, z, q) / np.sqrt(sigma(p, q))


def kernel_route_gap(mu: float, t: float, z, q) -> float:
    """Relative gap between the two ways of evaluating kernel A."""
    a = np.asarray(kernel("A", mu, t, z, q))
    b = np.asarray(kernel_A_ratio(mu, t, z, q))
    return float(np.max(np.abs(a - b) / np.abs(a)))


def ac_identity_residual(mu: float, t: float, z, q) -> float:
    """``|C_t(z,q) - M(z) A_{t/2}(z/2, q)| / |C_t(z,q)|`` (max over broadcast inputs)."""
    c = np.asarray(kernel("C", mu, t, z, q))
    rhs = np.asarray(M(z, mu, t)) * np.asarray(kernel("A", mu, 0.5 * t, 0.5 * np.asarray(z), q))
    return float(np.max(np.abs(c - rhs) / np.abs(c)))


# ---------------------------------------------------------------------------
# applying a transform
# ---------------------------------------------------------------------------


def _decay(version: str, t: float) -> float:
    # q^2-rate of kernel times measure, probe excluded
    return {"A": 0.25, "B": 0.5, "C": 0.5, "D": 0.75}[version] / t


def _line_weights(version: str, psis: Sequence[PolyGauss], mu: float, t: float, q, w) -> np.ndarray:
    """Columns ``WP`` so that the fused pass yields the transform images."""
    p = HeatKernelParams(mu, t)
    if version in ("A", "D"):
        k = np.exp(_log_pref_A(mu, t) - q * q / (4.0 * t))
    elif version == "B":
        k = np.ones_like(q)
    else:
        k = np.exp(p.log_norm - q * q / (2.0 * t))
    if version in ("B", "D"):
        k = k * sigma(p, q)
    base = w * k
    return np.stack([base * np.asarray(psi(q)) for psi in psis], axis=1)


def _line_window(versions, psis, t: float, zmax_re: float) -> tuple[float, float]:
    a = min(_decay(v, t) for v in versions) + min(p.rate for p in psis)
    deg = max(max(p.degree, 0) for p in psis)
    width = 1.0 / math.sqrt(2.0 * a)
    cutoff = zmax_re / (2.0 * t * a) + LINE_CUTOFF * width + math.sqrt(deg) * width
    return width, cutoff


def _images(Z, columns, psis, mu, t, *, level=None, rtol=1e-12, node_weight=None):
    """Fused images ``F[k, c]`` over all ``(version, probe)`` columns, refined in the line level.

    ``columns`` is a list of versions; each contributes ``len(psis)`` columns.
    With ``node_weight`` the refinement stops once each column changes by
    less than ``rtol`` in the weighted 2-norm; otherwise every point must
    settle to ``rtol`` relative, down to a floor set by the size of the
    summands (images off the real axis come out of cancelling sums).
    """
    Z = np.ascontiguousarray(Z, dtype=np.complex128)
    zmax_re = float(np.max(np.abs(Z.real), initial=0.0))
    scale, cutoff = _line_window(columns, psis, t, zmax_re)
    top = max_level() if level is None else int(level)

    def weights(rule):
        return np.concatenate([_line_weights(v, psis, mu, t, rule.nodes, rule.weights) for v in columns], axis=1)

    rule = line_rule(mu, START_LEVEL, scale=scale, cutoff=cutoff)
    WP = weights(rule)
    F = _kernels.kernel_pass(Z, rule.nodes, WP, mu, t)
    if node_weight is None:
        floor = 1e-15 * _summand_bound(Z, rule.nodes, WP, mu, t)
    lvl = START_LEVEL
    prev = None
    while True:
        if prev is not None:
            gap = np.abs(F - prev)
            if node_weight is None:
                done = np.all(gap <= rtol * np.abs(F) + floor)
            else:
                num = np.sqrt(node_weight @ (gap * gap))
                den = np.sqrt(node_weight @ (np.abs(F) ** 2))
                done = np.all(num <= rtol * den)
            if done:
                break
        if lvl >= top:
            raise QuadratureError(f"transform quadrature not converged at level {lvl}",
                                  (complex(np.ravel(prev)[0]) if prev is not None else 0j, complex(np.ravel(F)[0])))
        lvl += 1
        new = line_rule(mu, lvl, scale=scale, cutoff=cutoff, odd_only=True)
        prev = F
        F = 0.5 * F + _kernels.kernel_pass(Z, new.nodes, weights(new), mu, t)
    return F, lvl


def _summand_bound(Z, Q, WP, mu, t):
    # |exp_mu(w)| <= e^{|Re w|} for mu >= 0, times (1 + 2|w|/(2mu+1)) below 0
    w_re = np.abs(np.outer(Z.real, Q)) / t
    mag = np.exp(w_re - (Z.real ** 2 - Z.imag ** 2)[:, None] / (2.0 * t))
    if mu < 0.0:
        mag *= 1.0 + 2.0 * np.abs(np.outer(Z, Q)) / ((2.0 * mu + 1.0) * t)
    return mag @ np.abs(WP)


def apply(version: str, psi: PolyGauss, mu: float, t: float, z, *, level: Optional[int] = None,
          rtol: float = 1e-12):
    """Transform image of ``psi`` at complex ``z`` (scalar or array)."""
    v = _check_version(version)
    mu, t = check_mu(mu), check_t(t)
    za = np.asarray(z, dtype=np.complex128)
    F, _ = _images(za.ravel(), [v], [psi], mu, t, level=level, rtol=rtol)
    out = F[:, 0].reshape(za.shape)
    return complex(out) if out.ndim == 0 else out


def apply_C_by_convolution(psi: PolyGauss, mu: float, t: float, z) -> complex:
    """Version C as the convolution of ``sigma_{mu,t}`` with ``psi``, continued to complex ``z``."""
    return mu_convolve(HeatKernelParams(mu, t), psi, mu, complex(z))


def factorization_residual(mu: float, t: float, psi: PolyGauss, z, *, level: Optional[int] = None) -> float:
    """Relative gap between ``(A_{mu,t} psi)(z)`` and ``(A_{mu,1} V_t psi)(z / sqrt t)``.

    ``(V_t psi)(q) = t^{mu/2+1/4} psi(sqrt(t) q)``.
    """
    mu, t = check_mu(mu), check_t(t)
    st = math.sqrt(t)
    k = np.arange(psi.coeffs.size)
    vpsi = PolyGauss(psi.coeffs * st ** k * t ** (0.5 * mu + 0.25), psi.rate * t)
    za = np.asarray(z, dtype=np.complex128)
    lhs = np.asarray(apply("A", psi, mu, t, za, level=level))
    rhs = np.asarray(apply("A", vpsi, mu, 1.0, za / st, level=level))
    return float(np.max(np.abs(lhs - rhs) / np.maximum(np.abs(lhs), 1e-300)))


def parity_residual(version: str, psi: PolyGauss, mu: float, t: float, z) -> float:
    """``|(T J psi)(z) - (T psi)(-z)|`` relative, for transform ``T``."""
    za = np.asarray(z, dtype=np.complex128)
    a = np.asarray(apply(version, parity(psi), mu, t, za))
    b = np.asarray(apply(version, psi, mu, t, -za))
    return float(np.max(np.abs(a - b)) / max(float(np.max(np.abs(b))), 1e-300))


def holomorphy_residual(version: str, psi: PolyGauss, mu: float, t: float, z, *, radius: float = 0.05,
                        points: int = 8) -> float:
    """Discrete contour test: ``|sum_j f(z + r w^j) w^j| / sum_j |f(z + r w^j)|`` with ``w = e^{2 pi i/points}``.

    For holomorphic ``f`` only the Taylor coefficient of order ``points-1``
    survives, so the residual is ``O(radius^{points-1})``.
    """
    w = np.exp(2j * math.pi * np.arange(points) / points)
    vals = np.asarray(apply(version, psi, mu, t, complex(z) + radius * w))
    return float(abs(np.sum(vals * w)) / np.sum(np.abs(vals)))


# ---------------------------------------------------------------------------
# unitarity
# ---------------------------------------------------------------------------


def hermite_probes(t: float, count: int = 6) -> list[PolyGauss]:
    """``q^k exp(-q^2/2t)`` for ``k < count``."""
    return [PolyGauss.monomial(k, 1.0 / (2.0 * t)) for k in range(count)]


@dataclass
class GramResult:
    version: str
    domain: np.ndarray
    range: np.ndarray
    coarse_range: np.ndarray
    line_level: int
    plane_level: int

    @property
    def defect(self) -> float:
        return gram_defect(self.domain, self.range)

    @property
    def refinement_gap(self) -> float:
        """Defect between the range Grams at the chosen plane level and one below."""
        return gram_defect(self.range, self.coarse_range, scale=self.domain)


def gram_defect(a: np.ndarray, b: np.ndarray, scale: Optional[np.ndarray] = None) -> float:
    s = a if scale is None else scale
    d = np.sqrt(np.abs(np.real(np.diag(s))))
    return float(np.max(np.abs(a - b) / np.outer(d, d)))


def _range_gram(F, rule, mu, t_range):
    lam = 1.0 / t_range
    we, wo = sector_weights(rule, mu, lam)
    Fe = 0.5 * (F + F[rule.antipode])
    Fo = 0.5 * (F - F[rule.antipode])
    full = (np.conj(Fe).T * we) @ Fe + (np.conj(Fo).T * wo) @ Fo
    idx, _ = coarsen(rule)
    # coarsening scales every kept weight by 4; the plain weights may underflow near 0
    Fe_c, Fo_c = Fe[idx], Fo[idx]
    coarse = (np.conj(Fe_c).T * (4.0 * we[idx])) @ Fe_c + (np.conj(Fo_c).T * (4.0 * wo[idx])) @ Fo_c
    return full, coarse


def gram_matrices(mu: float, t: float, probes: Sequence[PolyGauss] | None = None, *,
                  versions: Sequence[str] = VERSIONS, plane_level: int = PLANE_BASE_LEVEL,
                  line_level: Optional[int] = None) -> dict[str, GramResult]:
    """Domain and range Gram matrices of the probe images for each version.

    Range inner products use the plane rule at ``plane_level``; the Gram at
    the next coarser rule comes for free from the same node values and is
    kept as a refinement check.
    """
    mu, t = check_mu(mu), check_t(t)
    probes = hermite_probes(t) if probes is None else list(probes)
    versions = [_check_version(v) for v in versions]
    n = len(probes)
    out: dict[str, GramResult] = {}
    for group, t_range in ((("A", "B"), t), (("C", "D"), 0.5 * t)):
        vs = [v for v in group if v in versions]
        if not vs:
            continue
        scale = math.sqrt(t_range)
        rule = plane_rule(plane_level, scale=scale, cutoff=PLANE_CUTOFF * scale, power=density_power(mu))
        we, wo = sector_weights(rule, mu, 1.0 / t_range)
        nw = np.maximum(we, wo)
        if t_range == t:
            F, lvl = _images(rule.z, vs, probes, mu, t, level=line_level, rtol=GRAM_RTOL, node_weight=nw)
        else:
            # C^2_t is B^2_{t/2} after G f(z) = f(2z) / M(2z)
            Z2 = 2.0 * rule.z
            inv_m = 1.0 / np.asarray(M(Z2, mu, t))
            F, lvl = _images(Z2, vs, probes, mu, t, level=line_level, rtol=GRAM_RTOL,
                             node_weight=nw * np.abs(inv_m) ** 2)
            F = F * inv_m[:, None]
        for i, v in enumerate(vs):
            cols = F[:, i * n:(i + 1) * n]
            full, coarse = _range_gram(cols, rule, mu, t_range)
            if v in ("A", "C"):
                dom = _domain_gram(probes, lambda f, g: inner_L2_mu(f, g, mu))
            else:
                dom = _domain_gram(probes, lambda f, g: inner_L2_rho(f, g, mu, t))
            out[v] = GramResult(v, dom, full, coarse, lvl, plane_level)
    return out


def _domain_gram(probes, inner):
    n = len(probes)
    G = np.empty((n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(i, n):
            G[i, j] = inner(probes[i], probes[j])
            G[j, i] = np.conj(G[i, j])
    return G


@dataclass
class UnitarityOutcome:
    version: str
    mu: float
    t: float
    defect: float
    refinement_gap: float
    per_probe: list[float] = field(default_factory=list)
    wall_time: float = 0.0


def unitarity_report(version: str, mu: float, t: float, probes: Sequence[PolyGauss] | None = None,
                     **kw) -> UnitarityOutcome:
    """Largest normalised Gram defect of one version on the probe set."""
    return unitarity_reports(mu, t, probes, versions=[version], **kw)[_check_version(version)]


def unitarity_reports(mu: float, t: float, probes: Sequence[PolyGauss] | None = None, *,
                      versions: Sequence[str] = VERSIONS, **kw) -> dict[str, UnitarityOutcome]:
    t0 = time.perf_counter()
    grams = gram_matrices(mu, t, probes, versions=versions, **kw)
    wall = time.perf_counter() - t0
    out = {}
    for v, g in grams.items():
        d = np.sqrt(np.abs(np.real(np.diag(g.domain))))
        rel = np.abs(g.range - g.domain) / np.outer(d, d)
        out[v] = UnitarityOutcome(v, float(mu), float(t), g.defect, g.refinement_gap,
                                  [float(x) for x in rel.max(axis=1)], wall)
    return out
