"""Integration rules for the weighted line measure and for radial planar measures.

Line rule
    ``int_R |q|^{2mu} g(q) dq`` is split at 0 and each half-line is mapped by
    ``q = scale * log(1 + exp(tau - exp(-tau)))``.  Towards ``q = 0`` the nodes
    cluster double-exponentially, which absorbs the ``|q|^{2mu}`` endpoint
    behaviour; away from 0 the map is linear, so the rule is an equispaced
    trapezoid there and stays accurate for Gaussians times oscillations.  The
    power weight is folded into the node weights in log form, so the ``q -> 0``
    singularity for ``mu < 0`` never has to be evaluated.  Step
    ``h = 2**-level``; rules at consecutive levels are nested.

Plane rule
    Polar rings: ``r = scale * exp((pi/2) sinh(tau))`` (exp-sinh) in ``r`` and
    an equispaced trapezoid in ``theta`` whose size grows with ``r``, because
    the angular bandwidth of products like ``|f(z)|^2`` grows like ``r^2``.  Every ring has an even
    node count, so the node antipodal to ``z`` is in the rule and even/odd
    parts can be formed from node values.

Convergence is judged by level doubling: the difference between the last two
levels must be below ``rtol`` times the integral of ``|g|``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import QuadratureError
from .special import check_mu

DEFAULT_RTOL = 1e-12
START_LEVEL = 3
LINE_CUTOFF = 14.0
PLANE_CUTOFF = 11.0
PLANE_BASE_LEVEL = 5
# decay (in e-folds) at which the rules stop adding nodes
TAIL = 40.0
# radial nodes stop at this multiple of the scale; weights are kept in log
# form, so only the representability of r itself matters
R_FLOOR = 1e-300


def max_level() -> int:
    """Refinement ceiling; ``MUSB_QUAD_LEVEL`` overrides the default of 9."""
    raw = os.environ.get("MUSB_QUAD_LEVEL")
    if raw is None or raw.strip() == "":
        return 9
    try:
        level = int(raw)
    except ValueError as exc:
        raise ValueError(f"MUSB_QUAD_LEVEL must be an integer, got {raw!r}") from exc
    if level < START_LEVEL:
        raise ValueError(f"MUSB_QUAD_LEVEL must be at least {START_LEVEL}")
    return level


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights; ``kind`` is line_weighted, radial or angular."""

    kind: str
    nodes: np.ndarray
    weights: np.ndarray
    mu: float
    level: int

    def apply(self, values) -> complex:
        return complex(np.dot(self.weights, values))


@dataclass(frozen=True)
class QuadResult:
    value: complex
    residual: float
    level: int
    l1: float


def _softplus_window(power: float, scale: float, cutoff: float, h0: float) -> tuple[float, float]:
    """Range of tau for the line map when the weight behaves like ``q^power`` near 0."""
    hi = cutoff / scale + 1.0
    lo = 0.5
    while power * math.exp(lo) - lo < TAIL:
        lo += 0.125
    return math.ceil(lo / h0) * h0, math.ceil(hi / h0) * h0


def _tau_window(power: float, scale: float, cutoff: float, h0: float) -> tuple[float, float]:
    """Range of tau for an exp-sinh rule whose weight behaves like ``r^power`` near 0."""
    hi = math.asinh(2.0 * math.log(max(cutoff / scale, 1.0 + 1e-9)) / math.pi)
    lo = 0.5
    while power * 0.5 * math.pi * math.sinh(lo) - math.log(0.5 * math.pi * math.cosh(lo)) < TAIL:
        lo += 0.125
    # snap to the coarsest grid so every level is nested
    return math.ceil(lo / h0) * h0, math.ceil(hi / h0) * h0


def _half_line(mu: float, level: int, scale: float, cutoff: float, odd_only: bool):
    h0 = 2.0 ** -START_LEVEL
    lo, hi = _softplus_window(2.0 * mu + 1.0, scale, cutoff, h0)
    h = 2.0 ** -level
    k = np.arange(-round(lo / h), round(hi / h) + 1)
    if odd_only:
        k = k[k % 2 != 0]
    tau = k * h
    u = tau - np.exp(-tau)
    with np.errstate(divide="ignore"):
        # log(softplus(u)), exact to rounding in both tails
        logs = np.where(u < -30.0, u, np.log(np.logaddexp(0.0, u)))
    logq = math.log(scale) + logs
    # dq/dtau = scale * sigmoid(u) * (1 + exp(-tau))
    logd = math.log(scale) - np.logaddexp(0.0, -u) + np.logaddexp(0.0, -tau)
    logw = math.log(h) + logd + 2.0 * mu * logq
    return np.exp(logq), np.exp(logw)


def line_rule(mu: float, level: int, *, scale: float = 1.0, cutoff: float | None = None,
              odd_only: bool = False) -> QuadratureRule:
    """Rule for ``int_R |q|^{2mu} g(q) dq``.

    Nodes that underflow to 0 are merged into a single node at the origin.
    ``odd_only`` keeps only the nodes new at this level (for nested refinement);
    their weights then carry the full step of this level.
    """
    mu = check_mu(mu)
    cutoff = LINE_CUTOFF * scale if cutoff is None else float(cutoff)
    q, w = _half_line(mu, level, scale, cutoff, odd_only)
    zero = q == 0.0
    w0 = 2.0 * w[zero].sum()
    q, w = q[~zero], w[~zero]
    nodes = np.concatenate([-q[::-1], [0.0] if w0 > 0 else [], q])
    weights = np.concatenate([w[::-1], [w0] if w0 > 0 else [], w])
    keep = weights > 0.0
    return QuadratureRule("line_weighted", nodes[keep], weights[keep], mu, level)


def _call(g, x):
    try:
        v = np.asarray(g(x), dtype=np.complex128)
        if v.shape == np.shape(x):
            return v
        if v.ndim == 0:
            return np.full(np.shape(x), complex(v))
    except (TypeError, ValueError):
        pass
    return np.array([complex(g(xi)) for xi in np.ravel(x)], dtype=np.complex128).reshape(np.shape(x))


def integrate_line_weighted(g, mu: float, level: int | None = None, *, scale: float = 1.0,
                            cutoff: float | None = None, rtol: float = DEFAULT_RTOL,
                            full_output: bool = False):
    """``int_R |q|^{2mu} g(q) dq`` by nested level doubling.

    ``g`` is called on arrays of nodes (scalar callables are vectorised).
    ``level`` caps the refinement (default :func:`max_level`).  Raises
    :class:`~musb.errors.QuadratureError` with the last two estimates if the
    cap is reached first.  With ``full_output`` a :class:`QuadResult` is
    returned instead of the value.
    """
    mu = check_mu(mu)
    top = max_level() if level is None else int(level)
    if top < START_LEVEL:
        raise ValueError(f"level must be at least {START_LEVEL}")
    rule = line_rule(mu, START_LEVEL, scale=scale, cutoff=cutoff)
    vals = _call(g, rule.nodes)
    est = complex(np.dot(rule.weights, vals))
    l1 = float(np.dot(rule.weights, np.abs(vals)))
    prev = None
    lvl = START_LEVEL
    while True:
        if prev is not None and abs(est - prev) <= rtol * max(l1, np.finfo(float).tiny):
            break
        if lvl >= top:
            raise QuadratureError(
                f"line quadrature not converged at level {lvl} (mu={mu})",
                (prev if prev is not None else est, est),
            )
        lvl += 1
        new = line_rule(mu, lvl, scale=scale, cutoff=cutoff, odd_only=True)
        nv = _call(g, new.nodes)
        prev = est
        est = 0.5 * est + complex(np.dot(new.weights, nv))
        l1 = 0.5 * l1 + float(np.dot(new.weights, np.abs(nv)))
    res = QuadResult(est, abs(est - prev), lvl, l1)
    return res if full_output else res.value


# ---------------------------------------------------------------------------
# planar rings
# ---------------------------------------------------------------------------


def _pow2ceil(x: float) -> int:
    return 1 << max(0, math.ceil(math.log2(max(x, 1.0))))


@dataclass(frozen=True)
class PlaneRule:
    """Polar product rule.

    ``z`` holds every node, ``weight`` the matching ``r dr dtheta`` weight
    (without any density), ``ring`` maps nodes to ``radii`` and ``antipode``
    gives the index of ``-z``.  ``log_radii`` and ``log_ring_weight`` (the
    log of the ``r dr`` weight per ring) stay finite where ``r^2`` underflows,
    so densities singular at the origin can be folded in without loss.
    """

    radial: QuadratureRule
    counts: np.ndarray
    z: np.ndarray
    weight: np.ndarray
    ring: np.ndarray
    antipode: np.ndarray
    ring_step: np.ndarray
    slot: np.ndarray
    log_radii: np.ndarray
    log_ring_weight: np.ndarray

    @property
    def radii(self) -> np.ndarray:
        return self.radial.nodes

    def log_node_weight(self, log_density_per_ring: np.ndarray) -> np.ndarray:
        """Log of ``weight * density`` per node, given the log density on each ring."""
        per_ring = self.log_ring_weight + math.log(2.0 * math.pi) - np.log(self.counts) + log_density_per_ring
        return per_ring[self.ring]


def plane_rule(level: int = PLANE_BASE_LEVEL, *, scale: float = 1.0, cutoff: float | None = None,
               power: float = 2.0) -> PlaneRule:
    """Polar rule for ``int_C g(z) w(|z|) dx dy``.

    ``power`` is the exponent ``p`` with ``r * w(r) * g ~ r^{p-1}`` near the
    origin; it sets how far towards 0 the radial nodes reach.
    """
    if power <= 0.0:
        raise ValueError("power must be positive")
    cutoff = PLANE_CUTOFF * scale if cutoff is None else float(cutoff)
    h = 2.0 ** -level
    lo, hi = _tau_window(power, scale, cutoff, 2.0 ** -START_LEVEL)
    k = np.arange(-round(lo / h), round(hi / h) + 1)
    tau = k * h
    log_r = math.log(scale) + 0.5 * math.pi * np.sinh(tau)
    log_wr = math.log(h) + np.log(0.5 * math.pi * np.cosh(tau)) + 2.0 * log_r
    keep = log_r > math.log(R_FLOOR * scale)
    log_r, log_wr = log_r[keep], log_wr[keep]
    r, wr = np.exp(log_r), np.exp(log_wr)
    factor = 2.0 ** (level - PLANE_BASE_LEVEL)
    counts = np.array([max(8, int(_pow2ceil(2.0 * (ri / scale) ** 2 + 32.0) * factor)) for ri in r])
    offsets = np.concatenate([[0], np.cumsum(counts)])
    total = int(offsets[-1])
    z = np.empty(total, dtype=np.complex128)
    weight = np.empty(total)
    ring = np.empty(total, dtype=np.int64)
    antipode = np.empty(total, dtype=np.int64)
    for i, (ri, n) in enumerate(zip(r, counts)):
        a, b = offsets[i], offsets[i + 1]
        j = np.arange(n)
        half = ri * np.exp(2j * math.pi * j[: n // 2] / n)
        # exact negation keeps even/odd splits free of rounding
        z[a:b] = np.concatenate([half, -half])
        weight[a:b] = wr[i] * 2.0 * math.pi / n
        ring[a:b] = i
        antipode[a:b] = a + (j + n // 2) % n
    radial = QuadratureRule("radial", r, wr, float("nan"), level)
    slot = np.arange(total) - offsets[ring]
    return PlaneRule(radial, counts, z, weight, ring, antipode, k[keep], slot, log_r, log_wr)


def coarsen(rule: PlaneRule) -> tuple[np.ndarray, np.ndarray]:
    """Indices and weights of the next coarser plane rule inside ``rule``.

    Rings at even radial steps and their even angular slots form the rule one
    level down, each with four times the weight.
    """
    idx = np.nonzero((rule.ring_step[rule.ring] % 2 == 0) & (rule.slot % 2 == 0))[0]
    return idx, 4.0 * rule.weight[idx]


def integrate_plane_radial(g, w, level: int | None = None, *, scale: float = 1.0,
                           cutoff: float | None = None, power: float = 2.0,
                           rtol: float = DEFAULT_RTOL, full_output: bool = False):
    """``int_0^inf r dr int_0^{2pi} dtheta g(r e^{i theta}) w(r)`` by level doubling.

    ``g`` receives an array of complex nodes, ``w`` an array of radii.
    """
    top = max_level() if level is None else int(level)
    lvl = START_LEVEL
    prev = est = None
    l1 = 0.0
    while True:
        rule = plane_rule(lvl, scale=scale, cutoff=cutoff, power=power)
        dens = np.asarray(w(rule.radii), dtype=float)[rule.ring]
        vals = _call(g, rule.z)
        prev, est = est, complex(np.sum(rule.weight * dens * vals))
        l1 = float(np.sum(rule.weight * np.abs(dens * vals)))
        if prev is not None and abs(est - prev) <= rtol * max(l1, np.finfo(float).tiny):
            break
        if lvl >= top:
            raise QuadratureError(
                f"plane quadrature not converged at level {lvl}",
                (prev if prev is not None else est, est),
            )
        lvl += 1
    res = QuadResult(est, abs(est - prev), lvl, l1)
    return res if full_output else res.value
