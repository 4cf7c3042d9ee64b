"""Identity suites, verification reports and probe specifications.

A suite is a list of independent cells, one per parameter point; each cell
returns one :class:`VerificationReport` per identity it checks.  Cells only
depend on their parameters, so they can run in any order or in parallel and
still give the same reports.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import heat as H
from . import polygauss as P
from . import quadrature as Q
from . import spaces as S
from . import special as SP
from . import transforms as T
from .errors import ConvergenceError

# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass
class VerificationReport:
    """Outcome of one identity on one parameter cell; ``passed`` iff ``max_residual <= tolerance``."""

    identity_id: str
    params: dict
    grid_size: int
    max_residual: float
    tolerance: float
    passed: bool = field(init=False)
    wall_time: float = 0.0

    def __post_init__(self):
        r = float(self.max_residual)
        if not math.isfinite(r) or r < 0.0:
            raise ConvergenceError(f"{self.identity_id}: residual {r!r} is not a finite nonnegative number")
        self.max_residual = r
        self.tolerance = float(self.tolerance)
        self.params = {k: float(v) for k, v in self.params.items()}
        self.passed = r <= self.tolerance

    def to_dict(self) -> dict:
        return asdict(self)


CSV_FIELDS = ("identity_id", "params", "grid_size", "max_residual", "tolerance", "passed", "wall_time")


def report_row(r: VerificationReport) -> list:
    params = ";".join(f"{k}={v!r}" for k, v in r.params.items())
    return [r.identity_id, params, r.grid_size, repr(r.max_residual), repr(r.tolerance),
            "true" if r.passed else "false", f"{r.wall_time:.6f}"]


# ---------------------------------------------------------------------------
# probes
# ---------------------------------------------------------------------------

BUILTIN_PROBES = ("hermite-0", "hermite-1", "hermite-2", "hermite-3", "hermite-4", "hermite-5",
                  "const", "gauss", "ground")


@dataclass(frozen=True)
class ProbeSpec:
    """A named ``PolyGauss``: coefficients as ``[re, im]`` pairs plus a Gaussian rate."""

    name: str
    coeffs: tuple
    rate: float

    def to_polygauss(self) -> P.PolyGauss:
        return P.PolyGauss([complex(re, im) for re, im in self.coeffs], self.rate)

    def to_dict(self) -> dict:
        return {"name": self.name, "coeffs": [[re, im] for re, im in self.coeffs], "rate": self.rate}

    @classmethod
    def from_polygauss(cls, name: str, f: P.PolyGauss) -> "ProbeSpec":
        return cls(name, tuple((float(c.real), float(c.imag)) for c in f.coeffs), float(f.rate))

    @classmethod
    def from_dict(cls, d: dict) -> "ProbeSpec":
        if not isinstance(d, dict):
            raise ValueError("probe spec must be a JSON object")
        missing = {"name", "coeffs", "rate"} - set(d)
        if missing:
            raise ValueError(f"probe spec is missing {sorted(missing)}")
        pairs = []
        for c in d["coeffs"]:
            if not (isinstance(c, (list, tuple)) and len(c) == 2):
                raise ValueError(f"coefficient {c!r} is not an [re, im] pair")
            pairs.append((float(c[0]), float(c[1])))
        spec = cls(str(d["name"]), tuple(pairs), float(d["rate"]))
        spec.to_polygauss()  # validates finiteness and the rate
        return spec


def builtin_probe(name: str, mu: float, t: float) -> ProbeSpec:
    """``hermite-k`` is ``q^k exp(-q^2/2t)``; ``const`` is 1; ``gauss`` is ``exp(-q^2/2)``; ``ground`` is ``sqrt(sigma)``."""
    if name.startswith("hermite-"):
        try:
            k = int(name.split("-", 1)[1])
        except ValueError:
            k = -1
        if not 0 <= k <= 5:
            raise ValueError(f"unknown probe {name!r}; hermite probes run from hermite-0 to hermite-5")
        return ProbeSpec.from_polygauss(name, T.hermite_probes(t, k + 1)[k])
    if name == "const":
        return ProbeSpec(name, ((1.0, 0.0),), 0.0)
    if name == "gauss":
        return ProbeSpec(name, ((1.0, 0.0),), 0.5)
    if name == "ground":
        return ProbeSpec.from_polygauss(name, S.ground_state(mu, t))
    raise ValueError(f"unknown probe {name!r}; builtins are {', '.join(BUILTIN_PROBES)}")


def resolve_probe(text: str, mu: float, t: float) -> ProbeSpec:
    """A builtin name, inline JSON, or a path to a JSON file holding a probe spec."""
    text = text.strip()
    if text.startswith("{"):
        return ProbeSpec.from_dict(json.loads(text))
    path = Path(text)
    if path.suffix == ".json" or path.is_file():
        if not path.is_file():
            raise ValueError(f"probe file {text!r} not found")
        return ProbeSpec.from_dict(json.loads(path.read_text(encoding="utf-8")))
    return builtin_probe(text, mu, t)


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------

MU_GRID = (-0.4, -0.1, 0.0, 0.5, 1.0, 3.0)
T_GRID = (0.25, 1.0, 4.0)
UNITARITY_MU = (-0.25, 0.0, 0.5, 1.5)
UNITARITY_T = (0.5, 1.0, 2.0)
QUADRATURE_MU = (-0.49, -0.4, -0.25, -0.1, 0.0, 0.5, 1.0, 1.5, 3.0)
REDUCTION_T = (0.5, 1.0, 2.0)

PDE_STEP = 1e-3


class _Cell:
    """Collects reports for one parameter point, timing each identity."""

    def __init__(self, params: dict):
        self.params = params
        self.reports: list[VerificationReport] = []

    def check(self, identity: str, tol: float, fn: Callable[[], tuple[float, int]]):
        t0 = time.perf_counter()
        residual, size = fn()
        self.reports.append(VerificationReport(identity, dict(self.params), int(size), residual, tol,
                                               wall_time=time.perf_counter() - t0))


def _rel(a, b) -> float:
    """Pointwise relative error."""
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.abs(b)))


def _rel_peak(a, b) -> float:
    """Largest deviation relative to the peak of ``b``; odd probes vanish at 0."""
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(float(np.max(np.abs(b))), 1e-300))


def cell_quadrature(mu: float) -> list[VerificationReport]:
    c = _Cell({"mu": mu})

    def moments():
        worst, n = 0.0, 0
        for s in (0.5, 1.0, 3.0):
            for k in range(11):
                v = Q.integrate_line_weighted(lambda q: q ** (2 * k) * np.exp(-s * q * q), mu,
                                              scale=1.0 / math.sqrt(s))
                exact = math.exp(math.lgamma(k + mu + 0.5) - (k + mu + 0.5) * math.log(s))
                worst = max(worst, abs(v / exact - 1.0))
                n += 1
        return worst, n

    def odd():
        worst, n = 0.0, 0
        for k in range(6):
            res = Q.integrate_line_weighted(lambda q: q ** (2 * k + 1) * np.exp(-q * q), mu, full_output=True)
            worst = max(worst, abs(res.value) / res.l1)
            n += 1
        return worst, n

    def plane():
        worst = 0.0
        for n in range(5):
            v = S.inner_B2(S.HoloSample(lambda z, n=n: z ** n, 0.0, n),
                           S.HoloSample(lambda z, n=n: z ** n, 0.0, n), mu, 1.0).real
            worst = max(worst, abs(v / S.monomial_norm_sq(n, mu, 1.0) - 1.0))
        return worst, 5

    c.check("quadrature.gamma_moments", 1e-10, moments)
    c.check("quadrature.odd_moments", 1e-10, odd)
    c.check("quadrature.plane_monomials", 1e-8, plane)
    return c.reports


def cell_special(mu: float) -> list[VerificationReport]:
    c = _Cell({"mu": mu})

    def gamma_closed():
        worst = 0.0
        for n in range(41):
            m = n // 2
            shift = 0.5 if n % 2 == 0 else 1.5
            log_closed = (n * math.log(2.0) + math.lgamma(m + 1) + math.lgamma(m + mu + shift)
                          - math.lgamma(mu + 0.5))
            worst = max(worst, abs(SP.gamma_mu(n, mu) / math.exp(log_closed) - 1.0))
        return worst, 41

    def series_vs_asymptotic():
        # right half plane: the plain series is well conditioned, the library uses the expansion
        z = np.array([20.5, 22.0, 25.0 + 5.0j, 24.0 - 8.0j, 30.0 + 12.0j, 21.0 + 1.0j])
        lib = np.asarray(SP.exp_mu(z, mu))
        ser = np.array([SP.exp_mu_series(v, mu) for v in z])
        return _rel(lib, ser), z.size

    def integral_vs_asymptotic():
        if mu <= 0.0:
            return 0.0, 0
        z = np.array([22.0j, -25.0j, 3.0 + 21.0j, -2.0 - 23.0j])
        return _rel(SP._intertwiner(z, mu), SP.exp_mu(z, mu)), z.size

    def eigen():
        worst, n = 0.0, 0
        for order in (5, 20, 60):
            for lam in (0.5, 1.0, 2.0, -1.5):
                worst = max(worst, P.eigen_truncation_defect(order, lam, mu))
                n += 1
        return worst, n

    def bessel():
        nu = mu + 0.5
        x = np.geomspace(1e-2, 30.0, 25)
        lhs = SP.bessel_k(nu + 1.0, x)
        rhs = SP.bessel_k(nu - 1.0, x) + (2.0 * nu / x) * SP.bessel_k(nu, x)
        return _rel(rhs, lhs), x.size

    c.check("special.gamma_mu_closed_form", 1e-12, gamma_closed)
    c.check("special.exp_mu_series_vs_asymptotic", 1e-12, series_vs_asymptotic)
    if mu > 0.0:
        c.check("special.exp_mu_integral_vs_asymptotic", 1e-12, integral_vs_asymptotic)
    c.check("special.eigen_truncation", 1e-12, eigen)
    c.check("special.bessel_recurrence", 1e-12, bessel)
    return c.reports


def cell_reduction(t: float) -> list[VerificationReport]:
    """Classical limits at ``mu = 0``."""
    c = _Cell({"mu": 0.0, "t": t})
    p = H.HeatKernelParams(0.0, t)

    def heat_kernel():
        x, q = np.meshgrid(np.linspace(-2.0, 2.0, 11), np.linspace(-2.0, 2.0, 11))
        classical = np.exp(-(x - q) ** 2 / (2.0 * t)) / math.sqrt(2.0 * math.pi * t)
        return _rel(np.real(H.rho(p, x, q)), classical), x.size

    def densities():
        re, im = np.meshgrid(np.linspace(-2.0, 2.0, 10), np.linspace(-2.0, 2.0, 10))
        z = (re + 1j * im).ravel()
        lam = 1.0 / t
        classical = lam / math.pi * np.exp(-lam * np.abs(z) ** 2)
        return max(_rel(S.density_even(0.0, lam, z), classical),
                   _rel(S.density_odd(0.0, lam, z), classical)), 2 * z.size

    def kernel_a():
        re, im = np.meshgrid(np.linspace(-2.0, 2.0, 5), np.linspace(-2.0, 2.0, 5))
        z = (re + 1j * im).ravel()[:, None]
        q = np.linspace(-2.0, 2.0, 8)[None, :]
        classical = (2.0 * math.pi * t) ** -0.25 * np.exp(-z * z / (2.0 * t) - q * q / (4.0 * t) + q * z / t)
        return _rel(T.kernel("A", 0.0, t, z, q), classical), z.size * q.size

    c.check("reduction.heat_kernel", 1e-12, heat_kernel)
    c.check("reduction.densities", 1e-12, densities)
    c.check("reduction.kernel_A", 1e-12, kernel_a)
    return c.reports


def cell_haar(mu: float, t: float) -> list[VerificationReport]:
    c = _Cell({"mu": mu, "t": t})
    p = H.HeatKernelParams(mu, t)
    xs = np.linspace(-2.0, 2.0, 9)
    c.check("haar.rho_measure_mass", 1e-10, lambda: (abs(S.rho_measure_mass(mu, t) - 1.0), 1))
    c.check("haar.heat_kernel_mass", 1e-10,
            lambda: (max(abs(H.heat_kernel_mass(p, x) - 1.0) for x in xs), xs.size))
    return c.reports


def cell_heat(mu: float, t: float) -> list[VerificationReport]:
    c = _Cell({"mu": mu, "t": t})
    p = H.HeatKernelParams(mu, t)
    probes = T.hermite_probes(t)
    xs = (-1.5, -0.5, 0.3, 1.5)

    def semigroup():
        pts = [(-1.0, 0.3), (0.3, 1.2), (1.2, -1.0), (0.0, 0.0)]
        return max(H.semigroup_defect(mu, 0.4 * t, 0.6 * t, x, y) for x, y in pts), len(pts)

    solved = {}

    def kernel_integral(k, x):
        key = (k, x)
        if key not in solved:
            solved[key] = H.heat_solve(probes[k], p, x)
        return solved[key]

    def route_convolution():
        worst = max(abs(kernel_integral(k, x) - H.mu_convolve(p, probes[k], mu, x))
                    for k in range(len(probes)) for x in xs)
        return worst, len(probes) * len(xs)

    def route_moments():
        worst = max(abs(kernel_integral(k, x) - H.heat_solve_moments(probes[k], p, x))
                    for k in range(len(probes)) for x in xs)
        return worst, len(probes) * len(xs)

    def translation():
        grid = np.linspace(-1.5, 1.5, 7)
        sg = H.sigma_polygauss(p)
        worst = 0.0
        for x in grid:
            f = P.mu_translate(sg, x, mu, 60)
            worst = max(worst, _rel(f(grid), H.rho(p, x, grid)))
        return worst, grid.size ** 2

    c.check("heat.semigroup", 1e-10, semigroup)
    c.check("heat.route_convolution", 1e-10, route_convolution)
    c.check("heat.route_moments", 1e-10, route_moments)
    c.check("heat.translation_series", 1e-8, translation)
    return c.reports


def cell_pde(mu: float, t: float) -> list[VerificationReport]:
    c = _Cell({"mu": mu, "t": t, "h": PDE_STEP})
    p = H.HeatKernelParams(mu, t)
    grid = np.linspace(-1.5, 1.5, 5)
    xs, qs = [a.ravel() for a in np.meshgrid(grid, grid)]
    c.check("pde.residual", 1e-5,
            lambda: (max(H.pde_residual(p, x, q, PDE_STEP) for x, q in zip(xs, qs)), xs.size))
    c.check("pde.richardson_ratio", 0.5,
            lambda: (abs(H.richardson_ratio(p, xs, qs, PDE_STEP) - 4.0), xs.size))
    return c.reports


def ccr_probes(count: int = 20, seed: int = 20) -> list[P.PolyGauss]:
    """Seeded probes with unit coefficient norm, degrees 0..7 and rates 0..2."""
    rng = np.random.default_rng(seed)
    rates = (0.0, 0.25, 0.5, 1.0, 2.0)
    out = []
    for i in range(count):
        deg = int(rng.integers(0, 8))
        c = rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1)
        c = c / np.max(np.abs(c))
        out.append(P.PolyGauss(c, rates[i % len(rates)]))
    return out


def cell_ccr(mu: float) -> list[VerificationReport]:
    c = _Cell({"mu": mu})
    probes = ccr_probes()
    c.check("ccr.commutator", 1e-12,
            lambda: (max(P.commutator_defect(f, mu).coeff_norm() for f in probes), len(probes)))
    c.check("ccr.ladder", 1e-12,
            lambda: (max(P.ladder_defect(f, mu).coeff_norm() for f in probes), len(probes)))
    return c.reports


def _z_grid(n: int = 5, half: float = 2.0) -> np.ndarray:
    re, im = np.meshgrid(np.linspace(-half, half, n), np.linspace(-half, half, n))
    return (re + 1j * im).ravel()


def cell_ac_identity(mu: float, t: float) -> list[VerificationReport]:
    c = _Cell({"mu": mu, "t": t})
    z = _z_grid()[:, None]
    q = np.linspace(-2.0, 2.0, 10)[None, :]
    size = z.size * q.size

    def coherence():
        p = H.HeatKernelParams(mu, t)
        a, b = T.kernel("A", mu, t, z, q), T.kernel("B", mu, t, z, q)
        cc, d = T.kernel("C", mu, t, z, q), T.kernel("D", mu, t, z, q)
        root = np.sqrt(H.sigma(p, q))
        return max(_rel(b * root, a), _rel(a * root, cc), _rel(d, a)), 3 * size

    c.check("ac_identity.residual", 1e-12, lambda: (T.ac_identity_residual(mu, t, z, q), size))
    c.check("kernel.coherence", 1e-13, coherence)
    c.check("kernel.route_A", 1e-12, lambda: (T.kernel_route_gap(mu, t, z, q), size))
    return c.reports


def cell_transform(mu: float, t: float) -> list[VerificationReport]:
    c = _Cell({"mu": mu, "t": t})
    probes = T.hermite_probes(t)
    z = _z_grid(3, 1.0)

    def factorization():
        return max(T.factorization_residual(mu, t, f, z) for f in probes), len(probes) * z.size

    def parity_cov():
        return max(T.parity_residual("A", f, mu, t, z) for f in probes), len(probes) * z.size

    def holomorphy():
        pts = (0.3 + 0.2j, -0.7 + 0.5j)
        return max(T.holomorphy_residual("A", f, mu, t, w) for f in probes for w in pts), 2 * len(probes)

    def composition():
        worst = 0.0
        for f in probes:
            b = T.apply("B", f, mu, t, z)
            a = T.apply("A", S.change_of_measure(f, mu, t, "from_ground_state"), mu, t, z)
            worst = max(worst, _rel_peak(b, a))
        return worst, len(probes) * z.size

    def convolution():
        worst = 0.0
        for f in probes:
            lib = T.apply("C", f, mu, t, z)
            conv = np.array([T.apply_C_by_convolution(f, mu, t, w) for w in z])
            worst = max(worst, _rel_peak(conv, lib))
        return worst, len(probes) * z.size

    c.check("transform.factorization", 1e-9, factorization)
    c.check("transform.parity", 1e-10, parity_cov)
    c.check("transform.holomorphy", 1e-8, holomorphy)
    c.check("transform.B_is_A_after_U_inverse", 1e-10, composition)
    c.check("transform.C_is_convolution", 1e-10, convolution)
    return c.reports


def cell_unitarity(mu: float, t: float) -> list[VerificationReport]:
    t0 = time.perf_counter()
    outs = T.unitarity_reports(mu, t)
    wall = (time.perf_counter() - t0) / (len(outs) + 1)
    params = {"mu": mu, "t": t}
    reports = [VerificationReport(f"unitarity.{v}", dict(params), 36, o.defect, 1e-6, wall_time=wall)
               for v, o in outs.items()]
    gap = max(o.refinement_gap for o in outs.values())
    reports.append(VerificationReport("unitarity.plane_refinement", dict(params), 36 * len(outs), gap, 1e-6,
                                      wall_time=wall))
    return reports


@dataclass(frozen=True)
class Suite:
    name: str
    run: Callable
    uses_mu: bool
    uses_t: bool
    mu_grid: tuple = ()
    t_grid: tuple = ()


SUITES = {
    "quadrature": Suite("quadrature", cell_quadrature, True, False, QUADRATURE_MU),
    "special": Suite("special", cell_special, True, False, MU_GRID),
    "reduction": Suite("reduction", cell_reduction, False, True, (), REDUCTION_T),
    "haar": Suite("haar", cell_haar, True, True, MU_GRID, T_GRID),
    "heat": Suite("heat", cell_heat, True, True, MU_GRID, T_GRID),
    "pde": Suite("pde", cell_pde, True, True, MU_GRID, T_GRID),
    "ccr": Suite("ccr", cell_ccr, True, False, MU_GRID),
    "ac-identity": Suite("ac-identity", cell_ac_identity, True, True, MU_GRID, T_GRID),
    "transform": Suite("transform", cell_transform, True, True, UNITARITY_MU, UNITARITY_T),
    "unitarity": Suite("unitarity", cell_unitarity, True, True, UNITARITY_MU, UNITARITY_T),
}
# quadrature comes first: it gates everything else in "all"
ALL_ORDER = ("quadrature", "special", "reduction", "haar", "heat", "pde", "ccr", "ac-identity",
             "transform", "unitarity")


def suite_cells(name: str, mu_grid: Optional[tuple] = None, t_grid: Optional[tuple] = None) -> list[tuple]:
    """``(suite, args)`` jobs for one suite; explicit grids replace the defaults."""
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    s = SUITES[name]
    mus = tuple(mu_grid) if (mu_grid is not None and s.uses_mu) else s.mu_grid
    ts = tuple(t_grid) if (t_grid is not None and s.uses_t) else s.t_grid
    if s.uses_mu and s.uses_t:
        return [(name, (mu, t)) for mu in mus for t in ts]
    if s.uses_mu:
        return [(name, (mu,)) for mu in mus]
    return [(name, (t,)) for t in ts]


def run_cell(job: tuple) -> list[VerificationReport]:
    name, args = job
    return SUITES[name].run(*args)
