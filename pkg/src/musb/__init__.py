"""Deformed Segal-Bargmann analysis: special functions, the deformed heat
kernel, weighted measures, the four transforms and an identity-check harness."""

from .errors import ConvergenceError, QuadratureError, TruncationError
from .heat import (
    HeatKernelParams, heat_solve, heat_solve_moments, mu_convolve, pde_residual, rho, semigroup_defect, sigma,
)
from .polygauss import PolyGauss, commutator_defect, dunkl, eigen_truncation_defect, ladder_defect, mu_translate
from .quadrature import QuadratureRule, integrate_line_weighted, line_rule, plane_rule
from .spaces import (
    G, M, change_of_measure, density_even, density_odd, gauss_density, inner_B2, inner_C2, measure_rho_density,
    norm_B2,
)
from .special import MuParam, bessel_k, exp_mu, exp_mu_prime, gamma_mu
from .transforms import KernelEval, ac_identity_residual, apply, factorization_residual, kernel, unitarity_report
from .verify import ProbeSpec, VerificationReport

__version__ = "0.1.0"
