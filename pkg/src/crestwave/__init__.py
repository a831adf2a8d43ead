"""Local asymptotics of extreme (stagnation-point) water waves with vorticity.

The toolkit computes the constants that control the surface-slope expansion
near the crest of an extreme wave,

    eta_x(x) = -1/sqrt(3) + kappa*sqrt(x) + a1*omega(1)^2*x + O(x^p),

and validates them empirically: a Sturm-Liouville spectrum fixes the
remainder exponent p, a reduced boundary-value problem fixes the
second-order surface coefficient, and a nonlinear half-strip solver
provides independent numerical cross-checks of every claimed decay rate.
"""

from .vorticity import VorticityModel, DomainError, constant_model, omega, \
    omega_hat, omega_hat_prime, omega_primitive
from .spectrum import Eigenpair, solve_eigenpair, eigenfunction_value, \
    remainder_exponent, mode_decay_rate
from .transforms import CrestFrame, DegeneratePointError, \
    SingularDenominatorError, log_map, log_unmap, flatten, unflatten, \
    zeta_t_from_eta_x, eta_x_from_zeta, t_of_x
from .asymptotics import ExpansionCoefficients, StripPoint, KAPPA_RATIO, \
    stokes_corner, verify_stokes_corner, u_star, u_star_partner, xi_series, \
    xi_series_derivatives, eta_x_series, eta_xx_series, eta_series, \
    psi_series, eta_x_quadratic, concavity_crossover, a1_from_lambda, \
    make_coefficients
from .reduction import ReducedBVP, LambdaResult, REFERENCE_LAMBDA, \
    assemble_reduced_forcing, solve_reduced_bvp, verify_u_star, \
    compute_lambda, lambda_and_a1
from .halfstrip import StripGrid, StripField, ClosureColumn, ResidualReport, \
    NonConvergenceError, DEFAULT_FRAME, DEFAULT_SPONGE, FREE_ZONE_CAP, \
    assemble_residual, far_field_closure, newton_solve, extract_surface, \
    composite_field
from .diagnostics import DecayFit, TailFit, fit_decay, fit_tail_coefficient, \
    middle_third, extract_surface_coeffs, holder_scan, concavity_check

__version__ = "0.1.0"
