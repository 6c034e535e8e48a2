"""Gibbs spacing laws: tilted families, grid convolutions, conditional variance."""

from .densities import GibbsDensity, coulomb, make_gibbs_density, pure_power  # noqa: F401
from .tilt import TiltSolution, solve_tilt_lambda, tilt_moments  # noqa: F401
from .conditional import (conditional_density, conditional_variance, dirichlet_variance_exact,  # noqa: F401
                          fit_power_law, lclt_sup_error, mc_conditional_variance)
