"""Ground states of a pinned 1-D Coulomb chain and conditional spacing laws of Gibbs chains."""

__version__ = "0.1.0"

from .model import COULOMB, ChainConfig, ForceField, PotentialSpec, eval_energy, eval_gradient  # noqa: E402
from .ground_state import (SolverOptions, enumerate_tent_minima, find_critical_force,  # noqa: E402
                           solve_equilibrium)
