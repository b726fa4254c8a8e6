"""Numerical laboratory for McKean-Vlasov diffusions in a double-well landscape.

Modules: ``potentials`` (polynomial potentials and assumption checks),
``measures`` (grid densities and free energy), ``pde`` (granular media
solver), ``stationary`` (self-consistent Gibbs states), ``particles``
(mean-field particle system), ``asymptotics`` (small-noise limits),
``experiments`` (convergence and basin drivers) and ``cli``.
"""
from .measures import Grid, GridDensity, MomentVector, default_grid, free_energy, moments
from .pde import SolverConfig, evolve
from .potentials import Polynomial, validate_confining, validate_interaction
from .stationary import enumerate_stationary

__version__ = "0.1.0"

__all__ = [
    "Grid", "GridDensity", "MomentVector", "Polynomial", "SolverConfig",
    "default_grid", "enumerate_stationary", "evolve", "free_energy", "moments",
    "validate_confining", "validate_interaction",
]
