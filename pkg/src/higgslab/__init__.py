"""Abelian Higgs vortex lab: static vortices, second-order dynamics, moduli-space
geodesics, a Clifford/spin representation toolkit and SW_lambda residual checks
for vortex lifts on a product torus."""
from .errors import (ConditioningError, ConvergenceError, DivergenceError, DomainError, FluxError,
                     InfeasibleError, ResolutionError, ShapeError)
from .fields import GaugePair, energy_density, potential_energy, vortex_number
from .grid import TorusGrid
from .vortex import ModuliPoint, VortexSolution, locate_zeros, solve_vortex

__version__ = "0.1.0"

__all__ = [
    "ConditioningError", "ConvergenceError", "DivergenceError", "DomainError", "FluxError",
    "InfeasibleError", "ResolutionError", "ShapeError", "GaugePair", "ModuliPoint", "TorusGrid",
    "VortexSolution", "energy_density", "locate_zeros", "potential_energy", "solve_vortex",
    "vortex_number",
]
