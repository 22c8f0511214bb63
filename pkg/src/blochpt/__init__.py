"""Perturbation-theory predictions for Bloch eigenvalues and eigenfunctions, checked against a plane-wave solver."""

from .core import DEFAULT_CONFIG, NumericConfig, PaperParams, validate_params
from .lattice import Lattice, enumerate_ball, sublattice_geometry
from .potential import FourierPotential, load_potential, save_potential

__all__ = [
    "DEFAULT_CONFIG", "NumericConfig", "PaperParams", "validate_params",
    "Lattice", "enumerate_ball", "sublattice_geometry",
    "FourierPotential", "load_potential", "save_potential",
]
