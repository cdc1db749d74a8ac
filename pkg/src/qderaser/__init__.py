"""Quantum-dot cascade entanglement under fine-structure splitting, and its eraser."""

__version__ = "0.1.0"

from .analysis import ConcurrenceMap, SweepGrid, TimeGrid, cbar, contour, sweep
from .cascade import CascadeParams, DetectorModel, psi, rho_of_t
from .eraser import erase, rf_frequency, which_path_distinguishability
from .polarization import Basis, concurrence, fidelity
from .tomography import ProjectionSet36, measure_projections, reconstruct

__all__ = [
    "Basis",
    "CascadeParams",
    "ConcurrenceMap",
    "DetectorModel",
    "ProjectionSet36",
    "SweepGrid",
    "TimeGrid",
    "cbar",
    "concurrence",
    "contour",
    "erase",
    "fidelity",
    "measure_projections",
    "psi",
    "reconstruct",
    "rf_frequency",
    "rho_of_t",
    "sweep",
    "which_path_distinguishability",
]
