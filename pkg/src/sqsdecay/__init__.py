"""Metastable-state decay in one-dimensional tunneling models."""
from .errors import ModelValidityError, NumericalError
from .kernels import BACKEND
from .model import BoxSystem, TrapezoidSystem, bare_level, kinematics
from .spectral import SpectralTable, build_table, rho_box, rho_trapezoid

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BoxSystem",
    "ModelValidityError",
    "NumericalError",
    "SpectralTable",
    "TrapezoidSystem",
    "bare_level",
    "build_table",
    "kinematics",
    "rho_box",
    "rho_trapezoid",
]
