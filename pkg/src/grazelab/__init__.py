"""Numerical laboratory for the grazing limit of the non-cutoff Boltzmann
operator toward the Landau operator, on a Hermite-Galerkin basis."""

from .params import ModelParams, validate_params
from .hermite import HermiteCoeffs, basis_spec
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["ModelParams", "validate_params", "HermiteCoeffs", "basis_spec", "BACKEND", "__version__"]
