"""Repeated interaction quantum systems."""

from .qops import NumericalError, Superoperator
from .rdm import RIModel, build_rdm

__version__ = "0.1.0"

__all__ = ["NumericalError", "RIModel", "Superoperator", "build_rdm"]
