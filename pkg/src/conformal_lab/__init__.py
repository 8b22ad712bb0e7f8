"""Numerical laboratory for conformal iterated function systems on [0, 1]."""
from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
