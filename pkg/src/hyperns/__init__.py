"""Hyperbolic relaxation of the 2D Navier-Stokes equations and relatives."""

__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: E402

__all__ = ["BACKEND", "__version__"]
