"""Incremental Green's-function kernels, stochastic solvers, and
vortex-sheet statistics for 1-D drift-diffusion and wave problems."""

from .grid import Field, Grid1D

__version__ = "0.1.0"

__all__ = ["Grid1D", "Field", "__version__"]
