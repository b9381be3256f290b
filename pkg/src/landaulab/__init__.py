"""Numerical laboratory for the inhomogeneous Landau equation.

The subpackages follow the computational pipeline: pointwise kernels,
mollified coefficients, velocity/space grids, the bilinear collision
operator, its linearization, weighted functionals, time evolution,
empirical probes and the scenario layer in :mod:`landaulab.lab`.
"""
from . import errors
from .kernels import CutoffSpec, ModelSpec, Potential, WeightSpec

__version__ = "0.1.0"

__all__ = ["CutoffSpec", "ModelSpec", "Potential", "WeightSpec", "errors", "__version__"]
