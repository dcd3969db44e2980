"""Optimal covariant tomography of quantum operations.

Submodules:

* :mod:`optomo.opalg` - vectorization, partial traces, Weyl operators, Haar sampling
* :mod:`optomo.frames` - operator frames, optimal duals and variance functionals
* :mod:`optomo.tester` - Choi operators, testers and their ancilla realizations
* :mod:`optomo.covopt` - covariant seeds, Schur-block coefficients and optimal designs
* :mod:`optomo.simkit` - Monte Carlo simulation of the double-Bell scheme
* :mod:`optomo.cli` - command line interface
"""

from .errors import DimensionError, IncompleteError, TomographyError, ValidationError
from .kernels import DEFAULT_BACKEND, available_backends

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_BACKEND",
    "DimensionError",
    "IncompleteError",
    "TomographyError",
    "ValidationError",
    "available_backends",
]
