"""Diffusions with natural boundaries: Feller classification, kernels,
Schroedinger bridges, Feynman-Kac path integrals, simulation, hydrodynamic
fields and spectral equivalence classes."""

from ._natbound import *  # noqa: F401,F403
from ._natbound import (  # noqa: F401
    DomainError,
    Error,
    InconclusiveError,
    InvariantError,
    NumericalError,
    ParseError,
    RangeError,
)

__version__ = "0.1.0"
