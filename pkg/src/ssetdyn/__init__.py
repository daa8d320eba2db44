"""Dynamical phase diagrams of quantum-jump trajectories for an SSET
coupled to a resonator: exact tilted-generator spectra, Bessel-series
mean-field theory, and stochastic trajectory sampling."""

from .liouvillian import CountingChannel, SparseSuperoperator, apply, assemble
from .model import ModelParams, PaperParams, StateSpace, build_basis, reduce

__all__ = [
    "CountingChannel",
    "ModelParams",
    "PaperParams",
    "SparseSuperoperator",
    "StateSpace",
    "apply",
    "assemble",
    "build_basis",
    "reduce",
]

__version__ = "0.1.0"
