"""Collective molecular-polariton dynamics with systematic 1/N corrections.

Simulates N identical molecules coupled to one cavity mode in the
permutation-symmetric subspace: exact N -> infinity reference dynamics from
the collective zeroth block, finite-N block-tridiagonal truncations, a 1/N
perturbative expansion of survival amplitudes, dark-state pumping rates, and
a brute-force small-N solver used as the correctness oracle.
"""

from .cute import (
    BlockHamiltonian,
    CavityParams,
    assemble_high_excitation,
    assemble_truncated,
    build_H0,
    build_H1k,
    build_v0k,
)
from .dynamics import TimeGrid, Trajectory, filter_response, propagate, spectrum
from .errors import DimensionGuardError
from .fockspace import SymBasis, SymState, conserved_check, enumerate_basis, map_operator
from .perturbation import ExpansionResult, radiative_pumping_rate, survival_correction
from .vibronic import MolecularModel, VibrationalMode, VibronicStructure, build_vibronic

__all__ = [
    "BlockHamiltonian",
    "CavityParams",
    "DimensionGuardError",
    "ExpansionResult",
    "MolecularModel",
    "SymBasis",
    "SymState",
    "TimeGrid",
    "Trajectory",
    "VibrationalMode",
    "VibronicStructure",
    "assemble_high_excitation",
    "assemble_truncated",
    "build_H0",
    "build_H1k",
    "build_v0k",
    "build_vibronic",
    "conserved_check",
    "enumerate_basis",
    "filter_response",
    "map_operator",
    "propagate",
    "radiative_pumping_rate",
    "spectrum",
    "survival_correction",
]

__version__ = "0.1.0"
