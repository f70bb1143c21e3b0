"""Brute-force tensor-product solver and its symmetric-subspace projection."""

import itertools
import math

import numpy as np
import pytest

from polariton.cute import CavityParams, assemble_truncated
from polariton.dynamics import TimeGrid, propagate
from polariton.errors import DimensionGuardError
from polariton.fockspace import enumerate_basis
from polariton.oracle import (
    build_full_H,
    embed_block0,
    oracle_survival,
    oracle_survival_tensor,
    permutation_operator,
    symmetrize,
    symmetrizer,
    tensor_basis,
)
from polariton.vibronic import MolecularModel, VibrationalMode, build_vibronic


def vibronic_fixture(s=0.7, omega=0.012, n_max=1, gap=0.1):
    return build_vibronic(
        MolecularModel(electronic_gap=gap, modes=(VibrationalMode(omega, s, n_max),))
    )


def test_jaynes_cummings_splitting():
    vs = build_vibronic(MolecularModel(electronic_gap=0.1))
    cav = CavityParams(omega_c=0.1, g_sqrt_n=0.004, n_molecules=1)
    H, basis = build_full_H(vs, cav, 1, 1)
    evals = np.linalg.eigvalsh(H.toarray())
    np.testing.assert_allclose(evals, [0.1 - cav.g, 0.1 + cav.g], atol=1e-15)


def test_hamiltonian_commutes_with_swaps():
    vs = vibronic_fixture(n_max=1)
    cav = CavityParams(omega_c=0.11, g_sqrt_n=0.02, n_molecules=3)
    H, basis = build_full_H(vs, cav, 3, 1)
    for perm in itertools.permutations(range(3)):
        P = permutation_operator(basis, perm)
        assert abs(H @ P - P @ H).max() < 1e-12


def test_symmetrizer_isometry_and_projection():
    vs = vibronic_fixture(n_max=1)
    cav = CavityParams(omega_c=0.11, g_sqrt_n=0.02, n_molecules=2)
    basis = tensor_basis(2, vs.m, 1)
    sym = enumerate_basis(2, 1, vs.m, 2)
    T = symmetrizer(basis, sym)
    np.testing.assert_allclose((T.conj().T @ T).toarray(), np.eye(sym.dim), atol=1e-14)

    # identical single-particle states are already symmetric
    psi = np.zeros(basis.dim)
    psi[basis.index[((0, 0), 1)]] = 1.0
    Tt, proj = symmetrize(psi, basis, sym)
    np.testing.assert_allclose(T @ proj, psi, atol=1e-14)

    # antisymmetric combination projects to zero
    psi = np.zeros(basis.dim)
    psi[basis.index[((0, 1), 1)]] = 1 / math.sqrt(2)
    psi[basis.index[((1, 0), 1)]] = -1 / math.sqrt(2)
    _, proj = symmetrize(psi, basis, sym)
    assert np.linalg.norm(proj) < 1e-14


@pytest.mark.parametrize("N,m,n_exc", [(2, 2, 1), (3, 2, 1), (2, 3, 1), (2, 2, 2)])
def test_symmetric_subspace_dimension_formula(N, m, n_exc):
    # rank of the symmetrizer equals the stars-and-bars count enumerated by
    # the occupation basis
    basis = tensor_basis(N, m, n_exc)
    sym = enumerate_basis(N, n_exc, m, q_max=N)
    T = symmetrizer(basis, sym)
    gram = (T.conj().T @ T).toarray()
    assert np.linalg.matrix_rank(gram) == sym.dim


def test_projected_hamiltonian_equals_cute_assembly():
    vs = vibronic_fixture(n_max=1, s=1.2)
    for N in (1, 2, 3):
        cav = CavityParams(omega_c=0.108, g_sqrt_n=0.025, n_molecules=N)
        bh = assemble_truncated(vs, cav, q_max=N)
        H, tb = build_full_H(vs, cav, N, 1)
        T = symmetrizer(tb, bh.basis)
        H_sym = (T.conj().T @ (H @ T)).toarray()
        np.testing.assert_allclose(H_sym, bh.full_matrix(), atol=1e-12)


def test_symmetric_subspace_is_invariant_under_evolution():
    vs = vibronic_fixture(n_max=1)
    cav = CavityParams(omega_c=0.11, g_sqrt_n=0.02, n_molecules=3)
    H, tb = build_full_H(vs, cav, 3, 1)
    sym = enumerate_basis(3, 1, vs.m, 3)
    T = symmetrizer(tb, sym)
    psi_sym = np.zeros(sym.dim, dtype=complex)
    psi_sym[0] = 1.0
    grid = TimeGrid(t_max=800.0, n_steps=64)
    traj = propagate(H, T @ psi_sym, grid, keep_states=True)
    P = (T @ T.conj().T).toarray()
    leak = np.max(np.linalg.norm(traj.states - traj.states @ P.T, axis=1))
    assert leak < 1e-12


@pytest.mark.parametrize("N", [2, 3])
def test_oracle_survival_matches_truncated_propagation(N):
    vs = vibronic_fixture(n_max=1, s=0.9)
    cav = CavityParams(omega_c=0.107, g_sqrt_n=0.02, n_molecules=N)
    bh = assemble_truncated(vs, cav, q_max=N)
    psi_sym = np.zeros(bh.basis.dim, dtype=complex)
    psi_sym[0] = 1.0
    grid = TimeGrid(t_max=1000.0, n_steps=256)
    t_orc = oracle_survival(vs, cav, N, psi_sym, grid)
    t_cut = propagate(bh.full_matrix(), psi_sym, grid)
    assert np.max(np.abs(t_orc.c_t - t_cut.c_t)) < 1e-10


def test_oracle_jc_rabi():
    # N = 1, m = 1, resonant: |c(t)|^2 = cos^2(g t) for the photon start.
    vs = build_vibronic(MolecularModel(electronic_gap=0.1))
    cav = CavityParams(omega_c=0.1, g_sqrt_n=0.005, n_molecules=1)
    sym = enumerate_basis(1, 1, 1, 1)
    psi = np.zeros(sym.dim, dtype=complex)
    psi[0] = 1.0
    grid = TimeGrid(t_max=2 * math.pi / cav.g, n_steps=512)
    traj = oracle_survival(vs, cav, 1, psi, grid)
    np.testing.assert_allclose(
        np.abs(traj.c_t) ** 2, np.cos(cav.g * grid.times) ** 2, atol=1e-10
    )


def test_asymmetric_initial_state_rejected():
    vs = vibronic_fixture(n_max=1)
    cav = CavityParams(omega_c=0.11, g_sqrt_n=0.02, n_molecules=2)
    basis = tensor_basis(2, vs.m, 1)
    psi = np.zeros(basis.dim, dtype=complex)
    psi[basis.index[((0, 2), 0)]] = 1 / math.sqrt(2)
    psi[basis.index[((2, 0), 0)]] = -1 / math.sqrt(2)
    grid = TimeGrid(t_max=10.0, n_steps=4)
    with pytest.raises(ValueError, match="symmetric"):
        oracle_survival_tensor(vs, cav, 2, psi, grid)


def test_embed_block0():
    sym = enumerate_basis(3, 1, 2, 3)
    psi = embed_block0(np.array([1.0, 0.0, 0.0]), sym)
    assert psi[0] == 1.0 and np.all(psi[1:] == 0)
    with pytest.raises(ValueError):
        embed_block0(np.ones(2), sym)


def test_dimension_guards():
    with pytest.raises(DimensionGuardError):
        tensor_basis(5, 2, 1)
    vs = vibronic_fixture()
    with pytest.raises(ValueError):
        build_full_H(vs, CavityParams(0.11, 0.02, 3), 3, 3)
    with pytest.raises(ValueError):
        build_full_H(vs, CavityParams(0.11, 0.02, float("inf")), 3, 1)
