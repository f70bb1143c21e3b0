"""Propagation, spectra and densities against analytic and pole oracles."""

import math

import numpy as np
import pytest

from polariton.cute import CavityParams, build_H0
from polariton.dynamics import (
    TimeGrid,
    dark_state_density,
    effective_hamiltonian,
    filter_response,
    find_peaks,
    photon_survival,
    photonic_weights,
    pole_decomposition,
    pole_spectrum,
    propagate,
    spectrum,
    write_spectrum_csv,
    write_trajectory_csv,
)
from polariton.vibronic import MolecularModel, VibrationalMode, build_vibronic

INF = float("inf")


def rk4_propagate(H_eff, psi0, grid):
    """Independent fixed-step 4th-order integrator for cross-checks."""
    dt = grid.dt
    psi = psi0.astype(complex).copy()
    out = [psi.copy()]
    def deriv(p):
        return -1j * (H_eff @ p)
    for _ in range(grid.n_steps):
        k1 = deriv(psi)
        k2 = deriv(psi + 0.5 * dt * k1)
        k3 = deriv(psi + 0.5 * dt * k2)
        k4 = deriv(psi + dt * k3)
        psi = psi + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(psi.copy())
    return np.array(out)


def test_stationary_state_phase():
    H = np.diag([0.1, 0.25, 0.4])
    psi0 = np.array([0.0, 1.0, 0.0], dtype=complex)
    grid = TimeGrid(t_max=100.0, n_steps=200)
    traj = propagate(H, psi0, grid)
    np.testing.assert_allclose(traj.c_t, np.exp(-1j * 0.25 * grid.times), atol=1e-12)
    np.testing.assert_allclose(np.abs(traj.c_t), 1.0, atol=1e-12)


def test_resonant_rabi_oscillation():
    vs = build_vibronic(MolecularModel(electronic_gap=0.1))
    cav = CavityParams(omega_c=0.1, g_sqrt_n=0.02, n_molecules=INF)
    grid = TimeGrid(t_max=2 * math.pi / cav.g_sqrt_n, n_steps=400)
    traj = photon_survival(vs, cav, grid)
    np.testing.assert_allclose(
        np.abs(traj.c_t) ** 2, np.cos(cav.g_sqrt_n * grid.times) ** 2, atol=1e-12
    )


def test_pure_photon_decay():
    vs = build_vibronic(MolecularModel(electronic_gap=0.1))
    cav = CavityParams(omega_c=0.1, g_sqrt_n=0.0, n_molecules=INF, kappa=2e-3)
    grid = TimeGrid(t_max=3000.0, n_steps=300)
    traj = photon_survival(vs, cav, grid)
    np.testing.assert_allclose(
        np.abs(traj.c_t) ** 2, np.exp(-cav.kappa * grid.times), atol=1e-12
    )
    assert np.all(np.diff(traj.norm_t) <= 1e-12)


def test_unitarity_without_leakage():
    rng = np.random.default_rng(3)
    H = rng.normal(size=(9, 9))
    H = H + H.T
    psi0 = rng.normal(size=9) + 1j * rng.normal(size=9)
    psi0 /= np.linalg.norm(psi0)
    grid = TimeGrid(t_max=50.0, n_steps=128)
    traj = propagate(H, psi0, grid, keep_states=True)
    assert np.max(np.abs(np.linalg.norm(traj.states, axis=1) - 1.0)) < 1e-10
    assert abs(traj.c_t[0] - 1.0) < 1e-12


def test_linearity():
    rng = np.random.default_rng(5)
    H = rng.normal(size=(6, 6))
    H = H + H.T
    e = np.eye(6, dtype=complex)
    grid = TimeGrid(t_max=20.0, n_steps=50)
    s1 = propagate(H, e[0], grid, keep_states=True).states
    s2 = propagate(H, e[3], grid, keep_states=True).states
    both = propagate(H, (e[0] + e[3]) / math.sqrt(2), grid, keep_states=True).states
    np.testing.assert_allclose(both, (s1 + s2) / math.sqrt(2), atol=1e-10)


def test_spectral_vs_rk4_on_rabi():
    # 10 Rabi periods, fixed-step reference fine enough for 1e-8 agreement
    vs = build_vibronic(MolecularModel(electronic_gap=0.1))
    cav = CavityParams(omega_c=0.1, g_sqrt_n=0.02, n_molecules=INF)
    H = build_H0(vs, cav)
    psi0 = np.array([1.0, 0.0], dtype=complex)
    grid = TimeGrid(t_max=10 * math.pi / cav.g_sqrt_n, n_steps=40000)
    traj = propagate(H, psi0, grid)
    ref = rk4_propagate(H, psi0, grid)[:, 0]
    assert np.max(np.abs(traj.c_t - ref)) < 1e-8


def test_krylov_path_matches_spectral():
    rng = np.random.default_rng(11)
    H = rng.normal(size=(12, 12))
    H = H + H.T
    psi0 = rng.normal(size=12) + 0j
    psi0 /= np.linalg.norm(psi0)
    grid = TimeGrid(t_max=30.0, n_steps=60)
    a = propagate(H, psi0, grid, method="spectral")
    b = propagate(H, psi0, grid, method="krylov")
    np.testing.assert_allclose(a.c_t, b.c_t, atol=1e-10)
    # and with leakage
    n_ph = np.zeros(12)
    n_ph[0] = 1.0
    a = propagate(H, psi0, grid, kappa=0.05, n_ph=n_ph, method="spectral")
    b = propagate(H, psi0, grid, kappa=0.05, n_ph=n_ph, method="krylov")
    np.testing.assert_allclose(a.c_t, b.c_t, atol=1e-10)


def test_propagate_input_validation():
    H = np.eye(2)
    grid = TimeGrid(t_max=1.0, n_steps=2)
    with pytest.raises(ValueError, match="normalized"):
        propagate(H, np.array([2.0, 0.0]), grid)
    with pytest.raises(ValueError, match="n_ph"):
        propagate(H, np.array([1.0, 0.0]), grid, kappa=0.1)


def test_filter_response_bare_cavity():
    vs = build_vibronic(MolecularModel(electronic_gap=0.1))
    cav = CavityParams(omega_c=0.13, g_sqrt_n=0.0, n_molecules=INF)
    grid = TimeGrid(t_max=100.0, n_steps=100)
    D = filter_response(vs, cav, grid)
    np.testing.assert_allclose(D, -1j * np.exp(-1j * 0.13 * grid.times), atol=1e-12)
    assert D[0] == pytest.approx(-1j)


def test_filter_response_peaks_at_polaritons():
    vs = build_vibronic(
        MolecularModel(electronic_gap=0.1, modes=(VibrationalMode(0.012, 0.4, 2),))
    )
    cav = CavityParams(omega_c=0.11, g_sqrt_n=0.02, n_molecules=INF, kappa=0.001)
    grid = TimeGrid(t_max=2**14, n_steps=2**14)
    D = filter_response(vs, cav, grid)
    omega = np.arange(0.06, 0.16, grid.delta_omega)
    om, A = spectrum(1j * D, grid, omega=omega, window=None)
    peaks, heights = find_peaks(om, A, min_height=0.2)
    evals, wts = photonic_weights(vs, cav)
    polaritons = evals[wts > 0.2]
    assert len(peaks) >= len(polaritons)
    # neighbouring-line tails pull peak maxima by O(kappa^2 / splitting)
    for E in polaritons:
        assert np.min(np.abs(peaks - E)) < 2e-4


def test_spectrum_lorentzian_center_and_width():
    grid = TimeGrid(t_max=2**15, n_steps=2**15)
    w0, kappa = 0.11, 0.002
    c_t = np.exp(-1j * w0 * grid.times - 0.5 * kappa * grid.times)
    omega = np.arange(0.08, 0.14, grid.delta_omega / 4)
    om, A = spectrum(c_t, grid, omega=omega, window=None)
    peaks, heights = find_peaks(om, A, min_height=0.5)
    assert len(peaks) == 1
    assert abs(peaks[0] - w0) < 1e-7
    above = om[A > 0.5 * heights[0]]
    fwhm = above[-1] - above[0]
    assert fwhm == pytest.approx(kappa, rel=0.02)


def test_spectrum_rabi_doublet():
    vs = build_vibronic(MolecularModel(electronic_gap=0.1))
    cav = CavityParams(omega_c=0.1, g_sqrt_n=0.004, n_molecules=INF, kappa=0.0008)
    grid = TimeGrid(t_max=2**15, n_steps=2**15)
    traj = photon_survival(vs, cav, grid)
    omega = np.arange(0.09, 0.11, grid.delta_omega)
    om, A = spectrum(traj.c_t, grid, omega=omega, window=None)
    peaks, _ = find_peaks(om, A, min_height=0.3)
    # each line is pulled ~kappa^2/(8 splitting) by the partner's tail
    np.testing.assert_allclose(
        np.sort(peaks), [0.1 - cav.g_sqrt_n, 0.1 + cav.g_sqrt_n], atol=5e-5
    )


def test_spectrum_matches_pole_oracle():
    # transform of the propagated amplitude vs the closed-form geometric-sum
    # spectrum built from the eigen-poles of the same effective generator
    vs = build_vibronic(
        MolecularModel(electronic_gap=0.1, modes=(VibrationalMode(0.01, 0.8, 3),))
    )
    cav = CavityParams(omega_c=0.112, g_sqrt_n=0.02, n_molecules=INF, kappa=0.0015)
    grid = TimeGrid(t_max=2**15, n_steps=2**15)
    traj = photon_survival(vs, cav, grid)
    omega = np.arange(0.07, 0.17, grid.delta_omega)
    om, A = spectrum(traj.c_t, grid, omega=omega, window=None)

    H0 = build_H0(vs, cav)
    n_ph = np.zeros(H0.shape[0])
    n_ph[0] = 1.0
    lam, w = pole_decomposition(effective_hamiltonian(H0, cav.kappa, n_ph))
    A_o = pole_spectrum(lam, w, om, grid)

    pa, ha = find_peaks(om, A, min_height=0.05)
    po, ho = find_peaks(om, A_o, min_height=0.05)
    assert len(pa) == len(po) >= 3
    np.testing.assert_allclose(pa, po, rtol=1e-6)
    np.testing.assert_allclose(ha / ho, 1.0, atol=1e-6)


def test_spectrum_default_grid_and_window():
    grid = TimeGrid(t_max=1000.0, n_steps=1000)
    c_t = np.exp(-1j * 0.3 * grid.times - 0.002 * grid.times)
    om, A = spectrum(c_t, grid)
    assert om[0] == 0.0 and len(om) == len(A)
    assert np.max(np.abs(A)) == pytest.approx(1.0)
    with pytest.raises(ValueError, match="coarse"):
        spectrum(c_t, grid, omega=np.array([10.0]))
    with pytest.raises(ValueError, match="window"):
        spectrum(c_t, grid, window="bogus")


def test_pole_decomposition_hermitian_weights():
    vs = build_vibronic(
        MolecularModel(electronic_gap=0.1, modes=(VibrationalMode(0.01, 0.5, 2),))
    )
    cav = CavityParams(omega_c=0.11, g_sqrt_n=0.015, n_molecules=INF)
    H0 = build_H0(vs, cav)
    lam, w = pole_decomposition(H0)
    evals, wts = photonic_weights(vs, cav)
    np.testing.assert_allclose(lam.real, evals, atol=1e-13)
    np.testing.assert_allclose(w.real, wts, atol=1e-13)
    assert np.sum(w) == pytest.approx(1.0)


def test_density_decoupled_limit_is_displaced_gaussian():
    mode = VibrationalMode(0.02, 2.0, 6)
    vs = build_vibronic(MolecularModel(electronic_gap=0.1, modes=(mode,)))
    cav = CavityParams(omega_c=0.2, g_sqrt_n=0.0, n_molecules=INF)
    # with g = 0 eigenstates are |1>, |e_1>, ...; pick |e_1> (lowest excited)
    evals, V = np.linalg.eigh(build_H0(vs, cav))
    idx = int(np.argmin(np.abs(evals - vs.omega_e[0])))
    dens = dark_state_density(vs, cav, idx)[0]
    d = mode.displacement
    ref = math.sqrt(mode.frequency / math.pi) * np.exp(-mode.frequency * (dens.q - d) ** 2)
    np.testing.assert_allclose(dens.rho, ref, atol=1e-10)
    assert dens.quanta_marginal[0] == pytest.approx(1.0)


def test_density_marginals_normalized_and_errors():
    vs = build_vibronic(
        MolecularModel(
            electronic_gap=0.1,
            modes=(VibrationalMode(0.01, 0.3, 2), VibrationalMode(0.002, 4.0, 8)),
        )
    )
    cav = CavityParams(omega_c=0.12, g_sqrt_n=0.01, n_molecules=INF)
    densities = dark_state_density(vs, cav, 1)
    for dens in densities:
        assert dens.quanta_marginal.sum() == pytest.approx(1.0)
        assert np.trapezoid(dens.rho, dens.q) == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(ValueError):
        dark_state_density(vs, cav, 999)


def test_trajectory_csv_roundtrip(tmp_path):
    vs = build_vibronic(MolecularModel(electronic_gap=0.1))
    cav = CavityParams(omega_c=0.1, g_sqrt_n=0.01, n_molecules=INF, kappa=0.001)
    grid = TimeGrid(t_max=100.0, n_steps=10)
    traj = photon_survival(vs, cav, grid)
    p = tmp_path / "traj.csv"
    write_trajectory_csv(p, traj, header={"alpha": 1, "beta": "x"})
    lines = p.read_text().splitlines()
    assert lines[0] == "# alpha = 1"
    assert lines[2] == "t,re_c,im_c,norm"
    data = np.loadtxt(lines[3:], delimiter=",")
    assert data.shape == (11, 4)
    np.testing.assert_allclose(data[:, 1] + 1j * data[:, 2], traj.c_t, atol=1e-15)

    p2 = tmp_path / "spec.csv"
    write_spectrum_csv(p2, np.array([0.1, 0.2]), np.array([1.0, 0.5]), header={"k": "v"})
    assert p2.read_text().splitlines()[1] == "omega,intensity"
