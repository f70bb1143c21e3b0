"""Time propagation, survival amplitudes, spectra and vibronic densities.

Cavity leakage enters as a non-Hermitian term -i (kappa/2) * n_ph added to
the Hamiltonian (in the first excitation manifold this reproduces the
quantum-jump description of survival amplitudes, and linewidths are all the
absorption spectrum needs).  Propagation is spectral for the dense matrices
used here (dimension <= 4096) and falls back to Krylov stepping beyond that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cute import CavityParams, build_H0
from .vibronic import VibronicStructure, ho_wavefunctions

DENSE_DIM_LIMIT = 4096


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid 0..t_max with n_steps intervals (atomic units).

    The frequency resolution of spectra computed on this grid is
    delta_omega = 2 pi / t_max; the Nyquist frequency is pi / dt.
    """

    t_max: float
    n_steps: int

    def __post_init__(self):
        if self.t_max <= 0:
            raise ValueError(f"t_max must be positive, got {self.t_max}")
        if self.n_steps < 2:
            raise ValueError(f"n_steps must be >= 2, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.t_max / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.n_steps + 1)

    @property
    def delta_omega(self) -> float:
        return 2.0 * math.pi / self.t_max

    @property
    def omega_nyquist(self) -> float:
        return math.pi / self.dt


@dataclass
class Trajectory:
    """Propagated amplitudes on a time grid.

    c_t is the survival amplitude <ref|psi(t)> (ref defaults to psi0);
    norm_t the state norm, constant without leakage and non-increasing
    with it.
    """

    grid: TimeGrid
    c_t: np.ndarray
    norm_t: np.ndarray
    states: np.ndarray | None = None
    params: dict = field(default_factory=dict)


def effective_hamiltonian(H, kappa: float, n_ph) -> np.ndarray:
    """H - i (kappa/2) diag(n_ph), the leaky-cavity effective generator."""
    H = np.asarray(H, dtype=complex)
    if kappa == 0.0:
        return H
    if n_ph is None:
        raise ValueError("kappa > 0 requires the photon-number diagonal n_ph")
    return H - 0.5j * kappa * np.diag(np.asarray(n_ph, dtype=float))


def propagate(
    H,
    psi0,
    grid: TimeGrid,
    kappa: float = 0.0,
    n_ph=None,
    reference=None,
    keep_states: bool = False,
    method: str = "auto",
) -> Trajectory:
    """Evolve psi0 under H (plus optional photon leakage) over the grid.

    method 'auto' uses the spectral propagator below DENSE_DIM_LIMIT and
    Krylov stepping (scipy expm_multiply) above; 'spectral' and 'krylov'
    force a path.  The survival amplitude is taken against `reference`
    (psi0 by default).
    """
    psi0 = np.asarray(psi0, dtype=complex)
    nrm = np.linalg.norm(psi0)
    if abs(nrm - 1.0) > 1e-8:
        raise ValueError(f"psi0 must be normalized, got ||psi0|| = {nrm}")
    if kappa < 0:
        raise ValueError(f"kappa must be >= 0, got {kappa}")
    ref = psi0 if reference is None else np.asarray(reference, dtype=complex)

    dim = psi0.size
    if method == "auto":
        method = "spectral" if dim <= DENSE_DIM_LIMIT else "krylov"

    if method not in ("spectral", "krylov"):
        raise ValueError(f"unknown method {method!r}")

    traj = None
    if method == "spectral":
        H_eff = effective_hamiltonian(np.asarray(H.toarray() if sp.issparse(H) else H), kappa, n_ph)
        try:
            traj = _propagate_spectral(H_eff, psi0, ref, grid, keep_states)
        except _IllConditionedEig:
            method = "krylov"  # near-defective eigenbasis: step instead
    if traj is None:
        H_eff = H if sp.issparse(H) else sp.csr_matrix(np.asarray(H))
        H_eff = H_eff.astype(complex)
        if kappa != 0.0:
            if n_ph is None:
                raise ValueError("kappa > 0 requires the photon-number diagonal n_ph")
            H_eff = H_eff - 0.5j * kappa * sp.diags(np.asarray(n_ph, dtype=float))
        traj = _propagate_krylov(H_eff.tocsc(), psi0, ref, grid, keep_states)

    if not np.all(np.isfinite(traj.c_t)):
        raise RuntimeError("propagation produced non-finite amplitudes")
    traj.params.update({"kappa": kappa, "method": method, "dim": dim})
    return traj


class _IllConditionedEig(Exception):
    """Non-normal eigenbasis too ill-conditioned for the spectral propagator."""


def _propagate_spectral(H_eff, psi0, ref, grid, keep_states) -> Trajectory:
    hermitian = np.allclose(H_eff, H_eff.conj().T, atol=1e-12)
    if hermitian:
        evals, V = np.linalg.eigh(H_eff)
        a = V.conj().T @ psi0
        r = V.conj().T @ ref
    else:
        evals, V = sla.eig(H_eff)
        if np.linalg.cond(V) > 1e12:
            raise _IllConditionedEig
        a = np.linalg.solve(V, psi0)
        r = V.conj().T @ ref

    times = grid.times
    nt = times.size
    dim = evals.size
    c_t = np.empty(nt, dtype=complex)
    states = np.empty((nt, dim), dtype=complex) if keep_states else None
    need_norm = keep_states or not hermitian
    norm_t = np.empty(nt) if need_norm else np.full(nt, np.linalg.norm(psi0))

    # chunk over time so the (nt_chunk, dim) phase buffers stay bounded
    weights = r.conj() * a
    chunk = max(1, 2_000_000 // max(1, dim))
    for lo in range(0, nt, chunk):
        hi = min(nt, lo + chunk)
        phases = np.exp(-1j * np.outer(times[lo:hi], evals))
        c_t[lo:hi] = phases @ weights
        if need_norm:
            blk = (phases * a) @ V.T
            if keep_states:
                states[lo:hi] = blk
            norm_t[lo:hi] = np.linalg.norm(blk, axis=1)
    return Trajectory(grid=grid, c_t=c_t, norm_t=norm_t, states=states)


def _propagate_krylov(H_eff, psi0, ref, grid, keep_states) -> Trajectory:
    dt = grid.dt
    nt = grid.n_steps + 1
    c_t = np.empty(nt, dtype=complex)
    norm_t = np.empty(nt)
    states = np.empty((nt, psi0.size), dtype=complex) if keep_states else None
    psi = psi0.copy()
    stepper = -1j * dt * H_eff
    for n in range(nt):
        c_t[n] = np.vdot(ref, psi)
        norm_t[n] = np.linalg.norm(psi)
        if states is not None:
            states[n] = psi
        if n < nt - 1:
            psi = spla.expm_multiply(stepper, psi)
    return Trajectory(grid=grid, c_t=c_t, norm_t=norm_t, states=states)


def photon_survival(vs: VibronicStructure, cav: CavityParams, grid: TimeGrid) -> Trajectory:
    """Survival amplitude of the bare photon state under the zeroth block."""
    H0 = build_H0(vs, cav)
    psi0 = np.zeros(H0.shape[0], dtype=complex)
    psi0[0] = 1.0
    n_ph = np.zeros(H0.shape[0])
    n_ph[0] = 1.0
    return propagate(H0, psi0, grid, kappa=cav.kappa, n_ph=n_ph)


def filter_response(vs: VibronicStructure, cav: CavityParams, grid: TimeGrid) -> np.ndarray:
    """Optical-filter field of the N->inf cavity, -i <1|exp(-i H0_eff t)|1>.

    This is the effective weak driving field a molecular ensemble outside the
    cavity would need in order to reproduce the intracavity molecular
    dynamics; in frequency space the polaritons act as optical filters.
    """
    return -1j * photon_survival(vs, cav, grid).c_t


def spectrum(
    c_t: np.ndarray,
    grid: TimeGrid,
    omega: np.ndarray | None = None,
    window: str | None = "halfcos10",
    normalize: bool = True,
):
    """Absorption spectrum A(w) ~ Re sum_n dt c(t_n) e^{i w t_n}.

    The discrete transform is evaluated either on the natural FFT bins
    (omega=None, spacing ~ 2 pi / t_max) or at arbitrary frequencies below
    Nyquist.  window 'halfcos10' applies a half-cosine taper over the final
    10% of the grid (suppresses truncation ringing); pass None for
    bit-reproducible comparisons against the pole oracle.  The output is
    normalized to unit maximum unless normalize=False.
    """
    c_t = np.asarray(c_t, dtype=complex)
    nt = grid.n_steps + 1
    if c_t.size != nt:
        raise ValueError(f"c_t has {c_t.size} samples, grid expects {nt}")
    data = c_t * _window(window, nt)
    dt = grid.dt

    if omega is None:
        amps = nt * np.fft.ifft(data)  # sum_n c_n exp(+2 pi i j n / nt)
        n_keep = nt // 2 + 1
        omega = 2.0 * math.pi * np.arange(n_keep) / (nt * dt)
        A = dt * amps[:n_keep].real
    else:
        omega = np.asarray(omega, dtype=float)
        if omega.size and np.max(np.abs(omega)) > grid.omega_nyquist:
            raise ValueError(
                f"grid too coarse for requested frequencies: |omega| up to "
                f"{np.max(np.abs(omega)):.6g} exceeds Nyquist {grid.omega_nyquist:.6g}"
            )
        times = grid.times
        A = np.empty(omega.size)
        chunk = max(1, 2_000_000 // nt)
        for lo in range(0, omega.size, chunk):
            hi = min(omega.size, lo + chunk)
            kernel = np.exp(1j * np.outer(omega[lo:hi], times))
            A[lo:hi] = dt * (kernel @ data).real

    if normalize:
        peak = np.max(np.abs(A))
        if peak > 0:
            A = A / peak
    return omega, A


def _window(window: str | None, nt: int) -> np.ndarray:
    if window is None:
        return np.ones(nt)
    if window == "halfcos10":
        w = np.ones(nt)
        start = int(math.floor(0.9 * (nt - 1)))
        tail = np.arange(nt - start)
        span = max(1, nt - 1 - start)
        w[start:] = np.cos(0.5 * math.pi * tail / span)
        return w
    raise ValueError(f"unknown window {window!r}")


def pole_decomposition(H_eff, entry: int = 0):
    """Poles and weights of <entry| exp(-i H_eff t) |entry>.

    For Hermitian H_eff the weights are |<entry|v_j>|^2; with photon leakage
    the matrix is complex symmetric and the weights are the bilinear
    residues v_j[entry]^2 / (v_j^T v_j).  Provides the sum-over-poles oracle
    c(t) = sum_j w_j exp(-i lambda_j t) against which transforms are checked.
    """
    H_eff = np.asarray(H_eff)
    if np.allclose(H_eff, H_eff.conj().T, atol=1e-12):
        evals, V = np.linalg.eigh(H_eff)
        weights = np.abs(V[entry, :]) ** 2
        return evals.astype(complex), weights.astype(complex)
    if not np.allclose(H_eff, H_eff.T, atol=1e-12):
        raise ValueError("pole decomposition expects Hermitian or complex-symmetric input")
    evals, V = sla.eig(H_eff)
    norms = np.einsum("ij,ij->j", V, V)
    if np.min(np.abs(norms)) < 1e-12:
        raise RuntimeError("defective eigenvector pair in pole decomposition")
    weights = V[entry, :] ** 2 / norms
    return evals, weights


def pole_spectrum(lambdas, weights, omega, grid: TimeGrid, normalize: bool = True):
    """Closed-form discrete transform of sum_j w_j exp(-i lambda_j t).

    Uses the same left-sum convention as spectrum() (geometric series over
    the n_steps + 1 samples), so the two curves are directly comparable.
    """
    omega = np.asarray(omega, dtype=float)
    dt = grid.dt
    M = grid.n_steps
    A = np.zeros(omega.size, dtype=complex)
    for lam, w in zip(lambdas, weights):
        r = np.exp(1j * (omega - lam) * dt)
        rM = r ** (M + 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            geo = np.where(np.abs(1.0 - r) > 1e-14, (1.0 - rM) / (1.0 - r), M + 1.0)
        A += w * geo
    A = dt * A.real
    if normalize:
        peak = np.max(np.abs(A))
        if peak > 0:
            A = A / peak
    return A


def find_peaks(omega: np.ndarray, A: np.ndarray, min_height: float = 0.0):
    """Local maxima with parabolic refinement; returns (positions, heights)."""
    pos, hts = [], []
    for i in range(1, A.size - 1):
        if A[i] > A[i - 1] and A[i] >= A[i + 1] and A[i] > min_height:
            denom = A[i - 1] - 2.0 * A[i] + A[i + 1]
            if denom < 0:
                shift = 0.5 * (A[i - 1] - A[i + 1]) / denom
                pos.append(omega[i] + shift * (omega[i] - omega[i - 1]))
                hts.append(A[i] - 0.25 * (A[i - 1] - A[i + 1]) * shift)
            else:
                pos.append(omega[i])
                hts.append(A[i])
    return np.array(pos), np.array(hts)


def photonic_weights(vs: VibronicStructure, cav: CavityParams):
    """Eigenvalues of the Hermitian zeroth block and |<1|eigvec>|^2."""
    evals, V = np.linalg.eigh(build_H0(vs, cav))
    return evals, V[0, :] ** 2


@dataclass
class ModeDensity:
    """Vibrational density of one mode within an eigenstate's excited sector."""

    q: np.ndarray
    rho: np.ndarray
    quanta_marginal: np.ndarray
    displacement: float


def dark_state_density(
    vs: VibronicStructure,
    cav: CavityParams,
    which: int,
    q_grids: list[np.ndarray] | None = None,
    n_points: int = 2048,
) -> list[ModeDensity]:
    """Per-mode vibrational densities of a zeroth-block eigenstate.

    The excited-sector amplitudes of eigenstate `which` (ascending energy)
    are reshaped onto the per-mode quanta tensor; for each mode the
    coordinate density is the proper quantum marginal

        rho(q) = sum_rest | sum_n c[.. n ..] chi_n(q - d) |^2

    over excited-surface oscillator functions chi displaced by d, normalized
    to unit integral.  Polariton states give densities near the ground-
    surface minimum (Franck-Condon region); relaxed dark states sit at the
    displaced (Stokes-shifted) minimum.
    """
    modes = vs.model.modes
    if not modes:
        raise ValueError("density requires at least one vibrational mode")
    evals, V = np.linalg.eigh(build_H0(vs, cav))
    if not 0 <= which < evals.size:
        raise ValueError(f"eigenstate index {which} out of range 0..{evals.size - 1}")
    c = V[1:, which]
    weight = float(np.dot(c, c))
    if weight < 1e-12:
        raise ValueError(f"eigenstate {which} has no excited-sector weight")

    shape = tuple(mode.n_max + 1 for mode in modes)
    tensor = np.zeros(shape)
    for i, quanta in enumerate(vs.quanta):
        tensor[quanta] = c[i]

    out = []
    for ax, mode in enumerate(modes):
        d = mode.displacement
        if q_grids is not None:
            q = np.asarray(q_grids[ax], dtype=float)
        else:
            turning = math.sqrt((2 * mode.n_max + 1) / mode.frequency)
            lo = min(0.0, d) - 1.5 * turning
            hi = max(0.0, d) + 1.5 * turning
            q = np.linspace(lo, hi, n_points)
        chi = ho_wavefunctions(mode.n_max, q, mode.frequency, center=d)
        amp = np.tensordot(chi, np.moveaxis(tensor, ax, 0), axes=(0, 0))
        rho = np.sum(np.abs(amp.reshape(q.size, -1)) ** 2, axis=1)
        norm = np.trapezoid(rho, q)
        if norm > 0:
            rho = rho / norm
        marg = np.sum(
            np.abs(np.moveaxis(tensor, ax, 0).reshape(shape[ax], -1)) ** 2, axis=1
        )
        marg = marg / weight
        out.append(ModeDensity(q=q, rho=rho, quanta_marginal=marg, displacement=d))
    return out


def write_trajectory_csv(path, traj: Trajectory, header: dict | None = None):
    """CSV columns t, re_c, im_c, norm with a '#'-prefixed parameter header."""
    lines = [f"# {k} = {v}" for k, v in (header or {}).items()]
    lines.append("t,re_c,im_c,norm")
    for t, c, n in zip(traj.grid.times, traj.c_t, traj.norm_t):
        lines.append(f"{t:.17g},{c.real:.17g},{c.imag:.17g},{n:.17g}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_spectrum_csv(path, omega, intensity, header: dict | None = None):
    """CSV columns omega, intensity with a '#'-prefixed parameter header."""
    lines = [f"# {k} = {v}" for k, v in (header or {}).items()]
    lines.append("omega,intensity")
    for w, a in zip(omega, intensity):
        lines.append(f"{w:.17g},{a:.17g}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def atomic_write_text(path, text: str):
    """Write via a temp file and rename, so outputs are never half-written."""
    import os
    import tempfile

    path = str(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp_", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise
