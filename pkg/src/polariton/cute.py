"""Assembly of the collective/single-molecule partitioned Hamiltonians.

The cavity couples to the bright combination of all N molecules with the
collective strength g*sqrt(N), while processes that leave vibrational quanta
on ground-electronic molecules carry only the single-molecule g.  In the
symmetric basis ordered by the quasi index this gives a block-tridiagonal
matrix: dense diagonal blocks H_q holding all collective couplings, and thin
off-diagonal couplings v_q of strength g between neighbouring blocks.

This module builds

  * the (m+1) x (m+1) zeroth block H0 (photon + singly-excited states),
  * its quasi = 1 sub-blocks H1k (shifted by omega_g[k], coupling
    g*sqrt(N-1)) and the single-molecule coupling matrices v0k,
  * the truncated block Hamiltonian at any order q_max from the generic
    second-quantized mapping (the hand-written forms above are regression
    fixtures, not the source of truth),
  * the zero-temperature high-excitation ladder (blocks indexed by photon
    number at quasi = 0).

N = infinity is a first-class sentinel (math.inf): inter-block couplings
vanish identically and collective factors sqrt(N - q)/sqrt(N) become 1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DimensionGuardError
from .fockspace import SymBasis, enumerate_basis, map_operator
from .vibronic import VibronicStructure

HERMITICITY_TOL = 1e-12


@dataclass(frozen=True)
class CavityParams:
    """Cavity frequency, collective coupling and molecule number.

    g_sqrt_n is the collective coupling g*sqrt(N), the quantity held fixed as
    N grows; the single-molecule g = g_sqrt_n / sqrt(N) is derived (zero at
    N = infinity).  kappa is the cavity amplitude leakage rate.
    """

    omega_c: float
    g_sqrt_n: float
    n_molecules: float
    kappa: float = 0.0

    def __post_init__(self):
        if self.g_sqrt_n < 0:
            raise ValueError(f"g_sqrt_n must be >= 0, got {self.g_sqrt_n}")
        if self.kappa < 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")
        N = self.n_molecules
        if not math.isinf(N):
            if N < 1 or N != int(N):
                raise ValueError(f"n_molecules must be a positive integer or inf, got {N}")
            object.__setattr__(self, "n_molecules", int(N))

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.n_molecules)

    @property
    def g(self) -> float:
        """Single-molecule coupling g_sqrt_n / sqrt(N); zero in the N->inf limit."""
        if self.is_infinite:
            return 0.0
        return self.g_sqrt_n / math.sqrt(self.n_molecules)


@dataclass(frozen=True)
class BlockHamiltonian:
    """Block-tridiagonal Hamiltonian: dense blocks plus first off-diagonals.

    couplings[q] has shape (dim_q, dim_{q+1}) and sits above the diagonal,
    i.e. it maps block q+1 amplitudes into block q.  labels carries one
    human-readable state label per block entry; basis is the underlying
    SymBasis for finite N (None at N = infinity, where the reference
    occupation is macroscopic).
    """

    blocks: tuple[np.ndarray, ...]
    couplings: tuple[np.ndarray, ...]
    labels: tuple[tuple[str, ...], ...]
    photon_numbers: np.ndarray
    cavity: CavityParams
    vibronic: VibronicStructure = field(repr=False)
    basis: SymBasis | None = None

    @property
    def dim(self) -> int:
        return sum(b.shape[0] for b in self.blocks)

    def full_matrix(self) -> np.ndarray:
        """Dense assembled matrix: blocks on the diagonal, couplings beside it."""
        dim = self.dim
        out = np.zeros((dim, dim), dtype=self.blocks[0].dtype)
        offs = np.cumsum([0] + [b.shape[0] for b in self.blocks])
        for q, blk in enumerate(self.blocks):
            out[offs[q] : offs[q + 1], offs[q] : offs[q + 1]] = blk
        for q, v in enumerate(self.couplings):
            out[offs[q] : offs[q + 1], offs[q + 1] : offs[q + 2]] = v
            out[offs[q + 1] : offs[q + 2], offs[q] : offs[q + 1]] = v.conj().T
        return out


def build_H0(vs: VibronicStructure, cav: CavityParams) -> np.ndarray:
    """Zeroth block over {|1>, |e_1>, ..., |e_m>}: the collective arrowhead.

    H[0, 0] = omega_c, H[0, i] = g*sqrt(N) <phi_g_1|phi_e_i>, H[i, i] =
    omega_e_i.  Exact at any N (the bright channel always carries the full
    sqrt(N)); this matrix alone is the entire problem in the N->inf limit.
    """
    m = vs.m
    H = np.zeros((m + 1, m + 1))
    H[0, 0] = cav.omega_c
    H[0, 1:] = cav.g_sqrt_n * vs.fc[:, 0]
    H[1:, 0] = H[0, 1:]
    H[np.arange(1, m + 1), np.arange(1, m + 1)] = vs.omega_e
    return H


def build_H1k(vs: VibronicStructure, cav: CavityParams, k: int) -> np.ndarray:
    """Quasi = 1 sub-block over {|g_k 1>, |g_k e_1>, ..., |g_k e_m>}.

    Same arrowhead as H0 with the collective coupling reduced to
    g*sqrt(N-1) and every diagonal entry shifted by omega_g[k] (the phonon
    parked on one ground-state molecule).  k is the 1-based vibronic index,
    k >= 2; at N = infinity this is exactly H0 + omega_g[k] * I.
    """
    m = vs.m
    if not 2 <= k <= m:
        raise ValueError(f"k must be in 2..{m}, got {k}")
    H = build_H0(vs, cav)
    if not cav.is_infinite:
        N = cav.n_molecules
        scale = math.sqrt((N - 1) / N)
        H[0, 1:] *= scale
        H[1:, 0] *= scale
    H[np.diag_indices_from(H)] += vs.omega_g[k - 1]
    return H


def build_v0k(vs: VibronicStructure, cav: CavityParams, k: int) -> np.ndarray:
    """Single-molecule coupling between the zeroth block and sub-block 1_k.

    Rows are zeroth-block states, columns sub-block-1_k states; the only
    nonzero column is the photon-type |g_k 1>, entry
    (i, 0) = g <phi_e_i|phi_g_k>: the molecule holding the phonon absorbs or
    re-emits the cavity photon.  Requires finite N (otherwise g = 0 and no
    single-molecule channel exists).
    """
    m = vs.m
    if not 2 <= k <= m:
        raise ValueError(f"k must be in 2..{m}, got {k}")
    if cav.is_infinite:
        raise ValueError("no single-molecule coupling at N = infinity")
    v = np.zeros((m + 1, m + 1))
    v[1:, 0] = cav.g * vs.fc[:, k - 1]
    return v


def hamiltonian_matrix(vs: VibronicStructure, cav: CavityParams, basis: SymBasis) -> sp.csr_matrix:
    """Full second-quantized Hamiltonian on a symmetric basis.

    omega_c a+a + sum_i omega_g_i b+_i b_i + sum_i omega_e_i B+_i B_i
    + g sum_ij fc[i, j] (B+_i b_j a + h.c.), assembled from the generic
    one-body mapping with exact bosonic factors.  Truncation to the basis
    (quasi <= q_max) happens by dropping out-of-basis targets.
    """
    if cav.is_infinite:
        raise ValueError("occupation-number assembly needs finite N; use the N=inf builders")
    m = vs.m
    diag_matter = np.diag(np.concatenate([vs.omega_g, vs.omega_e]))
    H = map_operator(diag_matter, basis)
    H += sp.diags([cav.omega_c * s.n_ph for s in basis.states], format="csr", dtype=complex)
    raise_op = np.zeros((2 * m, 2 * m))
    raise_op[m:, :m] = vs.fc
    M = cav.g * map_operator(raise_op, basis, photon_shift=-1)
    H = H + M + M.conj().T.tocsr()
    H.sum_duplicates()
    H.sort_indices()
    return H


def _check_hermitian(blk: np.ndarray, what: str):
    defect = np.max(np.abs(blk - blk.conj().T)) if blk.size else 0.0
    if defect > HERMITICITY_TOL:
        raise RuntimeError(f"{what} not Hermitian: defect {defect:.3e}")


def _quasi_multisets(m: int, q: int):
    """Deterministic order of phonon configurations: multisets of size q from k = 2..m."""
    return itertools.combinations_with_replacement(range(2, m + 1), q)


def assemble_truncated(
    vs: VibronicStructure, cav: CavityParams, q_max: int, size_cap: int = 500_000
) -> BlockHamiltonian:
    """Truncated block Hamiltonian at CUT-E order q_max (first excitation manifold).

    Finite N: enumerate the quasi <= q_max basis, assemble the full mapped
    Hamiltonian and slice it into diagonal blocks and first off-diagonal
    couplings.  Order 0 keeps collective coupling only; order 1 admits one
    action pair of the single-molecule coupling, and so on.

    N = infinity: couplings vanish identically and block q is the direct sum
    over phonon multisets {k_1..k_q} of H0 shifted by sum omega_g[k_i].
    """
    if q_max < 0:
        raise ValueError(f"q_max must be >= 0, got {q_max}")
    m = vs.m

    if cav.is_infinite:
        H0 = build_H0(vs, cav)
        blocks, labels = [], []
        for q in range(q_max + 1):
            subs, lab = [], []
            for ms in _quasi_multisets(m, q):
                shift = sum(vs.omega_g[k - 1] for k in ms)
                subs.append(H0 + shift * np.eye(m + 1))
                phonons = [f"g{k}" for k in ms]
                lab.append("|" + " ".join(phonons + ["1"]) + ">")
                lab.extend("|" + " ".join(phonons + [f"e{i}"]) + ">" for i in range(1, m + 1))
            if not subs:
                subs, lab = [np.zeros((0, 0))], []
            blocks.append(_block_diag(subs))
            labels.append(tuple(lab))
            if sum(b.shape[0] for b in blocks) > size_cap:
                raise DimensionGuardError(f"infinite-N block assembly exceeds cap {size_cap}")
        couplings = tuple(
            np.zeros((blocks[q].shape[0], blocks[q + 1].shape[0])) for q in range(q_max)
        )
        n_ph = np.concatenate([_infinite_block_photons(m, q) for q in range(q_max + 1)])
        return BlockHamiltonian(
            blocks=tuple(blocks),
            couplings=couplings,
            labels=tuple(labels),
            photon_numbers=n_ph,
            cavity=cav,
            vibronic=vs,
        )

    N = int(cav.n_molecules)
    basis = enumerate_basis(N, 1, m, min(q_max, N), size_cap=size_cap)
    H = hamiltonian_matrix(vs, cav, basis).toarray().real
    _check_hermitian(H, "assembled Hamiltonian")

    q_eff = min(q_max, N)
    slices = [basis.block_slice(q) for q in range(q_eff + 1)]
    blocks = tuple(H[s, s] for s in slices)
    couplings = tuple(H[slices[q], slices[q + 1]] for q in range(q_eff))
    for q, blk in enumerate(blocks):
        _check_hermitian(blk, f"block {q}")
    labels = tuple(
        tuple(st.label() for st in basis.states[s]) for s in slices
    )
    return BlockHamiltonian(
        blocks=blocks,
        couplings=couplings,
        labels=labels,
        photon_numbers=basis.photon_numbers(),
        cavity=cav,
        vibronic=vs,
        basis=basis,
    )


def _infinite_block_photons(m: int, q: int) -> np.ndarray:
    per_sub = np.array([1] + [0] * m)
    k = sum(1 for _ in _quasi_multisets(m, q))
    return np.tile(per_sub, k)


def _block_diag(mats: list[np.ndarray]) -> np.ndarray:
    dim = sum(M.shape[0] for M in mats)
    out = np.zeros((dim, dim))
    off = 0
    for M in mats:
        n = M.shape[0]
        out[off : off + n, off : off + n] = M
        off += n
    return out


def assemble_high_excitation(
    vs: VibronicStructure, cav: CavityParams, n_exc: int, size_cap: int = 200_000
) -> BlockHamiltonian:
    """Zero-temperature quasi = 0 Hamiltonian of the N_exc excitation manifold.

    All ground-electronic molecules stay in their vibrational ground state;
    basis states carry i photons plus N_exc - i excited molecules spread over
    the m excited vibronic states.  Blocks are indexed by descending photon
    number (i = N_exc first); the collective coupling between neighbouring
    blocks carries the photon factor sqrt(i), the matter factor
    sqrt(n_e + 1) and, at finite N, the occupation factor
    sqrt((N - n_exc_matter)/N) which tends to 1 as N -> infinity.
    """
    if n_exc < 1:
        raise ValueError(f"n_exc must be >= 1, got {n_exc}")
    m = vs.m
    N = cav.n_molecules
    if not cav.is_infinite and N < n_exc:
        raise ValueError(f"need N >= N_exc, got N={N}, N_exc={n_exc}")

    from .fockspace import _compositions_desc  # same deterministic ordering

    sector_states = []
    for i in range(n_exc, -1, -1):
        confs = list(_compositions_desc(n_exc - i, m))
        sector_states.append([(i, conf) for conf in confs])
        if sum(len(s) for s in sector_states) > size_cap:
            raise DimensionGuardError(f"high-excitation basis exceeds cap {size_cap}")

    def diag_energy(i, conf):
        return cav.omega_c * i + float(np.dot(conf, vs.omega_e))

    blocks = tuple(
        np.diag([diag_energy(i, conf) for i, conf in sector]) for sector in sector_states
    )

    couplings = []
    for p in range(n_exc):
        upper = sector_states[p]      # i photons
        lower = sector_states[p + 1]  # i - 1 photons, one more excited molecule
        lower_index = {conf: a for a, (_, conf) in enumerate(lower)}
        V = np.zeros((len(upper), len(lower)))
        for b, (i, conf) in enumerate(upper):
            n_matter = n_exc - i
            if cav.is_infinite:
                occ_fac = 1.0
            else:
                occ_fac = math.sqrt((N - n_matter) / N)
            for j in range(m):
                tgt = list(conf)
                tgt[j] += 1
                a = lower_index.get(tuple(tgt))
                if a is None:
                    continue
                V[b, a] = (
                    cav.g_sqrt_n * vs.fc[j, 0] * math.sqrt(i) * math.sqrt(conf[j] + 1) * occ_fac
                )
        couplings.append(V)

    def state_label(i, conf):
        parts = [f"e{j + 1}" for j, n in enumerate(conf) for _ in range(n)]
        if i == 1:
            parts.append("1")
        elif i > 1:
            parts.append(f"{i}ph")
        return "|" + (" ".join(parts) if parts else "0") + ">"

    labels = tuple(
        tuple(state_label(i, conf) for i, conf in sector) for sector in sector_states
    )
    photon_numbers = np.concatenate(
        [np.full(len(sector), sector[0][0] if sector else 0) for sector in sector_states]
    )
    return BlockHamiltonian(
        blocks=blocks,
        couplings=tuple(couplings),
        labels=labels,
        photon_numbers=photon_numbers,
        cavity=cav,
        vibronic=vs,
    )


def write_sparse_matrix(path, M, tol: float = 0.0):
    """Plain-text sparse export: header 'dim nnz', then 'row col re im' lines.

    Entries are written in canonical (row, col) order with 17 significant
    digits, so files from identical runs are byte-identical.
    """
    M = sp.coo_matrix(M)
    M.sum_duplicates()
    order = np.lexsort((M.col, M.row))
    rows, cols, data = M.row[order], M.col[order], M.data[order]
    keep = np.abs(data) > tol
    rows, cols, data = rows[keep], cols[keep], data[keep]
    with open(path, "w") as fh:
        fh.write(f"{M.shape[0]} {len(data)}\n")
        for r, c, v in zip(rows, cols, data):
            v = complex(v)
            fh.write(f"{r} {c} {v.real:.17g} {v.imag:.17g}\n")
