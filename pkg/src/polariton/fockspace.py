"""Permutation-symmetric many-body basis and second-quantized operator mapping.

N identical molecules are treated as bosons occupying the 2m single-molecule
vibronic states (m ground-surface states followed by m excited-surface
states), with the cavity photon as one more bosonic register.  A basis state

    |n_1 ... n_m, n'_1 ... n'_m, n_ph>

records how many molecules sit in each vibronic state plus the photon number.
Two quantities are conserved exactly (molecule number N and excitation number
N_exc = sum n' + n_ph); the number of vibrationally excited ground-electronic
molecules

    quasi = sum_{k>1} n_k

is conserved by the collective part of the Hamiltonian and changed by +-1 by
the single-molecule coupling, which makes the Hamiltonian block-tridiagonal
in quasi and motivates truncating the basis at quasi <= q_max.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DimensionGuardError


@dataclass(frozen=True)
class SymState:
    """One occupation-number basis state |n_g, n_e, n_ph>."""

    n_g: tuple[int, ...]
    n_e: tuple[int, ...]
    n_ph: int

    @property
    def n_molecules(self) -> int:
        return sum(self.n_g) + sum(self.n_e)

    @property
    def n_excitations(self) -> int:
        return sum(self.n_e) + self.n_ph

    @property
    def quasi(self) -> int:
        """Number of ground-electronic molecules carrying vibrational quanta."""
        return sum(self.n_g[1:])

    @property
    def matter(self) -> tuple[int, ...]:
        return self.n_g + self.n_e

    def label(self) -> str:
        """Short multi-particle label, e.g. '|1>', '|e1>', '|g2 e1>'."""
        parts = []
        for k, n in enumerate(self.n_g[1:], start=2):
            parts.extend([f"g{k}"] * n)
        for k, n in enumerate(self.n_e, start=1):
            parts.extend([f"e{k}"] * n)
        if self.n_ph == 1:
            parts.append("1")
        elif self.n_ph > 1:
            parts.append(f"{self.n_ph}ph")
        return "|" + (" ".join(parts) if parts else "0") + ">"


@dataclass(frozen=True)
class SymBasis:
    """Ordered symmetric basis at fixed (N, N_exc) truncated at quasi <= q_max."""

    states: tuple[SymState, ...]
    N: int
    N_exc: int
    m: int
    q_max: int
    index: dict[SymState, int] = field(repr=False)
    block_of: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    def block_slice(self, q: int) -> slice:
        """Index range of the quasi = q block (states are ordered by quasi)."""
        start = int(np.searchsorted(self.block_of, q, side="left"))
        stop = int(np.searchsorted(self.block_of, q, side="right"))
        return slice(start, stop)

    def photon_numbers(self) -> np.ndarray:
        return np.array([s.n_ph for s in self.states])

    def labels(self) -> tuple[str, ...]:
        return tuple(s.label() for s in self.states)


def _compositions_desc(total: int, slots: int):
    """All ways to place `total` quanta in `slots` registers, descending lex."""
    if slots == 0:
        if total == 0:
            yield ()
        return
    for first in range(total, -1, -1):
        for rest in _compositions_desc(total - first, slots - 1):
            yield (first,) + rest


def enumerate_basis(
    N: int, N_exc: int, m: int, q_max: int, size_cap: int = 500_000
) -> SymBasis:
    """Enumerate all states with quasi <= q_max at fixed (N, N_exc).

    Ordering is deterministic: ascending quasi block, photon-rich sectors
    before photon-poor ones within a block, then descending lexicographic
    occupations (molecules fill low-index vibronic states first), so the
    quasi = 0 block reads |1>, |e1>, ..., |em>.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if N_exc < 0:
        raise ValueError(f"N_exc must be >= 0, got {N_exc}")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if not 0 <= q_max <= N:
        raise ValueError(f"q_max must be in [0, N], got {q_max}")

    states: list[SymState] = []
    for q in range(q_max + 1):
        for n_ph in range(N_exc, -1, -1):
            n_exc_tot = N_exc - n_ph
            n_g0 = N - n_exc_tot - q
            if n_exc_tot > N or n_g0 < 0:
                continue
            for tail in _compositions_desc(q, m - 1):
                n_g = (n_g0,) + tail
                for n_e in _compositions_desc(n_exc_tot, m):
                    states.append(SymState(n_g=n_g, n_e=n_e, n_ph=n_ph))
                    if len(states) > size_cap:
                        raise DimensionGuardError(
                            f"symmetric basis exceeds cap {size_cap} at "
                            f"(N={N}, N_exc={N_exc}, m={m}, q_max={q_max})"
                        )

    return SymBasis(
        states=tuple(states),
        N=N,
        N_exc=N_exc,
        m=m,
        q_max=q_max,
        index={s: i for i, s in enumerate(states)},
        block_of=np.array([s.quasi for s in states]),
    )


@dataclass(frozen=True)
class MatterBasis:
    """Full bosonic matter Fock space at fixed N (no photon, no truncation).

    Used to exercise the operator mapping on arbitrary one-body operators,
    which generally conserve neither N_exc nor quasi.
    """

    states: tuple[SymState, ...]
    N: int
    m: int
    index: dict[SymState, int] = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.states)


def enumerate_matter_basis(N: int, m: int, size_cap: int = 500_000) -> MatterBasis:
    """All occupations of the 2m vibronic states with sum = N, descending lex."""
    states = []
    for occ in _compositions_desc(N, 2 * m):
        states.append(SymState(n_g=occ[:m], n_e=occ[m:], n_ph=0))
        if len(states) > size_cap:
            raise DimensionGuardError(f"matter basis exceeds cap {size_cap}")
    return MatterBasis(
        states=tuple(states), N=N, m=m, index={s: i for i, s in enumerate(states)}
    )


def map_operator(one_body, basis, photon_shift: int = 0) -> sp.csr_matrix:
    """Second-quantize a symmetric sum of single-molecule operators.

    Maps sum_k o^(k) to sum_{ij} <nu_i|o|nu_j> beta+_i beta_j, where o is the
    (2m x 2m) one-body matrix over the single-molecule vibronic states
    (g-manifold then e-manifold) and beta_i are the molecule bosons.  Matrix
    elements carry the usual ladder factors sqrt(n_j) sqrt(n_i + 1).

    photon_shift = -1/+1 multiplies every term by the photon annihilator /
    creator (factors sqrt(n_ph), sqrt(n_ph + 1)), which is how the
    light-matter terms B+_i b_j a and their conjugates are assembled.
    Target states outside the basis are dropped: that is exactly the
    quasi-block truncation.
    """
    one_body = np.asarray(one_body)
    two_m = 2 * basis.m
    if one_body.shape != (two_m, two_m):
        raise ValueError(
            f"one-body matrix must be ({two_m}, {two_m}) for m={basis.m}, "
            f"got {one_body.shape}"
        )
    if photon_shift not in (-1, 0, 1):
        raise ValueError(f"photon_shift must be -1, 0 or +1, got {photon_shift}")

    nz_i, nz_j = np.nonzero(one_body)
    rows, cols, vals = [], [], []
    for jb, st in enumerate(basis.states):
        occ = st.matter
        if photon_shift == -1:
            if st.n_ph == 0:
                continue
            ph_fac = np.sqrt(st.n_ph)
        elif photon_shift == +1:
            ph_fac = np.sqrt(st.n_ph + 1)
        else:
            ph_fac = 1.0
        n_ph_new = st.n_ph + photon_shift
        for vi, vj in zip(nz_i, nz_j):
            nj = occ[vj]
            if nj == 0:
                continue
            if vi == vj:
                amp = one_body[vi, vj] * nj * ph_fac
                new_occ = occ
            else:
                amp = one_body[vi, vj] * np.sqrt(nj) * np.sqrt(occ[vi] + 1) * ph_fac
                lst = list(occ)
                lst[vj] -= 1
                lst[vi] += 1
                new_occ = tuple(lst)
            target = SymState(n_g=new_occ[: basis.m], n_e=new_occ[basis.m :], n_ph=n_ph_new)
            ib = basis.index.get(target)
            if ib is None:
                continue
            rows.append(ib)
            cols.append(jb)
            vals.append(amp)

    dim = basis.dim
    out = sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim), dtype=complex).tocsr()
    out.sum_duplicates()
    out.sort_indices()
    return out


def conserved_check(basis: SymBasis, H, max_quasi_jump: int = 1, tol: float = 1e-14) -> list[dict]:
    """Verify conservation laws on an assembled matrix.

    Every nonzero element must connect states with equal N and N_exc, and
    with |delta quasi| <= max_quasi_jump (1 for the full Hamiltonian, 0 for
    its collective part, which is block-diagonal).  Returns a list of
    violations; empty means the structure is as claimed.
    """
    H = sp.coo_matrix(H)
    violations = []
    for r, c, v in zip(H.row, H.col, H.data):
        if abs(v) <= tol:
            continue
        a, b = basis.states[r], basis.states[c]
        if a.n_molecules != b.n_molecules:
            violations.append({"row": int(r), "col": int(c), "value": v, "reason": "N"})
        if a.n_excitations != b.n_excitations:
            violations.append({"row": int(r), "col": int(c), "value": v, "reason": "N_exc"})
        if abs(a.quasi - b.quasi) > max_quasi_jump:
            violations.append({"row": int(r), "col": int(c), "value": v, "reason": "quasi"})
    return violations
