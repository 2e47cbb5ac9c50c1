"""Dense exact diagonalization in the antisymmetric few-fermion space.

The determinant basis runs over sorted tuples of spin-orbital indices
(``block*K + spatial``), in lexicographic order. The Hamiltonian is built
by applying the product-space operator sum_i h(i) + sum_{i<j} V(i, j) to
every normalized antisymmetrized basis state and projecting back, which
works for any N without hand-written Slater-Condon rules.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .basis import basis_size, orbital_energies
from .coulomb import TwoBodyMatrix, coulomb_matrix
from .decomp import InteractionDecomposition, decompose_interaction, reconstruct_interaction
from .ensemble import AutocorrelationSeries
from .errors import ConfigError, NumericError

__all__ = [
    "DeterminantBasis",
    "DenseHamiltonian",
    "build_hamiltonian",
    "hamiltonian_from_parts",
    "embed_determinant",
    "exact_autocorrelation",
    "reachable_levels",
    "write_eigenvalues_csv",
    "DEFAULT_MAX_DIMENSION",
]

DEFAULT_MAX_DIMENSION = 5000


@dataclass(frozen=True)
class DeterminantBasis:
    n_spin_orbitals: int
    N: int
    pairs: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if not 1 <= self.N <= self.n_spin_orbitals:
            raise ConfigError(f"cannot place {self.N} fermions in {self.n_spin_orbitals} orbitals")
        object.__setattr__(self, "pairs", tuple(itertools.combinations(range(self.n_spin_orbitals), self.N)))

    @property
    def dimension(self) -> int:
        return len(self.pairs)

    @cached_property
    def index(self) -> dict:
        return {occ: i for i, occ in enumerate(self.pairs)}

    @cached_property
    def occupations(self) -> np.ndarray:
        return np.array(self.pairs, dtype=np.int64).reshape(self.dimension, self.N)


@dataclass
class DenseHamiltonian:
    matrix: np.ndarray          # (D, D) real symmetric, hartree
    basis: DeterminantBasis

    @cached_property
    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        try:
            return np.linalg.eigh(self.matrix)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"eigensolver failed: {exc}") from exc

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eigh[0]

    def hermiticity_residual(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0))


def _permutation_signs(N):
    perms = list(itertools.permutations(range(N)))
    signs = []
    for p in perms:
        inv = sum(1 for i in range(N) for j in range(i + 1, N) if p[i] > p[j])
        signs.append(-1.0 if inv % 2 else 1.0)
    return np.array(perms), np.array(signs)


def _flat_index(occ, M):
    # row-major index of the product-space tensor entry (occ[..., 0], ..., occ[..., N-1])
    out = np.zeros(occ.shape[:-1], dtype=np.int64)
    for i in range(occ.shape[-1]):
        out = out * M + occ[..., i]
    return out


def hamiltonian_from_parts(h_spatial, V: TwoBodyMatrix, N: int = 2,
                           max_dimension: int = DEFAULT_MAX_DIMENSION) -> DenseHamiltonian:
    """Antisymmetric-space H from a spatial one-body matrix and a spin-free V."""
    h_spatial = np.asarray(h_spatial, dtype=float)
    if h_spatial.ndim == 1:
        h_spatial = np.diag(h_spatial)
    K = V.K
    if h_spatial.shape != (K, K):
        raise ConfigError(f"one-body matrix must be {K}x{K}")
    if N > 3:
        raise ConfigError("exact oracle supports N <= 3")
    M = 2 * K
    basis = DeterminantBasis(M, N)
    D = basis.dimension
    if D > max_dimension:
        raise ConfigError(f"determinant basis dimension {D} exceeds cap {max_dimension}")

    h = np.kron(np.eye(2), h_spatial)
    T = V.as_tensor()                          # [i1, j1, i2, j2] = <i1 i2|V|j1 j2>
    Vso = np.zeros((M, M, M, M))
    for s in range(2):
        for t in range(2):
            Vso[s * K:(s + 1) * K, s * K:(s + 1) * K, t * K:(t + 1) * K, t * K:(t + 1) * K] = T

    perms, signs = _permutation_signs(N)
    occ = basis.occupations
    pocc = occ[:, perms]                      # (D, N!, N)
    flat = _flat_index(pocc, M)               # (D, N!)
    amp = signs / math.sqrt(math.factorial(N))
    X = np.zeros((M**N, D))
    X[flat, np.arange(D)[:, None]] = amp
    X = X.reshape((M,) * N + (D,))

    Y = np.zeros_like(X)
    for i in range(N):
        Y += np.moveaxis(np.tensordot(h, X, axes=([1], [i])), 0, i)
    for i, j in itertools.combinations(range(N), 2):
        Y += np.moveaxis(np.tensordot(Vso, X, axes=([1, 3], [i, j])), (0, 1), (i, j))
    Y = Y.reshape(M**N, D)
    H = np.einsum("kp,kpd->kd", np.broadcast_to(amp, flat.shape), Y[flat])
    H = 0.5 * (H + H.T)
    return DenseHamiltonian(H, basis)


def build_hamiltonian(n_max: int, Z: float = 2.0, source: str = "direct", N: int = 2,
                      max_dimension: int = DEFAULT_MAX_DIMENSION,
                      decomp: InteractionDecomposition | None = None) -> DenseHamiltonian:
    """Hydrogenic-basis Hamiltonian; ``source`` picks V directly or via sum_s w_s O_s O_s."""
    K = basis_size(n_max)
    if math.comb(2 * K, N) > max_dimension:
        raise ConfigError(f"determinant basis dimension {math.comb(2 * K, N)} exceeds cap {max_dimension}")
    if source == "direct":
        V = coulomb_matrix(n_max, Z)
    elif source == "from_decomposition":
        V = reconstruct_interaction(decomp if decomp is not None else decompose_interaction(coulomb_matrix(n_max, Z), 0.0))
    else:
        raise ConfigError(f"unknown Hamiltonian source {source!r}")
    return hamiltonian_from_parts(orbital_energies(n_max, Z), V, N, max_dimension)


def embed_determinant(orbitals, beta: float, basis: DeterminantBasis) -> np.ndarray:
    """Coefficients of beta * A(phi_1 ... phi_N) on the normalized determinant basis.

    The product-space state beta * sum_P sgn(P) phi_P1 x ... x phi_PN has
    component sqrt(N!) * beta * det(C[:, occ]) along each normalized basis
    determinant, C being the (N, 2K) coefficient matrix.
    """
    C = np.asarray(orbitals).reshape(basis.N, -1)
    if C.shape[1] != basis.n_spin_orbitals:
        raise ConfigError("orbital length does not match the determinant basis")
    minors = np.linalg.det(C[:, basis.occupations].transpose(1, 0, 2))
    return math.sqrt(math.factorial(basis.N)) * beta * minors


def exact_autocorrelation(H: DenseHamiltonian, psi0, times) -> AutocorrelationSeries:
    """<psi0|exp(-iHt)|psi0> from the eigendecomposition of H."""
    psi0 = np.asarray(psi0, dtype=complex)
    nrm = np.linalg.norm(psi0)
    if abs(nrm - 1.0) > 1e-10:
        raise ConfigError(f"initial state has norm {nrm:.15g}, expected 1")
    ev, U = H.eigh
    w = np.abs(U.T @ psi0) ** 2
    times = np.asarray(times, dtype=float)
    values = np.exp(-1j * np.outer(times, ev)) @ w
    zero = np.zeros(len(times))
    return AutocorrelationSeries(times, values, zero, zero.copy(), 0)


def reachable_levels(H: DenseHamiltonian, psi0, threshold: float = 0.01,
                     degeneracy_tol: float = 1e-8) -> list[tuple[float, float]]:
    """(energy, weight) of eigenspaces with projected weight above ``threshold``.

    Individual eigenvectors inside a degenerate eigenspace are arbitrary, so
    weights are summed over each eigenspace.
    """
    ev, U = H.eigh
    w = np.abs(U.T @ np.asarray(psi0, dtype=complex)) ** 2
    out, i = [], 0
    while i < len(ev):
        j = i + 1
        while j < len(ev) and ev[j] - ev[i] <= degeneracy_tol:
            j += 1
        tot = float(w[i:j].sum())
        if tot > threshold:
            out.append((float(ev[i:j].mean()), tot))
        i = j
    return out


def write_eigenvalues_csv(H: DenseHamiltonian, path) -> None:
    lines = ["index,energy"] + [f"{i},{e:.17g}" for i, e in enumerate(H.eigenvalues)]
    Path(path).write_text("\n".join(lines) + "\n")
