"""Two-electron Coulomb matrix elements in the hydrogenic basis.

``coulomb_element(a, b, c, d, Z)`` is ``<a(1) b(2)| 1/r12 |c(1) d(2)>`` for
spatial orbitals given as (n, l, m) triples, evaluated with the closed-form
multipole expansion: Clebsch-Gordan angular factors times a finite radial
sum over Laguerre coefficients with Gauss hypergeometric tails.

The two-body matrix is laid out with composite indices
``sigma1 = pair_index(bra of particle 1, ket of particle 1)`` and
``sigma2 = pair_index(bra of particle 2, ket of particle 2)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .basis import basis_size, enumerate_orbitals
from .specfun import binomial, clebsch_gordan, gauss_2f1_a1, log_factorial

__all__ = [
    "TwoBodyMatrix",
    "coulomb_element",
    "coulomb_matrix",
    "multipole_range",
    "write_matrix_csv",
    "read_matrix_csv",
]


@dataclass(frozen=True)
class TwoBodyMatrix:
    """Real K^2 x K^2 two-body matrix V[sigma(i1, j1), sigma(i2, j2)]."""

    K: int
    entries: np.ndarray
    Z: float = 2.0
    n_max: int | None = None

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.shape != (self.K * self.K, self.K * self.K):
            raise ValueError(f"entries must be {self.K**2}x{self.K**2}, got {entries.shape}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    def element(self, i1, i2, j1, j2) -> float:
        """<i1; i2|V|j1; j2> with particle-1 orbitals i1 (bra), j1 (ket)."""
        K = self.K
        return float(self.entries[i1 * K + j1, i2 * K + j2])

    def as_tensor(self) -> np.ndarray:
        """View as V[i1, j1, i2, j2]."""
        K = self.K
        return self.entries.reshape(K, K, K, K)

    def symmetry_residual(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.T))) if self.entries.size else 0.0


def multipole_range(l1, l1p, l2, l2p) -> range:
    """Multipoles that survive all four angular factors.

    Bounded by both triangle conditions, with l1+l1'+L and l2+l2'+L even.
    """
    lo = max(abs(l1 - l1p), abs(l2 - l2p))
    hi = min(l1 + l1p, l2 + l2p)
    if (l1 + l1p + lo) % 2:
        lo += 1
    if lo > hi or (l2 + l2p + lo) % 2:
        return range(0)
    return range(lo, hi + 1, 2)


def _laguerre_terms(n, l):
    """(k, log|coef|, sign) of the radial polynomial expansion for (n, l).

    R_{n,l} ~ sum_k (-1)^k C(n+l, n-l-1-k) / k! * (2 r/n)^(k+l) (Z scaled out).
    """
    out = []
    for k in range(n - l):
        c = binomial(n + l, n - l - 1 - k)
        out.append((k, math.log(c) - log_factorial(k), -1 if k % 2 else 1))
    return out


@lru_cache(maxsize=None)
def _radial(L, q1, q1p, q2, q2p) -> float:
    """Radial multipole integral for Z=1, including the 1/16 and norm factors.

    q* are (n, l) pairs: q1, q1p for particle 1 (bra, ket), q2, q2p for
    particle 2.
    """
    (n1, l1), (n1p, l1p), (n2, l2), (n2p, l2p) = q1, q1p, q2, q2p
    log_norm = 0.5 * (
        log_factorial(n1 - l1 - 1) + log_factorial(n1p - l1p - 1)
        + log_factorial(n2 - l2 - 1) + log_factorial(n2p - l2p - 1)
        - log_factorial(n1 + l1) - log_factorial(n1p + l1p)
        - log_factorial(n2 + l2) - log_factorial(n2p + l2p)
    )
    s1 = 1.0 / n1 + 1.0 / n1p
    s2 = 1.0 / n2 + 1.0 / n2p
    s_tot = s1 + s2
    x1 = s1 / s_tot
    x2 = s2 / s_tot
    log_s = math.log(s_tot)
    lg1, lg1p, lg2, lg2p = (math.log(2.0 / n) for n in (n1, n1p, n2, n2p))

    total = 0.0
    for k1, c1, g1 in _laguerre_terms(n1, l1):
        for k1p, c1p, g1p in _laguerre_terms(n1p, l1p):
            a = l1 + l1p + k1 + k1p
            for k2, c2, g2 in _laguerre_terms(n2, l2):
                for k2p, c2p, g2p in _laguerre_terms(n2p, l2p):
                    b = l2 + l2p + k2 + k2p
                    lam = a + b
                    log_mag = (
                        log_factorial(lam + 4) + c1 + c1p + c2 + c2p
                        + (k1 + l1 + 2) * lg1 + (k1p + l1p + 2) * lg1p
                        + (k2 + l2 + 2) * lg2 + (k2p + l2p + 2) * lg2p
                        - (lam + 5) * log_s
                    )
                    bracket = (
                        gauss_2f1_a1(lam + 5, L + a + 4, x1) / (L + a + 3)
                        + gauss_2f1_a1(lam + 5, L + b + 4, x2) / (L + b + 3)
                    )
                    total += g1 * g1p * g2 * g2p * math.exp(log_mag) * bracket
    return math.exp(log_norm) * total / 16.0


def _radial_key(L, q1, q1p, q2, q2p):
    # symmetric under bra<->ket within a particle and under particle swap
    p1 = tuple(sorted((q1, q1p)))
    p2 = tuple(sorted((q2, q2p)))
    p1, p2 = sorted((p1, p2))
    return (L, p1[0], p1[1], p2[0], p2[1])


def coulomb_element(a, b, c, d, Z: float = 2.0) -> float:
    """<a(1) b(2)| 1/|r1-r2| |c(1) d(2)> in hartree; orbitals are (n, l, m)."""
    (n1, l1, m1), (n2, l2, m2), (n1p, l1p, m1p), (n2p, l2p, m2p) = a, b, c, d
    for n, l, m in (a, b, c, d):
        if n < 1 or not (0 <= l < n) or abs(m) > l:
            raise ValueError(f"invalid orbital {(n, l, m)}")
    if m1 + m2 != m1p + m2p:
        return 0.0
    mu = m1 - m1p
    ang_pref = math.sqrt((2 * l1p + 1) * (2 * l2p + 1) / ((2 * l1 + 1) * (2 * l2 + 1)))
    total = 0.0
    for L in multipole_range(l1, l1p, l2, l2p):
        if abs(mu) > L:
            continue
        ang = (
            clebsch_gordan(l1p, m1p, L, mu, l1, m1)
            * clebsch_gordan(l2p, m2p, L, -mu, l2, m2)
            * clebsch_gordan(l1p, 0, L, 0, l1, 0)
            * clebsch_gordan(l2p, 0, L, 0, l2, 0)
        )
        if ang == 0.0:
            continue
        if mu % 2:
            ang = -ang
        key = _radial_key(L, (n1, l1), (n1p, l1p), (n2, l2), (n2p, l2p))
        total += ang * _radial(*key)
    return Z * ang_pref * total


def coulomb_matrix(n_max: int, Z: float = 2.0) -> TwoBodyMatrix:
    """Assemble all K^4 Coulomb elements into a :class:`TwoBodyMatrix`.

    Each distinct element is computed once; the particle-exchange and
    bra/ket symmetries of real Coulomb elements fill the rest.
    """
    orbs = enumerate_orbitals(n_max)
    K = basis_size(n_max)
    V = np.zeros((K, K, K, K))  # V[i1, j1, i2, j2] = <i1 i2|v|j1 j2>
    done = np.zeros((K, K, K, K), dtype=bool)
    for i1 in range(K):
        for j1 in range(K):
            for i2 in range(K):
                for j2 in range(K):
                    if done[i1, j1, i2, j2]:
                        continue
                    if orbs[i1][2] + orbs[i2][2] != orbs[j1][2] + orbs[j2][2]:
                        done[i1, j1, i2, j2] = True
                        continue
                    val = coulomb_element(orbs[i1], orbs[i2], orbs[j1], orbs[j2], Z)
                    for idx in (
                        (i1, j1, i2, j2), (i2, j2, i1, j1),
                        (j1, i1, j2, i2), (j2, i2, j1, i1),
                    ):
                        V[idx] = val
                        done[idx] = True
    return TwoBodyMatrix(K=K, entries=V.reshape(K * K, K * K), Z=Z, n_max=n_max)


def write_matrix_csv(V: TwoBodyMatrix, path) -> None:
    """Dump nonzero elements as ``i1,i2p,j1,j2p,value``.

    ``i1``/``i2p`` are the bra/ket orbitals of particle 1 and ``j1``/``j2p``
    those of particle 2, so value = <i1; j1|V|i2p; j2p>.
    """
    T = V.as_tensor()
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i1", "i2p", "j1", "j2p", "value"])
        for idx in zip(*np.nonzero(T)):
            w.writerow([*map(int, idx), f"{T[idx]:.17g}"])


def read_matrix_csv(path, K: int, Z: float = 2.0) -> TwoBodyMatrix:
    T = np.zeros((K, K, K, K))
    with open(Path(path), newline="") as fh:
        for row in csv.DictReader(fh):
            T[int(row["i1"]), int(row["i2p"]), int(row["j1"]), int(row["j2p"])] = float(row["value"])
    return TwoBodyMatrix(K=K, entries=T.reshape(K * K, K * K), Z=Z)
