"""Hydrogenic spin-orbital basis.

Spatial orbitals (n, l, m) are ordered lexicographically by n, then l, then
m; the position in that list is the 0-based basis index used everywhere
else (matrices, decomposition files). Spin is not part of the spatial index:
an orbital coefficient vector has length ``2*K`` with the spatial index
running fastest and the spin block (up, then down) slowest.
"""

from __future__ import annotations

import hashlib
import math
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .specfun import assoc_laguerre, log_factorial

__all__ = [
    "QuantumNumbers",
    "basis_size",
    "enumerate_orbitals",
    "orbital_index",
    "orbital_order_hash",
    "pair_index",
    "unpair_index",
    "orbital_energy",
    "orbital_energies",
    "radial_wavefunction",
    "spin_orbital_index",
]


class QuantumNumbers(NamedTuple):
    n: int
    l: int
    m: int
    tau: int = 1

    def validate(self) -> "QuantumNumbers":
        if self.n < 1 or not (0 <= self.l <= self.n - 1) or abs(self.m) > self.l:
            raise ValueError(f"invalid hydrogenic quantum numbers {tuple(self)}")
        if self.tau not in (1, -1):
            raise ValueError(f"spin label must be +1 or -1, got {self.tau}")
        return self

    @property
    def spatial(self) -> tuple[int, int, int]:
        return (self.n, self.l, self.m)


def basis_size(n_max: int) -> int:
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    return n_max * (n_max + 1) * (2 * n_max + 1) // 6


@lru_cache(maxsize=None)
def _orbitals(n_max: int) -> tuple[tuple[int, int, int], ...]:
    return tuple(
        (n, l, m)
        for n in range(1, n_max + 1)
        for l in range(n)
        for m in range(-l, l + 1)
    )


def enumerate_orbitals(n_max: int) -> list[tuple[int, int, int]]:
    basis_size(n_max)
    return list(_orbitals(n_max))


def orbital_index(nlm: tuple[int, int, int], n_max: int) -> int:
    """Inverse of :func:`enumerate_orbitals`."""
    n, l, m = nlm
    QuantumNumbers(n, l, m).validate()
    if n > n_max:
        raise ValueError(f"orbital {nlm} outside n_max={n_max}")
    # orbitals with principal number below n, then l-shells below l
    return (n - 1) * n * (2 * n - 1) // 6 + l * l + (m + l)


def spin_orbital_index(nlm: tuple[int, int, int], tau: int, n_max: int) -> int:
    """Index into a length-2K coefficient vector (spin up block first)."""
    if tau not in (1, -1):
        raise ValueError("tau must be +1 or -1")
    K = basis_size(n_max)
    return (0 if tau == 1 else K) + orbital_index(nlm, n_max)


def orbital_order_hash(n_max: int) -> str:
    """Short digest of the orbital ordering, stored in decomposition files."""
    text = ";".join(f"{n},{l},{m}" for n, l, m in _orbitals(n_max))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def pair_index(i: int, j: int, K: int) -> int:
    if not (0 <= i < K and 0 <= j < K):
        raise ValueError(f"pair ({i}, {j}) out of range for K={K}")
    return i * K + j


def unpair_index(sigma: int, K: int) -> tuple[int, int]:
    if not (0 <= sigma < K * K):
        raise ValueError(f"pair index {sigma} out of range for K={K}")
    return divmod(sigma, K)


def orbital_energy(n: int, Z: float) -> float:
    """Hydrogen-like level -Z^2 / (2 n^2) in hartree."""
    if n < 1 or Z <= 0:
        raise ValueError("need n >= 1 and Z > 0")
    return -Z * Z / (2.0 * n * n)


def orbital_energies(n_max: int, Z: float) -> np.ndarray:
    """Single-particle energies of the K spatial orbitals, in basis order."""
    return np.array([orbital_energy(n, Z) for n, _, _ in _orbitals(n_max)])


def radial_wavefunction(n: int, l: int, Z: float, r):
    """R_{n,l}(r) for a hydrogen-like ion of charge Z (atomic units)."""
    if n < 1 or not (0 <= l < n):
        raise ValueError(f"invalid (n, l) = ({n}, {l})")
    log_norm = 0.5 * (3 * math.log(Z) + log_factorial(n - l - 1) - log_factorial(n + l))
    norm = 2.0 / (n * n) * math.exp(log_norm)
    rho = 2.0 * Z * np.asarray(r, dtype=float) / n
    out = norm * np.exp(-rho / 2.0) * rho**l * assoc_laguerre(n - l - 1, 2 * l + 1, rho)
    return out if np.ndim(out) else float(out)
