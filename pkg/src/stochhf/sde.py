"""Norm-conserving Ito wave equations for the single-particle orbitals.

Orbitals are stored as complex arrays of shape ``(n_blocks, K)``: ``K``
spatial amplitudes per block, where blocks are spin states (or any other
label the one-body operators act trivially on). A trajectory holds ``N``
such orbitals, shape ``(N, n_blocks, K)``.

Each orbital obeys

    d phi_j = [ -i H phi_j
                + (i/2) sum_{k!=j} sum_s w_s <O_s>_j <O_s>_k phi_j
                - i sum_{k!=j} sum_s w_s <O_s>_k O_s phi_j ] dt
              + sum_s sqrt(-i w_s) (O_s - <O_s>_j) phi_j dW_s
              - sum_{k!=j} sum_s |w_s| <phi_j|phi_j> var_s(j)
                    / (2 (N-1) Re<phi_j|phi_k>) phi_k  [dt or dW_s^2]

with var_s(j) = <O_s^T O_s>_j - |<O_s>_j|^2 (hbar = 1).

The functions here are the reference (one trajectory, plain numpy) form;
:mod:`stochhf._kernel` holds the compiled batch propagator, which is tested
against :func:`step`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .decomp import InteractionDecomposition

__all__ = [
    "DT_FORM",
    "DW2_FORM",
    "DW2_EULER",
    "SCHEMES",
    "DeadTrajectory",
    "TrajectoryState",
    "WienerIncrement",
    "expectation",
    "sqrt_neg_i_omega",
    "drift_term",
    "diffusion_term",
    "coupling_term",
    "coupling_direction",
    "step",
    "hamiltonian_matrix",
]

DT_FORM = "dt"
# pathwise norm-exact form: the dW^2-order compensation along the partner
# orbitals is sized so each step preserves <phi_j|phi_j> to roundoff
DW2_FORM = "dw2"
# the same compensation taken literally as sum_s (...) dW_s^2 in an Euler step
DW2_EULER = "dw2-euler"
SCHEMES = (DT_FORM, DW2_FORM, DW2_EULER)

DEFAULT_OVERLAP_GUARD = 1e-3


class DeadTrajectory(ArithmeticError):
    """A pairwise overlap fell below the guard; the coupling term is singular."""


@dataclass
class WienerIncrement:
    dws: np.ndarray
    dt: float

    @classmethod
    def sample(cls, rng: np.random.Generator, p: int, dt: float) -> "WienerIncrement":
        return cls(np.sqrt(dt) * rng.standard_normal(p), dt)


@dataclass
class TrajectoryState:
    orbitals: np.ndarray            # (N, n_blocks, K) complex
    time: float = 0.0
    rng_stream: Optional[np.random.Generator] = field(default=None, repr=False)
    dead: bool = False

    @property
    def N(self) -> int:
        return self.orbitals.shape[0]

    def norms(self) -> np.ndarray:
        return np.einsum("jta,jta->j", self.orbitals.conj(), self.orbitals).real


def hamiltonian_matrix(energies, K: int | None = None) -> np.ndarray:
    """Dense one-body H from a vector of diagonal energies or a matrix."""
    h = np.asarray(energies)
    if h.ndim == 1:
        h = np.diag(h)
    if K is not None and h.shape != (K, K):
        raise ValueError(f"one-body Hamiltonian must be {K}x{K}, got {h.shape}")
    return h.astype(complex)


def _apply(O, phi):
    # O acts on the spatial index of every block
    return phi @ np.asarray(O).T


def expectation(phi, O) -> complex:
    """<phi|O|phi> / <phi|phi> with O acting on the spatial index of each block."""
    phi = np.atleast_2d(phi)
    nrm = np.vdot(phi, phi).real
    if nrm == 0.0:
        raise ZeroDivisionError("expectation of a zero-norm orbital")
    return complex(np.vdot(phi, _apply(O, phi)) / nrm)


def sqrt_neg_i_omega(omega):
    """Principal square root of -i*omega (vectorized)."""
    return np.sqrt(-1j * np.asarray(omega, dtype=float))


def _expectations(phi, ops):
    nrm = np.vdot(phi, phi).real
    # ops (p, K, K), phi (nb, K) -> <O_s>
    return np.einsum("ta,sab,tb->s", phi.conj(), ops, phi) / nrm


def drift_term(state: TrajectoryState, decomp: InteractionDecomposition, energies, j: int):
    """dt-coefficient of d phi_j, without the norm-compensation coupling."""
    x = state.orbitals
    h = hamiltonian_matrix(energies, decomp.K)
    phi = x[j]
    out = -1j * _apply(h, phi)
    if decomp.p == 0 or state.N == 1:
        return out
    w = decomp.omegas
    e_j = _expectations(phi, decomp.ops)
    for k in range(state.N):
        if k == j:
            continue
        e_k = _expectations(x[k], decomp.ops)
        out = out + 0.5j * np.sum(w * e_j * e_k) * phi
        G = np.einsum("s,sab->ab", w * e_k, decomp.ops)
        out = out - 1j * _apply(G, phi)
    return out


def diffusion_term(state: TrajectoryState, decomp: InteractionDecomposition, j: int, s: int):
    """sqrt(-i w_s) (O_s - <O_s>_j) phi_j; multiply by dW_s."""
    phi = state.orbitals[j]
    O = decomp.ops[s]
    return sqrt_neg_i_omega(decomp.omegas[s]) * (_apply(O, phi) - expectation(phi, O) * phi)


def coupling_direction(state: TrajectoryState, j: int, overlap_guard: float = 0.0):
    """-sum_{k!=j} phi_k / (2 (N-1) Re<phi_j|phi_k>), the compensation direction."""
    x = state.orbitals
    N = state.N
    out = np.zeros_like(x[j])
    for k in range(N):
        if k == j:
            continue
        re = np.vdot(x[j], x[k]).real
        if abs(re) <= overlap_guard:
            raise DeadTrajectory(f"Re<phi_{j}|phi_{k}> = {re:.3e} below guard {overlap_guard:g}")
        out = out - x[k] / (2.0 * (N - 1) * re)
    return out


def coupling_term(state: TrajectoryState, decomp: InteractionDecomposition, j: int,
                  weights=None, overlap_guard: float = DEFAULT_OVERLAP_GUARD):
    """Norm-compensation vector for orbital j.

    With ``weights=None`` this is the dt coefficient; passing ``weights=dW**2``
    gives the literal dW^2 form sum_s |w_s| var_s dW_s^2.
    """
    if state.N == 1:
        return np.zeros_like(state.orbitals[j])
    phi = state.orbitals[j]
    if decomp.p == 0 or not np.any(decomp.omegas):
        return np.zeros_like(phi)
    nrm = np.vdot(phi, phi).real
    direction = coupling_direction(state, j, overlap_guard)
    e = _expectations(phi, decomp.ops)
    OtO = np.einsum("sba,sbc->sac", decomp.ops, decomp.ops)
    e2 = _expectations(phi, OtO).real
    var = e2 - np.abs(e) ** 2
    wt = np.abs(decomp.omegas) * var
    if weights is not None:
        wt = wt * np.asarray(weights)
    return nrm * np.sum(wt) * direction


def _norm_exact_gain(a, b, target):
    """Smallest-magnitude g with ||a + g b||^2 = target."""
    A = np.vdot(b, b).real
    B = np.vdot(a, b).real
    C = np.vdot(a, a).real - target
    disc = B * B - A * C
    if A == 0.0 or disc < 0.0:
        raise DeadTrajectory("norm-exact compensation has no real solution")
    root = np.sqrt(disc)
    return C / (-B + root) if B <= 0 else C / (-B - root)


def step(state: TrajectoryState, dW: WienerIncrement, decomp: InteractionDecomposition,
         energies, scheme: str = DT_FORM,
         overlap_guard: float = DEFAULT_OVERLAP_GUARD, renormalize: bool = False) -> TrajectoryState:
    """One Euler-Maruyama step; all orbitals advance from the same pre-step state."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}, expected one of {SCHEMES}")
    dws = np.asarray(dW.dws, dtype=float)
    if dws.shape != (decomp.p,):
        raise ValueError(f"need {decomp.p} Wiener increments, got {dws.shape}")
    if dW.dt <= 0:
        raise ValueError("dt must be positive")
    if state.dead:
        raise DeadTrajectory("stepping a dead trajectory")
    x = state.orbitals
    N = state.N
    dt = dW.dt
    xi = sqrt_neg_i_omega(decomp.omegas) * dws
    new = np.empty_like(x)
    for j in range(N):
        phi = x[j]
        upd = phi + dt * drift_term(state, decomp, energies, j)
        if decomp.p:
            e = _expectations(phi, decomp.ops)
            D = np.einsum("s,sab->ab", xi, decomp.ops)
            upd = upd + _apply(D, phi) - np.sum(xi * e) * phi
        if N > 1:
            if scheme == DT_FORM:
                upd = upd + dt * coupling_term(state, decomp, j, overlap_guard=overlap_guard)
            elif scheme == DW2_EULER:
                upd = upd + coupling_term(state, decomp, j, weights=dws**2,
                                          overlap_guard=overlap_guard)
            else:
                b = coupling_direction(state, j, overlap_guard)
                g = _norm_exact_gain(upd, b, np.vdot(phi, phi).real)
                upd = upd + g * b
        new[j] = upd
    if renormalize:
        new /= np.sqrt(np.einsum("jta,jta->j", new.conj(), new).real)[:, None, None]
    if not np.all(np.isfinite(new)):
        raise FloatingPointError("non-finite orbital coefficients")
    return TrajectoryState(new, state.time + dt, state.rng_stream, False)
