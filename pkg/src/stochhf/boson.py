"""Bosons through the fermion machinery via a fictitious N-state spin.

Each boson orbital phi_j is tensored with a fictitious spin state chi_j; the
fictitious spin has no Hamiltonian and every operator acts on it as the
identity, so in the trajectory arrays it is simply the block index. The
fermion method then propagates the antisymmetrized extended state, and
contracting its fictitious indices with the totally antisymmetric spin
state |a> leaves a symmetric spatial state:

    Psi_boson(t) = <a|Psi_fict(t)>.

With strictly orthogonal fictitious labels (chi_j = |j>) all pair overlaps
of the extended orbitals vanish and the norm-compensation term is
singular, so the default recipe mixes a little of the other labels into
each chi_j. The projection of an antisymmetrized product of phi_j chi_j is
det(chi) / sqrt(N!) times the symmetrized product of the phi_j, so the
mixing only rescales the boson state.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernel
from .decomp import InteractionDecomposition
from .ensemble import (AutocorrelationSeries, DeadFractionError, EnsembleConfig, InitialState,
                       _Neumaier, _Propagator, _stderr, trajectory_stream)
from .errors import ConfigError, NumericError

__all__ = [
    "FictitiousSpinState",
    "embed_bosons",
    "project_boson",
    "BosonToy",
    "BosonResult",
    "symmetric_hamiltonian",
    "exact_boson_evolution",
    "run_boson_ensemble",
]


def _perm_sign(p) -> float:
    inv = sum(1 for i in range(len(p)) for j in range(i + 1, len(p)) if p[i] > p[j])
    return -1.0 if inv % 2 else 1.0


@dataclass(frozen=True)
class FictitiousSpinState:
    """|a> = sum_sigma eps_{sigma_1..sigma_N} / sqrt(N!) |sigma_1 .. sigma_N>."""

    N: int
    amplitudes: np.ndarray = field(init=False, repr=False)   # (N,)*N

    def __post_init__(self):
        if self.N < 2:
            raise ConfigError("the fictitious spin needs N >= 2")
        a = np.zeros((self.N,) * self.N)
        for p in itertools.permutations(range(self.N)):
            a[p] = _perm_sign(p)
        object.__setattr__(self, "amplitudes", a / math.sqrt(math.factorial(self.N)))


def embed_bosons(orbitals, mixing: float = 0.0) -> np.ndarray:
    """Extended orbitals phi_j (x) chi_j, shape (N, N, K) with the fictitious label as block.

    ``mixing = 0`` gives the strict embedding chi_j = |j>; otherwise
    chi_j is proportional to |j> + mixing * sum_{k != j} |k>, normalized.
    """
    phi = np.asarray(orbitals, dtype=complex)
    if phi.ndim != 2 or phi.shape[0] < 2:
        raise ConfigError("embed_bosons needs an (N, K) array with N >= 2")
    N = phi.shape[0]
    chi = np.eye(N) + mixing * (np.ones((N, N)) - np.eye(N))
    chi /= np.linalg.norm(chi, axis=1)[:, None]
    return chi[:, :, None] * phi[:, None, :]


def project_boson(extended, amplitude: complex, a: FictitiousSpinState | None = None) -> np.ndarray:
    """<a| amplitude * sum_P sgn(P) phi~_P1 (x) .. (x) phi~_PN, as a (K,)*N tensor."""
    x = np.asarray(extended)
    N, nf, K = x.shape
    if a is None:
        a = FictitiousSpinState(N)
    if a.N != N or nf != N:
        raise ConfigError("fictitious spin dimension must equal the particle number")
    if N == 2:
        # antisymmetric |a>: the exchanged term is the transpose of the direct one
        T = x[0].T @ a.amplitudes.conj() @ x[1]
        return amplitude * (T + T.T)
    letters = "abcdefgh"[:N]
    spins = "ijklmnop"[:N]
    out = np.zeros((K,) * N, dtype=complex)
    for p in itertools.permutations(range(N)):
        terms = [x[p[i]] for i in range(N)]
        spec = ",".join(f"{spins[i]}{letters[i]}" for i in range(N))
        out += _perm_sign(p) * np.einsum(f"{''.join(spins)},{spec}->{''.join(letters)}",
                                         a.amplitudes.conj(), *terms)
    return amplitude * out


# ---------------------------------------------------------------- toy model

@dataclass
class BosonToy:
    """N bosons in K modes with H = sum_i h(i) + omega sum_{i<j} O(i) O(j)."""

    h: np.ndarray
    omega: float
    O: np.ndarray
    orbitals: np.ndarray        # (N, K) initial boson orbitals
    mixing: float = 0.4

    @classmethod
    def two_mode(cls, mixing: float = 0.4) -> "BosonToy":
        h = np.array([[-0.5, 0.2], [0.2, 0.5]])
        O = np.array([[1.0, 0.3], [0.3, -1.0]])
        phi = np.array([[1.0, 0.3 + 0.2j], [0.4 - 0.1j, 1.0]])
        phi /= np.linalg.norm(phi, axis=1)[:, None]
        return cls(h, 0.5, O, phi, mixing)

    @property
    def N(self) -> int:
        return self.orbitals.shape[0]

    @property
    def K(self) -> int:
        return self.orbitals.shape[1]

    def decomposition(self) -> InteractionDecomposition:
        return InteractionDecomposition(omegas=np.array([self.omega]), ops=np.asarray(self.O)[None],
                                        tol=0.0, K=self.K)

    def initial_state(self) -> tuple[InitialState, np.ndarray]:
        """Extended fermion initial state and the projected boson tensor at t = 0."""
        x = embed_bosons(self.orbitals, self.mixing)
        N = self.N
        S = np.conj(x.reshape(N, -1)) @ x.reshape(N, -1).T
        det = np.linalg.det(S).real
        if not det > 0:
            raise ConfigError("extended orbitals are linearly dependent")
        beta = 1.0 / math.sqrt(math.factorial(N) * det)
        return InitialState(x, beta), project_boson(x, beta)


def symmetric_hamiltonian(toy: BosonToy) -> np.ndarray:
    """Dense product-space H for N distinguishable copies (acts on (K,)*N tensors)."""
    K, N = toy.K, toy.N
    eye = np.eye(K)
    H = np.zeros((K**N, K**N))
    for i in range(N):
        H += _kron_at([toy.h if j == i else eye for j in range(N)])
    for i, j in itertools.combinations(range(N), 2):
        H += toy.omega * _kron_at([toy.O if k in (i, j) else eye for k in range(N)])
    return H


def _kron_at(mats):
    out = np.ones((1, 1))
    for m in mats:
        out = np.kron(out, m)
    return out


def exact_boson_evolution(toy: BosonToy, psi0, times) -> np.ndarray:
    """exp(-iHt) psi0 for each t; returns (n_times,) + psi0.shape."""
    ev, U = np.linalg.eigh(symmetric_hamiltonian(toy))
    c = U.T @ np.asarray(psi0).reshape(-1)
    out = np.exp(-1j * np.outer(times, ev)) * c[None, :]
    return (out @ U.T).reshape((len(times),) + np.shape(psi0))


@dataclass
class BosonResult:
    times: np.ndarray
    mean_state: np.ndarray      # (n_times,) + (K,)*N, normalized by ||Psi_boson(0)||
    stderr_re: np.ndarray
    stderr_im: np.ndarray
    antisym: np.ndarray         # largest antisymmetric-sector component of the mean, per time
    antisym_stderr: np.ndarray  # largest componentwise stderr of the mean, per time
    autocorrelation: AutocorrelationSeries
    L_effective: int
    n_dead: int
    psi0: np.ndarray            # normalized boson state at t = 0


def _antisym_part(T):
    # component of a (K,)*N tensor outside the symmetric sector
    N = T.ndim - 1
    sym = np.zeros_like(T)
    perms = list(itertools.permutations(range(1, N + 1)))
    for p in perms:
        sym += np.transpose(T, (0,) + p)
    return T - sym / len(perms)


def run_boson_ensemble(toy: BosonToy, config: EnsembleConfig) -> BosonResult:
    """Average the projected boson state over ``config.L`` trajectories."""
    initial, psi0 = toy.initial_state()
    norm0 = float(np.linalg.norm(psi0))
    if not norm0 > 0:
        raise ConfigError("projected boson state vanishes; fictitious spins are degenerate")
    psi0n = psi0 / norm0
    prop = _Propagator(toy.decomposition(), toy.h, config, initial)
    times = config.times
    ns = len(times)
    stride = config.stride
    shape = (ns,) + psi0.shape
    acc = {k: _Neumaier(shape) for k in ("re", "im", "re2", "im2")}
    ac = {k: _Neumaier(ns) for k in ("re", "im", "re2", "im2")}
    alive = dead = 0
    spin = FictitiousSpinState(toy.N)
    empty_c = np.zeros(0, complex)
    empty_r = np.zeros((0, toy.N))
    comp = np.zeros(toy.N)
    z = np.empty((stride, prop.p))
    for index in range(config.L):
        rng = trajectory_stream(config.seed, index)
        x = initial.orbitals.copy()
        weight = 1.0 + 0.0j
        vals = np.zeros(shape, dtype=complex)
        vals[0] = psi0n
        status = _kernel.OK
        for k in range(1, ns):
            rng.standard_normal(out=z)
            status, _, _, weight, _ = _kernel.propagate(
                x, weight, (k - 1) * stride, prop.hf, prop.opsf, prop.opsT, prop.omegas, prop.sq,
                prop.Wf, prop.OtOT, z, config.dt, stride, False, prop.scheme,
                config.overlap_guard, config.renormalize, prop.policy, config.rebase_below,
                prop.C, initial.orbitals, empty_c, empty_r, False, comp, empty_r)
            if status != _kernel.OK:
                break
            vals[k] = project_boson(x, initial.beta * weight, spin) / norm0
        if status != _kernel.OK:
            dead += 1
            continue
        alive += 1
        y = np.tensordot(vals, psi0n.conj(), axes=psi0.ndim)
        for name, arr in (("re", vals.real), ("im", vals.imag)):
            acc[name].add(arr)
            acc[name + "2"].add(arr**2)
        for name, arr in (("re", y.real), ("im", y.imag)):
            ac[name].add(arr)
            ac[name + "2"].add(arr**2)
    if alive == 0:
        raise NumericError("every boson trajectory died")
    if dead / config.L > config.max_dead_fraction:
        raise DeadFractionError(f"{dead} of {config.L} boson trajectories died")
    t = {k: v.total for k, v in acc.items()}
    mean = (t["re"] + 1j * t["im"]) / alive
    se_re = _stderr(t["re"], t["re2"], alive)
    se_im = _stderr(t["im"], t["im2"], alive)
    anti = _antisym_part(mean)
    a = {k: v.total for k, v in ac.items()}
    series = AutocorrelationSeries(times, (a["re"] + 1j * a["im"]) / alive,
                                   _stderr(a["re"], a["re2"], alive), _stderr(a["im"], a["im2"], alive), alive)
    flat = anti.reshape(ns, -1)
    return BosonResult(times, mean, se_re, se_im, np.abs(flat).max(axis=1),
                       np.sqrt(se_re**2 + se_im**2).reshape(ns, -1).max(axis=1), series, alive, dead, psi0n)
