"""Independent reference implementations used only by the tests.

Nothing here imports the package's numerical modules: the Coulomb oracle
uses scipy's Laguerre polynomials, adaptive quadrature and numerically
integrated spherical harmonics, the SDE reference loops over explicit
spin-orbital indices, and the propagation oracle works in the full
two-particle product space.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np
from scipy import integrate, linalg, special

# ---------------------------------------------------------------- Coulomb


def hydrogenic_radial(n, l, Z):
    """Textbook normalized R_nl(r) built on scipy's generalized Laguerre polynomial."""
    norm = math.sqrt((2.0 * Z / n) ** 3 * math.factorial(n - l - 1) / (2.0 * n * math.factorial(n + l)))
    lag = special.genlaguerre(n - l - 1, 2 * l + 1)

    def R(r):
        rho = 2.0 * Z * r / n
        return norm * np.exp(-rho / 2.0) * rho**l * lag(rho)

    return R


R_MAX = 80.0


@lru_cache(maxsize=None)
def slater_radial(L, a, c, b, d, Z):
    """R^L = int int R_a R_c (r1) R_b R_d (r2) r_<^L / r_>^(L+1) r1^2 r2^2, by nested quad.

    ``a, c, b, d`` are (n, l) pairs; particle 1 carries a, c and particle 2 b, d.
    """
    Ra, Rc, Rb, Rd = (hydrogenic_radial(n, l, Z) for n, l in (a, c, b, d))

    def f2(r):
        return Rb(r) * Rd(r) * r * r

    def inner(r1):
        lo = integrate.quad(lambda r: f2(r) * r**L, 0.0, r1, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
        hi = integrate.quad(lambda r: f2(r) / r ** (L + 1), r1, R_MAX, epsabs=1e-13, epsrel=1e-12,
                            limit=200)[0]
        return lo / r1 ** (L + 1) + hi * r1**L

    def outer(r1):
        if r1 == 0.0:
            return 0.0
        return Ra(r1) * Rc(r1) * r1 * r1 * inner(r1)

    return integrate.quad(outer, 0.0, R_MAX, epsabs=1e-12, epsrel=1e-11, limit=400)[0]


_NU, _WU = np.polynomial.legendre.leggauss(32)
_NPHI = 32
_PHI = 2.0 * np.pi * np.arange(_NPHI) / _NPHI
_THETA = np.arccos(_NU)
_TH, _PH = np.meshgrid(_THETA, _PHI, indexing="ij")
_W = np.outer(_WU, np.full(_NPHI, 2.0 * np.pi / _NPHI))


def _Y(l, m):
    return special.sph_harm_y(l, m, _TH, _PH)


def angular_integral(bra, mid_conj, mid, ket):
    """Numerical int conj(Y_bra) [conj(Y_mid) | Y_mid] Y_ket dOmega on a product Gauss grid."""
    l1, m1 = bra
    L, M = mid
    l2, m2 = ket
    Ymid = _Y(L, M)
    Ymid = np.conj(Ymid) if mid_conj else Ymid
    return complex(np.sum(_W * np.conj(_Y(l1, m1)) * Ymid * _Y(l2, m2)))


def quadrature_coulomb(a, b, c, d, Z=2.0):
    """<a(1) b(2)|1/r12|c(1) d(2)> for (n, l, m) orbitals via multipole expansion.

    1/r12 = sum_LM 4 pi/(2L+1) r_<^L/r_>^(L+1) conj(Y_LM(1)) Y_LM(2).
    """
    (na, la, ma), (nb, lb, mb), (nc, lc, mc), (nd, ld, md) = a, b, c, d
    total = 0.0 + 0.0j
    for L in range(0, min(la + lc, lb + ld) + 1):
        for M in range(-L, L + 1):
            A1 = angular_integral((la, ma), True, (L, M), (lc, mc))
            if abs(A1) < 1e-13:
                continue
            A2 = angular_integral((lb, mb), False, (L, M), (ld, md))
            if abs(A2) < 1e-13:
                continue
            rad = slater_radial(L, (na, la), (nc, lc), (nb, lb), (nd, ld), float(Z))
            total += 4.0 * np.pi / (2 * L + 1) * rad * A1 * A2
    assert abs(total.imag) < 1e-10
    return total.real


def orbitals_upto(n_max):
    return [(n, l, m) for n in range(1, n_max + 1) for l in range(n) for m in range(-l, l + 1)]


# ---------------------------------------------------------------- SDE reference


def _spin_op(O):
    # spatial operator extended to (spin block x spatial) vectors, spin slow
    return np.kron(np.eye(2), O)


def reference_increment(x, omegas, ops, h, dws, dt, scheme="dt"):
    """Euler increment of every orbital from explicit loops; x has shape (N, 2, K).

    ``scheme="dt"`` multiplies the compensation by dt, ``"dw2-euler"`` by
    sum_s (...) dW_s^2. Returns the (N, 2, K) array of new orbitals.
    """
    N, nb, K = x.shape
    v = x.reshape(N, nb * K)
    H = _spin_op(np.asarray(h, dtype=complex))
    Os = [_spin_op(O) for O in ops]

    def ev(j, A):
        num = 0j
        den = 0.0
        for a in range(nb * K):
            den += abs(v[j, a]) ** 2
            for b in range(nb * K):
                num += np.conj(v[j, a]) * A[a, b] * v[j, b]
        return num / den

    E = [[ev(j, A) for A in Os] for j in range(N)]
    E2 = [[ev(j, A.T @ A).real for A in Os] for j in range(N)]
    out = np.zeros_like(v)
    for j in range(N):
        nrm = float(np.vdot(v[j], v[j]).real)
        new = v[j].copy()
        new += dt * (-1j) * (H @ v[j])
        for k in range(N):
            if k == j:
                continue
            for s in range(len(omegas)):
                w = omegas[s]
                new += dt * 0.5j * w * E[j][s] * E[k][s] * v[j]
                new += dt * (-1j) * w * E[k][s] * (Os[s] @ v[j])
        for s in range(len(omegas)):
            root = np.sqrt(-1j * omegas[s])
            new += root * (Os[s] @ v[j] - E[j][s] * v[j]) * dws[s]
        for k in range(N):
            if k == j:
                continue
            re = float(np.vdot(v[j], v[k]).real)
            for s in range(len(omegas)):
                var = E2[j][s] - abs(E[j][s]) ** 2
                fac = dt if scheme == "dt" else dws[s] ** 2
                new -= fac * abs(omegas[s]) * nrm * var / (2.0 * (N - 1) * re) * v[k]
        out[j] = new
    return out.reshape(N, nb, K)


# ---------------------------------------------------------------- overlaps and exact propagation


def brute_force_pair_overlap(chi, phi):
    """<chi1 chi2 - chi2 chi1 | phi1 phi2 - phi2 phi1> from explicit product vectors.

    This is <A chi|A phi> with the unnormalized antisymmetrizer A = sum_P sgn(P) P.
    """
    c1, c2 = (np.asarray(c).reshape(-1) for c in chi)
    p1, p2 = (np.asarray(p).reshape(-1) for p in phi)
    bra = np.kron(c1, c2) - np.kron(c2, c1)
    ket = np.kron(p1, p2) - np.kron(p2, p1)
    return np.vdot(bra, ket)


def product_space_hamiltonian(h_spatial, V_tensor):
    """Two-particle H on (2K)^2 product space; V_tensor[i1, j1, i2, j2] = <i1 i2|V|j1 j2>."""
    K = V_tensor.shape[0]
    M = 2 * K
    h = np.kron(np.eye(2), np.asarray(h_spatial, dtype=float))
    H = np.kron(h, np.eye(M)) + np.kron(np.eye(M), h)
    Vp = np.zeros((M, M, M, M))
    for s, t in itertools.product(range(2), repeat=2):
        for i1, j1, i2, j2 in itertools.product(range(K), repeat=4):
            # rows (a, b) = (bra of 1, bra of 2), columns (c, d) = (ket of 1, ket of 2)
            Vp[s * K + i1, t * K + i2, s * K + j1, t * K + j2] = V_tensor[i1, j1, i2, j2]
    return H + Vp.reshape(M * M, M * M)


def product_space_autocorrelation(H, orbitals, times):
    """<psi0|exp(-iHt)|psi0> for the normalized antisymmetrized product of two orbitals."""
    p1, p2 = (np.asarray(o).reshape(-1) for o in orbitals)
    psi = np.kron(p1, p2) - np.kron(p2, p1)
    psi = psi / np.linalg.norm(psi)
    return np.array([np.vdot(psi, linalg.expm(-1j * H * t) @ psi) for t in times])
