"""Compiled single-trajectory propagator.

Same update as :func:`stochhf.sde.step`, fused over many steps of one
trajectory so the orbitals stay in cache. Standard normals are supplied by
the caller (one row of ``p`` per step), which keeps random streams under
numpy's control and makes the kernel deterministic.

Operators are passed flattened, ``opsf[s, a*K + b] = O_s[a, b]``; the two
contractions per step (expectations and the applied operator) are small
BLAS products with the real and imaginary parts split. The step body lives
inside the time loop on purpose: per-step helper calls with many array
arguments cost more than the arithmetic at desk sizes.

Besides the plain update, the propagator can re-express the orbitals at
step boundaries without changing the antisymmetrized product they
represent (the change is absorbed into a complex trajectory weight):

* rephase: multiply phi_k (k >= 1) by a phase so <phi_0|phi_k> is real and
  positive;
* rebase: when a pairwise |Re<phi_j|phi_k>| falls below a threshold,
  replace the orbitals by another normalized set spanning the same
  subspace, with a fixed target Gram matrix.

Both leave weight * (phi_1 ^ ... ^ phi_N) invariant, so the estimator is
unchanged in expectation while the coupling singularity is avoided.
"""

from __future__ import annotations

import numpy as np
from numba import njit

SCHEME_CODES = {"dt": 0, "dw2": 1, "dw2-euler": 2}
POLICY_CODES = {"flag": 0, "rephase": 1, "rebase": 2}

# reassociation lets the short reductions vectorize; no finite-math assumptions
_FM = {"reassoc", "contract"}

OK = 0
DEAD = 1
NONFINITE = 2


@njit(cache=True)
def overlap_det(x, bras, S):
    """det S with S[j, k] = <bras_j|x_k>."""
    N, nb, K = x.shape
    for j in range(N):
        for k in range(N):
            acc = 0.0 + 0.0j
            for t in range(nb):
                for a in range(K):
                    acc += np.conj(bras[j, t, a]) * x[k, t, a]
            S[j, k] = acc
    if N == 1:
        return S[0, 0]
    if N == 2:
        return S[0, 0] * S[1, 1] - S[0, 1] * S[1, 0]
    return np.linalg.det(S)


@njit(cache=True, inline="always")
def rephase(x, weight):
    """Rotate phi_k (k >= 1) so <phi_0|phi_k> is real positive; returns new weight."""
    N, nb, K = x.shape
    for k in range(1, N):
        acc = 0.0 + 0.0j
        for t in range(nb):
            for a in range(K):
                acc += np.conj(x[0, t, a]) * x[k, t, a]
        mag = abs(acc)
        if mag == 0.0:
            continue
        ph = np.conj(acc) / mag
        for t in range(nb):
            for a in range(K):
                x[k, t, a] *= ph
        weight /= ph
    return weight


@njit(cache=True, inline="always")
def min_re_overlap(x):
    N, nb, K = x.shape
    lo = np.inf
    for j in range(N):
        for k in range(j + 1, N):
            acc = 0.0
            for t in range(nb):
                for a in range(K):
                    acc += x[j, t, a].real * x[k, t, a].real + x[j, t, a].imag * x[k, t, a].imag
            if abs(acc) < lo:
                lo = abs(acc)
    return lo


@njit(cache=True)
def rebase(x, C, weight):
    """Replace the orbitals by Q @ C D within their span, carrying det(R)/det(C D).

    x = Q R by modified Gram-Schmidt (R upper triangular); C is the
    upper-triangular factor of the target Gram matrix (unit diagonal),
    C^H C = G, and D = diag(||phi_j||) keeps every orbital norm unchanged.
    Returns (weight, ok); ok is False for a rank-deficient set.
    """
    N, nb, K = x.shape
    Q = x.copy()
    scale = np.empty(N)
    for j in range(N):
        nn = 0.0
        for t in range(nb):
            for a in range(K):
                nn += x[j, t, a].real ** 2 + x[j, t, a].imag ** 2
        scale[j] = np.sqrt(nn)
    detR = 1.0
    for j in range(N):
        for i in range(j):
            r = 0.0 + 0.0j
            for t in range(nb):
                for a in range(K):
                    r += np.conj(Q[i, t, a]) * Q[j, t, a]
            for t in range(nb):
                for a in range(K):
                    Q[j, t, a] -= r * Q[i, t, a]
        nn = 0.0
        for t in range(nb):
            for a in range(K):
                nn += Q[j, t, a].real ** 2 + Q[j, t, a].imag ** 2
        nn = np.sqrt(nn)
        if not nn > 0.0:
            return weight, False
        detR *= nn
        for t in range(nb):
            for a in range(K):
                Q[j, t, a] /= nn
    detC = 1.0 + 0.0j
    for j in range(N):
        detC *= C[j, j] * scale[j]
        for t in range(nb):
            for a in range(K):
                acc = 0.0 + 0.0j
                for i in range(j + 1):
                    acc += Q[i, t, a] * C[i, j]
                x[j, t, a] = acc * scale[j]
    return weight * detR / detC, True


@njit(cache=True, fastmath=_FM)
def propagate(x, weight, step0, hf, opsf, opsT, omegas, sq, Wf, OtOT, z, dt, stride, last,
              scheme, guard, renorm, policy, rebase_below, C, bras, det_out, norm_out,
              diag, comp, comp_out):
    """Advance one trajectory in place over ``z.shape[0]`` steps.

    x        (N, nb, K) complex orbitals, overwritten with the final state
    weight   complex trajectory weight at entry
    step0    global index of the first step in this call
    hf       (K*K,) flattened complex one-body Hamiltonian
    opsf     (p, K*K) flattened real operators, opsT its transpose (K*K, p)
    omegas   (p,); sq = sqrt(-i*omegas)
    Wf       (K*K,) flattened sum_s |w_s| O_s^T O_s
    OtOT     (K*K, p) flattened O_s^T O_s, transposed (read by dw2-euler only)
    z        (n_steps, p) standard normals
    stride   a sample is taken before every global step index divisible by
             stride, and after the final step when ``last`` is set
    scheme   0 dt form, 1 norm-exact dW^2 form, 2 literal dW^2 Euler form
    policy   0 literal, 1 rephase every step, 2 rephase and rebase
    C        (N, N) upper-triangular target factor for rebasing
    bras     (N, nb, K) fixed reference orbitals for det S(t)
    det_out  (n_samples,) receives weight * det S for samples in this call
    norm_out (n_samples, N) receives <phi_j|phi_j> at those samples
    diag     dt form only: accumulate into comp (N,) the conditional mean
             E[||phi_j'||^2 - ||phi_j||^2 | phi] of every step, a low-variance
             estimator of the mean norm drift; comp_out (n_samples, N)
             receives its running value at each sample

    Returns (status, steps_done, samples_done, weight, n_rebase).
    """
    N, nb, K = x.shape
    p = opsf.shape[0]
    KK = K * K
    n_steps = z.shape[0]
    n_samples = det_out.shape[0]
    m = N - 1 if N > 1 else 1
    sqdt = np.sqrt(dt)

    new = np.empty_like(x)
    R = np.zeros((2 * N, KK))
    E = np.zeros((2 * N, p))
    E2 = np.zeros((2 * N, p if scheme == 2 else 1))
    Cm = np.zeros((2 * N, p))
    M = np.zeros((2 * N, KK))
    A = np.zeros(KK, dtype=np.complex128)
    xi = np.zeros(p, dtype=np.complex128)
    nrm = np.zeros(N)
    vtot = np.zeros(N)
    reov = np.zeros((N, N))
    S = np.zeros((N, N), dtype=np.complex128)
    n_rebase = 0

    sample = 0
    status = OK
    done = 0
    for n in range(n_steps + 1):
        if n == n_steps and not last:
            break
        if policy >= 1:
            weight = rephase(x, weight)
            if policy == 2 and N > 1 and min_re_overlap(x) < rebase_below:
                weight, good = rebase(x, C, weight)
                if not good:
                    status = DEAD
                    break
                n_rebase += 1
        if (step0 + n) % stride == 0 and sample < n_samples:
            det_out[sample] = weight * overlap_det(x, bras, S)
            for j in range(N):
                acc = 0.0
                for t in range(nb):
                    for a in range(K):
                        acc += x[j, t, a].real ** 2 + x[j, t, a].imag ** 2
                norm_out[sample, j] = acc
                if diag:
                    comp_out[sample, j] = comp[j]
            sample += 1
        if n == n_steps:
            break

        # ---- one synchronous Euler-Maruyama step x -> new ----
        # moments: R[2j, a*K+b] + i R[2j+1, a*K+b] = sum_t conj(x_ta) x_tb
        for j in range(N):
            for q in range(KK):
                R[2 * j, q] = 0.0
                R[2 * j + 1, q] = 0.0
            for t in range(nb):
                for a in range(K):
                    ar = x[j, t, a].real
                    ai = x[j, t, a].imag
                    base = a * K
                    for b in range(K):
                        br = x[j, t, b].real
                        bi = x[j, t, b].imag
                        R[2 * j, base + b] += ar * br + ai * bi
                        R[2 * j + 1, base + b] += ar * bi - ai * br
            nj = 0.0
            for a in range(K):
                nj += R[2 * j, a * K + a]
            nrm[j] = nj
        bad = False
        for j in range(N):
            if not nrm[j] > 0.0:
                bad = True
        if bad:
            status = NONFINITE
            break

        # E[2j, s] + i E[2j+1, s] = <O_s>_j
        np.dot(R, opsT, E)
        if scheme == 2:
            np.dot(R, OtOT, E2)
        for j in range(N):
            inv = 1.0 / nrm[j]
            v = 0.0
            for q in range(KK):
                v += Wf[q] * R[2 * j, q]
            v *= inv
            for s in range(p):
                E[2 * j, s] *= inv
                E[2 * j + 1, s] *= inv
                mag2 = E[2 * j, s] ** 2 + E[2 * j + 1, s] ** 2
                v -= abs(omegas[s]) * mag2
                if scheme == 2:
                    E2[2 * j + 1, s] = E2[2 * j, s] * inv - mag2
            vtot[j] = v

        lo = np.inf
        for j in range(N):
            for k in range(j + 1, N):
                acc = 0.0
                for t in range(nb):
                    for a in range(K):
                        acc += (x[j, t, a].real * x[k, t, a].real
                                + x[j, t, a].imag * x[k, t, a].imag)
                reov[j, k] = acc
                reov[k, j] = acc
                if abs(acc) < lo:
                    lo = abs(acc)
        if N > 1 and lo <= guard:
            status = DEAD
            break

        for ps in range(2):
            if ps == 0 and not (diag and scheme == 0):
                continue
            # applied operators M_j = sum_s c_js O_s with
            # c_js = sqrt(-i w_s) dW_s - i dt w_s sum_{k != j} <O_s>_k
            for s in range(p):
                xi[s] = sq[s] * (sqdt * z[n, s]) if ps == 1 else 0.0
            for j in range(N):
                for s in range(p):
                    gr = 0.0
                    gi = 0.0
                    for k in range(N):
                        if k != j:
                            gr += E[2 * k, s]
                            gi += E[2 * k + 1, s]
                    w = omegas[s]
                    Cm[2 * j, s] = xi[s].real + dt * w * gi
                    Cm[2 * j + 1, s] = xi[s].imag - dt * w * gr
            np.dot(Cm, opsf, M)

            for j in range(N):
                # scalar part (i dt/2) sum_{k!=j} sum_s w_s <O_s>_j <O_s>_k - sum_s xi_s <O_s>_j
                alpha = 1.0 + 0.0j
                for s in range(p):
                    gr = 0.0
                    gi = 0.0
                    for k in range(N):
                        if k != j:
                            gr += E[2 * k, s]
                            gi += E[2 * k + 1, s]
                    ej = complex(E[2 * j, s], E[2 * j + 1, s])
                    alpha += (0.5j * dt * omegas[s] * complex(gr, gi) - xi[s]) * ej
                for q in range(KK):
                    A[q] = complex(M[2 * j, q], M[2 * j + 1, q]) - 1j * dt * hf[q]
                for t in range(nb):
                    for a in range(K):
                        base = a * K
                        acc = alpha * x[j, t, a]
                        for b in range(K):
                            acc += A[base + b] * x[j, t, b]
                        new[j, t, a] = acc

            # norm compensation along the partner orbitals
            if N > 1:
                for j in range(N):
                    if scheme == 0:
                        gain = nrm[j] * vtot[j] * dt
                    elif scheme == 2:
                        gain = 0.0
                        for s in range(p):
                            gain += abs(omegas[s]) * E2[2 * j + 1, s] * z[n, s] ** 2 * dt
                        gain *= nrm[j]
                    else:
                        # size the compensation so ||new_j|| equals ||x_j|| exactly
                        bb = 0.0
                        ab = 0.0
                        aa = 0.0
                        for t in range(nb):
                            for a in range(K):
                                bc = 0.0 + 0.0j
                                for k in range(N):
                                    if k != j:
                                        bc -= x[k, t, a] / (2.0 * m * reov[j, k])
                                ua = new[j, t, a]
                                bb += bc.real ** 2 + bc.imag ** 2
                                ab += ua.real * bc.real + ua.imag * bc.imag
                                aa += ua.real ** 2 + ua.imag ** 2
                        cc = aa - nrm[j]
                        disc = ab * ab - bb * cc
                        if disc < 0.0 or bb == 0.0:
                            status = DEAD
                            gain = 0.0
                        else:
                            root = np.sqrt(disc)
                            if ab <= 0.0:
                                gain = cc / (-ab + root)
                            else:
                                gain = cc / (-ab - root)
                    for k in range(N):
                        if k != j:
                            c = gain / (2.0 * m * reov[j, k])
                            for t in range(nb):
                                for a in range(K):
                                    new[j, t, a] -= c * x[k, t, a]
                if status != OK:
                    break
            if ps == 0:
                # E[||new_j||^2 | x] = ||new_j(dW=0)||^2 + dt ||x_j||^2 var_j (dt form)
                for j in range(N):
                    acc = 0.0
                    for t in range(nb):
                        for a in range(K):
                            acc += new[j, t, a].real ** 2 + new[j, t, a].imag ** 2
                    comp[j] += acc + dt * nrm[j] * vtot[j] - nrm[j]

        for j in range(N):
            acc = 0.0
            for t in range(nb):
                for a in range(K):
                    acc += new[j, t, a].real ** 2 + new[j, t, a].imag ** 2
            if not np.isfinite(acc):
                status = NONFINITE
            elif renorm:
                r = 1.0 / np.sqrt(acc)
                for t in range(nb):
                    for a in range(K):
                        new[j, t, a] *= r
        if status != OK:
            break
        x[:] = new
        done = n + 1
    return status, done, sample, weight, n_rebase
