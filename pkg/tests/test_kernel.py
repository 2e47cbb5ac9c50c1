import numpy as np
import pytest

from stochhf import _kernel
from stochhf.ensemble import EnsembleConfig, _Propagator, _rebase_factor
from stochhf.sde import TrajectoryState, WienerIncrement, step


def _kernel_run(decomp, energies, initial, z, dt, scheme, policy="flag", renormalize=False):
    cfg = EnsembleConfig(L=1, dt=dt, t_max=dt * len(z), sample_stride=1, scheme=scheme, policy=policy,
                         renormalize=renormalize)
    prop = _Propagator(decomp, energies, cfg, initial)
    x = initial.orbitals.copy()
    N = initial.N
    det = np.zeros(len(z) + 1, complex)
    norms = np.zeros((len(z) + 1, N))
    out = _kernel.propagate(x, 1.0 + 0.0j, 0, prop.hf, prop.opsf, prop.opsT, prop.omegas, prop.sq,
                            prop.Wf, prop.OtOT, z, dt, 1, True, prop.scheme, cfg.overlap_guard,
                            renormalize, prop.policy, cfg.rebase_below, prop.C, initial.orbitals,
                            det, norms, False, np.zeros(N), np.zeros((len(z) + 1, N)))
    return x, det, norms, out


def _slater(x):
    # antisymmetrized product phi_1 ^ phi_2 as an explicit matrix
    a, b = x[0].reshape(-1), x[1].reshape(-1)
    return np.outer(a, b) - np.outer(b, a)


@pytest.mark.parametrize("scheme", ["dt", "dw2", "dw2-euler"])
@pytest.mark.parametrize("renormalize", [False, True])
def test_matches_reference_step(decomp2, energies2, initial2, scheme, renormalize):
    rng = np.random.default_rng(20)
    dt, n = 1e-3, 50
    z = rng.standard_normal((n, decomp2.p))
    x, det, norms, (status, done, got, weight, nreb) = _kernel_run(decomp2, energies2, initial2, z, dt,
                                                                   scheme, renormalize=renormalize)
    assert status == _kernel.OK and done == n and got == n + 1 and weight == 1.0 and nreb == 0
    state = TrajectoryState(initial2.orbitals.copy())
    for k in range(n):
        state = step(state, WienerIncrement(np.sqrt(dt) * z[k], dt), decomp2, energies2, scheme,
                     renormalize=renormalize)
    np.testing.assert_allclose(x, state.orbitals, atol=1e-13)
    np.testing.assert_allclose(norms[-1], state.norms(), atol=1e-13)
    S = np.conj(initial2.orbitals.reshape(2, -1)) @ state.orbitals.reshape(2, -1).T
    assert abs(det[-1] - np.linalg.det(S)) <= 1e-13


def test_rephase_and_rebase_leave_wedge_invariant():
    rng = np.random.default_rng(22)
    x = rng.standard_normal((2, 2, 4)) + 1j * rng.standard_normal((2, 2, 4))
    x *= (np.array([1.3, 0.7]) / np.linalg.norm(x.reshape(2, -1), axis=1))[:, None, None]
    before = _slater(x)
    y = x.copy()
    w = _kernel.rephase(y, 1.0 + 0.0j)
    np.testing.assert_allclose(w * _slater(y), before, atol=1e-13)
    ov = np.vdot(y[0], y[1])
    assert abs(ov.imag) < 1e-13 and ov.real > 0
    C = _rebase_factor(2, 0.8)
    w2, ok = _kernel.rebase(y, C, w)
    assert ok
    np.testing.assert_allclose(w2 * _slater(y), before, atol=1e-12)
    # norms kept, Gram matrix driven to the target overlap
    np.testing.assert_allclose(np.linalg.norm(y.reshape(2, -1), axis=1), [1.3, 0.7], rtol=1e-13)
    G = np.conj(y.reshape(2, -1)) @ y.reshape(2, -1).T
    assert G[0, 1] / np.sqrt(G[0, 0].real * G[1, 1].real) == pytest.approx(0.8, abs=1e-13)


def test_rank_deficient_rebase_reports_failure():
    x = np.zeros((2, 1, 3), complex)
    x[0, 0, 0] = x[1, 0, 0] = 1.0
    _, ok = _kernel.rebase(x, _rebase_factor(2, 0.8), 1.0 + 0.0j)
    assert not ok


def test_overlap_guard_marks_dead(energies2, initial2, decomp2):
    x = initial2.orbitals.copy()
    # make the pair orthogonal in the real part of the overlap
    x[1] = x[1] - np.vdot(x[0], x[1]) * x[0]
    x[1] /= np.linalg.norm(x[1])
    init = type(initial2)(x, initial2.beta)
    z = np.zeros((5, decomp2.p))
    _, _, _, (status, done, *_rest) = _kernel_run(decomp2, energies2, init, z, 1e-3, "dt", "flag")
    assert status == _kernel.DEAD and done == 0


def test_overlap_det():
    rng = np.random.default_rng(23)
    bras = rng.standard_normal((3, 2, 2)) + 1j * rng.standard_normal((3, 2, 2))
    kets = rng.standard_normal((3, 2, 2)) + 1j * rng.standard_normal((3, 2, 2))
    S = np.zeros((3, 3), complex)
    ref = np.linalg.det(np.conj(bras.reshape(3, -1)) @ kets.reshape(3, -1).T)
    assert abs(_kernel.overlap_det(kets, bras, S) - ref) <= 1e-12
