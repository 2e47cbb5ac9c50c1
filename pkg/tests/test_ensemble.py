import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochhf.decomp import InteractionDecomposition
from stochhf.ensemble import (AutocorrelationSeries, DeadFractionError, EnsembleConfig, InitialRecipe,
                              InitialState, _Neumaier, initial_stream, read_autocorrelation_csv,
                              run_ensemble, run_trajectory, sample_initial_orbitals, slater_overlap,
                              trajectory_stream, write_autocorrelation_csv, write_metadata)
from stochhf.errors import ConfigError

from conftest import random_orbitals
from oracles import brute_force_pair_overlap


class _ScriptedRng:
    """Feeds fixed coefficient draws to the sampler: real parts, then imaginary parts."""

    def __init__(self, draws):
        self.queue = []
        for re in draws:
            self.queue += [np.asarray(re, float), np.zeros_like(np.asarray(re, float))]

    def standard_normal(self, shape):
        out = self.queue.pop(0)
        assert out.shape == tuple(shape)
        return out


class TestInitialState:
    def test_rejects_orthogonal_then_identical(self):
        orth = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]]
        same = [[1.0, 1.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0]]
        good = [[1.0, 0.5, 0.0, 0.0], [0.5, 1.0, 0.0, 0.0]]
        rng = _ScriptedRng([orth, same, good])
        init = sample_initial_orbitals(InitialRecipe(), 2, rng)
        assert not rng.queue
        ov = np.vdot(init.orbitals[0], init.orbitals[1])
        assert ov.real == pytest.approx(0.8, abs=1e-14)

    def test_beta_normalization(self, initial2):
        S = np.conj(initial2.orbitals.reshape(2, -1)) @ initial2.orbitals.reshape(2, -1).T
        assert initial2.beta**2 * 2 * np.linalg.det(S).real == pytest.approx(1.0, abs=1e-14)
        ov = np.vdot(initial2.orbitals[0], initial2.orbitals[1])
        assert initial2.beta == pytest.approx(1 / math.sqrt(2 * (1 - abs(ov) ** 2)), rel=1e-14)

    def test_span_and_bounds(self):
        for seed in range(20):
            init = sample_initial_orbitals(InitialRecipe(), 2, initial_stream(seed))
            x = init.orbitals
            np.testing.assert_allclose(np.linalg.norm(x.reshape(2, -1), axis=1), 1.0, atol=1e-15)
            mask = np.zeros(x.shape[1:], bool)
            mask[:, [0, 1]] = True          # 1s and 2s in both spin blocks
            assert np.all(x[:, ~mask] == 0)
            assert 0.1 <= abs(np.vdot(x[0], x[1])) <= 0.999

    def test_exhausted_tries(self):
        recipe = InitialRecipe(min_overlap=0.9999, max_overlap=1.0, max_tries=5)
        with pytest.raises(ConfigError):
            sample_initial_orbitals(recipe, 2, initial_stream(0))

    def test_recipe_validation(self):
        with pytest.raises(ConfigError):
            InitialRecipe(span=((1, 0, 0, 1),))
        with pytest.raises(ConfigError):
            InitialRecipe(span=((1, 0, 0, 2), (1, 0, 0, 1))).indices(1)
        with pytest.raises(ConfigError):
            InitialRecipe(min_overlap=0.5, max_overlap=0.4)

    def test_three_particles(self):
        recipe = InitialRecipe(n_particles=3)
        init = sample_initial_orbitals(recipe, 2, initial_stream(1))
        assert init.N == 3
        assert init.beta**2 * slater_overlap(init.orbitals, init.orbitals).real == pytest.approx(1.0, abs=1e-13)


class TestSlaterOverlap:
    def test_orthonormal(self):
        x = np.zeros((2, 2, 3), complex)
        x[0, 0, 0] = x[1, 1, 2] = 1.0
        assert slater_overlap(x, x) == pytest.approx(2.0)

    def test_repeated_orbital(self):
        rng = np.random.default_rng(0)
        x = random_orbitals(rng, 2, 3)
        kets = np.stack([x[0], x[0]])
        assert abs(slater_overlap(x, kets)) <= 1e-15

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((2, 2, 3)) + 1j * rng.standard_normal((2, 2, 3))
        b = rng.standard_normal((2, 2, 3)) + 1j * rng.standard_normal((2, 2, 3))
        assert abs(slater_overlap(a, b) - brute_force_pair_overlap(a, b)) <= 1e-13 * max(1, abs(slater_overlap(a, b)))

    def test_mismatched(self):
        with pytest.raises(ValueError):
            slater_overlap(np.zeros((2, 1, 2)), np.zeros((3, 1, 2)))


class TestConfig:
    def test_defaults(self):
        cfg = EnsembleConfig(L=10, dt=1e-3, t_max=5.0)
        assert cfg.n_steps == 5000 and cfg.stride == 100 and len(cfg.times) == 51
        assert cfg.times[-1] == pytest.approx(5.0)

    @pytest.mark.parametrize("kw", [dict(L=0), dict(dt=-1.0), dict(t_max=1e-5), dict(scheme="rk"),
                                    dict(policy="none"), dict(seed=-1), dict(sample_stride=0),
                                    dict(overlap_guard=0.5), dict(track_norm_drift=True, scheme="dw2")])
    def test_rejects(self, kw):
        base = dict(L=10, dt=1e-3, t_max=1.0)
        base.update(kw)
        with pytest.raises(ConfigError):
            EnsembleConfig(**base)

    def test_non_multiple_horizon(self):
        with pytest.raises(ConfigError):
            EnsembleConfig(L=1, dt=3e-3, t_max=1.0).n_steps

    def test_digest(self):
        a = EnsembleConfig(L=10, dt=1e-3, t_max=1.0)
        assert a.digest() == EnsembleConfig(L=99, dt=1e-3, t_max=1.0, block_size=7).digest()
        assert a.digest() != EnsembleConfig(L=10, dt=1e-3, t_max=1.0, seed=1).digest()

    def test_recipe_from_dict(self):
        cfg = EnsembleConfig(L=1, dt=1e-3, t_max=1.0, recipe={"min_overlap": 0.2})
        assert cfg.recipe.min_overlap == 0.2


class TestStreams:
    def test_independent_and_reproducible(self):
        a = trajectory_stream(5, 3).standard_normal(4)
        np.testing.assert_array_equal(a, trajectory_stream(5, 3).standard_normal(4))
        assert not np.allclose(a, trajectory_stream(5, 4).standard_normal(4))
        assert not np.allclose(a, trajectory_stream(6, 3).standard_normal(4))

    def test_chunked_draws_equal_single_draw(self):
        a = trajectory_stream(1, 0).standard_normal((100, 3))
        g = trajectory_stream(1, 0)
        b = np.empty((100, 3))
        g.standard_normal(out=b[:37])
        g.standard_normal(out=b[37:])
        np.testing.assert_array_equal(a, b)


def _cfg(**kw):
    base = dict(L=40, dt=1e-3, t_max=1.0, block_size=16)
    base.update(kw)
    return EnsembleConfig(**base)


class TestTrajectory:
    def test_initial_sample_is_one(self, decomp2, energies2, initial2):
        rec = run_trajectory(initial2, decomp2, energies2, _cfg())
        assert rec.values[0] == pytest.approx(1.0, abs=1e-14)
        assert rec.alive and rec.steps == 1000 and rec.n_recorded == 51

    def test_deterministic(self, decomp2, energies2, initial2):
        a = run_trajectory(initial2, decomp2, energies2, _cfg(), 7)
        b = run_trajectory(initial2, decomp2, energies2, _cfg(), 7)
        assert a.values.tobytes() == b.values.tobytes()
        c = run_trajectory(initial2, decomp2, energies2, _cfg(), 8)
        assert not np.allclose(a.values, c.values)

    def test_zero_interaction_analytic(self, energies2):
        # both orbitals in the 1s level (mixed spin): free evolution is a pure phase e^{+4it}
        rng = np.random.default_rng(3)
        x = np.zeros((2, 2, 5), complex)
        x[:, :, 0] = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        x /= np.linalg.norm(x.reshape(2, -1), axis=1)[:, None, None]
        S = np.conj(x.reshape(2, -1)) @ x.reshape(2, -1).T
        init = InitialState(x, 1 / math.sqrt(2 * np.linalg.det(S).real))
        d = InteractionDecomposition(omegas=[0.0], ops=np.eye(5)[None], tol=0.0, K=5)
        cfg = EnsembleConfig(L=1, dt=2.5e-5, t_max=1.0, renormalize=True)
        rec = run_trajectory(init, d, energies2, cfg)
        exact = np.exp(4j * cfg.times)
        assert np.max(np.abs(rec.values - exact)) <= 1e-8

    def test_literal_policy_collapses(self, decomp2, energies2, initial2):
        # without a gauge policy the coupling drives Re<phi_1|phi_2> into the guard
        cfg = EnsembleConfig(L=16, dt=1e-3, t_max=5.0, policy="flag", max_dead_fraction=1.0)
        res = run_ensemble(cfg, decomp2, energies2, initial2)
        assert res.n_dead >= 8
        ok = EnsembleConfig(L=16, dt=1e-3, t_max=5.0)
        assert run_ensemble(ok, decomp2, energies2, initial2).n_dead == 0


class TestEnsemble:
    def test_t0_row(self, decomp2, energies2, initial2):
        res = run_ensemble(_cfg(), decomp2, energies2, initial2)
        s = res.series
        assert s.values[0] == pytest.approx(1.0, abs=1e-14)
        assert s.stderr_re[0] <= 1e-14 and s.stderr_im[0] <= 1e-14
        assert s.L_effective == 40 and res.complete

    def test_samples_initial_state_from_seed(self, decomp2, energies2, initial2):
        res = run_ensemble(_cfg(L=2), decomp2, energies2)
        np.testing.assert_array_equal(res.initial.orbitals, initial2.orbitals)

    def test_prefix_property(self, decomp2, energies2, initial2):
        small = run_ensemble(_cfg(L=16), decomp2, energies2, initial2)
        big = run_ensemble(_cfg(L=32), decomp2, energies2, initial2, stop_after=16)
        assert small.series.values.tobytes() == big.series.values.tobytes()
        assert not big.complete

    def test_workers_identical(self, decomp2, energies2, initial2, tmp_path):
        a = run_ensemble(_cfg(), decomp2, energies2, initial2, workers=1)
        b = run_ensemble(_cfg(), decomp2, energies2, initial2, workers=3)
        write_autocorrelation_csv(a.series, tmp_path / "a.csv")
        write_autocorrelation_csv(b.series, tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_checkpoint_restart(self, decomp2, energies2, initial2, tmp_path):
        full = run_ensemble(_cfg(), decomp2, energies2, initial2)
        ck = tmp_path / "run.ckpt"
        part = run_ensemble(_cfg(), decomp2, energies2, initial2, checkpoint=ck, stop_after=20)
        assert not part.complete and ck.exists()
        resumed = run_ensemble(_cfg(), decomp2, energies2, initial2, checkpoint=ck)
        assert resumed.complete
        for f in ("values", "stderr_re", "stderr_im"):
            assert getattr(resumed.series, f).tobytes() == getattr(full.series, f).tobytes()

    def test_checkpoint_mismatch(self, decomp2, energies2, initial2, tmp_path):
        ck = tmp_path / "run.ckpt"
        run_ensemble(_cfg(), decomp2, energies2, initial2, checkpoint=ck, stop_after=16)
        with pytest.raises(ConfigError):
            run_ensemble(_cfg(dt=5e-4), decomp2, energies2, initial2, checkpoint=ck)
        ck.write_bytes(b"nonsense")
        with pytest.raises(ConfigError):
            run_ensemble(_cfg(), decomp2, energies2, initial2, checkpoint=ck)

    def test_dead_fraction_error(self, decomp2, energies2, initial2):
        cfg = EnsembleConfig(L=8, dt=1e-3, t_max=5.0, policy="flag")
        with pytest.raises(DeadFractionError) as info:
            run_ensemble(cfg, decomp2, energies2, initial2)
        assert info.value.result is not None and info.value.result.n_dead > 0

    def test_dw2_mean_norm(self, decomp2, energies2, initial2):
        res = run_ensemble(_cfg(scheme="dw2", t_max=2.0), decomp2, energies2, initial2)
        assert res.max_norm_deviation <= 1e-8
        assert np.max(np.abs(res.mean_norms - 1.0)) <= 1e-8

    def test_dt_mean_norm_within_three_stderr(self, decomp2, energies2, initial2):
        # the dt form conserves the norm only in the mean, up to its O(dt) weak bias;
        # at dt * t = 1e-5 that bias is below the sampling error of 10^4 trajectories
        cfg = EnsembleConfig(L=10000, dt=5e-5, t_max=0.2, block_size=512)
        res = run_ensemble(cfg, decomp2, energies2, initial2)
        dev = np.abs(res.mean_norms[1:] - 1.0)
        assert np.all(dev <= 3.0 * res.stderr_norms[1:])

    def test_dt_norm_drift_is_the_accumulated_conditional_mean(self, decomp2, energies2, initial2):
        # ||phi||^2 - 1 minus the summed conditional mean increments is a martingale
        cfg = _cfg(L=400, t_max=5.0, track_norm_drift=True, block_size=100)
        res = run_ensemble(cfg, decomp2, energies2, initial2)
        assert res.mean_norm_drift is not None
        assert np.all(res.mean_norm_drift[-1] > 0)
        se = np.hypot(res.stderr_norms, res.stderr_norm_drift)[1:]
        frac = np.mean(np.abs(res.mean_norms[1:] - 1.0 - res.mean_norm_drift[1:]) <= 3.0 * se)
        assert frac >= 0.95

    def test_stderr_shrinks_with_L(self, decomp2, energies2, initial2):
        a = run_ensemble(_cfg(L=100), decomp2, energies2, initial2)
        b = run_ensemble(_cfg(L=400), decomp2, energies2, initial2)
        ratio = np.mean(a.series.stderr_re[1:] / b.series.stderr_re[1:])
        assert 1.5 < ratio < 2.6


class TestAccumulation:
    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_order_independent(self, seed):
        rng = np.random.default_rng(seed)
        vals = rng.standard_normal((500, 4)) * 10.0 ** rng.integers(-3, 4, size=(500, 1))
        sums = []
        for perm in (np.arange(500), rng.permutation(500), rng.permutation(500)):
            acc = _Neumaier(4)
            for v in vals[perm]:
                acc.add(v)
            sums.append(acc.total)
        scale = np.sum(np.abs(vals), axis=0)
        for s in sums[1:]:
            assert np.all(np.abs(s - sums[0]) <= 1e-15 * scale)


class TestFiles:
    def test_csv_round_trip(self, tmp_path):
        s = AutocorrelationSeries(np.array([0.0, 0.1]), np.array([1.0 + 0j, 0.3 - 0.1j]),
                                  np.array([0.0, 0.01]), np.array([0.0, 0.02]), 17)
        write_autocorrelation_csv(s, tmp_path / "a.csv")
        lines = (tmp_path / "a.csv").read_text().splitlines()
        assert lines[0] == "t,re,im,stderr_re,stderr_im,L_effective"
        assert lines[1] == "0,1,0,0,0,17"
        back = read_autocorrelation_csv(tmp_path / "a.csv")
        np.testing.assert_array_equal(back.values, s.values)
        assert back.L_effective == 17

    def test_csv_rejects_other_files(self, tmp_path):
        (tmp_path / "x.csv").write_text("a,b\n1,2\n")
        with pytest.raises(ConfigError):
            read_autocorrelation_csv(tmp_path / "x.csv")

    def test_metadata(self, decomp2, energies2, initial2, tmp_path):
        res = run_ensemble(_cfg(L=4), decomp2, energies2, initial2)
        write_metadata(res, tmp_path / "m.json", {"note": 1})
        doc = json.loads((tmp_path / "m.json").read_text())
        for key in ("config", "seed", "scheme", "code_version", "dead_trajectories", "wall_time_s",
                    "initial_orbitals"):
            assert key in doc
        assert doc["note"] == 1
        x = np.array(doc["initial_orbitals"]["re"]) + 1j * np.array(doc["initial_orbitals"]["im"])
        np.testing.assert_array_equal(x, initial2.orbitals)
