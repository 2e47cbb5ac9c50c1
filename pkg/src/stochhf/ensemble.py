"""Monte-Carlo ensembles of stochastic Slater-determinant trajectories.

One initial determinant is sampled per run; every realization starts from
it and differs only by its Wiener path. Realization ``l`` draws its normals
from a Philox stream keyed by ``(seed, l)``, so the sampled paths depend on
neither the ensemble size nor the worker count. Results are accumulated in
trajectory order with compensated sums, which makes finished runs,
checkpoint resumes and any worker count agree byte for byte.

The propagator re-expresses the orbitals within their span when a pair
overlap gets small (``policy="rebase"``, the default). The literal equations
drive pair overlaps toward zero, where the norm-compensation term is
singular; the re-expression leaves the antisymmetrized product, and so the
estimator, unchanged. ``policy="flag"`` runs the equations literally and
only counts dead trajectories.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import _kernel
from .basis import basis_size, orbital_index
from .decomp import InteractionDecomposition
from .errors import ConfigError, NumericError
from .sde import DEFAULT_OVERLAP_GUARD, SCHEMES, hamiltonian_matrix, sqrt_neg_i_omega

__all__ = [
    "InitialRecipe",
    "InitialState",
    "EnsembleConfig",
    "AutocorrelationSeries",
    "EnsembleResult",
    "DeadFractionError",
    "TrajectoryRecord",
    "sample_initial_orbitals",
    "slater_overlap",
    "initial_stream",
    "trajectory_stream",
    "run_trajectory",
    "run_ensemble",
    "write_autocorrelation_csv",
    "read_autocorrelation_csv",
    "write_metadata",
]

log = logging.getLogger(__name__)

POLICIES = tuple(_kernel.POLICY_CODES)
SPIN_UP, SPIN_DOWN = 1, -1


class DeadFractionError(NumericError):
    """Too many trajectories died; ``result`` holds the surviving average."""

    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


# ---------------------------------------------------------------- initial state

@dataclass(frozen=True)
class InitialRecipe:
    """Random mixtures over a span of spin-orbitals ``(n, l, m, tau)``."""

    n_particles: int = 2
    span: tuple = ((1, 0, 0, SPIN_UP), (2, 0, 0, SPIN_UP), (1, 0, 0, SPIN_DOWN), (2, 0, 0, SPIN_DOWN))
    min_overlap: float = 0.1
    max_overlap: float = 0.999
    max_tries: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "span", tuple(tuple(int(v) for v in s) for s in self.span))
        if self.n_particles < 1:
            raise ConfigError("n_particles must be >= 1")
        if len(self.span) < self.n_particles:
            raise ConfigError("span has fewer spin-orbitals than particles")
        if not 0.0 <= self.min_overlap < self.max_overlap <= 1.0:
            raise ConfigError("need 0 <= min_overlap < max_overlap <= 1")

    def indices(self, n_max: int) -> list[tuple[int, int]]:
        """(spin block, spatial index) of each span member."""
        out = []
        for n, l, m, tau in self.span:
            if tau not in (SPIN_UP, SPIN_DOWN):
                raise ConfigError(f"spin label must be +1 or -1, got {tau}")
            try:
                out.append((0 if tau == SPIN_UP else 1, orbital_index((n, l, m), n_max)))
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        return out


@dataclass
class InitialState:
    orbitals: np.ndarray        # (N, 2, K) complex, each normalized
    beta: float                 # 1 / sqrt(N! det S(0))

    @property
    def N(self) -> int:
        return self.orbitals.shape[0]


def slater_overlap(bras, kets) -> complex:
    """<A chi_1..chi_N | A phi_1..phi_N> = N! det S with S_jk = <chi_j|phi_k>."""
    bras = np.asarray(bras)
    kets = np.asarray(kets)
    if bras.shape[0] != kets.shape[0]:
        raise ValueError("bras and kets need the same particle number")
    N = bras.shape[0]
    S = np.conj(bras.reshape(N, -1)) @ kets.reshape(N, -1).T
    return complex(math.factorial(N) * np.linalg.det(S))


def sample_initial_orbitals(recipe: InitialRecipe, n_max: int, rng: np.random.Generator) -> InitialState:
    """Draw normalized random mixtures on the span until all pair overlaps are acceptable."""
    K = basis_size(n_max)
    idx = recipe.indices(n_max)
    N = recipe.n_particles
    blocks = np.array([b for b, _ in idx])
    spatial = np.array([a for _, a in idx])
    for _ in range(recipe.max_tries):
        x = np.zeros((N, 2, K), dtype=complex)
        coef = rng.standard_normal((N, len(idx))) + 1j * rng.standard_normal((N, len(idx)))
        coef /= np.linalg.norm(coef, axis=1)[:, None]
        x[:, blocks, spatial] = coef
        S = np.conj(x.reshape(N, -1)) @ x.reshape(N, -1).T
        off = np.abs(S[~np.eye(N, dtype=bool)])
        if off.size and (off.min() < recipe.min_overlap or off.max() > recipe.max_overlap):
            continue
        det = np.linalg.det(S).real
        if not det > 0.0:
            continue
        return InitialState(x, 1.0 / math.sqrt(math.factorial(N) * det))
    raise ConfigError(f"no acceptable initial orbitals after {recipe.max_tries} tries")


# ---------------------------------------------------------------- configuration

@dataclass(frozen=True)
class EnsembleConfig:
    L: int
    dt: float
    t_max: float
    sample_stride: int | None = None    # default: n_steps // 50
    seed: int = 0
    scheme: str = "dt"
    overlap_guard: float = DEFAULT_OVERLAP_GUARD
    recipe: InitialRecipe = field(default_factory=InitialRecipe)
    policy: str = "rebase"
    rebase_below: float = 0.3
    rebase_target: float = 0.8
    renormalize: bool = False
    max_dead_fraction: float = 1e-3
    block_size: int = 256
    track_norm_drift: bool = False      # dt scheme: record the per-step conditional mean norm change

    def __post_init__(self):
        if isinstance(self.recipe, dict):
            object.__setattr__(self, "recipe", InitialRecipe(**self.recipe))
        if int(self.L) != self.L or self.L < 1:
            raise ConfigError("L must be a positive integer")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError("dt must be positive")
        if not self.t_max >= self.dt:
            raise ConfigError("t_max must be >= dt")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}")
        if self.policy not in POLICIES:
            raise ConfigError(f"policy must be one of {POLICIES}")
        if self.overlap_guard < 0:
            raise ConfigError("overlap_guard must be >= 0")
        if self.policy == "rebase" and not self.overlap_guard < self.rebase_below < 1.0:
            raise ConfigError("need overlap_guard < rebase_below < 1")
        N = self.recipe.n_particles
        if N > 1 and not -1.0 / (N - 1) < self.rebase_target < 1.0:
            raise ConfigError("rebase_target must give a positive-definite Gram matrix")
        if self.policy == "rebase" and N > 1 and not abs(self.rebase_target) > self.rebase_below:
            raise ConfigError("rebase_target must exceed rebase_below in magnitude")
        if self.sample_stride is not None and not 1 <= self.sample_stride <= self.n_steps:
            raise ConfigError("sample_stride must lie in [1, n_steps]")
        if self.block_size < 1:
            raise ConfigError("block_size must be >= 1")
        if self.track_norm_drift and self.scheme != "dt":
            raise ConfigError("track_norm_drift needs the dt scheme")

    @property
    def n_steps(self) -> int:
        n = int(round(self.t_max / self.dt))
        if abs(n * self.dt - self.t_max) > 1e-9 * max(1.0, self.t_max):
            raise ConfigError("t_max must be an integer multiple of dt")
        return n

    @property
    def stride(self) -> int:
        return self.sample_stride or max(1, self.n_steps // 50)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps // self.stride + 1) * self.stride * self.dt

    def to_dict(self) -> dict:
        d = asdict(self)
        d["recipe"]["span"] = [list(s) for s in self.recipe.span]
        return d

    def digest(self) -> bytes:
        """SHA-256 of the canonical JSON of every field that affects per-trajectory results.

        L and block_size are left out: a checkpoint can be extended to a larger L.
        """
        d = self.to_dict()
        d.pop("block_size")
        d.pop("L")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).digest()


def initial_stream(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(0,))))


def trajectory_stream(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream of realization ``index``, independent of all others."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(1, int(index)))))


# ---------------------------------------------------------------- trajectories

def _rebase_factor(N: int, r0: float) -> np.ndarray:
    G = np.full((N, N), r0) + (1.0 - r0) * np.eye(N)
    return np.linalg.cholesky(G).T.conj().astype(complex)


class _Propagator:
    """Kernel inputs prepared once per (decomposition, energies, config)."""

    def __init__(self, decomp: InteractionDecomposition, energies, config: EnsembleConfig, initial: InitialState):
        K = decomp.K
        if initial.orbitals.shape[2] != K:
            raise ConfigError(f"orbitals have K={initial.orbitals.shape[2]}, decomposition K={K}")
        ops = np.ascontiguousarray(decomp.ops.reshape(decomp.p, K * K))
        oto = np.einsum("sba,sbc->sac", decomp.ops, decomp.ops).reshape(decomp.p, K * K)
        self.hf = np.ascontiguousarray(hamiltonian_matrix(energies, K).reshape(-1))
        self.opsf = ops
        self.opsT = np.ascontiguousarray(ops.T)
        self.omegas = np.ascontiguousarray(decomp.omegas)
        self.sq = sqrt_neg_i_omega(decomp.omegas)
        self.Wf = np.abs(decomp.omegas) @ oto if decomp.p else np.zeros(K * K)
        self.OtOT = np.ascontiguousarray(oto.T) if config.scheme == "dw2-euler" else np.zeros((K * K, 1))
        self.config = config
        self.initial = initial
        self.scheme = _kernel.SCHEME_CODES[config.scheme]
        self.policy = _kernel.POLICY_CODES[config.policy]
        N = initial.N
        self.C = _rebase_factor(N, config.rebase_target) if N > 1 else np.ones((1, 1), complex)
        self.scale = initial.beta**2 * math.factorial(N)
        self.p = decomp.p
        self.chunk = max(1, min(config.n_steps, 65536 // max(self.p, 1)))
        self.zbuf = np.empty((self.chunk, max(self.p, 1)))[:, : self.p]

    def run(self, index: int) -> "TrajectoryRecord":
        cfg = self.config
        x = self.initial.orbitals.copy()
        bras = self.initial.orbitals
        ns = len(cfg.times)
        N = self.initial.N
        det = np.zeros(ns, dtype=complex)
        norms = np.zeros((ns, N))
        drift = np.zeros((ns, N))
        comp = np.zeros(N)
        rng = trajectory_stream(cfg.seed, index)
        weight = 1.0 + 0.0j
        status, pos, nreb = _kernel.OK, 0, 0
        step0 = 0
        n_total = cfg.n_steps
        while True:
            n = min(self.chunk, n_total - step0)
            z = self.zbuf[:n]
            if self.p:
                rng.standard_normal(out=z)
            last = step0 + n == n_total
            status, done, got, weight, nr = _kernel.propagate(
                x, weight, step0, self.hf, self.opsf, self.opsT, self.omegas, self.sq,
                self.Wf, self.OtOT, z, cfg.dt, cfg.stride, last, self.scheme,
                cfg.overlap_guard, cfg.renormalize, self.policy, cfg.rebase_below,
                self.C, bras, det[pos:], norms[pos:], cfg.track_norm_drift, comp, drift[pos:])
            pos += got
            nreb += nr
            step0 += done
            if status != _kernel.OK or last:
                break
        values = det * self.scale
        if pos:
            # beta normalizes the initial determinant; drop the rounding of beta^2 N! det S(0)
            values[0] = 1.0
        return TrajectoryRecord(index, values, norms, int(status), step0, nreb, pos, drift)


@dataclass
class TrajectoryRecord:
    index: int
    values: np.ndarray          # beta^2 N! weight det S(t) at each sample time
    norms: np.ndarray           # (n_samples, N) orbital norms
    status: int                 # 0 alive, 1 dead (overlap guard), 2 non-finite
    steps: int
    n_rebase: int
    n_recorded: int
    norm_drift: np.ndarray | None = None    # (n_samples, N) summed conditional mean norm change

    @property
    def alive(self) -> bool:
        return self.status == _kernel.OK


def run_trajectory(initial: InitialState, decomp: InteractionDecomposition, energies,
                   config: EnsembleConfig, index: int = 0) -> TrajectoryRecord:
    """Propagate realization ``index`` of ``config`` and record the overlap series."""
    return _Propagator(decomp, energies, config, initial).run(index)


# ---------------------------------------------------------------- accumulation

class _Neumaier:
    """Elementwise compensated running sum."""

    def __init__(self, shape):
        self.s = np.zeros(shape)
        self.c = np.zeros(shape)

    def add(self, v):
        t = self.s + v
        big = np.abs(self.s) >= np.abs(v)
        self.c += np.where(big, (self.s - t) + v, (v - t) + self.s)
        self.s = t

    @property
    def total(self):
        return self.s + self.c


_FIELDS = ("re", "im", "re2", "im2", "nrm", "nrm2", "drift", "drift2")


class _Accumulator:
    def __init__(self, ns: int, N: int):
        self.ns, self.N = ns, N
        self.sums = {k: _Neumaier(ns if k in ("re", "im", "re2", "im2") else (ns, N)) for k in _FIELDS}
        self.n_alive = 0
        self.n_dead = 0
        self.n_nonfinite = 0
        self.n_rebase = 0
        self.max_norm_dev = 0.0
        self.next_index = 0

    def add(self, rec: TrajectoryRecord):
        if rec.index != self.next_index:
            raise RuntimeError("trajectories must be accumulated in index order")
        self.next_index += 1
        self.n_rebase += rec.n_rebase
        if not rec.alive:
            if rec.status == _kernel.NONFINITE:
                self.n_nonfinite += 1
            else:
                self.n_dead += 1
            return
        v = rec.values
        self.sums["re"].add(v.real)
        self.sums["im"].add(v.imag)
        self.sums["re2"].add(v.real**2)
        self.sums["im2"].add(v.imag**2)
        self.sums["nrm"].add(rec.norms)
        self.sums["nrm2"].add(rec.norms**2)
        if rec.norm_drift is not None:
            self.sums["drift"].add(rec.norm_drift)
            self.sums["drift2"].add(rec.norm_drift**2)
        self.max_norm_dev = max(self.max_norm_dev, float(np.max(np.abs(rec.norms - 1.0))))
        self.n_alive += 1

    # binary layout: header, then s and c of every field in _FIELDS order (<f8)
    _MAGIC = b"STHFCKP\x00"
    _VERSION = 1
    _HEAD = struct.Struct("<8sIQQIIQQQQd32s")

    def to_bytes(self, seed: int, digest: bytes) -> bytes:
        head = self._HEAD.pack(self._MAGIC, self._VERSION, int(seed), self.next_index, self.ns,
                               self.N, self.n_alive, self.n_dead, self.n_nonfinite,
                               self.n_rebase, self.max_norm_dev, digest)
        body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes()
                        for k in _FIELDS for a in (self.sums[k].s, self.sums[k].c))
        return head + body

    @classmethod
    def from_bytes(cls, raw: bytes, seed: int, digest: bytes) -> "_Accumulator":
        try:
            (magic, version, cseed, nxt, ns, N, alive, dead, nonfin, nreb, mdev,
             cdig) = cls._HEAD.unpack_from(raw)
        except struct.error as exc:
            raise ConfigError("checkpoint file is truncated") from exc
        if magic != cls._MAGIC:
            raise ConfigError("not a checkpoint file")
        if version != cls._VERSION:
            raise ConfigError(f"unsupported checkpoint version {version}")
        if cseed != int(seed) or cdig != digest:
            raise ConfigError("checkpoint was written for a different seed or configuration")
        acc = cls(ns, N)
        acc.next_index, acc.n_alive, acc.n_dead = nxt, alive, dead
        acc.n_nonfinite, acc.n_rebase, acc.max_norm_dev = nonfin, nreb, mdev
        off = cls._HEAD.size
        for k in _FIELDS:
            for attr in ("s", "c"):
                a = getattr(acc.sums[k], attr)
                n = a.size * 8
                if len(raw) < off + n:
                    raise ConfigError("checkpoint file is truncated")
                setattr(acc.sums[k], attr, np.frombuffer(raw, "<f8", a.size, off).reshape(a.shape).copy())
                off += n
        return acc


# ---------------------------------------------------------------- ensemble

@dataclass
class AutocorrelationSeries:
    times: np.ndarray
    values: np.ndarray          # complex estimates of <Psi(0)|Psi(t)>
    stderr_re: np.ndarray
    stderr_im: np.ndarray
    L_effective: int

    @property
    def stderrs(self) -> np.ndarray:
        return np.stack([self.stderr_re, self.stderr_im])


@dataclass
class EnsembleResult:
    series: AutocorrelationSeries
    config: EnsembleConfig
    initial: InitialState
    n_dead: int
    n_nonfinite: int
    n_rebase: int
    mean_norms: np.ndarray      # (n_samples, N)
    stderr_norms: np.ndarray
    max_norm_deviation: float
    wall_time: float
    complete: bool = True
    mean_norm_drift: np.ndarray | None = None   # (n_samples, N), with track_norm_drift
    stderr_norm_drift: np.ndarray | None = None

    @property
    def dead_fraction(self) -> float:
        n = self.series.L_effective + self.n_dead + self.n_nonfinite
        return (self.n_dead + self.n_nonfinite) / n if n else 0.0


def _stderr(s1, s2, n):
    if n < 2:
        return np.zeros_like(s1)
    mean = s1 / n
    var = np.maximum(s2 - n * mean * mean, 0.0) / (n - 1)
    return np.sqrt(var / n)


def _finish(acc: _Accumulator, cfg, initial, wall, complete) -> EnsembleResult:
    n = acc.n_alive
    t = {k: acc.sums[k].total for k in _FIELDS}
    with np.errstate(invalid="ignore", divide="ignore"):
        vals = (t["re"] + 1j * t["im"]) / n if n else np.full(acc.ns, np.nan + 0j)
        mn = t["nrm"] / n if n else np.full((acc.ns, acc.N), np.nan)
    series = AutocorrelationSeries(cfg.times, vals, _stderr(t["re"], t["re2"], n),
                                   _stderr(t["im"], t["im2"], n), n)
    drift = sd = None
    if cfg.track_norm_drift and n:
        drift, sd = t["drift"] / n, _stderr(t["drift"], t["drift2"], n)
    return EnsembleResult(series, cfg, initial, acc.n_dead, acc.n_nonfinite, acc.n_rebase,
                          mn, _stderr(t["nrm"], t["nrm2"], n), acc.max_norm_dev, wall, complete,
                          drift, sd)


_WORKER = {}


def _worker_init(decomp, energies, config, initial):
    _WORKER["prop"] = _Propagator(decomp, energies, config, initial)


def _worker_block(bounds):
    lo, hi = bounds
    prop = _WORKER["prop"]
    return [prop.run(i) for i in range(lo, hi)]


def run_ensemble(config: EnsembleConfig, decomp: InteractionDecomposition, energies,
                 initial: InitialState | None = None, workers: int = 1,
                 checkpoint: str | Path | None = None, checkpoint_every: int = 1,
                 stop_after: int | None = None, progress=None) -> EnsembleResult:
    """Average beta^2 N! det S(t) over ``config.L`` Wiener paths.

    ``checkpoint`` names a file that is written after every
    ``checkpoint_every`` blocks and resumed from if it already exists.
    ``stop_after`` ends the run early (result marked incomplete) once that
    many trajectories have been accumulated, for testing restarts.
    Raises :class:`DeadFractionError` if more than ``max_dead_fraction`` of
    the trajectories die.
    """
    t0 = time.perf_counter()
    if initial is None:
        if decomp.n_max is None:
            raise ConfigError("decomposition lacks n_max; pass the initial state explicitly")
        initial = sample_initial_orbitals(config.recipe, decomp.n_max, initial_stream(config.seed))
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    ns = len(config.times)
    digest = config.digest()
    acc = None
    ckpt = Path(checkpoint) if checkpoint is not None else None
    if ckpt is not None and ckpt.exists():
        acc = _Accumulator.from_bytes(ckpt.read_bytes(), config.seed, digest)
        log.info("resuming from %s at trajectory %d", ckpt, acc.next_index)
    if acc is None:
        acc = _Accumulator(ns, initial.N)

    end = config.L if stop_after is None else min(config.L, stop_after)
    B = config.block_size
    blocks = [(lo, min(lo + B, end)) for lo in range(acc.next_index, end, B)]

    def consume(i, recs):
        for r in recs:
            acc.add(r)
        if ckpt is not None and ((i + 1) % checkpoint_every == 0 or i + 1 == len(blocks)):
            tmp = ckpt.with_name(ckpt.name + ".tmp")
            tmp.write_bytes(acc.to_bytes(config.seed, digest))
            tmp.replace(ckpt)
        if progress is not None:
            progress(acc.next_index, config.L)

    if workers == 1 or len(blocks) <= 1:
        prop = _Propagator(decomp, energies, config, initial)
        for i, (lo, hi) in enumerate(blocks):
            consume(i, [prop.run(k) for k in range(lo, hi)])
    else:
        with ProcessPoolExecutor(workers, initializer=_worker_init,
                                 initargs=(decomp, energies, config, initial)) as ex:
            for i, recs in enumerate(ex.map(_worker_block, blocks)):
                consume(i, recs)

    res = _finish(acc, config, initial, time.perf_counter() - t0, acc.next_index >= config.L)
    if res.n_dead or res.n_nonfinite:
        log.warning("%d dead and %d non-finite trajectories excluded", res.n_dead, res.n_nonfinite)
    if res.dead_fraction > config.max_dead_fraction:
        raise DeadFractionError(
            f"{res.n_dead + res.n_nonfinite} of {acc.next_index} trajectories died "
            f"({res.dead_fraction:.2%} > {config.max_dead_fraction:.2%})", res)
    return res


# ---------------------------------------------------------------- files

_CSV_HEADER = "t,re,im,stderr_re,stderr_im,L_effective"


def write_autocorrelation_csv(series: AutocorrelationSeries, path) -> None:
    lines = [_CSV_HEADER]
    for t, v, sr, si in zip(series.times, series.values, series.stderr_re, series.stderr_im):
        lines.append(f"{t:.17g},{v.real:.17g},{v.imag:.17g},{sr:.17g},{si:.17g},{series.L_effective}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_autocorrelation_csv(path) -> AutocorrelationSeries:
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != _CSV_HEADER:
        raise ConfigError(f"{path}: not an autocorrelation CSV")
    rows = np.array([[float(v) for v in line.split(",")] for line in text[1:] if line.strip()])
    rows = rows.reshape(-1, 6)
    return AutocorrelationSeries(rows[:, 0], rows[:, 1] + 1j * rows[:, 2], rows[:, 3], rows[:, 4],
                                 int(rows[0, 5]) if len(rows) else 0)


def write_metadata(result: EnsembleResult, path, extra: dict | None = None) -> None:
    from . import __version__
    doc = {
        "config": result.config.to_dict(),
        "seed": result.config.seed,
        "scheme": result.config.scheme,
        "code_version": __version__,
        "L_effective": result.series.L_effective,
        "dead_trajectories": result.n_dead,
        "nonfinite_trajectories": result.n_nonfinite,
        "rebases": result.n_rebase,
        "max_norm_deviation": result.max_norm_deviation,
        "complete": result.complete,
        "wall_time_s": result.wall_time,
        "initial_orbitals": {
            "re": result.initial.orbitals.real.tolist(),
            "im": result.initial.orbitals.imag.tolist(),
            "beta": result.initial.beta,
        },
    }
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=1))
