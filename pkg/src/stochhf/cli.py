"""Command-line driver: ``stochhf <subcommand> [options]``.

Settings come from built-in defaults, then an optional preset, then the
JSON file given by ``--config``, then individual flags (later wins).
Unknown keys anywhere in a config are rejected.

Exit codes: 0 success, 2 configuration error, 3 numeric or invariant
failure, 4 acceptance threshold violated.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .basis import orbital_energies, orbital_order_hash
from .boson import BosonToy, exact_boson_evolution, run_boson_ensemble
from .coulomb import coulomb_matrix
from .decomp import (decompose_interaction, load_decomposition, reconstruct_interaction,
                     save_decomposition)
from .ensemble import (AutocorrelationSeries, DeadFractionError, EnsembleConfig, InitialState,
                       initial_stream, read_autocorrelation_csv, run_ensemble,
                       sample_initial_orbitals, write_autocorrelation_csv, write_metadata)
from .errors import AcceptanceError, ConfigError, NumericError
from .exact import (build_hamiltonian, embed_determinant, exact_autocorrelation, reachable_levels,
                    write_eigenvalues_csv)
from .presets import PRESETS, get_preset
from .spectrum import compute_spectrum, find_peaks, write_peaks_json, write_spectrum_csv

log = logging.getLogger("stochhf")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ACCEPT = 0, 2, 3, 4

_ENSEMBLE_KEYS = set(EnsembleConfig.__dataclass_fields__)
_RECIPE_KEYS = {"n_particles", "span", "min_overlap", "max_overlap", "max_tries"}

DEFAULTS = {
    "model": {"n_max": 2, "Z": 2.0},
    "decomposition": {"tol": None, "path": None},
    "ensemble": {"L": 10000, "dt": 5e-4, "t_max": 5.0, "scheme": "dt", "seed": 0},
    "spectrum": {"e_min": -3.5, "e_max": 0.5, "de": 0.01, "window": "rectangular",
                 "T": None, "min_prominence": None},
    "compare": {"sigma": 3.0, "min_fraction": 0.95, "atol": 0.0},
    "boson": {"mixing": 0.4, "L": 10000, "dt": 1e-3, "t_max": 2.0, "sample_stride": 100},
    "run": {"workers": 1, "checkpoint": None, "checkpoint_every": 1, "out": "run"},
}

_SCHEMA = {
    "model": {"n_max", "Z"},
    "decomposition": {"tol", "path"},
    "ensemble": _ENSEMBLE_KEYS,
    "spectrum": {"e_min", "e_max", "de", "window", "T", "min_prominence"},
    "compare": {"sigma", "min_fraction", "atol"},
    "boson": {"mixing", "L", "dt", "t_max", "sample_stride"},
    "run": {"workers", "checkpoint", "checkpoint_every", "out"},
}


def _merge(base: dict, over: dict, where: str = "config") -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if key not in _SCHEMA:
            raise ConfigError(f"{where}: unknown section {key!r}")
        if not isinstance(val, dict):
            raise ConfigError(f"{where}: section {key!r} must be an object")
        for k, v in val.items():
            if k not in _SCHEMA[key]:
                raise ConfigError(f"{where}: unknown key {key}.{k}")
            if key == "ensemble" and k == "recipe":
                if not isinstance(v, dict) or set(v) - _RECIPE_KEYS:
                    raise ConfigError(f"{where}: ensemble.recipe accepts {sorted(_RECIPE_KEYS)}")
            out[key][k] = v
    return out


def load_config(args) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if getattr(args, "preset", None):
        try:
            cfg = _merge(cfg, get_preset(args.preset), f"preset {args.preset}")
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config root must be an object")
        cfg = _merge(cfg, doc, str(path))
    if getattr(args, "seed", None) is not None:
        cfg["ensemble"]["seed"] = args.seed
    if getattr(args, "scheme", None):
        cfg["ensemble"]["scheme"] = args.scheme
    if getattr(args, "workers", None) is not None:
        cfg["run"]["workers"] = args.workers
    if getattr(args, "out", None):
        cfg["run"]["out"] = args.out
    return cfg


def _ensemble_config(cfg) -> EnsembleConfig:
    try:
        return EnsembleConfig(**cfg["ensemble"])
    except TypeError as exc:
        raise ConfigError(f"ensemble: {exc}") from exc


def _outdir(cfg) -> Path:
    out = Path(cfg["run"]["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _decomposition(cfg):
    path = cfg["decomposition"].get("path")
    n_max, Z = cfg["model"]["n_max"], cfg["model"]["Z"]
    if path:
        try:
            d = load_decomposition(path)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot read decomposition {path}: {exc}") from exc
        if d.n_max is not None and d.n_max != n_max:
            raise ConfigError(f"decomposition file has n_max={d.n_max}, config says {n_max}")
        if d.order_hash and d.order_hash != orbital_order_hash(n_max):
            raise ConfigError("decomposition file was written with a different orbital order")
        return d
    return decompose_interaction(coulomb_matrix(n_max, Z), cfg["decomposition"]["tol"])


def _echo(cfg, out: Path):
    (out / "config.json").write_text(json.dumps(cfg, indent=1))


# ---------------------------------------------------------------- subcommands

def cmd_decompose(args) -> int:
    cfg = load_config(args)
    out = _outdir(cfg)
    n_max, Z = cfg["model"]["n_max"], cfg["model"]["Z"]
    V = coulomb_matrix(n_max, Z)
    d = decompose_interaction(V, cfg["decomposition"]["tol"])
    path = out / ("decomposition.json" if args.format == "json" else "decomposition.bin")
    save_decomposition(d, path)
    resid = float(np.max(np.abs(reconstruct_interaction(d).entries - V.entries)))
    classes = d.classes()
    report = {
        "n_max": n_max, "Z": Z, "K": d.K, "p": d.p, "tol": d.tol,
        "max_abs_omega": float(np.max(np.abs(d.omegas))) if d.p else 0.0,
        "reconstruction_residual": resid,
        "trace_V": float(np.trace(V.entries)), "sum_omega": float(np.sum(d.omegas)),
        "classes": {c: classes.count(c) for c in sorted(set(classes))},
        "file": str(path),
    }
    (out / "decomposition_report.json").write_text(json.dumps(report, indent=1))
    print(json.dumps(report, indent=1))
    if cfg["decomposition"]["tol"] in (0, 0.0) and resid > 1e-10:
        raise NumericError(f"reconstruction residual {resid:.3e} exceeds 1e-10")
    return EXIT_OK


def cmd_propagate(args) -> int:
    cfg = load_config(args)
    ecfg = _ensemble_config(cfg)
    out = _outdir(cfg)
    _echo(cfg, out)
    d = _decomposition(cfg)
    E = orbital_energies(cfg["model"]["n_max"], cfg["model"]["Z"])
    ckpt = args.checkpoint or cfg["run"]["checkpoint"]
    try:
        res = run_ensemble(ecfg, d, E, workers=cfg["run"]["workers"], checkpoint=ckpt,
                           checkpoint_every=cfg["run"]["checkpoint_every"])
    except DeadFractionError as exc:
        if exc.result is not None:
            write_autocorrelation_csv(exc.result.series, out / "autocorrelation.csv")
            write_metadata(exc.result, out / "metadata.json", {"error": str(exc)})
        raise
    write_autocorrelation_csv(res.series, out / "autocorrelation.csv")
    write_metadata(res, out / "metadata.json", {"model": cfg["model"], "workers": cfg["run"]["workers"]})
    _write_gnuplot(out, "autocorrelation.csv")
    log.info("wrote %s (L_effective=%d, dead=%d)", out / "autocorrelation.csv",
             res.series.L_effective, res.n_dead)
    return EXIT_OK


def _initial_for(cfg, metadata_path) -> InitialState:
    if metadata_path:
        try:
            doc = json.loads(Path(metadata_path).read_text())
            io = doc["initial_orbitals"]
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise ConfigError(f"cannot read initial orbitals from {metadata_path}: {exc}") from exc
        return InitialState(np.array(io["re"]) + 1j * np.array(io["im"]), float(io["beta"]))
    ecfg = _ensemble_config(cfg)
    return sample_initial_orbitals(ecfg.recipe, cfg["model"]["n_max"], initial_stream(ecfg.seed))


def cmd_exact(args) -> int:
    cfg = load_config(args)
    ecfg = _ensemble_config(cfg)
    out = _outdir(cfg)
    n_max, Z = cfg["model"]["n_max"], cfg["model"]["Z"]
    H = build_hamiltonian(n_max, Z, N=ecfg.recipe.n_particles)
    init = _initial_for(cfg, args.metadata)
    psi = embed_determinant(init.orbitals, init.beta, H.basis)
    ac = exact_autocorrelation(H, psi, ecfg.times)
    write_autocorrelation_csv(ac, out / "exact_autocorrelation.csv")
    write_eigenvalues_csv(H, out / "eigenvalues.csv")
    levels = [{"energy": e, "weight": w} for e, w in reachable_levels(H, psi)]
    (out / "reachable_levels.json").write_text(json.dumps(levels, indent=1))
    return EXIT_OK


def cmd_spectrum(args) -> int:
    cfg = load_config(args)
    sc = cfg["spectrum"]
    out = _outdir(cfg)
    ac = read_autocorrelation_csv(args.input)
    s = compute_spectrum(ac, sc["e_min"], sc["e_max"], sc["de"], sc["window"], sc["T"])
    stem = Path(args.input).stem
    write_spectrum_csv(s, out / f"{stem}_spectrum.csv")
    write_peaks_json(find_peaks(s, sc["min_prominence"]), out / f"{stem}_peaks.json")
    _write_gnuplot(out, f"{stem}_spectrum.csv", spectrum=True)
    return EXIT_OK


def compare_series(sto: AutocorrelationSeries, ex: AutocorrelationSeries, sigma: float = 3.0,
                   atol: float = 0.0) -> dict:
    """Per-time z-scores; a time passes when |delta| <= sigma * stderr + atol in Re and Im.

    ``atol`` absorbs deterministic integrator error, which matters when the
    stochastic terms vanish and the standard errors are zero.
    """
    if len(sto.times) != len(ex.times) or not np.allclose(sto.times, ex.times, rtol=1e-12, atol=1e-12):
        raise ConfigError("time grids of the two series differ")
    d = sto.values - ex.values
    with np.errstate(divide="ignore", invalid="ignore"):
        zr = np.where(sto.stderr_re > 0, d.real / sto.stderr_re, np.where(d.real == 0, 0.0, np.inf))
        zi = np.where(sto.stderr_im > 0, d.imag / sto.stderr_im, np.where(d.imag == 0, 0.0, np.inf))
    # the t = 0 sample is fixed by construction; score the remaining times
    sel = slice(1, None) if len(sto.times) > 1 and sto.times[0] == 0 else slice(None)
    ok_re = np.abs(d.real) <= sigma * sto.stderr_re + atol
    ok_im = np.abs(d.imag) <= sigma * sto.stderr_im + atol
    ok = ok_re & ok_im
    return {
        "times": sto.times.tolist(),
        "z_re": zr.tolist(), "z_im": zi.tolist(),
        "fraction_within": float(np.mean(ok[sel])),
        "fraction_within_re": float(np.mean(ok_re[sel])),
        "fraction_within_im": float(np.mean(ok_im[sel])),
        "max_abs_delta": float(np.max(np.abs(d))),
        "sigma": sigma,
        "atol": atol,
    }


def cmd_compare(args) -> int:
    cfg = load_config(args)
    out = _outdir(cfg)
    rep = compare_series(read_autocorrelation_csv(args.stochastic), read_autocorrelation_csv(args.exact),
                         cfg["compare"]["sigma"], cfg["compare"]["atol"])
    rep["min_fraction"] = cfg["compare"]["min_fraction"]
    (out / "compare.json").write_text(json.dumps(rep, indent=1))
    print(f"fraction within {rep['sigma']:g} sigma: {rep['fraction_within']:.3f} "
          f"(re {rep['fraction_within_re']:.3f}, im {rep['fraction_within_im']:.3f}); "
          f"max |delta| = {rep['max_abs_delta']:.3e}")
    if rep["fraction_within"] < cfg["compare"]["min_fraction"]:
        raise AcceptanceError(f"only {rep['fraction_within']:.1%} of times within {rep['sigma']:g} sigma")
    return EXIT_OK


def cmd_boson_demo(args) -> int:
    cfg = load_config(args)
    b = cfg["boson"]
    out = _outdir(cfg)
    _echo(cfg, out)
    ecfg = EnsembleConfig(L=b["L"], dt=b["dt"], t_max=b["t_max"], sample_stride=b["sample_stride"],
                          seed=cfg["ensemble"]["seed"], scheme=cfg["ensemble"].get("scheme", "dt"))
    toy = BosonToy.two_mode(b["mixing"])
    res = run_boson_ensemble(toy, ecfg)
    write_autocorrelation_csv(res.autocorrelation, out / "autocorrelation.csv")
    ex = exact_boson_evolution(toy, res.psi0, res.times)
    exact_ac = np.tensordot(ex, res.psi0.conj(), axes=res.psi0.ndim)
    zero = np.zeros(len(res.times))
    write_autocorrelation_csv(AutocorrelationSeries(res.times, exact_ac, zero, zero.copy(), 0),
                              out / "exact_autocorrelation.csv")
    rep = compare_series(res.autocorrelation, AutocorrelationSeries(res.times, exact_ac, zero, zero, 0),
                         cfg["compare"]["sigma"], cfg["compare"]["atol"])
    rep["max_antisymmetric_component"] = float(res.antisym.max())
    rep["dead"] = res.n_dead
    (out / "compare.json").write_text(json.dumps(rep, indent=1))
    print(f"boson toy: {rep['fraction_within']:.3f} of times within {rep['sigma']:g} sigma, "
          f"antisymmetric leakage {rep['max_antisymmetric_component']:.2e}")
    return EXIT_OK


def _write_gnuplot(out: Path, csv_name: str, spectrum: bool = False):
    if spectrum:
        body = (f"set datafile separator ','\nset xlabel 'E (hartree)'\nset ylabel 'I(E)'\n"
                f"plot '{csv_name}' every ::1 using 1:2 with lines title 'I(E)'\n")
        name = Path(csv_name).stem + ".gp"
    else:
        body = (f"set datafile separator ','\nset xlabel 't (a.u.)'\n"
                f"plot '{csv_name}' every ::1 using 1:2:4 with yerrorlines title 'Re', \\\n"
                f"     '' every ::1 using 1:3:5 with yerrorlines title 'Im'\n")
        name = "autocorrelation.gp"
    (out / name).write_text(body)


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stochhf", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"stochhf {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--preset", choices=sorted(PRESETS), help="start from a named configuration")
        sp.add_argument("--seed", type=int, help="64-bit master seed")
        sp.add_argument("--workers", type=int, help="worker processes")
        sp.add_argument("--scheme", choices=["dt", "dw2", "dw2-euler"], help="integration scheme")
        sp.add_argument("--out", help="output directory")
        return sp

    sp = common(sub.add_parser("decompose", help="factorize the Coulomb matrix"))
    sp.add_argument("--format", choices=["bin", "json"], default="bin")
    sp.set_defaults(func=cmd_decompose)
    sp = common(sub.add_parser("propagate", help="run a stochastic ensemble"))
    sp.add_argument("--checkpoint", help="checkpoint file (resumed if present)")
    sp.set_defaults(func=cmd_propagate)
    sp = common(sub.add_parser("exact", help="exact autocorrelation on the same time grid"))
    sp.add_argument("--metadata", help="take the initial orbitals from a propagate metadata.json")
    sp.set_defaults(func=cmd_exact)
    sp = common(sub.add_parser("spectrum", help="I(E) and peaks of an autocorrelation CSV"))
    sp.add_argument("--input", required=True)
    sp.set_defaults(func=cmd_spectrum)
    sp = common(sub.add_parser("compare", help="z-scores of a stochastic series against an exact one"))
    sp.add_argument("--stochastic", required=True)
    sp.add_argument("--exact", required=True)
    sp.set_defaults(func=cmd_compare)
    sp = common(sub.add_parser("boson-demo", help="two-boson toy through the fictitious-spin mapping"))
    sp.set_defaults(func=cmd_boson_demo)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AcceptanceError as exc:
        print(f"acceptance failure: {exc}", file=sys.stderr)
        return EXIT_ACCEPT
    except (NumericError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
