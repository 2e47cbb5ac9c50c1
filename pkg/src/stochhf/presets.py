"""Named run configurations (JSON-compatible dictionaries)."""

from __future__ import annotations

import copy

__all__ = ["PRESETS", "get_preset"]

PRESETS = {
    # desk-scale helium run used by the acceptance suite
    "he-nmax2": {
        "model": {"n_max": 2, "Z": 2.0},
        "ensemble": {"L": 100000, "dt": 5e-4, "t_max": 5.0, "scheme": "dt", "seed": 0},
        "spectrum": {"e_min": -3.5, "e_max": 0.5, "de": 0.01, "window": "rectangular"},
    },
    # helium with n_max = 4 (K = 30, p = 900) and 200000 realizations; hours of CPU time
    "he-nmax4-full": {
        "model": {"n_max": 4, "Z": 2.0},
        "ensemble": {"L": 200000, "dt": 5e-4, "t_max": 50.0, "sample_stride": 100,
                     "scheme": "dt", "seed": 0},
        "spectrum": {"e_min": -3.5, "e_max": 0.5, "de": 0.01, "window": "rectangular"},
    },
    # smallest basis: a single determinant, |C(t)| = 1. With K = 1 every
    # fluctuation operator vanishes, so the run is deterministic and only the
    # Euler phase error (O(dt), about 1e-3 here) separates it from the exact
    # phase; renormalization pins the modulus and atol covers the phase.
    "smoke": {
        "model": {"n_max": 1, "Z": 2.0},
        "ensemble": {"L": 200, "dt": 1e-3, "t_max": 1.0, "scheme": "dt", "seed": 0,
                     "renormalize": True,
                     "recipe": {"span": [[1, 0, 0, 1], [1, 0, 0, -1]], "min_overlap": 0.1}},
        "compare": {"atol": 1e-4},
    },
}


def get_preset(name: str) -> dict:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    return copy.deepcopy(PRESETS[name])
