"""Energy spectra from autocorrelation series.

I(E) = (1/pi) Re int_0^T w(t) C(t) exp(iEt) dt, with C(t) = <Psi(0)|Psi(t)>
sampled on a uniform time grid, hbar = 1 and trapezoidal quadrature. The
rectangular window (w = 1) is the plain finite-time transform; the Hann
option w(t) = cos^2(pi t / 2T) damps the side lobes of the sinc kernel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import find_peaks as _scipy_find_peaks

from .ensemble import AutocorrelationSeries
from .errors import ConfigError

__all__ = [
    "SpectrumSeries",
    "Peak",
    "WINDOWS",
    "energy_grid",
    "compute_spectrum",
    "find_peaks",
    "write_spectrum_csv",
    "read_spectrum_csv",
    "write_peaks_json",
]

WINDOWS = ("rectangular", "hann")
DEFAULT_PROMINENCE = 0.05


@dataclass
class SpectrumSeries:
    energies: np.ndarray
    intensities: np.ndarray
    T: float
    window: str


@dataclass(frozen=True)
class Peak:
    energy: float
    intensity: float


def energy_grid(e_min: float, e_max: float, de: float) -> np.ndarray:
    if not (de > 0 and e_min < e_max):
        raise ConfigError("need e_min < e_max and de > 0")
    n = int(np.floor((e_max - e_min) / de + 1e-9)) + 1
    return e_min + de * np.arange(n)


def _window(t, T, kind):
    if kind == "rectangular":
        return np.ones_like(t)
    if kind == "hann":
        return np.cos(0.5 * np.pi * t / T) ** 2
    raise ConfigError(f"window must be one of {WINDOWS}")


def compute_spectrum(ac: AutocorrelationSeries, e_min: float, e_max: float, de: float,
                     window: str = "rectangular", T: float | None = None) -> SpectrumSeries:
    """Windowed finite-time Fourier transform of ``ac`` on a uniform energy grid.

    ``T`` defaults to the last sample time; samples beyond ``T`` are ignored.
    """
    t = np.asarray(ac.times, dtype=float)
    c = np.asarray(ac.values, dtype=complex)
    if t.ndim != 1 or len(t) < 2:
        raise ConfigError("autocorrelation needs at least two samples")
    h = np.diff(t)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0.0) or abs(t[0]) > 1e-12 * h[0]:
        raise ConfigError("autocorrelation times must be uniform and start at 0")
    if T is None:
        T = float(t[-1])
    keep = t <= T * (1 + 1e-12)
    t, c = t[keep], c[keep]
    if len(t) < 2 or abs(t[-1] - T) > 1e-9 * max(T, 1.0):
        raise ConfigError(f"T={T} is not on the sample grid")
    E = energy_grid(e_min, e_max, de)
    f = (_window(t, T, window) * c)[None, :] * np.exp(1j * np.outer(E, t))
    wts = np.full(len(t), h[0])
    wts[0] = wts[-1] = 0.5 * h[0]
    I = (f @ wts).real / np.pi
    return SpectrumSeries(E, I, float(T), window)


def find_peaks(s: SpectrumSeries, min_prominence: float | None = None) -> list[Peak]:
    """Local maxima with at least ``min_prominence`` prominence, refined parabolically.

    ``min_prominence=None`` uses 5% of the global maximum intensity.
    """
    y = np.asarray(s.intensities, dtype=float)
    E = np.asarray(s.energies, dtype=float)
    if len(y) < 3:
        return []
    if min_prominence is None:
        min_prominence = DEFAULT_PROMINENCE * max(float(np.max(y)), 0.0)
    idx, _ = _scipy_find_peaks(y, prominence=(min_prominence, None))
    de = E[1] - E[0]
    out = []
    for i in idx:
        y0, y1, y2 = y[i - 1], y[i], y[i + 1]
        den = y0 - 2.0 * y1 + y2
        shift = 0.5 * (y0 - y2) / den if den < 0 else 0.0
        shift = float(np.clip(shift, -0.5, 0.5))
        out.append(Peak(float(E[i] + shift * de), float(y1 - 0.25 * (y0 - y2) * shift)))
    return out


def write_spectrum_csv(s: SpectrumSeries, path) -> None:
    lines = ["energy,intensity"] + [f"{e:.17g},{v:.17g}" for e, v in zip(s.energies, s.intensities)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_spectrum_csv(path, T: float = float("nan"), window: str = "rectangular") -> SpectrumSeries:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return SpectrumSeries(rows[:, 0], rows[:, 1], T, window)


def write_peaks_json(peaks: list[Peak], path) -> None:
    Path(path).write_text(json.dumps([{"energy": p.energy, "intensity": p.intensity} for p in peaks], indent=1))
