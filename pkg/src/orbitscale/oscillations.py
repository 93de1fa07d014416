"""Oscillatory density of states in a scaled spectral variable and its recurrence spectrum.

The frequency axis is the angular frequency conjugate to s. With the omega
map and hbar = 1, 2m = 1 a billiard orbit of length L shows up at L; with a
homogeneous map referenced to E0 an orbit of action S(E0) shows up at S(E0)/hbar.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from numpy.polynomial import Polynomial

from .errors import (
    ContractError,
    DomainError,
    InsufficientDataError,
    MapError,
    ResolutionError,
)
from .orbits import CatalogEntry, OrbitCatalog, PeriodicOrbit
from .qspec import SpectrumResult

MIN_LEVELS = 50
PAD_FACTOR = 4


@dataclass(frozen=True)
class ScaledVariableMap:
    """E -> s.

    omega: s = sqrt(E); homogeneous: s = |E/E0|^((nu+2)/(2 nu));
    gamma_field: s = Gamma^(-1/3) with Gamma = (E/E0)^(3/2), i.e. s = (E/E0)^(-1/2);
    raw_energy: s = E.
    """

    kind: str
    nu: Optional[float] = None
    E0: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("omega", "homogeneous", "gamma_field", "raw_energy"):
            raise DomainError(f"unknown map kind {self.kind!r}")
        if self.kind in ("homogeneous", "gamma_field") and not self.E0:
            raise DomainError(f"{self.kind} map needs a nonzero E0")
        if self.kind == "homogeneous":
            if self.nu is None or self.nu == 0:
                raise DomainError("homogeneous map needs a nonzero degree nu")
            if self.nu == -2:
                raise MapError("exponent (nu+2)/2nu vanishes at nu=-2; the map is constant")

    @property
    def exponent(self) -> float:
        return {"omega": 0.5, "raw_energy": 1.0, "gamma_field": -0.5}.get(
            self.kind, (self.nu + 2) / (2 * self.nu) if self.nu else float("nan"))

    def __call__(self, E):
        E = np.asarray(E, dtype=float)
        if self.kind == "raw_energy":
            return E.copy()
        if self.kind == "omega":
            if np.any(E <= 0):
                raise DomainError("omega map needs E > 0")
            return np.sqrt(E)
        ratio = E / self.E0
        if np.any(ratio <= 0):
            raise DomainError("E and E0 must have the same sign")
        return ratio ** self.exponent

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.nu is not None:
            out["nu"] = self.nu
        if self.E0 is not None:
            out["E0"] = self.E0
        return out


def map_variable(E, vmap: ScaledVariableMap):
    s = vmap(E)
    return float(s) if np.ndim(s) == 0 else s


def gamma_to_s(gamma: float) -> float:
    """s = Gamma^(-1/3)."""
    if not gamma > 0:
        raise DomainError("Gamma must be positive")
    return gamma ** (-1.0 / 3.0)


def energy_ratio_from_gamma(gamma: float) -> float:
    """E/E0 = Gamma^(2/3) along the mixed-scaling family."""
    if not gamma > 0:
        raise DomainError("Gamma must be positive")
    return gamma ** (2.0 / 3.0)


@dataclass(frozen=True)
class Peak:
    frequency: float
    amplitude: float
    phase: float


@dataclass
class RecurrencePeaks:
    s_grid: np.ndarray
    delta_rho: np.ndarray
    vmap: ScaledVariableMap
    sigma: float
    mass: float
    hbar: float
    peaks: list = field(default_factory=list)
    frequency: Optional[np.ndarray] = None
    amplitude: Optional[np.ndarray] = None
    window: Optional[str] = None

    @property
    def s_range(self) -> float:
        return float(self.s_grid[-1] - self.s_grid[0])

    @property
    def bin_width(self) -> float:
        """Transform resolution 2 pi / (s range)."""
        return 2 * math.pi / self.s_range

    def strongest(self, fmin: float = 0.0, fmax: float = math.inf) -> Peak:
        cand = [p for p in self.peaks if fmin <= p.frequency <= fmax]
        if not cand:
            raise LookupError("no peak in the requested band")
        return max(cand, key=lambda p: p.amplitude)

    def nearest(self, f: float) -> Peak:
        if not self.peaks:
            raise LookupError("no peaks")
        return min(self.peaks, key=lambda p: abs(p.frequency - f))

    def to_csv_signal(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "delta_rho"])
            for s, d in zip(self.s_grid, self.delta_rho):
                w.writerow([repr(float(s)), repr(float(d))])
        return path

    def to_csv_peaks(self, path, report: Optional["MatchReport"] = None) -> Path:
        path = Path(path)
        rows = report.rows if report is not None else [
            {"frequency": p.frequency, "amplitude": p.amplitude, "matched_label": "",
             "predicted": float("nan"), "rel_error": float("nan")} for p in self.peaks]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["frequency", "amplitude", "matched_label", "predicted", "rel_error"])
            for r in rows:
                w.writerow([repr(r["frequency"]), repr(r["amplitude"]), r["matched_label"],
                            repr(r["predicted"]), repr(r["rel_error"])])
        return path


def _check_monotone(s: np.ndarray, levels: np.ndarray):
    distinct = np.diff(levels) > 0
    ds = np.diff(s)[distinct]
    if ds.size and not (np.all(ds > 0) or np.all(ds < 0)):
        raise MapError("scaled variable is not monotone over the spectrum")


def oscillatory_dos(spectrum: SpectrumResult, vmap: ScaledVariableMap, sigma: Optional[float] = None,
                    detrend_degree: int = 3, grid_n: Optional[int] = None) -> RecurrencePeaks:
    """Gaussian-broadened level density in s minus a least-squares polynomial trend.

    ``sigma`` defaults to one tenth of the mean level spacing in s, narrow
    enough that the orbit oscillations survive the smoothing. The grid step
    must be at most sigma/2.
    """
    levels = np.asarray(spectrum.levels, dtype=float)
    if levels.size < MIN_LEVELS:
        raise InsufficientDataError(f"need at least {MIN_LEVELS} levels, got {levels.size}")
    s = vmap(levels)
    _check_monotone(s, levels)
    s = np.sort(s)
    lo, hi = float(s[0]), float(s[-1])
    if not hi > lo:
        raise InsufficientDataError("all levels map to the same s")
    spacing = (hi - lo) / (s.size - 1)
    if sigma is None:
        sigma = 0.1 * spacing
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    if grid_n is None:
        grid_n = int(math.ceil(2 * (hi - lo) / sigma)) + 1
    step = (hi - lo) / (grid_n - 1)
    if step > sigma / 2 * (1 + 1e-12):
        raise ResolutionError(f"grid step {step:.3g} exceeds sigma/2 = {sigma / 2:.3g}")
    grid = np.linspace(lo, hi, grid_n)
    rho = np.zeros(grid_n)
    half = int(math.ceil(8 * sigma / step))
    offs = np.arange(-half, half + 1)
    norm = 1 / (sigma * math.sqrt(2 * math.pi))
    centre = np.rint((s - lo) / step).astype(int)
    idx = centre[:, None] + offs[None, :]
    ok = (idx >= 0) & (idx < grid_n)
    idxc = np.clip(idx, 0, grid_n - 1)
    vals = norm * np.exp(-0.5 * ((grid[idxc] - s[:, None]) / sigma) ** 2) * ok
    np.add.at(rho, idxc.ravel(), vals.ravel())
    trend = Polynomial.fit(grid, rho, detrend_degree)(grid)
    return RecurrencePeaks(grid, rho - trend, vmap, float(sigma), spectrum.mass, spectrum.hbar)


def recurrence_spectrum(osc: RecurrencePeaks, window: str = "hann", threshold: float = 5.0,
                        expected: Optional[float] = None, min_rel_amplitude: float = 1e-3,
                        nms_bins: float = 2.0, sidelobe_bins: float = 8.0,
                        sidelobe_ratio: float = 0.05) -> RecurrencePeaks:
    """Windowed Fourier transform of delta_rho with peak extraction.

    Peaks are local maxima above ``threshold`` times the median amplitude and
    above ``min_rel_amplitude`` times the largest amplitude, refined by a
    parabola through the log amplitudes. A peak within ``nms_bins`` resolution
    bins of a stronger one is dropped, and so is one within ``sidelobe_bins``
    that is weaker than ``sidelobe_ratio`` times its neighbour (window sidelobes).
    ``expected`` is the lowest frequency the caller wants resolved; a window
    too short for it is an error.
    """
    n = osc.s_grid.size
    if n < 16:
        raise ResolutionError("delta_rho has too few samples")
    if expected is not None and osc.s_range < 2 * math.pi / expected:
        raise ResolutionError("s window shorter than one period of the expected fundamental")
    if window == "hann":
        w = np.hanning(n)
    elif window == "rect":
        w = np.ones(n)
    else:
        raise ContractError(f"unknown window {window!r}")
    h = float(osc.s_grid[1] - osc.s_grid[0])
    n_fft = PAD_FACTOR * n
    F = np.fft.rfft(w * osc.delta_rho, n_fft) * h
    # reference the phase to the first grid point
    k = 2 * math.pi * np.fft.rfftfreq(n_fft, h)
    amp = 2 * np.abs(F) / (np.sum(w) * h)
    phase = np.angle(F * np.exp(-1j * k * osc.s_grid[0]))
    bin_w = osc.bin_width
    dk = k[1]
    start = int(math.ceil(2 * bin_w / dk))
    floor = max(threshold * float(np.median(amp)), min_rel_amplitude * float(np.max(amp[start:], initial=0.0)))
    cand = np.nonzero((amp[1:-1] > amp[:-2]) & (amp[1:-1] >= amp[2:]) & (amp[1:-1] > floor))[0] + 1
    cand = cand[cand >= start]
    peaks = []
    for i in cand:
        la, lb, lc = np.log(amp[i - 1:i + 2])
        denom = la - 2 * lb + lc
        off = 0.5 * (la - lc) / denom if denom < 0 else 0.0
        peaks.append(Peak(float(k[i] + off * dk), float(math.exp(lb - 0.25 * (la - lc) * off)),
                          float(phase[i])))
    kept = []
    for p in sorted(peaks, key=lambda p: -p.amplitude):
        if all(_separate(p, q, bin_w, nms_bins, sidelobe_bins, sidelobe_ratio) for q in kept):
            kept.append(p)
    osc.peaks = sorted(kept, key=lambda p: p.frequency)
    osc.frequency, osc.amplitude, osc.window = k, amp, window
    return osc


def _separate(p: Peak, q: Peak, bin_w, nms_bins, sidelobe_bins, ratio) -> bool:
    dist = abs(p.frequency - q.frequency) / bin_w
    if dist <= nms_bins:
        return False
    return not (dist <= sidelobe_bins and p.amplitude < ratio * q.amplitude)


def predicted_frequency(entry: CatalogEntry, vmap: ScaledVariableMap, hbar: float) -> float:
    """Where an orbit family should peak on the conjugate axis of ``vmap``."""
    if vmap.kind == "omega":
        return math.sqrt(2 * entry.mass) * entry.length / hbar
    if vmap.kind in ("homogeneous", "gamma_field"):
        if entry.kind == "billiard":
            return entry.action(abs(vmap.E0)) / hbar
        return entry.S0 / hbar
    raise ContractError("raw-energy peaks are local; compare them with local_energy_period")


@dataclass
class MatchReport:
    rows: list

    @property
    def matched(self) -> list:
        return [r for r in self.rows if r["matched_label"]]

    @property
    def unmatched(self) -> list:
        return [r for r in self.rows if not r["matched_label"]]

    def for_label(self, label: str) -> dict:
        for r in self.rows:
            if r["matched_label"] == label:
                return r
        raise KeyError(label)


def match_orbits(peaks: RecurrencePeaks, catalog: OrbitCatalog, tol: float,
                 predictions: Optional[dict] = None) -> MatchReport:
    """Assign each peak to the nearest predicted frequency within absolute ``tol``.

    ``predictions`` maps catalog labels to frequencies and overrides the
    default from :func:`predicted_frequency`.
    """
    if predictions is None:
        predictions = {e.label: predicted_frequency(e, peaks.vmap, peaks.hbar) for e in catalog}
    labels = list(predictions)
    freqs = np.array([predictions[lab] for lab in labels])
    rows = []
    for p in peaks.peaks:
        row = {"frequency": p.frequency, "amplitude": p.amplitude, "matched_label": "",
               "predicted": float("nan"), "rel_error": float("nan")}
        if freqs.size:
            j = int(np.argmin(np.abs(freqs - p.frequency)))
            if abs(freqs[j] - p.frequency) <= tol:
                row.update(matched_label=labels[j], predicted=float(freqs[j]),
                           rel_error=abs(p.frequency - freqs[j]) / abs(freqs[j]))
        rows.append(row)
    return MatchReport(rows)


def local_energy_period(orbit: PeriodicOrbit) -> float:
    """P_E = 2 pi hbar / T, the local period of the level density in E."""
    if not orbit.period > 0:
        raise DomainError("period must be positive")
    return 2 * math.pi * orbit.spec.hbar / orbit.period
