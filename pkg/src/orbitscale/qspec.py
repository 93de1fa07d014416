"""Quantum spectra: closed forms for the model systems and a 1D finite-difference solver."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from .dynamics import DEFAULT_HBAR, DEFAULT_MASS, HamiltonianSpec
from .errors import ContractError, DomainError, NumericError, ResolutionError


@dataclass
class SpectrumResult:
    levels: np.ndarray
    solver: str
    kind: str = "custom"
    params: dict = field(default_factory=dict)
    mass: float = DEFAULT_MASS
    hbar: float = DEFAULT_HBAR
    grid_points: Optional[int] = None
    est_error: Optional[np.ndarray] = None
    first: int = 1

    def __post_init__(self):
        self.levels = np.asarray(self.levels, dtype=float)
        if self.levels.ndim != 1 or self.levels.size < 1:
            raise ContractError("a spectrum needs at least one level")
        if np.any(np.diff(self.levels) < 0):
            raise ContractError("levels must be sorted")

    @property
    def count(self) -> int:
        return int(self.levels.size)

    def window(self, start: int, stop: int) -> "SpectrumResult":
        """Levels with 0-based positions start..stop-1 of this result."""
        err = None if self.est_error is None else self.est_error[start:stop]
        return replace(self, levels=self.levels[start:stop], est_error=err, first=self.first + start)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "E_n", "est_error"])
            for i, e in enumerate(self.levels):
                err = "" if self.est_error is None else repr(float(self.est_error[i]))
                w.writerow([self.first + i, repr(float(e)), err])
        return path


def _rectangle_levels(a, b, first, count, unit):
    need = first + count - 1
    n = max(4, int(math.sqrt(need)) + 2)
    while True:
        p = np.arange(1, n + 1)
        grid = unit * (p[:, None] ** 2 / a ** 2 + p[None, :] ** 2 / b ** 2)
        vals = np.sort(grid.ravel())
        edge = unit * min((n + 1) ** 2 / a ** 2 + 1 / b ** 2, 1 / a ** 2 + (n + 1) ** 2 / b ** 2)
        if vals.size >= need and vals[need - 1] < edge:
            return vals[first - 1:need]
        n *= 2


def analytic_spectrum(kind: str, params: dict, count: int, mass: float = DEFAULT_MASS,
                      hbar: float = DEFAULT_HBAR, first: int = 1) -> SpectrumResult:
    """Closed-form levels, ``count`` of them starting at the ``first``-th.

    box: params a (and b for a rectangle, whose levels are sorted over both
    quantum numbers); oscillator: params omega; coulomb: params e2 (n >= 1,
    one entry per principal quantum number).
    """
    if count < 1 or first < 1:
        raise DomainError("count and first must be >= 1")
    if not mass > 0 or not hbar > 0:
        raise DomainError("mass and hbar must be positive")
    for k, v in params.items():
        if not (isinstance(v, (int, float)) and v > 0):
            raise DomainError(f"parameter {k} must be positive")
    idx = np.arange(first, first + count, dtype=float)
    if kind == "box":
        unit = math.pi ** 2 * hbar ** 2 / (2 * mass)
        a = params.get("a")
        if a is None:
            raise DomainError("box needs parameter a")
        b = params.get("b")
        if b is None:
            levels = unit * idx ** 2 / a ** 2
        else:
            levels = _rectangle_levels(a, b, first, count, unit)
    elif kind == "oscillator":
        omega = params.get("omega", 1.0)
        levels = (idx - 0.5) * hbar * omega
    elif kind == "coulomb":
        e2 = params.get("e2", 1.0)
        levels = -mass * e2 ** 2 / (2 * hbar ** 2 * idx ** 2)
    else:
        raise DomainError(f"unknown spectrum kind {kind!r}")
    return SpectrumResult(levels, "analytic", kind, dict(params), mass, hbar, first=first)


def truncation_interval(spec: HamiltonianSpec, E_max: float, factor: float = 10.0,
                        x_center: float = 0.0) -> tuple:
    """Interval whose ends satisfy V(x_edge) = factor * E_max."""
    if spec.dimension != 1:
        raise ContractError("truncation applies to 1D systems")
    if not E_max > 0:
        raise DomainError("truncation needs a positive E_max")
    target = factor * E_max

    def g(x):
        return float(spec.potential(np.array([x]))) - target

    ends = []
    for direction in (-1, 1):
        h = 1.0
        while g(x_center + direction * h) < 0:
            h *= 2
            if h > spec.domain.escape_radius:
                raise DomainError("potential never reaches the truncation level; it is not confining")
        lo, hi = sorted((x_center + direction * h / 2, x_center + direction * h))
        ends.append(brentq(g, lo, hi, xtol=1e-12))
    return (ends[0], ends[1])


def _fd_levels(spec, lo, hi, grid_n, count):
    h = (hi - lo) / grid_n
    x = lo + h * np.arange(1, grid_n)
    V = spec.potential(x[:, None])
    if not np.all(np.isfinite(V)):
        raise NumericError("potential is singular at an interior grid point")
    kin = spec.hbar ** 2 / (2 * spec.mass * h * h)
    d = 2 * kin + V
    e = np.full(grid_n - 2, -kin)
    return eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, count - 1),
                            lapack_driver="stebz")


def fd_spectrum_1d(spec: HamiltonianSpec, interval: Optional[Sequence[float]] = None,
                   grid_n: int = 4000, count: int = 20) -> SpectrumResult:
    """Lowest ``count`` Dirichlet levels of -(hbar^2/2m) d^2/dx^2 + V.

    ``grid_n`` is the number of intervals. The symmetric tridiagonal matrix is
    solved by Sturm-sequence bisection; est_error is |E(h) - E(2h)|, which
    bounds the O(h^2) discretization error of the finer grid.
    """
    if spec.dimension != 1:
        raise ContractError("finite-difference solver is one-dimensional")
    if spec.domain.is_box and spec.domain.bc != "dirichlet":
        raise ContractError("finite-difference solver supports Dirichlet walls only")
    if count < 1:
        raise DomainError("count must be >= 1")
    if grid_n % 2:
        raise ContractError("grid_n must be even so the half grid exists")
    if grid_n < 8 * count:
        raise ResolutionError(f"grid_n={grid_n} cannot resolve {count} levels (need >= {8 * count})")
    if interval is None:
        if spec.domain.is_box:
            interval = (spec.domain.lower[0], spec.domain.upper[0])
        else:
            interval = _auto_interval(spec, count)
    lo, hi = map(float, interval)
    if not hi > lo:
        raise DomainError("interval must have positive length")
    fine = _fd_levels(spec, lo, hi, grid_n, count)
    coarse = _fd_levels(spec, lo, hi, grid_n // 2, count)
    if np.any(np.diff(fine) <= 0):
        raise NumericError("finite-difference levels are not strictly increasing")
    return SpectrumResult(fine, "finite_difference", "fd", {"interval": [lo, hi]}, spec.mass, spec.hbar,
                          grid_points=grid_n, est_error=np.abs(fine - coarse))


def _auto_interval(spec, count):
    # grow until the top requested level sits well below the edge potential
    E_guess = 1.0
    for _ in range(30):
        lo, hi = truncation_interval(spec, E_guess)
        top = _fd_levels(spec, lo, hi, 16 * count, count)[-1]
        if top <= E_guess:
            return lo, hi
        E_guess = 2 * top
    raise DomainError("could not find a truncation interval")
