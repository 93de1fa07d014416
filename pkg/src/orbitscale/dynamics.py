"""Hamiltonian systems H = p^2/2m + sum_j lambda_j V_j(x) and their classical flow.

Units default to hbar = 1, 2m = 1. Potential shapes are evaluated on arrays of
shape ``(..., d)`` and must preserve the input dtype, so that orbit quadratures
can run in extended precision.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConfigError, ContractError, DomainError, EscapeError, NumericError

ArrayFn = Callable[[np.ndarray], np.ndarray]

DEFAULT_MASS = 0.5
DEFAULT_HBAR = 1.0


# --------------------------------------------------------------------------
# potential terms
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PotentialTerm:
    """One coupling times one shape function.

    ``degree`` is the homogeneity degree nu when ``homogeneous`` is true,
    i.e. ``shape(beta * x) == beta**nu * shape(x)`` for beta > 0.
    """

    coupling: float
    degree: Optional[float]
    shape: ArrayFn
    gradient: ArrayFn
    homogeneous: bool = True
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def value(self, x):
        return self.coupling * self.shape(x)

    def force(self, x):
        return -self.coupling * self.gradient(x)

    def with_coupling(self, coupling: float) -> "PotentialTerm":
        return dataclasses.replace(self, coupling=coupling)

    def to_dict(self) -> dict:
        if self.name not in _SHAPES:
            raise ConfigError(f"term {self.name!r} has no JSON representation")
        out = {"shape": self.name, "coupling": float(self.coupling)}
        if self.name == "power":
            out["degree"] = float(self.degree)
        out.update(self.params)
        return out


def _r2(x):
    x = np.asarray(x)
    return np.sum(x * x, axis=-1)


def power_term(coupling: float, degree: float) -> PotentialTerm:
    """Radial power |x|^nu (in one dimension simply |x|^nu)."""
    nu = float(degree)
    half = nu / 2

    def shape(x):
        # negative degrees are singular at the origin; callers check finiteness
        with np.errstate(divide="ignore"):
            return _r2(x) ** half

    def gradient(x):
        x = np.asarray(x)
        r2 = _r2(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            fac = np.where(r2 > 0, nu * r2 ** (half - 1), 0.0 if nu > 1 else np.inf)
            return fac[..., None] * x

    return PotentialTerm(coupling, nu, shape, gradient, True, "power")


def coulomb_term(coupling: float) -> PotentialTerm:
    """Attractive -1/r; ``coupling`` plays the role of e^2."""

    def shape(x):
        return -1 / np.sqrt(_r2(x))

    def gradient(x):
        x = np.asarray(x)
        r2 = _r2(x)
        return x / (r2 * np.sqrt(r2))[..., None]

    return PotentialTerm(coupling, -1.0, shape, gradient, True, "coulomb")


def oscillator_xy_term(coupling: float) -> PotentialTerm:
    """rho^2 = x^2 + y^2, the transverse confinement of the diamagnetic Kepler problem."""

    def shape(x):
        x = np.asarray(x)
        return x[..., 0] ** 2 + x[..., 1] ** 2

    def gradient(x):
        x = np.asarray(x)
        g = np.zeros_like(x)
        g[..., 0] = 2 * x[..., 0]
        g[..., 1] = 2 * x[..., 1]
        return g

    return PotentialTerm(coupling, 2.0, shape, gradient, True, "oscillator_xy")


_SHAPES = {
    "power": lambda d: power_term(d["coupling"], d["degree"]),
    "coulomb": lambda d: coulomb_term(d["coupling"]),
    "oscillator_xy": lambda d: oscillator_xy_term(d["coupling"]),
}


def check_term(term: PotentialTerm, dimension: int, n_samples: int = 6, seed: int = 7) -> None:
    """Spot-check homogeneity and gradient/shape consistency at a few points."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.3, 1.7, size=(n_samples, dimension)) * rng.choice([-1, 1], size=(n_samples, dimension))
    for x in pts:
        v = float(term.shape(x))
        if term.homogeneous:
            if term.degree is None:
                raise ContractError(f"homogeneous term {term.name!r} needs a degree")
            for beta in (0.5, 2.0, 3.0):
                vb = float(term.shape(beta * x))
                if abs(vb - beta ** term.degree * v) > 1e-12 * max(1.0, abs(vb)):
                    raise ContractError(f"term {term.name!r} is not homogeneous of degree {term.degree}")
        g = np.asarray(term.gradient(x), dtype=float)
        for k in range(dimension):
            h = 1e-5 * max(1.0, abs(x[k]))
            e = np.zeros(dimension)
            e[k] = h
            fd = (float(term.shape(x + e)) - float(term.shape(x - e))) / (2 * h)
            if abs(fd - g[k]) > 1e-6 * max(1.0, abs(g[k]), abs(v)):
                raise ContractError(f"gradient of term {term.name!r} disagrees with its shape")


# --------------------------------------------------------------------------
# system
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Domain:
    """Either all of R^d or an axis-aligned box with hard walls."""

    kind: str = "unbounded"
    lower: tuple = ()
    upper: tuple = ()
    bc: str = "dirichlet"
    escape_radius: float = 1e6

    def __post_init__(self):
        if self.kind not in ("unbounded", "box"):
            raise ContractError(f"unknown domain kind {self.kind!r}")
        if self.bc not in ("dirichlet", "neumann"):
            raise ContractError(f"unsupported boundary condition {self.bc!r}")
        if self.kind == "box":
            if len(self.lower) != len(self.upper) or not self.lower:
                raise ContractError("box needs matching lower/upper corners")
            if any(not hi > lo for lo, hi in zip(self.lower, self.upper)):
                raise DomainError("box must have positive extent")

    @property
    def is_box(self) -> bool:
        return self.kind == "box"

    def contains(self, x) -> bool:
        if not self.is_box:
            return True
        x = np.asarray(x)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def dilated(self, factor: float) -> "Domain":
        if not self.is_box:
            return self
        return dataclasses.replace(
            self,
            lower=tuple(factor * v for v in self.lower),
            upper=tuple(factor * v for v in self.upper),
        )

    def to_dict(self) -> dict:
        if not self.is_box:
            return {"kind": "unbounded"}
        return {"kind": "box", "lower": list(self.lower), "upper": list(self.upper), "bc": self.bc}


@dataclass(frozen=True)
class HamiltonianSpec:
    mass: float = DEFAULT_MASS
    hbar: float = DEFAULT_HBAR
    dimension: int = 1
    terms: tuple = ()
    domain: Domain = Domain()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.mass > 0 or not self.hbar > 0:
            raise ContractError("mass and hbar must be positive")
        if self.dimension < 1:
            raise ContractError("dimension must be >= 1")
        if self.domain.is_box and len(self.domain.lower) != self.dimension:
            raise ContractError("box dimension does not match system dimension")
        for term in self.terms:
            check_term(term, self.dimension)

    @property
    def couplings(self) -> list:
        return [t.coupling for t in self.terms]

    @property
    def degrees(self) -> list:
        return [t.degree for t in self.terms]

    def potential(self, x):
        x = np.asarray(x)
        v = np.zeros(x.shape[:-1], dtype=np.result_type(x.dtype, float))
        for term in self.terms:
            v = v + term.value(x)
        return v

    def force(self, x):
        x = np.asarray(x)
        f = np.zeros(x.shape, dtype=np.result_type(x.dtype, float))
        for term in self.terms:
            f = f + term.force(x)
        return f

    def kinetic(self, p):
        return _r2(p) / (2 * self.mass)

    def energy(self, x, p):
        return self.kinetic(p) + self.potential(x)

    def with_couplings(self, couplings: Sequence[float]) -> "HamiltonianSpec":
        if len(couplings) != len(self.terms):
            raise ContractError("one coupling per term required")
        terms = tuple(t.with_coupling(c) for t, c in zip(self.terms, couplings))
        return dataclasses.replace(self, terms=terms)

    # JSON round trip -------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "mass": self.mass,
            "hbar": self.hbar,
            "dimension": self.dimension,
            "terms": [t.to_dict() for t in self.terms],
            "domain": self.domain.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HamiltonianSpec":
        from .config import validate_system

        validate_system(data)
        terms = [_SHAPES[t["shape"]](t) for t in data.get("terms", [])]
        dom = data.get("domain", {"kind": "unbounded"})
        domain = Domain(
            kind=dom.get("kind", "unbounded"),
            lower=tuple(dom.get("lower", ())),
            upper=tuple(dom.get("upper", ())),
            bc=dom.get("bc", "dirichlet"),
        )
        dimension = data.get("dimension")
        if dimension is None:
            dimension = len(domain.lower) if domain.is_box else (3 if any(
                t["shape"] in ("coulomb", "oscillator_xy") for t in data.get("terms", [])) else 1)
        return cls(
            mass=data.get("mass", DEFAULT_MASS),
            hbar=data.get("hbar", DEFAULT_HBAR),
            dimension=dimension,
            terms=tuple(terms),
            domain=domain,
        )

    @classmethod
    def from_json(cls, path) -> "HamiltonianSpec":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read system file {path}: {exc}") from exc
        return cls.from_dict(data)


# convenience constructors for the standard test systems

def oscillator_spec(omega: float = 1.0, mass: float = DEFAULT_MASS, hbar: float = DEFAULT_HBAR) -> HamiltonianSpec:
    """1D oscillator V = m omega^2 x^2 / 2."""
    return HamiltonianSpec(mass, hbar, 1, (power_term(0.5 * mass * omega ** 2, 2),))


def power_spec(coupling: float, degree: float, mass: float = DEFAULT_MASS, hbar: float = DEFAULT_HBAR) -> HamiltonianSpec:
    return HamiltonianSpec(mass, hbar, 1, (power_term(coupling, degree),))


def box_spec(a: float, b: Optional[float] = None, mass: float = DEFAULT_MASS, hbar: float = DEFAULT_HBAR,
             bc: str = "dirichlet") -> HamiltonianSpec:
    if b is None:
        return HamiltonianSpec(mass, hbar, 1, (), Domain("box", (0.0,), (float(a),), bc))
    return HamiltonianSpec(mass, hbar, 2, (), Domain("box", (0.0, 0.0), (float(a), float(b)), bc))


def coulomb_spec(e2: float = 1.0, mass: float = DEFAULT_MASS, hbar: float = DEFAULT_HBAR,
                 dimension: int = 3) -> HamiltonianSpec:
    return HamiltonianSpec(mass, hbar, dimension, (coulomb_term(e2),))


def diamagnetic_kepler_spec(e2: float = 1.0, omega: float = 1.0, mass: float = DEFAULT_MASS,
                            hbar: float = DEFAULT_HBAR) -> HamiltonianSpec:
    """p^2/2m - e^2/r + m omega^2 (x^2 + y^2)/2, the rotating-frame field problem."""
    return HamiltonianSpec(mass, hbar, 3, (coulomb_term(e2), oscillator_xy_term(0.5 * mass * omega ** 2)))


# --------------------------------------------------------------------------
# states and trajectories
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseState:
    x: np.ndarray
    p: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if x.shape != p.shape or x.ndim != 1:
            raise ContractError("x and p must be vectors of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p)) and math.isfinite(self.t)):
            raise ContractError("phase state has non-finite components")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)

    @property
    def dimension(self) -> int:
        return self.x.shape[0]


@dataclass
class Trajectory:
    """Uniformly time-stamped samples of a phase-space curve.

    ``energy_drift`` is max |H - H(t0)| over the samples and
    ``drift_constant`` is that drift divided by dt^2.
    """

    t: np.ndarray
    x: np.ndarray
    p: np.ndarray
    energy: np.ndarray
    potential: np.ndarray
    mass: float
    dt: float
    energy_drift: float
    drift_constant: float = float("nan")
    tau: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i) -> PhaseState:
        return PhaseState(self.x[i], self.p[i], float(self.t[i]))

    @property
    def dimension(self) -> int:
        return self.x.shape[1]

    def to_csv(self, path) -> Path:
        path = Path(path)
        d = self.dimension
        header = ["t"] + (["tau"] if self.tau is not None else [])
        header += [f"x{k}" for k in range(d)] + [f"p{k}" for k in range(d)] + ["H"]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i in range(len(self.t)):
                row = [repr(float(self.t[i]))]
                if self.tau is not None:
                    row.append(repr(float(self.tau[i])))
                row += [repr(float(v)) for v in self.x[i]] + [repr(float(v)) for v in self.p[i]]
                row.append(repr(float(self.energy[i])))
                w.writerow(row)
        return path


def _make_trajectory(spec: HamiltonianSpec, t, xs, ps, dt) -> Trajectory:
    energy = spec.energy(xs, ps)
    drift = float(np.max(np.abs(energy - energy[0])))
    return Trajectory(
        t=t, x=xs, p=ps, energy=energy, potential=spec.potential(xs), mass=spec.mass, dt=dt,
        energy_drift=drift, drift_constant=drift / dt ** 2 if dt > 0 else float("nan"),
    )


def evaluate_energy(spec: HamiltonianSpec, state: PhaseState) -> float:
    """p^2/2m + sum_j lambda_j V_j(x)."""
    if state.dimension != spec.dimension:
        raise ContractError(f"state has dimension {state.dimension}, system has {spec.dimension}")
    return float(spec.energy(state.x, state.p))


def _drift_with_walls(x, p, step, mass, lower, upper, dt):
    """Free flight for time ``step`` inside the box, reflecting specularly at walls."""
    remaining = step
    for _ in range(1000):
        v = p / mass
        xn = x + remaining * v
        if np.all(xn >= lower) and np.all(xn <= upper):
            return xn, p

        def clearance(f):
            y = x + f * remaining * v
            return min(np.min(y - lower), np.min(upper - y))

        a, b = 0.0, 1.0
        while (b - a) * remaining > 1e-13 * dt:
            mid = 0.5 * (a + b)
            if clearance(mid) >= 0:
                a = mid
            else:
                b = mid
        y = x + b * remaining * v
        below = lower - y
        above = y - upper
        k_lo = int(np.argmax(below))
        k_hi = int(np.argmax(above))
        p = p.copy()
        if below[k_lo] >= above[k_hi]:
            y[k_lo] = lower[k_lo]
            p[k_lo] = -p[k_lo]
        else:
            y[k_hi] = upper[k_hi]
            p[k_hi] = -p[k_hi]
        x = np.clip(y, lower, upper)
        remaining = remaining * (1 - b)
    raise NumericError("too many wall reflections within a single step")


def integrate(spec: HamiltonianSpec, state0: PhaseState, dt: float, n_steps: int,
              escape_radius: Optional[float] = None) -> Trajectory:
    """Velocity-Verlet (kick-drift-kick) integration of Hamilton's equations.

    Hard walls of a box domain are handled inside the drift: the crossing time
    is bisected to 1e-13 dt and the normal momentum component is reversed.
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    if n_steps < 1:
        raise DomainError("n_steps must be >= 1")
    if state0.dimension != spec.dimension:
        raise ContractError("initial state dimension does not match the system")
    dom = spec.domain
    if not dom.contains(state0.x):
        raise ContractError("initial position lies outside the domain")
    radius = escape_radius if escape_radius is not None else dom.escape_radius
    lower = np.asarray(dom.lower, dtype=float) if dom.is_box else None
    upper = np.asarray(dom.upper, dtype=float) if dom.is_box else None
    m = spec.mass
    half = 0.5 * dt

    xs = np.empty((n_steps + 1, spec.dimension))
    ps = np.empty_like(xs)
    x = state0.x.copy()
    p = state0.p.copy()
    xs[0], ps[0] = x, p
    f = spec.force(x)
    has_force = bool(spec.terms)
    if has_force and not np.all(np.isfinite(f)):
        raise NumericError(f"non-finite force at the initial state t={state0.t:g}")
    for i in range(1, n_steps + 1):
        if has_force:
            p = p + half * f
        if lower is None:
            x = x + dt * p / m
        else:
            x, p = _drift_with_walls(x, p, dt, m, lower, upper, dt)
        if has_force:
            f = spec.force(x)
            if not np.all(np.isfinite(f)):
                raise NumericError(f"non-finite force at t={state0.t + i * dt:g}")
            p = p + half * f
        if lower is None and np.max(np.abs(x)) > radius:
            raise EscapeError(f"trajectory escaped beyond |x|={radius:g} at t={state0.t + i * dt:g}")
        xs[i], ps[i] = x, p
    t = state0.t + dt * np.arange(n_steps + 1)
    return _make_trajectory(spec, t, xs, ps, dt)


def reference_integrate(spec: HamiltonianSpec, state0: PhaseState, duration: float, n_steps: int,
                        rtol: float = 1e-13) -> Trajectory:
    """High-order (DOP853) solution sampled at ``n_steps + 1`` uniform stamps.

    Not symplectic; used where sample accuracy matters more than long-time
    structure (one-period orbit traces, integrator oracles). No wall support.
    """
    if spec.domain.is_box:
        raise ContractError("reference integrator does not handle hard walls")
    if not duration > 0 or n_steps < 1:
        raise DomainError("duration and n_steps must be positive")
    d = spec.dimension
    m = spec.mass

    def rhs(_t, y):
        f = spec.force(y[:d])
        return np.concatenate([y[d:] / m, f])

    y0 = np.concatenate([state0.x, state0.p])
    scale = max(1.0, float(np.max(np.abs(y0))))
    t_eval = np.linspace(0.0, duration, n_steps + 1)
    sol = solve_ivp(rhs, (0.0, duration), y0, method="DOP853", t_eval=t_eval,
                    rtol=rtol, atol=rtol * 1e-2 * scale)
    if not sol.success or not np.all(np.isfinite(sol.y)):
        raise NumericError(f"reference integration failed: {sol.message}")
    xs = np.ascontiguousarray(sol.y[:d].T)
    ps = np.ascontiguousarray(sol.y[d:].T)
    return _make_trajectory(spec, state0.t + t_eval, xs, ps, duration / n_steps)


# --------------------------------------------------------------------------
# wave-equation time
# --------------------------------------------------------------------------

def sqrt_reparametrize(traj: Trajectory, E: float) -> Trajectory:
    """Attach the time of the h = sqrt(H) dynamics, tau = 2 sqrt(E) t.

    The phase-space samples are shared with the input; only the stamps change.
    """
    if not E > 0:
        raise DomainError("square-root reparametrization needs E > 0")
    out = dataclasses.replace(traj)
    out.tau = 2.0 * math.sqrt(E) * (traj.t - traj.t[0])
    return out


def reparametrized_speed_sq(traj: Trajectory) -> np.ndarray:
    """|dx/dtau|^2 measured by second-order differences along the tau stamps."""
    if traj.tau is None:
        raise ContractError("trajectory carries no tau stamps; call sqrt_reparametrize first")
    u = np.gradient(traj.x, traj.tau, axis=0, edge_order=2)
    return np.sum(u * u, axis=1)


def predicted_speed_sq(traj: Trajectory, E: float) -> np.ndarray:
    """(1/2m)(1 - V/E) at every sample."""
    return (1.0 - traj.potential / E) / (2 * traj.mass)
