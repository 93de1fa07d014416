"""Periodic orbits and their invariants.

1D orbits in smooth potentials are located by their turning points and
integrated by quadrature; billiards in rectangles are catalogued analytically.
Quadratures run in ``np.longdouble`` because the action-period check takes
central differences of S at step sizes near 1e-4.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from ._parallel import pmap
from .dynamics import HamiltonianSpec, PhaseState, Trajectory, integrate, reference_integrate
from .errors import (
    ContractError,
    DegeneracyError,
    DomainError,
    FamilyError,
    NotPeriodicError,
    NumericError,
    OrbitScaleError,
    OrbitStructureError,
)

LD = np.longdouble
PI_LD = LD("3.14159265358979323846264338327950288")


@dataclass
class PeriodicOrbit:
    """One closed orbit with its invariants.

    ``potential_integral`` is the integral of the full potential over one
    period; ``time_action`` is R = S - E T.
    """

    spec: HamiltonianSpec
    energy: float
    period: float
    action: float
    arclength: float
    time_action: float
    closure_residual: float
    potential_integral: float
    trace: Optional[Trajectory] = None
    turning_points: tuple = ()
    label: str = "orbit"
    meta: dict = field(default_factory=dict)

    @property
    def x_max(self) -> float:
        if self.turning_points:
            return float(max(abs(v) for v in self.turning_points))
        if self.trace is not None:
            return float(np.max(np.linalg.norm(self.trace.x, axis=1)))
        return float("nan")

    def invariants(self) -> dict:
        return {
            "label": self.label,
            "E": self.energy,
            "T": self.period,
            "S": self.action,
            "L_geo": self.arclength,
            "R": self.time_action,
            "closure_residual": self.closure_residual,
        }

    def to_json(self, path) -> Path:
        path = Path(path)
        block = self.invariants()
        block["turning_points"] = list(self.turning_points)
        block["system"] = _safe_system_dict(self.spec)
        path.write_text(json.dumps(block, indent=2, sort_keys=True) + "\n")
        return path


def _safe_system_dict(spec):
    try:
        return spec.to_dict()
    except OrbitScaleError:
        return None


# --------------------------------------------------------------------------
# trace integrals
# --------------------------------------------------------------------------

def _periodic_sum(values: np.ndarray, dt: float) -> float:
    # samples cover [0, T] with the endpoint repeated; trapezoid on a periodic
    # integrand is the plain sum over one copy
    return float(np.sum(values[:-1]) * dt)


def trace_action(traj: Trajectory) -> float:
    """Loop integral of p.dx measured as the integral of p^2/m dt."""
    return _periodic_sum(np.sum(traj.p * traj.p, axis=1) / traj.mass, traj.dt)


def trace_time_integral(traj: Trajectory, values: np.ndarray) -> float:
    return _periodic_sum(np.asarray(values), traj.dt)


def trace_arclength(traj: Trajectory) -> float:
    return _periodic_sum(np.linalg.norm(traj.p, axis=1) / traj.mass, traj.dt)


def closure_residual(traj: Trajectory) -> float:
    """Distance between first and last sample, scaled by (x_max, p_max)."""
    x_max = max(float(np.max(np.abs(traj.x))), 1e-300)
    p_max = max(float(np.max(np.abs(traj.p))), 1e-300)
    dx = float(np.max(np.abs(traj.x[-1] - traj.x[0]))) / x_max
    dp = float(np.max(np.abs(traj.p[-1] - traj.p[0]))) / p_max
    return max(dx, dp)


# --------------------------------------------------------------------------
# 1D turning points and quadrature
# --------------------------------------------------------------------------

def _V(spec, x):
    return spec.potential(np.asarray(x)[..., None])


def _dV(spec, x):
    return -spec.force(np.asarray(x)[..., None])[..., 0]


def _find_end(spec: HamiltonianSpec, E_exact, xc: float, direction: int, scale: float):
    """Return (position, is_wall) of the end of the allowed region on one side."""
    E = float(E_exact)
    dom = spec.domain
    wall = None
    if dom.is_box:
        wall = dom.upper[0] if direction > 0 else dom.lower[0]
    limit = dom.escape_radius
    h = 1e-3 * max(1.0, abs(xc))
    far = xc
    while True:
        cand = xc + direction * h
        if wall is not None and direction * (cand - wall) >= 0:
            cand = wall
        if abs(cand) > limit:
            raise OrbitStructureError(f"no turning point within |x| < {limit:g} at E={E:g}")
        vc = float(_V(spec, cand))
        if not math.isfinite(vc) or vc - E >= 0:
            far = cand
            break
        if cand == wall:
            far = cand
            break
        h *= 2
    grid = np.linspace(xc, far, 2049)[1:]
    g = _V(spec, grid).astype(float) - E
    bad = ~np.isfinite(g)
    g[bad] = np.inf
    pos = np.nonzero(g >= 0)[0]
    # interior maxima of V - E that come close to zero signal a separatrix
    # a tangential zero lands in pos, so search up to the first clearly positive sample
    above = np.nonzero(g > 1e-8 * scale)[0]
    stop = above[0] if len(above) else len(g)
    gi = g[:stop]
    if len(gi) >= 3:
        peaks = np.nonzero((gi[1:-1] > gi[:-2]) & (gi[1:-1] >= gi[2:]))[0] + 1
        if len(peaks) and np.max(gi[peaks]) > -1e-8 * scale:
            raise DegeneracyError(f"energy {E:g} touches a potential maximum (separatrix)")
    if len(pos) == 0:
        return LD(wall), True
    changes = np.count_nonzero(np.diff(g >= 0))
    if changes > 1:
        raise OrbitStructureError("more than one root of V(x) = E on one side of the well")
    k = pos[0]
    lo = xc if k == 0 else grid[k - 1]
    hi = grid[k]
    if bad[k]:
        raise NumericError("potential is singular at the edge of the classically allowed region")
    root = brentq(lambda y: float(_V(spec, y)) - E, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return _polish(spec, E_exact, root, scale), False


def _polish(spec, E, root, scale):
    x = LD(root)
    Eld = LD(E)
    for _ in range(4):
        d = _dV(spec, x)
        if abs(float(d)) * max(1.0, abs(float(x))) < 1e-10 * scale:
            raise DegeneracyError("turning point sits at a stationary point of V")
        step = (_V(spec, x) - Eld) / d
        x = x - step
        if abs(float(step)) <= 1e-19 * max(1.0, abs(float(x))):
            break
    return x


def _gauss_legendre_ld(n):
    u, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (u.astype(LD) + 1), 0.5 * w.astype(LD)


def _quadrature(spec: HamiltonianSpec, E, x_lo, x_hi, lo_wall, hi_wall, n_nodes):
    """T, S and the potential time-integral in long double."""
    m = LD(spec.mass)
    E = LD(E)
    D = x_hi - x_lo
    if not lo_wall and not hi_wall:
        th = (np.arange(n_nodes, dtype=LD) + LD(0.5)) * (PI_LD / 2) / n_nodes
        w = np.full(n_nodes, (PI_LD / 2) / n_nodes, dtype=LD)
        x = x_lo + D * np.sin(th) ** 2
        jac = D * np.sin(2 * th)
    elif lo_wall and hi_wall:
        u, w = _gauss_legendre_ld(n_nodes)
        x = x_lo + D * u
        jac = np.full(n_nodes, D, dtype=LD)
    else:
        u, w = _gauss_legendre_ld(n_nodes)
        turn = x_hi if not hi_wall else x_lo
        sgn = -1 if not hi_wall else 1
        x = turn + sgn * D * u * u
        jac = 2 * D * u
    V = _V(spec, x)
    K = E - V
    if np.any(K <= 0) or not np.all(np.isfinite(K)):
        raise NumericError("kinetic energy not positive inside the allowed region")
    v = np.sqrt(2 * K / m)
    T = 2 * np.sum(w * jac / v)
    S = 2 * np.sum(w * jac * m * v)
    W = 2 * np.sum(w * jac * V / v)
    return T, S, W


@dataclass(frozen=True)
class _Quad:
    x_lo: object
    x_hi: object
    lo_wall: bool
    hi_wall: bool
    T: object
    S: object
    W: object


def _orbit_quad(spec: HamiltonianSpec, E_exact, x_center: Optional[float], n_nodes: int) -> _Quad:
    E = float(E_exact)
    if spec.dimension != 1:
        raise ContractError("smooth-potential orbit finding is restricted to one dimension")
    if n_nodes < 4:
        raise ContractError("n_nodes must be >= 4")
    if x_center is None:
        x_center = 0.5 * (spec.domain.lower[0] + spec.domain.upper[0]) if spec.domain.is_box else 0.0
    Vc = float(_V(spec, x_center))
    if not math.isfinite(Vc):
        raise DomainError(f"potential is singular at x_center={x_center}; pass a different x_center")
    depth = E - Vc
    scale = max(abs(E), abs(Vc), 1e-300)
    if depth < -1e-12 * scale:
        raise OrbitStructureError(f"E={E:g} lies below V(x_center)={Vc:g}")
    if depth <= 1e-12 * scale:
        raise DegeneracyError(f"E={E:g} equals the potential at the well centre; orbit is degenerate")
    x_lo, lo_wall = _find_end(spec, E_exact, x_center, -1, depth)
    x_hi, hi_wall = _find_end(spec, E_exact, x_center, +1, depth)
    T, S, W = _quadrature(spec, E_exact, x_lo, x_hi, lo_wall, hi_wall, n_nodes)
    return _Quad(x_lo, x_hi, lo_wall, hi_wall, T, S, W)


def find_orbit_1d(spec: HamiltonianSpec, E: float, x_center: Optional[float] = None,
                  n_nodes: int = 200, n_steps: int = 100_000, trace: bool = True,
                  label: str = "primitive") -> PeriodicOrbit:
    """Closed orbit of a 1D system at energy E.

    Turning points come from a bracket march, Brent's method, then Newton
    polishing in long double. For two smooth turning points the period and
    action use x = x_lo + (x_hi - x_lo) sin^2(theta) with the midpoint rule in
    theta, which is spectrally accurate on that periodic integrand. A hard
    wall at one or both ends switches to Gauss-Legendre in a variable that
    keeps the integrand smooth.

    With ``trace=True`` one period is sampled at ``n_steps + 1`` uniform
    stamps: by the reference integrator for smooth wells, by Verlet with
    wall reflections otherwise.
    """
    q = _orbit_quad(spec, E, x_center, n_nodes)
    T, S, W = float(q.T), float(q.S), float(q.W)
    x_lo, x_hi = float(q.x_lo), float(q.x_hi)
    orbit = PeriodicOrbit(
        spec=spec, energy=float(E), period=T, action=S, arclength=2 * (x_hi - x_lo),
        time_action=S - float(E) * T, closure_residual=0.0, potential_integral=W,
        turning_points=(x_lo, x_hi), label=label,
        meta={"walls": (q.lo_wall, q.hi_wall), "n_nodes": n_nodes},
    )
    if trace:
        orbit.trace = _orbit_trace(spec, E, q, n_steps)
        orbit.closure_residual = closure_residual(orbit.trace)
    return orbit


def _orbit_trace(spec, E, q: _Quad, n_steps: int) -> Trajectory:
    T = float(q.T)
    if not q.lo_wall:
        x0, p0 = float(q.x_lo), 0.0
    elif not q.hi_wall:
        x0, p0 = float(q.x_hi), 0.0
    else:
        x0 = float(q.x_lo + q.x_hi) / 2
        p0 = math.sqrt(2 * spec.mass * (E - float(_V(spec, x0))))
    state = PhaseState([x0], [p0])
    if spec.domain.is_box:
        return integrate(spec, state, T / n_steps, n_steps)
    return reference_integrate(spec, state, T, n_steps)


def integrate_closed_orbit(spec: HamiltonianSpec, state0: PhaseState, n_steps: int = 100_000,
                           t_max: Optional[float] = None, method: str = "verlet",
                           label: str = "integrated", closure_tol: float = 1e-6) -> PeriodicOrbit:
    """Integrate a closed orbit of a smooth multi-dimensional system from a seed state.

    The period is located as the first return of g(t) = (x(t) - x0).v0
    upward through zero, using event detection on the reference integrator;
    one period is then sampled with ``method`` ('verlet' or 'reference').
    """
    if spec.domain.is_box:
        raise ContractError("closed-orbit integration supports smooth potentials only")
    d = spec.dimension
    m = spec.mass
    x0, p0 = state0.x, state0.p
    v0 = p0 / m
    if not np.any(v0):
        raise ContractError("seed state must have nonzero momentum")
    E = float(spec.energy(x0, p0))
    if t_max is None:
        t_max = 1e3 * float(np.linalg.norm(x0) + 1.0) / float(np.linalg.norm(v0))

    def rhs(_t, y):
        return np.concatenate([y[d:] / m, spec.force(y[:d])])

    def ret(_t, y):
        return float(np.dot(y[:d] - x0, v0))

    def away(_t, y):
        return float(np.dot(y[:d] - x0, v0)) + 1e-3 * float(np.linalg.norm(x0) + 1e-12) * float(np.linalg.norm(v0))

    away.direction = -1
    away.terminal = True
    sol = solve_ivp(rhs, (0, t_max), np.concatenate([x0, p0]), method="DOP853",
                    rtol=1e-12, atol=1e-14, events=[away], dense_output=False)
    if not sol.t_events[0].size:
        raise NotPeriodicError("seed trajectory never turned back within t_max")
    t_turn = float(sol.t_events[0][0])
    ret.direction = 1
    ret.terminal = True
    sol = solve_ivp(rhs, (t_turn, t_max), sol.y_events[0][0], method="DOP853",
                    rtol=1e-12, atol=1e-14, events=[ret])
    if not sol.t_events[0].size:
        raise NotPeriodicError("trajectory did not return to its starting section within t_max")
    T = float(sol.t_events[0][0])
    if method == "verlet":
        traj = integrate(spec, state0, T / n_steps, n_steps)
    elif method == "reference":
        traj = reference_integrate(spec, state0, T, n_steps)
    else:
        raise ContractError(f"unknown integration method {method!r}")
    res = closure_residual(traj)
    if res > closure_tol:
        raise NotPeriodicError(f"orbit does not close: residual {res:.3e} > {closure_tol:g}")
    S = trace_action(traj)
    W = trace_time_integral(traj, traj.potential)
    return PeriodicOrbit(
        spec=spec, energy=E, period=T, action=S, arclength=trace_arclength(traj),
        time_action=S - E * T, closure_residual=res, potential_integral=W, trace=traj,
        label=label, meta={"method": method},
    )


def circular_orbit(spec: HamiltonianSpec, E: float, n_steps: int = 100_000,
                   method: str = "verlet") -> PeriodicOrbit:
    """Circular orbit in the xy plane of a radial-plus-xy-oscillator system at energy E."""
    if any(t.name not in ("coulomb", "oscillator_xy", "power") for t in spec.terms):
        raise ContractError("circular seed orbits need built-in radial terms")
    m = spec.mass

    def v2(r):
        x = np.array([r, 0.0, 0.0][: spec.dimension])
        return r * float(-spec.force(x)[0]) / m

    def energy(r):
        x = np.array([r, 0.0, 0.0][: spec.dimension])
        return 0.5 * m * v2(r) + float(spec.potential(x))

    lo, hi = 1e-6, 1.0
    while energy(hi) < E:
        hi *= 2
        if hi > 1e6:
            raise ContractError(f"no circular orbit at E={E:g}")
    r = brentq(lambda q: energy(q) - E, lo, hi, xtol=1e-15, rtol=1e-15)
    x0 = np.zeros(spec.dimension)
    x0[0] = r
    p0 = np.zeros(spec.dimension)
    p0[1] = m * math.sqrt(v2(r))
    return integrate_closed_orbit(spec, PhaseState(x0, p0), n_steps=n_steps, method=method)


# --------------------------------------------------------------------------
# invariants and the action-period theorem
# --------------------------------------------------------------------------

def orbit_invariants(orbit: PeriodicOrbit) -> dict:
    """Stored invariants, after re-checking R = S - E T."""
    R = orbit.action - orbit.energy * orbit.period
    scale = max(abs(orbit.action), abs(orbit.energy * orbit.period), 1e-300)
    if abs(R - orbit.time_action) > 1e-12 * scale:
        raise ContractError("stored time-action disagrees with S - E T")
    return {"S": orbit.action, "T": orbit.period, "L_geo": orbit.arclength, "R": orbit.time_action}


def ds_de_check(spec: HamiltonianSpec, E: float, delta: float, x_center: Optional[float] = None,
                n_nodes: int = 200) -> dict:
    """Central difference of S(E) against the measured period."""
    if not delta > 0:
        raise DomainError("delta must be positive")
    Eld = LD(E)
    energies = (Eld - LD(delta), Eld, Eld + LD(delta))
    def one(e):
        try:
            return _orbit_quad(spec, e, x_center, n_nodes)
        except OrbitStructureError as exc:
            raise FamilyError(f"orbit family broken at E={float(e):.12g}: {exc}") from exc

    quads = pmap(one, energies)
    Ts = [float(q.T) for q in quads]
    if max(Ts) > 1.5 * min(Ts):
        raise FamilyError("period jumps across the stencil; the orbit family changes topology")
    walls = {(q.lo_wall, q.hi_wall) for q in quads}
    if len(walls) > 1:
        raise FamilyError("orbit changes from wall to turning-point type across the stencil")
    dSdE = (quads[2].S - quads[0].S) / (energies[2] - energies[0])
    T = quads[1].T
    return {"dSdE": float(dSdE), "T": float(T), "residual": float(abs(dSdE - T) / T)}


# --------------------------------------------------------------------------
# catalogues
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CatalogEntry:
    """A periodic-orbit family characterised by its length.

    Billiard entries (``kind='billiard'``) carry S(E) = sqrt(2mE) L and
    T(E) = sqrt(m/2E) L at every energy. Entries built from a computed orbit
    store only its values at E0, with L the characteristic length.
    """

    label: str
    length: float
    mass: float
    kind: str = "billiard"
    E0: float = 1.0
    S0: Optional[float] = None
    T0: Optional[float] = None
    repetition: int = 1

    def action(self, E: float) -> float:
        if self.kind == "billiard":
            return math.sqrt(2 * self.mass * E) * self.length
        if E != self.E0:
            raise DomainError("orbit-derived catalog entries know S only at E0")
        return self.S0

    def period(self, E: float) -> float:
        if self.kind == "billiard":
            return math.sqrt(self.mass / (2 * E)) * self.length
        if E != self.E0:
            raise DomainError("orbit-derived catalog entries know T only at E0")
        return self.T0


@dataclass
class OrbitCatalog:
    entries: list

    def __post_init__(self):
        labels = [e.label for e in self.entries]
        if len(set(labels)) != len(labels):
            raise ContractError("catalog labels must be unique")
        self.entries = sorted(self.entries, key=lambda e: (e.length, e.label))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([e.length for e in self.entries])

    def by_label(self, label: str) -> CatalogEntry:
        for e in self.entries:
            if e.label == label:
                return e
        raise KeyError(label)

    @classmethod
    def from_orbits(cls, orbits) -> "OrbitCatalog":
        from .scaling import characteristic_length

        entries = []
        for o in orbits:
            lam = characteristic_length(o.action, o.energy, o.spec.mass)
            entries.append(CatalogEntry(o.label, lam, o.spec.mass, "orbit", o.energy, o.action, o.period))
        return cls(entries)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["label", "L", "S_at_E0", "T_at_E0", "E0"])
            for e in self.entries:
                w.writerow([e.label, repr(e.length), repr(e.action(e.E0)), repr(e.period(e.E0)), repr(e.E0)])
        return path


def rectangle_orbit_lengths(a: float, b: Optional[float] = None, n_max: int = 5,
                            mass: float = 0.5, E0: float = 1.0) -> OrbitCatalog:
    """Periodic-orbit families of a 1D box (b None) or a rectangle.

    In 2D each winding pair (p, q) with p, q >= 0 gives L = 2 sqrt((pa)^2 + (qb)^2);
    non-primitive pairs are repetitions of their primitive orbit.
    """
    if not a > 0 or (b is not None and not b > 0):
        raise DomainError("billiard dimensions must be positive")
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    entries = []
    if b is None:
        for k in range(1, n_max + 1):
            entries.append(CatalogEntry(f"k={k}", 2 * a * k, mass, "billiard", E0, repetition=k))
    else:
        for p in range(n_max + 1):
            for q in range(n_max + 1):
                if p == 0 and q == 0:
                    continue
                L = 2 * math.hypot(p * a, q * b)
                entries.append(CatalogEntry(f"({p},{q})", L, mass, "billiard", E0, repetition=math.gcd(p, q)))
    return OrbitCatalog(entries)
