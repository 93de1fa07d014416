"""Energy-coupling scaling of classical orbits.

Three transformations act on a computed orbit:

* coupling: (lambda, E) -> alpha^2 (lambda, E), x(t) -> x0(alpha t), p -> alpha p0
* homogeneous (degree nu): x(t) -> alpha^2 x0(alpha^(nu-2) t), p -> alpha^nu p0,
  E -> alpha^(2 nu) E, couplings fixed
* mixed: one anchor coupling of degree nu1 fixed, every other coupling
  rescaled by alpha^(2(nu1 - nu_j)), same dilation as the homogeneous case

Each is applied actively: the stored trace is restamped and its momenta
rescaled, and the result can be checked against the scaled equations of motion.
"""
from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dynamics import HamiltonianSpec, PotentialTerm, Trajectory
from .errors import (
    ContractError,
    DomainError,
    NotPeriodicError,
    SingularExponentError,
    WrongKindError,
)
from .orbits import PeriodicOrbit, trace_action, trace_arclength, trace_time_integral


@dataclass
class ScalingResult:
    alpha: float
    kind: str
    new_energy: float
    new_couplings: list
    predicted_T: float
    predicted_S: float
    transformed: PeriodicOrbit
    source: PeriodicOrbit = field(repr=False)

    @property
    def measured_T(self) -> float:
        return self.transformed.period

    @property
    def measured_S(self) -> float:
        return self.transformed.action

    @property
    def T_residual(self) -> float:
        return abs(self.measured_T - self.predicted_T) / abs(self.predicted_T)

    @property
    def S_residual(self) -> float:
        return abs(self.measured_S - self.predicted_S) / abs(self.predicted_S)

    def row(self) -> dict:
        out = {"alpha": self.alpha, "E": self.new_energy}
        for j, lam in enumerate(self.new_couplings):
            out[f"lambda_{j}"] = lam
        out.update({
            "T_meas": self.measured_T, "T_pred": self.predicted_T,
            "S_meas": self.measured_S, "S_pred": self.predicted_S,
            "T_resid": self.T_residual, "S_resid": self.S_residual,
            "eom_resid": eom_residual(self.transformed),
        })
        return out

    def to_csv(self, path) -> Path:
        return write_rows(path, [self.row()])


def write_rows(path, rows: Sequence[dict]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        if not rows:
            fh.write("\n")
            return path
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return path


def _check_alpha(alpha):
    if not (isinstance(alpha, (int, float, np.floating)) and alpha > 0 and math.isfinite(alpha)):
        raise DomainError(f"alpha must be a positive finite number, got {alpha!r}")


def _restamped(traj: Trajectory, spec: HamiltonianSpec, time_factor: float, x_factor: float,
               p_factor: float) -> Trajectory:
    t = traj.t[0] * time_factor + (traj.t - traj.t[0]) * time_factor
    x = traj.x * x_factor
    p = traj.p * p_factor
    dt = traj.dt * time_factor
    energy = spec.energy(x, p)
    drift = float(np.max(np.abs(energy - energy[0])))
    return Trajectory(t=t, x=x, p=p, energy=energy, potential=spec.potential(x), mass=spec.mass,
                      dt=dt, energy_drift=drift, drift_constant=drift / dt ** 2)


def _transform(orbit: PeriodicOrbit, alpha: float, kind: str, new_spec: HamiltonianSpec, new_E: float,
               time_factor: float, x_factor: float, p_factor: float, pred_T: float,
               pred_S: float) -> ScalingResult:
    if orbit.trace is None:
        raise ContractError("scaling acts on the stored trace; the orbit carries none")
    tr = _restamped(orbit.trace, new_spec, time_factor, x_factor, p_factor)
    T = float(tr.t[-1] - tr.t[0])
    S = trace_action(tr)
    W = trace_time_integral(tr, tr.potential)
    new = PeriodicOrbit(
        spec=new_spec, energy=new_E, period=T, action=S, arclength=trace_arclength(tr),
        time_action=S - new_E * T, closure_residual=orbit.closure_residual, potential_integral=W,
        trace=tr, turning_points=tuple(float(v) * x_factor for v in orbit.turning_points),
        label=orbit.label, meta={**orbit.meta, "scaled_by": (kind, alpha)},
    )
    return ScalingResult(alpha=float(alpha), kind=kind, new_energy=new_E,
                         new_couplings=list(new_spec.couplings), predicted_T=pred_T, predicted_S=pred_S,
                         transformed=new, source=orbit)


def scale_coupling(orbit: PeriodicOrbit, alpha: float) -> ScalingResult:
    """(lambda, E) -> alpha^2 (lambda, E); the configuration-space path is unchanged."""
    _check_alpha(alpha)
    spec = orbit.spec
    new_spec = spec.with_couplings([alpha ** 2 * c for c in spec.couplings])
    return _transform(orbit, alpha, "coupling", new_spec, alpha ** 2 * orbit.energy,
                      1 / alpha, 1.0, alpha, orbit.period / alpha, alpha * orbit.action)


def common_degree(spec: HamiltonianSpec) -> float:
    """The single homogeneity degree shared by every term."""
    if not spec.terms:
        raise WrongKindError("system has no potential terms")
    if not all(t.homogeneous for t in spec.terms):
        raise WrongKindError("all potential terms must be homogeneous")
    degrees = {float(t.degree) for t in spec.terms}
    if len(degrees) != 1:
        raise WrongKindError(f"terms have mixed degrees {sorted(degrees)}; use scale_mixed")
    return degrees.pop()


def _check_nu(nu):
    if nu == 0 or nu == -2:
        raise SingularExponentError(f"degree nu={nu:g} is singular for dilation scaling")


def scale_homogeneous(orbit: PeriodicOrbit, alpha: float) -> ScalingResult:
    """Dilation x -> alpha^2 x of an orbit in a degree-nu potential at fixed couplings."""
    _check_alpha(alpha)
    nu = common_degree(orbit.spec)
    _check_nu(nu)
    new_spec = dataclasses.replace(orbit.spec, domain=orbit.spec.domain.dilated(alpha ** 2))
    return _transform(orbit, alpha, "homogeneous", new_spec, alpha ** (2 * nu) * orbit.energy,
                      alpha ** (2 - nu), alpha ** 2, alpha ** nu,
                      alpha ** (2 - nu) * orbit.period, alpha ** (nu + 2) * orbit.action)


def deform_term(term: PotentialTerm, alpha: float, nu1: float) -> PotentialTerm:
    """V[alpha](x) = alpha^(2 nu1) V(x / alpha^2), the deformation that lets a
    non-homogeneous term follow the anchor's scaling."""
    c = alpha ** (2 * nu1)
    s = alpha ** -2
    shape, grad = term.shape, term.gradient

    return PotentialTerm(
        coupling=term.coupling, degree=term.degree,
        shape=lambda x: c * shape(s * np.asarray(x)),
        gradient=lambda x: (c * s) * grad(s * np.asarray(x)),
        homogeneous=False, name=f"deformed[{term.name}]",
        params={**term.params, "alpha": alpha, "nu1": nu1},
    )


def scale_mixed(orbit: PeriodicOrbit, alpha: float, anchor_index: int = 0,
                allow_deformation: bool = False) -> ScalingResult:
    """Hold the anchor coupling fixed and rescale every other coupling so the
    whole potential picks up alpha^(2 nu1) under x -> alpha^2 x."""
    _check_alpha(alpha)
    spec = orbit.spec
    if not 0 <= anchor_index < len(spec.terms):
        raise ContractError(f"anchor_index {anchor_index} out of range")
    anchor = spec.terms[anchor_index]
    if not anchor.homogeneous:
        raise WrongKindError("the anchor term must be homogeneous")
    nu1 = float(anchor.degree)
    _check_nu(nu1)
    terms = []
    for j, t in enumerate(spec.terms):
        if j == anchor_index:
            terms.append(t)
        elif t.homogeneous:
            terms.append(t.with_coupling(alpha ** (2 * (nu1 - t.degree)) * t.coupling))
        elif allow_deformation:
            terms.append(deform_term(t, alpha, nu1))
        else:
            raise WrongKindError(f"term {j} is not homogeneous; pass allow_deformation=True")
    new_spec = dataclasses.replace(spec, terms=tuple(terms), domain=spec.domain.dilated(alpha ** 2))
    return _transform(orbit, alpha, "mixed", new_spec, alpha ** (2 * nu1) * orbit.energy,
                      alpha ** (2 - nu1), alpha ** 2, alpha ** nu1,
                      alpha ** (2 - nu1) * orbit.period, alpha ** (nu1 + 2) * orbit.action)


def field_ratio(result: ScalingResult, term_index: int) -> float:
    """Gamma = omega/omega0 for a term whose coupling is proportional to omega^2."""
    lam0 = result.source.spec.terms[term_index].coupling
    return math.sqrt(result.new_couplings[term_index] / lam0)


# --------------------------------------------------------------------------
# invariant checks
# --------------------------------------------------------------------------

def characteristic_length(S: float, E: float, m: float) -> float:
    """Lambda = S / sqrt(2 m |E|); equals the geometric length for a billiard."""
    if E == 0:
        raise DomainError("characteristic length undefined at E = 0")
    if not S > 0 or not m > 0:
        raise DomainError("need S > 0 and m > 0")
    return S / math.sqrt(2 * m * abs(E))


def _potential_integral(orbit: PeriodicOrbit) -> float:
    if orbit.trace is not None:
        return trace_time_integral(orbit.trace, orbit.trace.potential)
    return orbit.potential_integral


def _require_closed(orbit: PeriodicOrbit, tol: float = 1e-6):
    if not (orbit.period > 0 and math.isfinite(orbit.period)):
        raise NotPeriodicError("orbit has no finite period")
    if orbit.closure_residual > tol:
        raise NotPeriodicError(f"orbit is not closed (residual {orbit.closure_residual:.2e})")


def virial_residual(orbit: PeriodicOrbit) -> float:
    """|int lambda V dt - 2 E T/(nu + 2)| / (|E| T) over one period."""
    _require_closed(orbit)
    nu = common_degree(orbit.spec)
    if nu == -2:
        raise SingularExponentError("virial identity is singular at nu = -2")
    W = _potential_integral(orbit)
    E, T = orbit.energy, orbit.period
    return abs(W - 2 * E * T / (nu + 2)) / (abs(E) * T)


def action_identity_residual(orbit: PeriodicOrbit) -> float:
    """Relative mismatch of S/2E = T - (1/E) int lambda V dt."""
    _require_closed(orbit)
    E, T, S = orbit.energy, orbit.period, orbit.action
    lhs = S / (2 * E)
    return abs(lhs - (T - _potential_integral(orbit) / E)) / abs(lhs)


def _central_diff(y: np.ndarray, dt: float) -> np.ndarray:
    # fourth-order central difference on interior samples
    return (-y[4:] + 8 * y[3:-1] - 8 * y[1:-3] + y[:-4]) / (12 * dt)


def eom_residual(orbit: PeriodicOrbit) -> float:
    """How well the trace satisfies Hamilton's equations of its own system.

    max of |dx/dt - p/m| / max|p/m| and |dp/dt + grad V| / max|grad V|, with
    time derivatives taken by fourth-order differences along the samples.
    """
    tr = orbit.trace
    if tr is None or len(tr) < 5:
        raise ContractError("orbit trace too short for an equations-of-motion check")
    if orbit.spec.domain.is_box:
        raise ContractError("equations-of-motion check does not apply across hard walls")
    spec = orbit.spec
    v = tr.p / spec.mass
    f = spec.force(tr.x)
    rx = np.max(np.abs(_central_diff(tr.x, tr.dt) - v[2:-2])) / max(np.max(np.abs(v)), 1e-300)
    fmax = np.max(np.abs(f))
    rp = np.max(np.abs(_central_diff(tr.p, tr.dt) - f[2:-2])) / fmax if fmax > 0 else 0.0
    return float(max(rx, rp))


def energy_residual(orbit: PeriodicOrbit) -> float:
    tr = orbit.trace
    return float(np.max(np.abs(tr.energy - orbit.energy)) / abs(orbit.energy))


def family_dsde(orbit: PeriodicOrbit, kind: str, h: float = 1e-5) -> dict:
    """dS/dE along the alpha family by central differences in alpha.

    Compared with S/2E for coupling scaling and ((nu+2)/2nu) S/E for the
    homogeneous family.
    """
    fn = {"coupling": scale_coupling, "homogeneous": scale_homogeneous}.get(kind)
    if fn is None:
        raise ContractError(f"unknown family kind {kind!r}")
    hi, lo = fn(orbit, 1 + h), fn(orbit, 1 - h)
    num = (hi.measured_S - lo.measured_S) / (hi.new_energy - lo.new_energy)
    S, E = orbit.action, orbit.energy
    if kind == "coupling":
        pred = S / (2 * E)
    else:
        nu = common_degree(orbit.spec)
        pred = (nu + 2) / (2 * nu) * S / E
    return {"dSdE": num, "predicted": pred, "residual": abs(num - pred) / abs(pred)}


# --------------------------------------------------------------------------
# coupling transmutation and level loci
# --------------------------------------------------------------------------

def transmute_length(lam: float, nu: float) -> float:
    """x0 = |lambda|^(-1/(nu+2)), in units with hbar^2 = 2m."""
    if nu == -2:
        raise SingularExponentError("coupling cannot be traded for a length at nu = -2")
    if lam == 0 or not math.isfinite(lam):
        raise DomainError("coupling must be nonzero and finite")
    return abs(lam) ** (-1.0 / (nu + 2))


@dataclass
class LociTable:
    kind: str
    rows: list

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def to_csv(self, path) -> Path:
        return write_rows(path, self.rows)


def level_loci(kind: str, n_max: int, coupling_grid: Sequence[float]) -> LociTable:
    """Levels against coupling in units hbar = 1, 2m = 1.

    oscillator: coupling lambda = varpi^2, levels n = 0..n_max-1, E_n = (n + 1/2) varpi
    coulomb: coupling lambda = e^2, levels n = 1..n_max, E_n = -lambda^2 / (4 n^2)

    Each row also carries E_n x0^2 with x0 from :func:`transmute_length`.
    """
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    grid = [float(c) for c in coupling_grid]
    if not grid or any(not c > 0 for c in grid):
        raise DomainError("couplings must be positive")
    rows = []
    for lam in grid:
        if kind == "oscillator":
            x0 = transmute_length(lam, 2)
            for n in range(n_max):
                E = (n + 0.5) * math.sqrt(lam)
                rows.append({"lambda": lam, "n": n, "E_n": E, "E_x0sq": E * x0 * x0})
        elif kind == "coulomb":
            x0 = transmute_length(lam, -1)
            for n in range(1, n_max + 1):
                E = -lam * lam / (4 * n * n)
                rows.append({"lambda": lam, "n": n, "E_n": E, "E_x0sq": E * x0 * x0})
        else:
            raise DomainError(f"unknown loci kind {kind!r}")
    return LociTable(kind, rows)
