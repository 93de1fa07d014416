"""Command-line front end.

Every subcommand is turned into a run configuration, validated against the
same schema as ``orbitscale run --config``, and executed by :func:`execute`.
Exit codes: 0 success, 1 a check failed its tolerance, 2 invalid
configuration (nothing written), 3 numerical or domain error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import orbits, oscillations, qspec, scaling
from .config import SCHEMA_VERSION, validate_run
from .dynamics import HamiltonianSpec
from .errors import ConfigError, OrbitScaleError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


# --------------------------------------------------------------------------
# run bookkeeping
# --------------------------------------------------------------------------

class Run:
    def __init__(self, out_dir, config: dict):
        self.out = Path(out_dir)
        self.config = config
        self.files: list = []
        self.values: dict = {}
        self.checks: list = []

    def path(self, name: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        if name not in self.files:
            self.files.append(name)
        return self.out / name

    def check(self, name: str, measured: float, predicted: float, tol: float,
              residual: Optional[float] = None):
        if residual is None:
            residual = abs(measured - predicted) / max(abs(predicted), 1e-300)
        self.checks.append({
            "name": name, "measured": _num(measured), "predicted": _num(predicted),
            "residual": _num(residual), "tol": tol, "pass": bool(residual <= tol),
        })

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def manifest(self) -> dict:
        files = []
        for name in self.files:
            data = (self.out / name).read_bytes()
            files.append({"name": name, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)})
        return {"schema": SCHEMA_VERSION, "config": self.config, "files": files,
                "values": self.values, "checks": self.checks}


def _num(v):
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def emit_report(manifest: dict) -> tuple:
    """Plain-text table of checks plus a JSON-ready twin."""
    checks = manifest.get("checks", []) if manifest else []
    rows = []
    lines = []
    if checks:
        lines.append(f"{'check':<32} {'measured':>22} {'predicted':>22} {'residual':>10}  result")
    for c in checks:
        verdict = "PASS" if c["pass"] else "FAIL"
        lines.append(f"{c['name']:<32} {_fmt(c['measured']):>22} {_fmt(c['predicted']):>22} "
                     f"{_fmt(c['residual'], 3):>10}  {verdict}")
        rows.append({**c, "result": verdict})
    return "\n".join(lines), {"rows": rows, "all_pass": all(r["pass"] for r in rows)}


def _fmt(v, digits=15):
    if isinstance(v, str):
        return v
    return f"{v:.{digits}g}"


def _dump(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _finish(run: Run) -> dict:
    text, twin = emit_report({"checks": run.checks})
    run.path("report.txt").write_text(text + "\n")
    _dump(run.path("report.json"), twin)
    man = run.manifest()
    _dump(run.out / "manifest.json", man)
    return man


# --------------------------------------------------------------------------
# tasks
# --------------------------------------------------------------------------

def _system(config) -> HamiltonianSpec:
    data = config.get("system")
    if data is None:
        raise ConfigError("this task needs a system block")
    return HamiltonianSpec.from_dict(data)


def _seed_orbit(spec: HamiltonianSpec, p: dict, trace: bool = True) -> orbits.PeriodicOrbit:
    if "energy" not in p:
        raise ConfigError("parameter 'energy' is required")
    E = float(p["energy"])
    if spec.dimension == 1:
        return orbits.find_orbit_1d(spec, E, x_center=p.get("x_center"), n_nodes=p.get("n_nodes", 200),
                                    n_steps=p.get("n_steps", 100_000), trace=trace)
    return orbits.circular_orbit(spec, E, n_steps=p.get("n_steps", 100_000))


def task_orbit(run: Run, p: dict):
    spec = _system(run.config)
    action = p.get("action", "find")
    orb = _seed_orbit(spec, p, trace=(action == "find"))
    inv = orbits.orbit_invariants(orb)
    lam = scaling.characteristic_length(orb.action, orb.energy, spec.mass)
    run.values.update({k: float(v) for k, v in inv.items()})
    run.values.update({"E": orb.energy, "Lambda": lam, "closure_residual": orb.closure_residual})
    orb.to_json(run.path("orbit.json"))
    if orb.trace is not None:
        orb.trace.to_csv(run.path("trace.csv"))
        run.check("closure", orb.closure_residual, 0.0, 1e-8, residual=orb.closure_residual)
    run.check("R = S - E T", orb.time_action, orb.action - orb.energy * orb.period, 1e-12)
    if spec.dimension == 1 and all(t.homogeneous for t in spec.terms) and spec.terms:
        res = scaling.virial_residual(orb)
        run.check("virial", res, 0.0, 1e-8, residual=res)


def task_scale(run: Run, p: dict):
    spec = _system(run.config)
    orb = _seed_orbit(spec, p)
    alpha = float(p.get("alpha", 2.0))
    kind = p.get("kind", "coupling")
    if kind == "coupling":
        res = scaling.scale_coupling(orb, alpha)
    elif kind == "homogeneous":
        res = scaling.scale_homogeneous(orb, alpha)
    else:
        res = scaling.scale_mixed(orb, alpha, anchor_index=p.get("anchor_index", 0))
    res.to_csv(run.path("scaling.csv"))
    res.transformed.trace.to_csv(run.path("trace_scaled.csv"))
    run.values.update({"alpha": alpha, "kind": kind, "E_new": res.new_energy,
                       "couplings_new": [float(c) for c in res.new_couplings]})
    run.check("T scaled", res.measured_T, res.predicted_T, 1e-10)
    run.check("S scaled", res.measured_S, res.predicted_S, 1e-10)
    if not res.transformed.spec.domain.is_box:
        e = scaling.eom_residual(res.transformed)
        run.check("equations of motion", e, 0.0, 1e-8, residual=e)


def _spectrum_from_params(run: Run, p: dict) -> qspec.SpectrumResult:
    solver = p.get("solver", "analytic")
    count = p.get("count", 20)
    if solver == "analytic":
        if "kind" not in p:
            raise ConfigError("analytic spectrum needs 'kind'")
        sysd = run.config.get("system") or {}
        return qspec.analytic_spectrum(p["kind"], p.get("params", {}), count,
                                       mass=sysd.get("mass", 0.5), hbar=sysd.get("hbar", 1.0),
                                       first=p.get("first", 1))
    spec = _system(run.config)
    return qspec.fd_spectrum_1d(spec, p.get("interval"), p.get("grid_n", max(4000, 8 * count)), count)


def task_spectrum(run: Run, p: dict):
    sp = _spectrum_from_params(run, p)
    sp.to_csv(run.path("spectrum.csv"))
    run.values.update({"count": sp.count, "solver": sp.solver, "E_first": float(sp.levels[0]),
                       "E_last": float(sp.levels[-1])})
    if sp.est_error is not None:
        run.values["max_est_error"] = float(np.max(sp.est_error))


def _spectrum_for_system(spec: HamiltonianSpec, count: int) -> tuple:
    """Analytic levels for the model systems, finite differences otherwise."""
    dom = spec.domain
    if not spec.terms and dom.is_box:
        params = {"a": dom.upper[0] - dom.lower[0]}
        if spec.dimension == 2:
            params["b"] = dom.upper[1] - dom.lower[1]
        return qspec.analytic_spectrum("box", params, count, spec.mass, spec.hbar), "box", params
    if len(spec.terms) == 1 and spec.terms[0].name == "coulomb":
        params = {"e2": spec.terms[0].coupling}
        return qspec.analytic_spectrum("coulomb", params, count, spec.mass, spec.hbar), "coulomb", params
    if (spec.dimension == 1 and len(spec.terms) == 1 and spec.terms[0].name == "power"
            and spec.terms[0].degree == 2 and not dom.is_box):
        params = {"omega": math.sqrt(2 * spec.terms[0].coupling / spec.mass)}
        return qspec.analytic_spectrum("oscillator", params, count, spec.mass, spec.hbar), "oscillator", params
    return qspec.fd_spectrum_1d(spec, None, max(4000, 8 * count), count), "fd", {}


def _catalog_for(spec, kind, params, vmap, n_rep=5):
    if kind == "box":
        return orbits.rectangle_orbit_lengths(params["a"], params.get("b"), n_max=n_rep, mass=spec.mass)
    if vmap.kind in ("homogeneous", "gamma_field"):
        base = _seed_orbit(spec, {"energy": vmap.E0}, trace=spec.dimension > 1)
        lam = scaling.characteristic_length(base.action, base.energy, spec.mass)
        return orbits.OrbitCatalog([
            orbits.CatalogEntry(f"k={k}", k * lam, spec.mass, "orbit", base.energy, k * base.action,
                                k * base.period, repetition=k)
            for k in range(1, n_rep + 1)])
    return None


def task_oscillate(run: Run, p: dict):
    spec = _system(run.config) if run.config.get("system") else None
    if "spectrum" in p:
        sp = _spectrum_from_params(run, p["spectrum"])
        kind, params = p["spectrum"].get("kind", "fd"), p["spectrum"].get("params", {})
    else:
        if spec is None:
            raise ConfigError("oscillate needs a system or a spectrum block")
        sp, kind, params = _spectrum_for_system(spec, p.get("levels", 2000))
    md = p.get("map", {"kind": "omega"})
    vmap = oscillations.ScaledVariableMap(md["kind"], md.get("nu"), md.get("E0"))
    osc = oscillations.oscillatory_dos(sp, vmap, p.get("sigma"), p.get("detrend_degree", 3), p.get("grid_n"))
    oscillations.recurrence_spectrum(osc, p.get("window", "hann"))
    tol = p.get("tol", 2 * osc.bin_width)
    catalog = None
    if "catalog" in p:
        c = p["catalog"]
        catalog = orbits.rectangle_orbit_lengths(c["a"], c.get("b"), c.get("n_max", 5), mass=sp.mass)
    elif spec is not None and vmap.kind != "raw_energy":
        catalog = _catalog_for(spec, kind, params, vmap)
    report = oscillations.match_orbits(osc, catalog, tol) if catalog is not None else None
    osc.to_csv_signal(run.path("delta_rho.csv"))
    osc.to_csv_peaks(run.path("peaks.csv"), report)
    if catalog is not None:
        catalog.to_csv(run.path("catalog.csv"))
    run.values.update({"levels": sp.count, "sigma": osc.sigma, "bin_width": osc.bin_width,
                       "n_peaks": len(osc.peaks)})
    if report is not None:
        seen = set()
        for r in report.matched:
            if r["matched_label"] in seen:
                continue
            seen.add(r["matched_label"])
            run.check(f"peak {r['matched_label']}", r["frequency"], r["predicted"],
                      osc.bin_width / r["predicted"], residual=r["rel_error"])


def task_loci(run: Run, p: dict):
    table = scaling.level_loci(p.get("kind", "oscillator"), p.get("n_max", 10),
                               p.get("couplings", [0.5, 1.0, 2.0]))
    table.to_csv(run.path("loci.csv"))
    scaled = table.column("E_x0sq")
    n = table.column("n")
    if table.kind == "oscillator":
        spread = float(np.max(np.abs(scaled - (n + 0.5))))
        run.check("E_n x0^2 = n + 1/2", spread, 0.0, 1e-14, residual=spread)
    else:
        c = scaled * n * n
        spread = float((np.max(c) - np.min(c)) / abs(np.mean(c)))
        run.check("n^2 E_n x0^2 constant", spread, 0.0, 1e-12, residual=spread)


def task_check(run: Run, p: dict):
    spec = _system(run.config)
    which = p.get("check", "virial")
    if which == "virial":
        orb = _seed_orbit(spec, p)
        res = scaling.virial_residual(orb)
        run.values["virial_residual"] = res
        run.check("virial", res, 0.0, p.get("tol", 1e-8), residual=res)
    elif which == "dsde":
        out = orbits.ds_de_check(spec, float(p["energy"]), float(p.get("delta", 1e-4)),
                                 x_center=p.get("x_center"))
        run.values.update(out)
        run.check("dS/dE vs T", out["dSdE"], out["T"], p.get("tol", 1e-6), residual=out["residual"])
    else:
        orb = _seed_orbit(spec, p)
        res = scaling.scale_coupling(orb, float(p.get("alpha", 2.0)))
        res.to_csv(run.path("scaling.csv"))
        tol = p.get("tol", 1e-10)
        run.check("T scaled", res.measured_T, res.predicted_T, tol)
        run.check("S scaled", res.measured_S, res.predicted_S, tol)


TASKS = {
    "orbit": task_orbit, "scale": task_scale, "spectrum": task_spectrum,
    "oscillate": task_oscillate, "loci": task_loci, "check": task_check,
}


def execute(config: dict) -> tuple:
    """Validate and run one configuration. Returns (exit code, manifest or None)."""
    try:
        validate_run(config)
        if config.get("system") is not None:
            HamiltonianSpec.from_dict(config["system"])
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG, None
    except OrbitScaleError as exc:
        print(f"error: invalid system: {exc}", file=sys.stderr)
        return EXIT_CONFIG, None
    run = Run(config["output_dir"], config)
    try:
        TASKS[config["task"]](run, config.get("params", {}))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG, None
    except OrbitScaleError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC, None
    man = _finish(run)
    text, _ = emit_report(man)
    if text:
        print(text)
    for k, v in sorted(run.values.items()):
        print(f"{k} = {v}")
    if config["task"] == "check" and not run.passed:
        return EXIT_FAIL, man
    return EXIT_OK, man


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, system: bool = True):
    if system:
        p.add_argument("--system", required=True, help="system JSON file")
    p.add_argument("--out", default="orbitscale_out", help="output directory")
    p.add_argument("--tol", type=float, help="tolerance for pass/fail checks")


def _orbit_args(p):
    p.add_argument("--energy", type=float, required=True)
    p.add_argument("--x-center", type=float)
    p.add_argument("--n-nodes", type=int)
    p.add_argument("--n-steps", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="orbitscale", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    orb = sub.add_parser("orbit", help="find a periodic orbit").add_subparsers(dest="sub", required=True)
    for name in ("find", "invariants"):
        p = orb.add_parser(name)
        _common(p)
        _orbit_args(p)

    sc = sub.add_parser("scale", help="scale an orbit").add_subparsers(dest="sub", required=True)
    for name in ("coupling", "homogeneous", "mixed"):
        p = sc.add_parser(name)
        _common(p)
        _orbit_args(p)
        p.add_argument("--alpha", type=float, required=True)
        if name == "mixed":
            p.add_argument("--anchor-index", type=int, default=0)

    spc = sub.add_parser("spectrum", help="quantum levels").add_subparsers(dest="sub", required=True)
    p = spc.add_parser("analytic")
    _common(p, system=False)
    p.add_argument("--kind", choices=["box", "oscillator", "coulomb"], required=True)
    p.add_argument("--param", action="append", default=[], metavar="NAME=VALUE")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--first", type=int, default=1)
    p = spc.add_parser("fd")
    _common(p)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--grid-n", type=int)
    p.add_argument("--interval", type=float, nargs=2)

    p = sub.add_parser("oscillate", help="recurrence spectrum of the level density")
    _common(p)
    p.add_argument("--map", choices=["omega", "homogeneous", "gamma_field", "raw_energy"], default="omega")
    p.add_argument("--nu", type=float)
    p.add_argument("--E0", type=float)
    p.add_argument("--levels", type=int, default=2000)
    p.add_argument("--sigma", type=float)
    p.add_argument("--detrend-degree", type=int)
    p.add_argument("--grid-n", type=int)
    p.add_argument("--window", choices=["hann", "rect"])

    p = sub.add_parser("loci", help="level loci against coupling")
    _common(p, system=False)
    p.add_argument("--kind", choices=["oscillator", "coulomb"], default="oscillator")
    p.add_argument("--n-max", type=int, default=10)
    p.add_argument("--couplings", type=lambda s: [float(v) for v in s.split(",")], default=None)

    chk = sub.add_parser("check", help="identity checks").add_subparsers(dest="sub", required=True)
    for name in ("virial", "dsde", "scaling"):
        p = chk.add_parser(name)
        _common(p)
        _orbit_args(p)
        if name == "dsde":
            p.add_argument("--delta", type=float, default=1e-4)
        if name == "scaling":
            p.add_argument("--alpha", type=float, default=2.0)

    p = sub.add_parser("run", help="execute a JSON run configuration")
    p.add_argument("--config", required=True)
    return ap


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None


def _drop_none(d: dict) -> dict:
    return {k: v for k, v in d.items() if v is not None}


def config_from_args(args) -> dict:
    if args.cmd == "run":
        return _load_json(args.config)
    cfg = {"schema": SCHEMA_VERSION, "output_dir": args.out}
    if getattr(args, "system", None):
        cfg["system"] = _load_json(args.system)
    orbit_params = _drop_none({
        "energy": getattr(args, "energy", None), "x_center": getattr(args, "x_center", None),
        "n_nodes": getattr(args, "n_nodes", None), "n_steps": getattr(args, "n_steps", None),
    })
    if args.cmd == "orbit":
        cfg.update(task="orbit", params={**orbit_params, "action": args.sub})
    elif args.cmd == "scale":
        params = {**orbit_params, "alpha": args.alpha, "kind": args.sub}
        if args.sub == "mixed":
            params["anchor_index"] = args.anchor_index
        cfg.update(task="scale", params=params)
    elif args.cmd == "spectrum":
        if args.sub == "analytic":
            params = {}
            for item in args.param:
                name, _, val = item.partition("=")
                try:
                    params[name] = float(val)
                except ValueError:
                    raise ConfigError(f"bad --param {item!r}; expected NAME=VALUE") from None
            cfg.update(task="spectrum", params={"solver": "analytic", "kind": args.kind, "params": params,
                                                "count": args.count, "first": args.first})
        else:
            cfg.update(task="spectrum", params=_drop_none({
                "solver": "fd", "count": args.count, "grid_n": args.grid_n,
                "interval": args.interval}))
    elif args.cmd == "oscillate":
        cfg.update(task="oscillate", params=_drop_none({
            "map": _drop_none({"kind": args.map, "nu": args.nu, "E0": args.E0}),
            "levels": args.levels, "sigma": args.sigma, "detrend_degree": args.detrend_degree,
            "grid_n": args.grid_n, "window": args.window, "tol": args.tol}))
    elif args.cmd == "loci":
        cfg.update(task="loci", params=_drop_none({"kind": args.kind, "n_max": args.n_max,
                                                   "couplings": args.couplings}))
    elif args.cmd == "check":
        params = {**orbit_params, "check": args.sub}
        if args.sub == "dsde":
            params["delta"] = args.delta
        if args.sub == "scaling":
            params["alpha"] = args.alpha
        if args.tol is not None:
            params["tol"] = args.tol
        cfg.update(task="check", params=params)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code, _ = execute(cfg)
    return code


if __name__ == "__main__":
    sys.exit(main())
