import json
import subprocess
import sys

import pytest

from orbitscale.cli import emit_report, execute, main

QUARTIC = {"mass": 1.0, "terms": [{"shape": "power", "coupling": 1.0, "degree": 4}]}
OSC = {"mass": 1.0, "terms": [{"shape": "power", "coupling": 0.5, "degree": 2}]}
BOX = {"terms": [], "domain": {"kind": "box", "lower": [0.0], "upper": [1.0]}}


def _write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def _cfg(tmp_path, task, params, system=QUARTIC, out="out"):
    cfg = {"schema": 1, "task": task, "params": params, "output_dir": str(tmp_path / out)}
    if system is not None:
        cfg["system"] = system
    return cfg


def test_check_virial_cli(tmp_path, capsys):
    sys_path = _write(tmp_path, "quartic.json", QUARTIC)
    code = main(["check", "virial", "--system", sys_path, "--energy", "1.0", "--out", str(tmp_path / "o")])
    assert code == 0
    out = capsys.readouterr().out
    line = [ln for ln in out.splitlines() if ln.startswith("virial_residual")][0]
    assert float(line.split("=")[1]) < 1e-8


def test_oscillate_box_cli(tmp_path):
    sys_path = _write(tmp_path, "box.json", BOX)
    out = tmp_path / "o"
    code = main(["oscillate", "--system", sys_path, "--map", "omega", "--levels", "2000", "--out", str(out)])
    assert code == 0
    lines = (out / "peaks.csv").read_text().splitlines()
    assert lines[0] == "frequency,amplitude,matched_label,predicted,rel_error"
    report = (out / "report.txt").read_text()
    assert "peak k=1" in report and "PASS" in report and "FAIL" not in report


def test_malformed_json_writes_nothing(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    out = tmp_path / "o"
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["check", "virial", "--system", str(bad), "--energy", "1", "--out", str(out)]) == 2
    assert not out.exists()


@pytest.mark.parametrize("mutate", [
    lambda c: c.update(extra=1),
    lambda c: c.update(schema=2),
    lambda c: c["params"].update(energy="high"),
    lambda c: c["params"].update(unknown=1),
    lambda c: c["system"].update(mass=-1.0),
    lambda c: c.update(task="plot"),
])
def test_schema_violations(tmp_path, mutate, capsys):
    cfg = _cfg(tmp_path, "check", {"check": "virial", "energy": 1.0}, system=dict(QUARTIC))
    mutate(cfg)
    code, man = execute(cfg)
    assert code == 2 and man is None
    assert not (tmp_path / "out").exists()
    assert "error" in capsys.readouterr().err


def test_numeric_error_exit_3(tmp_path, capsys):
    code, _ = execute(_cfg(tmp_path, "orbit", {"energy": -1.0}))
    assert code == 3
    assert "OrbitStructureError" in capsys.readouterr().err


def test_failed_check_exit_1(tmp_path):
    code, man = execute(_cfg(tmp_path, "check", {"check": "dsde", "energy": 1.0, "delta": 0.3, "tol": 1e-12}))
    assert code == 1
    assert man["checks"][0]["pass"] is False


def test_repeated_runs_byte_identical(tmp_path):
    cfg_a = _cfg(tmp_path, "scale", {"energy": 1.0, "alpha": 2.0, "kind": "coupling", "n_steps": 5000}, out="a")
    cfg_b = dict(cfg_a, output_dir=cfg_a["output_dir"])
    execute(cfg_a)
    first = {p.name: p.read_bytes() for p in (tmp_path / "a").iterdir()}
    execute(cfg_b)
    second = {p.name: p.read_bytes() for p in (tmp_path / "a").iterdir()}
    assert first == second


def test_manifest_lists_files(tmp_path):
    code, man = execute(_cfg(tmp_path, "orbit", {"energy": 1.0, "n_steps": 2000}))
    assert code == 0
    names = {f["name"] for f in man["files"]}
    assert {"orbit.json", "trace.csv", "report.txt", "report.json"} <= names
    on_disk = {p.name for p in (tmp_path / "out").iterdir()}
    assert on_disk == names | {"manifest.json"}
    assert man["values"]["T"] == pytest.approx(3.7081493546027438, rel=1e-10)
    for name in names - {"orbit.json", "report.json", "report.txt"}:
        assert (tmp_path / "out" / name).read_text().splitlines()[0]


def test_dsde_report_row(tmp_path):
    code, man = execute(_cfg(tmp_path, "check", {"check": "dsde", "energy": 1.0}, system=OSC))
    assert code == 0
    text, twin = emit_report(man)
    row = [ln for ln in text.splitlines() if ln.startswith("dS/dE vs T")][0]
    assert row.endswith("PASS")
    assert twin["rows"][0]["residual"] < 1e-12


def test_emit_report_empty():
    text, twin = emit_report({})
    assert text == "" and twin == {"rows": [], "all_pass": True}


def test_loci_and_spectrum(tmp_path):
    code, man = execute(_cfg(tmp_path, "loci", {"kind": "coulomb", "n_max": 4}, system=None))
    assert code == 0 and man["checks"][0]["pass"]
    code, man = execute(_cfg(tmp_path, "spectrum", {"solver": "analytic", "kind": "oscillator",
                                                    "params": {"omega": 1.0}, "count": 3}, system=None, out="s"))
    assert code == 0
    assert (tmp_path / "s" / "spectrum.csv").read_text().splitlines()[1] == "1,0.5,"


def test_fd_spectrum_cli(tmp_path):
    sys_path = _write(tmp_path, "box.json", BOX)
    assert main(["spectrum", "fd", "--system", sys_path, "--count", "5", "--grid-n", "400",
                 "--out", str(tmp_path / "o")]) == 0


@pytest.mark.parametrize("sub", ["coupling", "homogeneous", "mixed"])
def test_scale_subcommands(tmp_path, sub):
    sys_path = _write(tmp_path, "q.json", QUARTIC)
    assert main(["scale", sub, "--system", sys_path, "--energy", "1", "--alpha", "1.5",
                 "--n-steps", "5000", "--out", str(tmp_path / "o")]) == 0


def test_coulomb_oscillate_config(tmp_path):
    cfg = _cfg(tmp_path, "oscillate", {"levels": 500, "map": {"kind": "homogeneous", "nu": -1, "E0": -0.25}},
               system={"terms": [{"shape": "coulomb", "coupling": 1.0}]})
    code, man = execute(cfg)
    assert code == 0
    assert any(c["name"] == "peak k=1" and c["pass"] for c in man["checks"])


def test_console_script_entry(tmp_path):
    r = subprocess.run([sys.executable, "-m", "orbitscale.cli", "loci", "--out", str(tmp_path / "o")],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert "PASS" in r.stdout
