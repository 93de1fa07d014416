import math

import numpy as np
import pytest

from orbitscale import (
    OrbitCatalog,
    ScaledVariableMap,
    analytic_spectrum,
    box_spec,
    find_orbit_1d,
    local_energy_period,
    map_variable,
    match_orbits,
    oscillatory_dos,
    recurrence_spectrum,
    rectangle_orbit_lengths,
    SpectrumResult,
)
from orbitscale.errors import (
    ContractError,
    DomainError,
    InsufficientDataError,
    MapError,
    ResolutionError,
)
from orbitscale.oscillations import Peak, RecurrencePeaks, energy_ratio_from_gamma, gamma_to_s

import oracles

OMEGA = ScaledVariableMap("omega")
RAW = ScaledVariableMap("raw_energy")


@pytest.mark.parametrize("E, vmap, s", [
    (4.0, OMEGA, 2.0),
    (-4.0, ScaledVariableMap("homogeneous", nu=-1, E0=-1.0), 0.5),
    (4.0, ScaledVariableMap("homogeneous", nu=2, E0=1.0), 4.0),
    (3.5, RAW, 3.5),
])
def test_map_examples(E, vmap, s):
    assert map_variable(E, vmap) == pytest.approx(s, rel=1e-15)


def test_gamma_examples():
    assert gamma_to_s(8.0) == pytest.approx(0.5, rel=1e-15)
    assert energy_ratio_from_gamma(8.0) == pytest.approx(4.0, rel=1e-15)
    # along the family the energy-based gamma map agrees with the field-based one
    vmap = ScaledVariableMap("gamma_field", E0=-1.0)
    assert map_variable(-4.0, vmap) == pytest.approx(gamma_to_s(8.0), rel=1e-15)


@pytest.mark.parametrize("E, vmap", [
    (-1.0, OMEGA),
    (0.0, OMEGA),
    (1.0, ScaledVariableMap("homogeneous", nu=-1, E0=-1.0)),
])
def test_map_domain(E, vmap):
    with pytest.raises(DomainError):
        map_variable(E, vmap)


def test_map_construction_errors():
    with pytest.raises(MapError):
        ScaledVariableMap("homogeneous", nu=-2, E0=1.0)
    with pytest.raises(DomainError):
        ScaledVariableMap("homogeneous", nu=2)
    with pytest.raises(DomainError):
        ScaledVariableMap("log")
    with pytest.raises(DomainError):
        gamma_to_s(0.0)


def test_non_monotone_map():
    levels = np.linspace(-3, 3, 60)
    vmap = ScaledVariableMap("homogeneous", nu=2, E0=1.0)
    # mixed signs never reach the monotonicity check: the map is undefined
    with pytest.raises(DomainError):
        oscillatory_dos(SpectrumResult(levels, "analytic"), vmap)
    from orbitscale.oscillations import _check_monotone
    with pytest.raises(MapError):
        _check_monotone(np.array([0.0, 1.0, 0.5]), np.array([1.0, 2.0, 3.0]))


@pytest.mark.parametrize("n", [0, 1, 49])
def test_insufficient_levels(n):
    if n == 0:
        with pytest.raises((InsufficientDataError, ContractError)):
            oscillatory_dos(SpectrumResult(np.array([]), "analytic"), RAW)
        return
    with pytest.raises(InsufficientDataError):
        oscillatory_dos(analytic_spectrum("box", {"a": 1.0}, n), OMEGA)


def test_box_zero_mean():
    o = oscillatory_dos(analytic_spectrum("box", {"a": 1.0}, 2000), OMEGA, detrend_degree=1)
    amp = np.max(np.abs(o.delta_rho))
    assert abs(np.mean(o.delta_rho)) < 1e-3 * amp
    step = np.diff(o.s_grid)
    np.testing.assert_allclose(step, step[0], rtol=1e-9)


def test_oscillator_poisson_oracle():
    spec = analytic_spectrum("oscillator", {"omega": 1.0}, 400)
    sigma = 0.3
    o = oscillatory_dos(spec, RAW, sigma=sigma)
    ref = oracles.poisson_comb(o.s_grid, 1.0, sigma, 0.5)
    inner = (o.s_grid > 40) & (o.s_grid < 360)
    assert np.max(np.abs(o.delta_rho - ref)[inner]) < 5e-3 * np.max(np.abs(ref))
    r = recurrence_spectrum(o)
    top = r.strongest()
    # single dominant sinusoid at 2 pi / (hbar varpi)
    assert top.frequency == pytest.approx(2 * math.pi, abs=r.bin_width)
    others = [p.amplitude for p in r.peaks if p is not top]
    assert max(others) < 0.01 * top.amplitude
    assert top.amplitude == pytest.approx(2 * math.exp(-2 * math.pi ** 2 * sigma ** 2), rel=1e-3)


def test_oscillator_local_period_matches_orbit():
    orb = find_orbit_1d(__import__("orbitscale").oscillator_spec(1.0), 3.0, trace=False)
    P = local_energy_period(orb)
    assert P == pytest.approx(1.0, rel=1e-12)
    o = recurrence_spectrum(oscillatory_dos(analytic_spectrum("oscillator", {"omega": 1.0}, 200), RAW))
    assert o.strongest().frequency == pytest.approx(2 * math.pi / P, abs=o.bin_width)


def test_box_peaks_at_lengths():
    o = recurrence_spectrum(oscillatory_dos(analytic_spectrum("box", {"a": 1.0}, 2000), OMEGA))
    freqs = [p.frequency for p in o.peaks if p.frequency < 7]
    assert len(freqs) == 3
    np.testing.assert_allclose(freqs, [2, 4, 6], atol=2 * math.pi / o.s_range)


def test_box_rigidity_across_windows():
    full = analytic_spectrum("box", {"a": 1.0}, 4000)
    lows = recurrence_spectrum(oscillatory_dos(full.window(0, 1000), OMEGA))
    highs = recurrence_spectrum(oscillatory_dos(full.window(3000, 4000), OMEGA))
    # energy centres differ by far more than 4x
    a = lows.strongest(1, 3).frequency
    b = highs.strongest(1, 3).frequency
    assert abs(a - b) < lows.bin_width
    assert a == pytest.approx(2.0, abs=lows.bin_width)


def test_rectangle_matched_to_catalog():
    a, b = 3.0, 4.0
    o = recurrence_spectrum(oscillatory_dos(analytic_spectrum("box", {"a": a, "b": b}, 5000), OMEGA))
    cat = rectangle_orbit_lengths(a, b, 3)
    rep = match_orbits(o, cat, tol=o.bin_width)
    for label, L in (("(1,0)", 6.0), ("(0,1)", 8.0), ("(1,1)", 10.0)):
        row = rep.for_label(label)
        assert abs(row["frequency"] - L) <= o.bin_width


def test_coulomb_homogeneous_peak():
    spec = analytic_spectrum("coulomb", {"e2": 1.0}, 500)
    vmap = ScaledVariableMap("homogeneous", nu=-1, E0=-1.0)
    r = recurrence_spectrum(oscillatory_dos(spec, vmap))
    # Bohr-Sommerfeld comb in s = |E|^(-1/2)
    f_bs = oracles.bohr_sommerfeld_frequency(spec.levels, vmap)
    assert f_bs == pytest.approx(math.pi, rel=1e-12)
    assert r.strongest().frequency == pytest.approx(f_bs, abs=r.bin_width)


def test_gamma_fixed_but_raw_drifts():
    # scaled-Kepler comb: fixed peak in Gamma^(-1/3), drifting local period in E
    spec = analytic_spectrum("coulomb", {"e2": 1.0}, 600)
    g = ScaledVariableMap("gamma_field", E0=-1.0)
    f = []
    for lo in (0, 300):
        r = recurrence_spectrum(oscillatory_dos(spec.window(lo, lo + 300), g))
        f.append((r.strongest().frequency, r.bin_width))
    assert abs(f[0][0] - f[1][0]) < max(f[0][1], f[1][1])
    raw = []
    for lo in (100, 400):
        w = spec.window(lo, lo + 60)
        r = recurrence_spectrum(oscillatory_dos(w, RAW))
        raw.append(r.strongest().frequency)
    assert raw[1] / raw[0] > 2


def test_parseval_stable():
    spec = analytic_spectrum("box", {"a": 1.0}, 500)
    a = oscillatory_dos(spec, OMEGA)
    b = oscillatory_dos(spec, OMEGA, grid_n=2 * a.s_grid.size - 1)
    pa = np.sum(a.delta_rho ** 2) * (a.s_grid[1] - a.s_grid[0])
    pb = np.sum(b.delta_rho ** 2) * (b.s_grid[1] - b.s_grid[0])
    assert math.isfinite(pa)
    assert abs(pb / pa - 1) < 0.1


def test_coarse_grid_rejected():
    with pytest.raises(ResolutionError):
        oscillatory_dos(analytic_spectrum("box", {"a": 1.0}, 100), OMEGA, grid_n=100)


def test_short_window_rejected():
    o = oscillatory_dos(analytic_spectrum("box", {"a": 1.0}, 60), OMEGA)
    with pytest.raises(ResolutionError):
        recurrence_spectrum(o, expected=2 * math.pi / (2 * o.s_range))


def test_bad_window_name():
    o = oscillatory_dos(analytic_spectrum("box", {"a": 1.0}, 60), OMEGA)
    with pytest.raises(ContractError):
        recurrence_spectrum(o, window="kaiser")


@pytest.mark.parametrize("window", ["hann", "rect"])
def test_peaks_sorted_nonnegative(window):
    o = recurrence_spectrum(oscillatory_dos(analytic_spectrum("box", {"a": 1.0}, 800), OMEGA), window=window)
    f = [p.frequency for p in o.peaks]
    assert f == sorted(f)
    assert all(p.amplitude >= 0 for p in o.peaks)


def _fake_peaks(freqs):
    grid = np.linspace(0, 10, 64)
    o = RecurrencePeaks(grid, np.zeros(64), OMEGA, 0.1, 0.5, 1.0)
    o.peaks = [Peak(f, 1.0, 0.0) for f in freqs]
    return o


def test_match_exact():
    rep = match_orbits(_fake_peaks([2.0]), rectangle_orbit_lengths(1.0, None, 1), tol=0.05)
    assert len(rep.matched) == 1
    assert rep.rows[0]["rel_error"] == 0.0


def test_match_unmatched():
    rep = match_orbits(_fake_peaks([2.0, 3.7]), rectangle_orbit_lengths(1.0, None, 2), tol=0.1)
    assert [r["frequency"] for r in rep.unmatched] == [3.7]


def test_match_empty_is_valid():
    rep = match_orbits(_fake_peaks([]), rectangle_orbit_lengths(1.0, None, 2), tol=0.1)
    assert rep.rows == []


def test_raw_energy_prediction_is_local():
    o = _fake_peaks([1.0])
    o.vmap = RAW
    with pytest.raises(ContractError):
        match_orbits(o, rectangle_orbit_lengths(1.0, None, 1), tol=0.1)


def test_local_period_box():
    E = math.pi ** 2
    orb = find_orbit_1d(box_spec(1.0), E, trace=False)
    # T = S / 2E for a billiard
    assert orb.period == pytest.approx(orb.action / (2 * E), rel=1e-14)
    assert local_energy_period(orb) == pytest.approx(2 * math.pi * 2 * E / orb.action, rel=1e-14)


def test_local_period_decreases_with_T():
    from orbitscale import power_spec
    spec = power_spec(1.0, 1.0)  # T grows with E for nu < 2
    P = [local_energy_period(find_orbit_1d(spec, E, trace=False)) for E in (1.0, 2.0, 4.0, 8.0)]
    assert all(a > b for a, b in zip(P, P[1:]))


def test_csv_exports(tmp_path):
    o = recurrence_spectrum(oscillatory_dos(analytic_spectrum("box", {"a": 1.0}, 200), OMEGA))
    sig = o.to_csv_signal(tmp_path / "sig.csv").read_text().splitlines()
    assert sig[0] == "s,delta_rho" and len(sig) == o.s_grid.size + 1
    rep = match_orbits(o, rectangle_orbit_lengths(1.0, None, 3), tol=o.bin_width)
    pk = o.to_csv_peaks(tmp_path / "pk.csv", rep).read_text().splitlines()
    assert pk[0] == "frequency,amplitude,matched_label,predicted,rel_error"
    assert "k=1" in pk[1]
