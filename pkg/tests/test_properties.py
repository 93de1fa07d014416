import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from orbitscale import (
    PhaseState,
    analytic_spectrum,
    box_spec,
    characteristic_length,
    integrate,
    power_term,
    scale_coupling,
    scale_homogeneous,
    transmute_length,
)
from orbitscale.dynamics import check_term
from orbitscale.orbits import ds_de_check

FIXTURE_OK = [HealthCheck.function_scoped_fixture]

alphas = st.floats(0.3, 3.0)


@settings(max_examples=40, deadline=None)
@given(nu=st.floats(0.5, 6.0), beta=st.floats(0.1, 5.0), x=st.floats(0.05, 3.0))
def test_power_term_homogeneity(nu, beta, x):
    t = power_term(1.0, nu)
    lhs = t.value(np.array([[beta * x]]))
    rhs = beta ** nu * t.value(np.array([[x]]))
    assert lhs == pytest.approx(rhs, rel=1e-12)


@settings(max_examples=10, deadline=None)
@given(nu=st.sampled_from([-1.0, 1.5, 2.0, 4.0]))
def test_builtin_terms_pass_self_check(nu):
    for d in (1, 3):
        check_term(power_term(0.7, nu), d)


@settings(max_examples=25, deadline=None, suppress_health_check=FIXTURE_OK)
@given(a=alphas, b=alphas)
def test_coupling_group_law(quartic_orbit, a, b):
    two = scale_coupling(scale_coupling(quartic_orbit, a).transformed, b).transformed
    one = scale_coupling(quartic_orbit, a * b).transformed
    for k in ("period", "action", "energy"):
        assert getattr(two, k) == pytest.approx(getattr(one, k), rel=1e-12)


@settings(max_examples=25, deadline=None, suppress_health_check=FIXTURE_OK)
@given(a=alphas, b=alphas)
def test_homogeneous_group_law(quartic_orbit, a, b):
    two = scale_homogeneous(scale_homogeneous(quartic_orbit, a).transformed, b).transformed
    one = scale_homogeneous(quartic_orbit, a * b).transformed
    for k in ("period", "action", "energy"):
        assert getattr(two, k) == pytest.approx(getattr(one, k), rel=1e-12)


@settings(max_examples=25, deadline=None, suppress_health_check=FIXTURE_OK)
@given(a=st.floats(0.05, 20.0))
def test_lambda_coupling_invariant(osc_orbit, a):
    r = scale_coupling(osc_orbit, a)
    m = osc_orbit.spec.mass
    assert characteristic_length(r.measured_S, r.new_energy, m) == pytest.approx(
        characteristic_length(osc_orbit.action, osc_orbit.energy, m), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(S=st.floats(1e-3, 1e3), E=st.floats(1e-3, 1e3), m=st.floats(0.1, 10), a=st.floats(0.1, 10))
def test_lambda_algebraic_invariance(S, E, m, a):
    assert characteristic_length(a * S, a * a * E, m) == pytest.approx(characteristic_length(S, E, m), rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(x0=st.floats(0.05, 0.95), p0=st.floats(-5, 5).filter(lambda v: abs(v) > 0.1))
def test_wall_reflection_preserves_speed(x0, p0):
    tr = integrate(box_spec(1.0), PhaseState([x0], [p0]), 1e-3, 3000)
    np.testing.assert_allclose(np.abs(tr.p[:, 0]), abs(p0), rtol=1e-14)
    assert np.all((tr.x >= 0) & (tr.x <= 1))


@settings(max_examples=20, deadline=None)
@given(kind=st.sampled_from(["box", "oscillator", "coulomb"]), count=st.integers(1, 200),
       scale=st.floats(0.2, 5.0))
def test_analytic_levels_strictly_increasing(kind, count, scale):
    key = {"box": "a", "oscillator": "omega", "coulomb": "e2"}[kind]
    lv = analytic_spectrum(kind, {key: scale}, count).levels
    assert np.all(np.diff(lv) > 0)


@settings(max_examples=20, deadline=None)
@given(a=st.floats(0.2, 5.0), b=st.floats(0.2, 5.0))
def test_rectangle_levels_sorted(a, b):
    lv = analytic_spectrum("box", {"a": a, "b": b}, 50).levels
    assert np.all(np.diff(lv) >= 0)


@settings(max_examples=30, deadline=None)
@given(lam=st.floats(1e-3, 1e3), nu=st.sampled_from([-1.0, 1.0, 2.0, 4.0, 6.0]))
def test_transmute_roundtrip(lam, nu):
    # lambda x0^(nu+2) = 1
    assert lam * transmute_length(lam, nu) ** (nu + 2) == pytest.approx(1.0, rel=1e-12)


def test_threads_do_not_change_results(monkeypatch, quartic_spec):
    monkeypatch.setenv("ORBITSCALE_THREADS", "1")
    serial = ds_de_check(quartic_spec, 1.0, 1e-4)
    monkeypatch.setenv("ORBITSCALE_THREADS", "4")
    threaded = ds_de_check(quartic_spec, 1.0, 1e-4)
    assert serial == threaded
