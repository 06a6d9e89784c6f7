import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvcl.flux import (
    AsymptoticLimit,
    FluxDomainError,
    FluxModel,
    OscillatingTail,
    builtin,
    bump,
    decreasing,
    from_table,
    inverse_power,
    monotone_tanh,
    plateau,
)

BUMP = bump()
INV = inverse_power(1.0)
DEC = decreasing(1.0)
FLUXES = [BUMP, INV, DEC, monotone_tanh(), plateau(1.0), inverse_power(2.0)]
state = st.floats(min_value=0.0, max_value=20.0, allow_nan=False)


def test_eval_examples():
    assert INV.eval(0.0) == 0.0
    assert INV.eval(1.0) == pytest.approx(0.5)
    assert BUMP.eval(1.0) == pytest.approx(0.5)


@pytest.mark.parametrize("bad", [-1e-3, -1.0, math.nan, math.inf])
def test_eval_rejects_outside_domain(bad):
    with pytest.raises(FluxDomainError):
        INV.eval(bad)


def test_s_plus_examples():
    for u0 in (0.0, 0.5, 7.0):
        r = INV.s_plus(u0)
        assert not r.is_finite and not r.attained
        assert r.flux_at_s == pytest.approx(1.0)
        assert DEC.s_plus(u0).s_value == pytest.approx(u0)
    r = BUMP.s_plus(0.0)
    assert r.s_value == pytest.approx(1.0, abs=1e-6)
    assert r.flux_at_s == pytest.approx(0.5, abs=1e-12)


def test_s_minus_examples():
    r = INV.s_minus(0.0)
    assert r.s_value == 0.0 and r.flux_at_s == 0.0
    r = BUMP.s_minus(0.0)
    assert r.s_value == 0.0 and r.flux_at_s == 0.0
    r = BUMP.s_minus(2.0)
    assert not r.is_finite and r.flux_at_s == pytest.approx(0.0, abs=1e-12)
    assert not DEC.s_minus(1.0).is_finite


def brute_s_plus(f, u0, hi=100.0, h=1e-4):
    u = np.arange(u0, hi, h)
    running = np.maximum.accumulate(f(u))
    target = running[-1]
    return u[np.argmax(running >= target - 1e-12)], target


def test_s_plus_bump_matches_brute_force_scan():
    s, sup = brute_s_plus(lambda u: u / (1 + u * u), 0.0)
    r = BUMP.s_plus(0.0)
    assert abs(r.s_value - s) < 1e-3
    assert r.flux_at_s == pytest.approx(sup, abs=1e-9)


@pytest.mark.parametrize("flux", FLUXES, ids=lambda f: f.name)
@settings(max_examples=30, deadline=None)
@given(u0=state)
def test_visible_idempotent(flux, u0):
    for fn in (flux.s_plus, flux.s_minus):
        r = fn(u0)
        assert r.s_value >= u0
        if r.is_finite:
            again = fn(r.s_value)
            assert again.s_value == pytest.approx(r.s_value, abs=1e-3)
            assert float(flux.eval(r.s_value)) == pytest.approx(r.flux_at_s, abs=1e-9)


@pytest.mark.parametrize("flux", FLUXES, ids=lambda f: f.name)
@settings(max_examples=30, deadline=None)
@given(u0=state)
def test_visible_flux_ordering(flux, u0):
    lo, hi = flux.s_minus(u0).flux_at_s, flux.s_plus(u0).flux_at_s
    assert lo <= flux.tail.liminf + 1e-12
    assert flux.tail.liminf <= flux.tail.limsup
    assert flux.tail.limsup <= hi + 1e-12


@pytest.mark.parametrize("flux", [BUMP, monotone_tanh(), DEC], ids=lambda f: f.name)
def test_stationarity_at_visible_point(flux):
    for u0 in np.linspace(0, 5, 11):
        r = flux.s_plus(float(u0))
        if not r.is_finite:
            continue
        d = float(flux.derivative(r.s_value))
        if r.s_value > u0 + 1e-9:
            assert abs(d) < 1e-3
        else:
            assert d <= 1e-3


def test_godunov_examples():
    for a in (0.0, 0.3, 2.0, 11.0):
        assert BUMP.godunov_flux(a, a) == pytest.approx(float(BUMP.eval(a)))
    assert BUMP.godunov_flux(2.0, 0.0) == pytest.approx(0.5, abs=1e-12)
    assert INV.godunov_flux(math.inf, 0.0) == pytest.approx(1.0)
    assert INV.godunov_flux(0.0, math.inf) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        INV.godunov_flux(math.inf, math.inf)


@pytest.mark.parametrize("flux", FLUXES, ids=lambda f: f.name)
def test_godunov_monotone_on_lattice(flux):
    lat = np.concatenate([np.linspace(0, 3, 16), [5.0, 10.0, 40.0]])
    G = np.array([[flux.godunov_flux(float(a), float(b)) for b in lat] for a in lat])
    assert np.all(np.diff(G, axis=0) >= -1e-12)  # nondecreasing in a
    assert np.all(np.diff(G, axis=1) <= 1e-12)  # nonincreasing in b


@settings(max_examples=50, deadline=None)
@given(a=state, b=state)
def test_godunov_matches_brute_force_extremum(a, b):
    lo, hi = min(a, b), max(a, b)
    u = np.linspace(lo, hi, 20001)
    phi = u / (1 + u * u)
    g = BUMP.godunov_flux(a, b)
    # sampled extremum is off by at most h**2 * max|phi''| / 8 (and |phi''| <= 2)
    slack = ((hi - lo) / 20000) ** 2 / 4 + 1e-12
    if a <= b:
        assert phi.min() - slack <= g <= phi.min() + 1e-12
    else:
        assert phi.max() - 1e-12 <= g <= phi.max() + slack


@pytest.mark.parametrize("flux", FLUXES, ids=lambda f: f.name)
@settings(max_examples=20, deadline=None)
@given(a=state, b=state)
def test_hull_sandwich(flux, a, b):
    lo, hi = min(a, b), max(a, b)
    cav = flux.concave_hull(lo, hi)
    vex = flux.convex_hull(lo, hi)
    u = cav.samples_u
    phi = flux.eval(u)
    tol = 1e-12
    assert np.all(cav(u) >= phi - tol)
    assert np.all(vex(vex.samples_u) <= flux.eval(vex.samples_u) + tol)
    assert cav(lo) == pytest.approx(float(flux.eval(lo)))
    assert cav(hi) == pytest.approx(float(flux.eval(hi)))
    assert vex(lo) == pytest.approx(float(flux.eval(lo)))
    assert vex(hi) == pytest.approx(float(flux.eval(hi)))
    if hi > lo:
        assert np.all(np.diff(cav.slopes()) <= 1e-9)
        assert np.all(np.diff(vex.slopes()) >= -1e-9)


def test_hull_of_concave_flux_is_flux():
    h = INV.concave_hull(0.0, 4.0)
    assert np.allclose(h(h.samples_u), INV.eval(h.samples_u), atol=1e-14)
    h = DEC.convex_hull(0.0, 4.0)
    assert np.allclose(h(h.samples_u), DEC.eval(h.samples_u), atol=1e-14)


def test_hull_degenerate_interval():
    h = BUMP.concave_hull(0.7, 0.7)
    assert h(0.7) == pytest.approx(float(BUMP.eval(0.7)))
    h = BUMP.convex_hull(0.7, 0.7)
    assert h(0.7) == pytest.approx(float(BUMP.eval(0.7)))


def test_bump_hulls_match_pairwise_chord_oracle():
    u = np.linspace(0, 3, 601)
    phi = u / (1 + u * u)
    # least concave majorant / greatest convex minorant by brute force over chords
    upper = phi.copy()
    lower = phi.copy()
    for i in range(len(u)):
        for j in range(i + 2, len(u)):
            w = (u[i + 1:j] - u[i]) / (u[j] - u[i])
            chord = phi[i] + w * (phi[j] - phi[i])
            upper[i + 1:j] = np.maximum(upper[i + 1:j], chord)
            lower[i + 1:j] = np.minimum(lower[i + 1:j], chord)
    assert np.max(np.abs(BUMP.concave_hull(0, 3)(u) - upper)) < 1e-4
    assert np.max(np.abs(BUMP.convex_hull(0, 3)(u) - lower)) < 1e-4


def test_hull_unbounded_is_rejected():
    with pytest.raises(ValueError):
        BUMP.convex_hull(0.0, math.inf)
    with pytest.raises(ValueError):
        BUMP.concave_hull(0.0, math.inf)


@pytest.mark.parametrize("flux", FLUXES, ids=lambda f: f.name)
def test_declared_bounds_hold_on_samples(flux):
    u = np.linspace(0, 3 * flux.u_tail, 20001)
    phi = flux.eval(u)
    assert np.all(np.abs(phi) <= flux.sup_bound + 1e-12)
    slopes = np.abs(np.diff(phi) / np.diff(u))
    assert np.all(slopes <= flux.lipschitz_bound * (1 + 1e-9))


def test_table_flux_reproduces_builtin():
    u = np.linspace(0, 30, 3001)
    tab = from_table(u, u / (1 + u * u), 1.0, 0.5, AsymptoticLimit(0.0, 10.0))
    assert tab.s_plus(0.0).s_value == pytest.approx(1.0, abs=1e-3)
    assert tab.s_plus(0.0).flux_at_s == pytest.approx(0.5, abs=1e-6)
    assert tab.godunov_flux(2.0, 0.0) == pytest.approx(0.5, abs=1e-6)
    with pytest.raises(ValueError):
        from_table([0.5, 1.0], [0.0, 1.0], 1.0, 1.0, AsymptoticLimit(1.0, 1.0))


def test_oscillating_tail_brackets():
    flux = FluxModel(
        lambda u: 0.5 + 0.25 * np.sin(u),
        lipschitz_bound=0.25,
        sup_bound=0.75,
        tail=OscillatingTail(0.25, 0.75, 0.0),
        name="wave",
    )
    assert flux.ambiguous_tail
    r = flux.s_plus(0.0)
    assert r.flux_at_s == pytest.approx(0.75, abs=1e-9)
    assert flux.s_minus(0.0).flux_at_s == pytest.approx(0.25, abs=1e-9)


def test_builtin_registry():
    assert builtin("inverse_power", p=2.0).params == {"p": 2.0}
    with pytest.raises(ValueError):
        builtin("nope")
    d = BUMP.describe()
    assert d["name"] == "bump" and d["tail"]["type"] == "asymptotic"


def test_critical_points_of_bump():
    assert np.any(np.abs(BUMP.critical_points() - 1.0) < 1e-6)
