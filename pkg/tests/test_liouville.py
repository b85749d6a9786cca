import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from multiphoton import (
    ConvergenceError,
    DensityState,
    DriveParams,
    RelaxationParams,
    locate_resonance,
    propagate_period,
    steady_state_signal,
)
from oracles import rwa_signal

REF = DriveParams(b1=0.0).reference_field
RELAX = RelaxationParams()
NO_RELAX = RelaxationParams(math.inf, math.inf, 0.0)


@pytest.mark.parametrize("kwargs", [dict(t1=0), dict(t2=-1), dict(t1=1, t2=3), dict(p0=1.5)])
def test_relaxation_validation(kwargs):
    with pytest.raises(ValueError):
        RelaxationParams(**kwargs)


def test_density_state_validation():
    with pytest.raises(ValueError):
        DensityState(np.eye(2))
    with pytest.raises(ValueError):
        DensityState(np.array([[0.5, 1.0], [0.0, 0.5]]))
    state = DensityState.from_bloch((0.3, -0.2, 0.5))
    np.testing.assert_allclose(state.bloch, [0.3, -0.2, 0.5], atol=1e-15)


def test_no_drive_no_signal():
    assert steady_state_signal(DriveParams(b1=0.0), REF, RELAX) == 0.0


def test_parallel_drive_no_signal():
    assert abs(steady_state_signal(DriveParams(b1=3.0, theta=0.0), REF, RELAX)) < 1e-12


@pytest.mark.parametrize("b1", [0.002, 0.005])
def test_weak_drive_matches_rotating_wave(b1):
    d = DriveParams(b1=b1)
    for b0 in REF + np.linspace(-0.03, 0.03, 7):
        expected = rwa_signal(b0, b1, RELAX.t1, RELAX.t2, RELAX.p0)
        assert steady_state_signal(d, b0, RELAX) == pytest.approx(expected, rel=0.01, abs=1e-9)


def _half_width(b1):
    d = DriveParams(b1=b1)
    fields = REF + np.linspace(0.0, 0.06, 121)
    s = np.array([steady_state_signal(d, b, RELAX) for b in fields])
    return fields[np.argmax(s < 0.5 * s.max())] - REF


def test_power_broadening():
    d = DriveParams(b1=0.003)
    fields = REF + np.linspace(-0.02, 0.02, 41)
    s = [steady_state_signal(d, b, RELAX) for b in fields]
    assert abs(fields[int(np.argmax(s))] - REF) <= 0.001
    assert _half_width(0.006) > _half_width(0.003)


def test_unitary_limit_conserves_purity():
    state = DensityState.from_bloch((0.6, 0.0, 0.8))
    for d in (DriveParams(b1=0.0), DriveParams(b1=2.0, theta=70.0)):
        out = state
        for _ in range(5):
            out = propagate_period(out, d, 4.0, NO_RELAX)
        assert out.purity == pytest.approx(state.purity, abs=1e-9)


def test_maximally_mixed_state_is_fixed_point():
    mixed = DensityState(0.5 * np.eye(2))
    out = propagate_period(mixed, DriveParams(b1=0.0), 3.0, RelaxationParams(p0=0.0))
    np.testing.assert_allclose(out.rho, mixed.rho, atol=1e-14)


def test_steps_floor():
    with pytest.raises(ValueError):
        propagate_period(DensityState(0.5 * np.eye(2)), DriveParams(b1=1.0), 3.0, RELAX, steps=50)


@settings(max_examples=20, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(0.0, 4.0),
       st.floats(0.0, 90.0), st.floats(-15.0, 15.0))
def test_propagation_keeps_trace_and_hermiticity(x, y, z, b1, theta, b0):
    r = np.array([x, y, z])
    if np.linalg.norm(r) > 1:
        r = r / np.linalg.norm(r)
    out = propagate_period(DensityState.from_bloch(r), DriveParams(b1=b1, theta=theta), b0, RELAX)
    assert abs(np.trace(out.rho) - 1) < 1e-9
    assert np.abs(out.rho - out.rho.conj().T).max() < 1e-9
    assert np.linalg.eigvalsh(out.rho).min() > -1e-9


def test_step_doubling_propagation():
    state = DensityState.from_bloch((0.1, 0.2, 0.3))
    d = DriveParams(b1=4.0, theta=75.0)
    rhos = [propagate_period(state, d, 10.3, RELAX, steps=n).rho for n in (200, 400, 800)]
    e1 = np.abs(rhos[0] - rhos[1]).max()
    e2 = np.abs(rhos[1] - rhos[2]).max()
    assert e1 < 1e-8
    # fourth-order integrator: error drops ~16x per doubling
    assert 10 < e1 / e2 < 25


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 4.0), st.floats(0.0, 90.0), st.floats(0.0, 15.0))
def test_signal_symmetric_and_nonnegative(b1, theta, b0):
    d = DriveParams(b1=b1, theta=theta)
    plus = steady_state_signal(d, b0, RELAX)
    minus = steady_state_signal(d, -b0, RELAX)
    assert plus >= -1e-9
    assert minus == pytest.approx(plus, abs=1e-8)  # steady-state tolerance


@pytest.mark.parametrize("b0, b1, theta", [(10.28, 4.0, 90.0), (3.3, 4.0, 90.0), (6.6, 3.9, 60.0), (15.0, 4.0, 90.0)])
def test_signal_step_halving(b0, b1, theta):
    d = DriveParams(b1=b1, theta=theta)
    a = steady_state_signal(d, b0, RELAX, steps=200)
    b = steady_state_signal(d, b0, RELAX, steps=400)
    assert abs(a - b) < 1e-6


def test_unrelaxed_system_never_settles():
    with pytest.raises(ConvergenceError):
        steady_state_signal(DriveParams(b1=1.0), 3.0, NO_RELAX, max_periods=2**10)


LINEWIDTH = 1.0 / (DriveParams(b1=0.0).gamma_angular * RELAX.t2)


@pytest.mark.parametrize("n, ratio, theta", [(1, 0.3, 90.0), (1, 0.7, 90.0), (3, 0.3, 90.0), (3, 0.7, 90.0),
                                              (3, 1.1, 90.0), (2, 0.7, 60.0), (2, 1.1, 60.0)])
def test_signal_peak_sits_on_floquet_crossing(n, ratio, theta):
    d = DriveParams(b1=ratio * REF, theta=theta)
    fix = locate_resonance(n, d)
    fields = fix.center + np.linspace(-0.2, 0.2, 81)
    s = [steady_state_signal(d, b, RELAX) for b in fields]
    i = int(np.argmax(s))
    best = minimize_scalar(lambda b: -steady_state_signal(d, b, RELAX),
                           bounds=(fields[max(i - 1, 0)], fields[min(i + 1, 80)]), method="bounded",
                           options={"xatol": 1e-7})
    assert abs(best.x - fix.center) <= 2 * LINEWIDTH
