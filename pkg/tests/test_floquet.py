import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multiphoton import (
    DriveParams,
    ResonanceNotFound,
    analytic_center,
    angular_factor,
    angular_scan,
    build_floquet_matrix,
    locate_resonance,
    quasienergies,
)
from multiphoton.floquet import SZ, gap_at
from oracles import loglog_slope, propagator_quasienergies

REF = DriveParams(b1=0.0).reference_field


def test_uncoupled_spectrum_is_exact():
    d = DriveParams(b1=0.0)
    op = build_floquet_matrix(d, 5.0, 4)
    k = np.arange(-4, 5)
    expected = np.sort(np.concatenate([0.5 * d.gamma_angular * 5.0 + k * d.omega,
                                       -0.5 * d.gamma_angular * 5.0 + k * d.omega]))
    np.testing.assert_allclose(np.linalg.eigvalsh(op.matrix), expected, rtol=0, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 6.0), st.floats(0.0, 90.0), st.floats(-20.0, 20.0), st.integers(1, 12))
def test_matrix_hermitian_and_tridiagonal_blocks(b1, theta, b0, n):
    op = build_floquet_matrix(DriveParams(b1=b1, theta=theta), b0, n)
    assert op.matrix.shape == (2 * (2 * n + 1),) * 2
    assert np.array_equal(op.matrix, op.matrix.conj().T)
    blocks = op.matrix.reshape(2 * n + 1, 2, 2 * n + 1, 2)
    for i in range(2 * n + 1):
        for j in range(2 * n + 1):
            if abs(i - j) > 1:
                assert not blocks[i, :, j, :].any()


def test_parallel_drive_commutes_with_sz():
    op = build_floquet_matrix(DriveParams(b1=3.0, theta=0.0), 7.0, 5)
    sz = np.kron(np.eye(11), SZ)
    assert np.abs(op.matrix @ sz - sz @ op.matrix).max() == 0.0


def test_truncation_rejected():
    with pytest.raises(ValueError):
        build_floquet_matrix(DriveParams(b1=1.0), 1.0, 0)


def test_gap_zero_at_uncoupled_resonance():
    d = DriveParams(b1=0.0)
    q = quasienergies(build_floquet_matrix(d, d.reference_field, 5))
    assert q.gap < 1e-9
    assert q.converged


@pytest.mark.parametrize("ratio", [0.01, 0.03, 0.05])
def test_weak_drive_gap_is_rabi_splitting(ratio):
    d = DriveParams(b1=ratio * REF)
    q = quasienergies(build_floquet_matrix(d, REF, 7))
    assert q.gap == pytest.approx(0.5 * d.gamma_angular * d.b1, rel=0.02)


@pytest.mark.parametrize("b0, b1, theta", [(3.3, 0.8, 90.0), (10.4, 2.0, 90.0), (7.0, 1.5, 55.0),
                                          (5.2, 3.0, 30.0), (1.1, 0.4, 80.0)])
def test_quasienergies_match_propagator(b0, b1, theta):
    d = DriveParams(b1=b1, theta=theta)
    q = quasienergies(build_floquet_matrix(d, b0, 15))
    e1, e2, gap = propagator_quasienergies(b0, b1, theta)
    assert q.gap == pytest.approx(gap, abs=1e-6)
    w = d.omega
    for eps in (e1, e2):
        dist = min(abs((eps - q.eps_plus + w / 2) % w - w / 2), abs((eps - q.eps_minus + w / 2) % w - w / 2))
        assert dist < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 4.0), st.floats(0.0, 90.0), st.floats(0.05, 15.0))
def test_quasienergy_invariants(b1, theta, b0):
    d = DriveParams(b1=b1, theta=theta)
    q = quasienergies(build_floquet_matrix(d, b0, 12))
    q_neg = quasienergies(build_floquet_matrix(d, -b0, 12))
    assert 0.0 <= q.gap <= d.omega / 2
    assert q.gap == pytest.approx(q_neg.gap, abs=1e-8)
    assert abs(q.eps_plus) == pytest.approx(abs(q_neg.eps_plus), abs=1e-8)
    if q.converged:
        q2 = quasienergies(build_floquet_matrix(d, b0, 24))
        assert q2.eps_plus == pytest.approx(q.eps_plus, abs=1e-9)


def test_weak_drive_one_photon_center():
    fix = locate_resonance(1, DriveParams(b1=1e-3))
    assert fix.center == pytest.approx(REF, abs=1e-5)


def test_three_photon_center_near_analytic():
    d = DriveParams(b1=4.0)
    fix = locate_resonance(3, d)
    assert fix.center == pytest.approx(10.2846, rel=0.10)
    assert fix.window[0] < fix.center < fix.window[1]


def test_fix_gap_is_window_minimum():
    d = DriveParams(b1=1.5)
    fix = locate_resonance(3, d)
    dense = np.linspace(fix.center - 0.01, fix.center + 0.01, 401)
    brute = min(gap_at(d, b, fix.truncation) for b in dense)
    assert fix.gap <= brute + 1e-9


def test_small_drive_three_photon_gap_scales_as_cube():
    ratios = np.array([0.05, 0.1, 0.15, 0.2])
    gaps = [locate_resonance(3, DriveParams(b1=r * REF)).gap for r in ratios]
    assert loglog_slope(ratios, gaps) == pytest.approx(3.0, abs=0.05)


def test_three_photon_gap_is_twice_effective_amplitude():
    from multiphoton import three_photon_amplitude

    d = DriveParams(b1=0.1 * REF)
    assert locate_resonance(3, d).gap == pytest.approx(2 * three_photon_amplitude(d).u, rel=0.01)


def test_parallel_drive_has_no_resonance():
    fix = locate_resonance(3, DriveParams(b1=2.0, theta=0.0))
    assert not fix.resonant
    assert fix.gap == 0.0
    assert fix.center == pytest.approx(3 * REF)


def test_window_without_minimum():
    d = DriveParams(b1=1.0)
    with pytest.raises(ResonanceNotFound):
        locate_resonance(3, d, window=(9.0, 10.0))


def test_truncation_doubling_leaves_center_unchanged():
    d = DriveParams(b1=2.5)
    a = locate_resonance(3, d, truncation=9)
    b = locate_resonance(3, d, truncation=18)
    assert b.center == pytest.approx(a.center, abs=1e-7)
    assert b.gap == pytest.approx(a.gap, abs=1e-7)


def test_resonance_symmetric_in_field_sign():
    d = DriveParams(b1=2.0)
    fix = locate_resonance(3, d)
    mirrored = locate_resonance(3, d, window=(-fix.window[1], -fix.window[0]))
    assert mirrored.center == pytest.approx(-fix.center, abs=1e-7)
    assert mirrored.gap == pytest.approx(fix.gap, abs=1e-8)


def test_even_order_at_right_angle_is_a_true_crossing():
    # generalized parity forbids even-n coupling for a purely transverse drive
    fix = locate_resonance(2, DriveParams(b1=1.5))
    assert fix.gap < 1e-5
    assert fix.center == pytest.approx(analytic_center(2, DriveParams(b1=1.5)), abs=0.005)


def test_even_order_gap_scales_as_square_off_axis():
    ratios = np.array([0.05, 0.1, 0.2])
    gaps = [locate_resonance(2, DriveParams(b1=r * REF, theta=60.0)).gap for r in ratios]
    assert loglog_slope(ratios, gaps) == pytest.approx(2.0, abs=0.05)


def test_angular_scan_zero_and_interior_maximum():
    d = DriveParams(b1=0.2 * REF)
    pts = {p.theta: p for p in angular_scan(3, d, [27.0, 33.0, 39.0, 70.53, 90.0])}
    assert pts[70.53].gap / pts[90.0].gap < 0.02
    assert pts[33.0].gap > pts[27.0].gap and pts[33.0].gap > pts[39.0].gap


def test_angular_scan_flags_parallel_drive():
    pts = angular_scan(3, DriveParams(b1=1.0), [0.0, 90.0])
    assert pts[0].flagged and not pts[1].flagged
    with pytest.raises(ValueError):
        angular_scan(3, DriveParams(b1=1.0), [95.0])


def test_angular_proportionality():
    d = DriveParams(b1=0.1 * REF)
    thetas = [10.0, 33.0, 50.0, 65.0, 68.0, 73.0, 80.0, 90.0]
    scaled = [p.gap / angular_factor(p.theta) for p in angular_scan(3, d, thetas)]
    assert max(scaled) / min(scaled) - 1.0 < 0.05
