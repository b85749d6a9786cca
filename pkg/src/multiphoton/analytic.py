"""Closed-form perturbative results for n-photon resonances under linear drive."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .drive import DriveParams


def _check_order(n: int) -> int:
    if int(n) != n or n < 1:
        raise ValueError(f"photon order must be a positive integer, got {n!r}")
    return int(n)


def analytic_center(n: int, drive: DriveParams) -> float:
    """Second-order resonance field B_n (mT) of the n-photon line.

    For n = 1 this is the Bloch-Siegert shifted line,
    ``w/g - B1^2 sin^2(theta) / (16 w/g)``; for n > 1 the correction is
    ``B1^2 sin^2(theta) n / (4 (n^2 - 1) w/g)``.
    """
    return n * drive.reference_field - _shift(_check_order(n), drive)


def analytic_shift(n: int, drive: DriveParams) -> float:
    """Drive-induced shift ``n w/g - B_n`` in mT (never negative)."""
    return _shift(_check_order(n), drive)


def _shift(n: int, drive: DriveParams) -> float:
    ref = drive.reference_field
    strength = drive.b1**2 * math.sin(drive.theta_rad) ** 2
    if n == 1:
        return strength / (16.0 * ref)
    return strength * n / (4.0 * (n * n - 1) * ref)


def shift_ratio(n: int, m: int) -> Fraction:
    """Exact ratio of the n-photon shift to the m-photon shift.

    >>> shift_ratio(3, 2)
    Fraction(9, 16)
    """
    n, m = _check_order(n), _check_order(m)
    if n == m:
        raise ValueError("shift_ratio needs two different photon orders")
    return _relative_shift(n) / _relative_shift(m)


def _relative_shift(n: int) -> Fraction:
    # shift in units of B1^2 sin^2(theta) / (4 w/g)
    if n == 1:
        return Fraction(1, 4)
    return Fraction(n, n * n - 1)


def angular_factor(theta_deg):
    """|sin(theta) - (9/8) sin^3(theta)|, the angular part of the three-photon amplitude."""
    s = np.sin(np.radians(theta_deg))
    out = np.abs(s - 1.125 * s**3)
    return float(out) if np.ndim(out) == 0 else out


class ThreePhotonAmplitude(NamedTuple):
    u: float  # rad/us
    field: float  # u/gamma in mT


def three_photon_amplitude(drive: DriveParams) -> ThreePhotonAmplitude:
    """Effective three-photon coupling ``g^3 B1^3 / (32 w^2) * angular_factor``."""
    g, w = drive.gamma_angular, drive.omega
    u = g**3 * drive.b1**3 / (32.0 * w**2) * angular_factor(drive.theta)
    return ThreePhotonAmplitude(u, u / g)


class AngularExtrema(NamedTuple):
    zero: float  # deg, interior zero
    maximum: float  # deg, interior maximum below the zero


def angular_factor_extrema() -> AngularExtrema:
    """Numerically locate the interior zero and interior maximum of the angular factor."""

    def signed(t):
        s = math.sin(math.radians(t))
        return s - 1.125 * s**3

    zero = brentq(signed, 45.0, 89.0, xtol=1e-12)
    peak = minimize_scalar(
        lambda t: -angular_factor(t), bounds=(1.0, zero - 1.0), method="bounded",
        options={"xatol": 1e-9},
    )
    return AngularExtrema(zero, float(peak.x))
