"""Floquet treatment of the linearly driven spin-1/2.

The time-periodic Hamiltonian (angular units, hbar = 1)

    H(t) = g B0 Sz + g B1 cos(w t) (sin(theta) Sx + cos(theta) Sz)

is mapped onto a static matrix over the product space spin x Fourier index
k in [-N, N].  Diagonal blocks are ``g B0 Sz + k w``; the drive couples
neighbouring Fourier blocks with ``(g B1 / 2)(sin(theta) Sx + cos(theta) Sz)``.
An n-photon resonance shows up as a near-degeneracy of the two quasienergy
families modulo w, i.e. a minimum of the folded splitting.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .analytic import analytic_center, analytic_shift
from .drive import DriveParams
from .errors import ConvergenceError, ResonanceNotFound

log = logging.getLogger(__name__)

SZ = np.diag([0.5, -0.5])
SX = np.array([[0.0, 0.5], [0.5, 0.0]])

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
MAX_TRUNCATION = 512


def default_truncation(n_max: int) -> int:
    return 2 * n_max + 3


@dataclass(frozen=True, eq=False)
class FloquetOperator:
    truncation: int
    b0: float
    drive: DriveParams
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def central_block(self) -> slice:
        """Rows of the k = 0 Fourier block."""
        return slice(2 * self.truncation, 2 * self.truncation + 2)


def build_floquet_matrix(drive: DriveParams, b0: float, truncation: int) -> FloquetOperator:
    """Assemble the truncated Floquet matrix (rad/us) for static field ``b0`` (mT).

    Basis index ``2 * (k + N) + s`` with s = 0 for spin up, 1 for spin down.
    """
    if int(truncation) != truncation or truncation < 1:
        raise ValueError(f"truncation must be an integer >= 1, got {truncation!r}")
    n = int(truncation)
    g, w = drive.gamma_angular, drive.omega
    blocks = 2 * n + 1
    k = np.arange(-n, n + 1, dtype=float)
    coupling = 0.5 * g * drive.b1 * (math.sin(drive.theta_rad) * SX + math.cos(drive.theta_rad) * SZ)
    matrix = (
        np.kron(np.eye(blocks), g * b0 * SZ)
        + np.kron(np.diag(k * w), np.eye(2))
        + np.kron(np.eye(blocks, k=1) + np.eye(blocks, k=-1), coupling)
    )
    return FloquetOperator(n, float(b0), drive, matrix)


@dataclass(frozen=True)
class QuasienergyPair:
    eps_plus: float
    eps_minus: float
    gap: float
    converged: bool


def _fold(x: float, w: float) -> float:
    """Map into the first zone [-w/2, w/2)."""
    return (x + 0.5 * w) % w - 0.5 * w


def _folded_distance(x: float, w: float) -> float:
    d = x % w
    return min(d, w - d)


def _central_quasienergy(op: FloquetOperator) -> float:
    values, vectors = np.linalg.eigh(op.matrix)
    weight = np.sum(np.abs(vectors[op.central_block, :]) ** 2, axis=0)
    return _fold(float(values[int(np.argmax(weight))]), op.drive.omega)


def _pair(eps: float, w: float) -> tuple[float, float, float]:
    # H(t) is traceless, so the one-period propagator has unit determinant and
    # the partner quasienergy is -eps modulo w.
    plus = abs(eps)
    minus = _fold(-plus, w)
    return plus, minus, _folded_distance(2.0 * plus, w)


def quasienergies(op: FloquetOperator, tol: float = 1e-9) -> QuasienergyPair:
    """Physical quasienergy pair, folded gap and truncation-convergence flag.

    The representative eigenvector is the one with the largest weight in the
    k = 0 block.  The calculation is repeated at truncation 2N; ``converged`` is
    set when the quasienergy moves by less than ``tol`` (rad/us).
    """
    w = op.drive.omega
    eps = _central_quasienergy(op)
    doubled = build_floquet_matrix(op.drive, op.b0, 2 * op.truncation)
    eps2 = _central_quasienergy(doubled)
    moved = min(_folded_distance(eps - eps2, w), _folded_distance(eps + eps2, w))
    plus, minus, gap = _pair(eps, w)
    return QuasienergyPair(plus, minus, gap, bool(moved < tol))


def gap_at(drive: DriveParams, b0: float, truncation: int) -> float:
    """Folded quasienergy splitting (rad/us) at one field, without convergence check."""
    eps = _central_quasienergy(build_floquet_matrix(drive, b0, truncation))
    return float(_pair(eps, drive.omega)[2])


def converged_truncation(drive: DriveParams, b0: float, start: int, tol: float = 1e-9) -> int:
    """Smallest truncation start * 2**k whose quasienergies are stable under doubling."""
    n = start
    while n <= MAX_TRUNCATION:
        if quasienergies(build_floquet_matrix(drive, b0, n), tol).converged:
            return n
        n *= 2
    raise ConvergenceError(
        f"quasienergies not converged up to truncation {MAX_TRUNCATION} at B0={b0} mT"
    )


def golden_section(f, a: float, b: float, xtol: float) -> tuple[float, float]:
    """Minimize a unimodal ``f`` on [a, b]; returns (x, f(x))."""
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return float(x), float(f(x))


@dataclass(frozen=True)
class ResonanceFix:
    n: int
    center: float
    gap: float
    window: tuple[float, float]
    resonant: bool = True
    truncation: int = 0


def default_window(n: int, drive: DriveParams, scale: float = 3.0) -> tuple[float, float]:
    center = analytic_center(n, drive)
    half = max(scale * analytic_shift(n, drive), 1e-3 * drive.reference_field)
    return center - half, center + half


def locate_resonance(
    n: int,
    drive: DriveParams,
    window: tuple[float, float] | None = None,
    *,
    truncation: int | None = None,
    xtol: float = 1e-8,
    tol: float = 1e-9,
    scan_points: int = 41,
) -> ResonanceFix:
    """Find the static field where the n-photon quasienergy splitting is smallest.

    A coarse scan over ``window`` brackets the minimum, then golden-section
    search refines it to ``xtol`` mT.  With ``theta == 0`` the drive commutes
    with Sz and there is no avoided crossing: the unshifted crossing at
    ``n w/g`` is returned with ``resonant=False``.

    Raises:
        ResonanceNotFound: if the smallest scanned gap sits on a window edge.
        ConvergenceError: if the truncation cannot be converged.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"photon order must be a positive integer, got {n!r}")
    n = int(n)
    if window is None:
        window = default_window(n, drive)
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo:
        raise ValueError(f"empty search window {window!r}")

    if drive.theta == 0.0:
        return ResonanceFix(n, n * drive.reference_field, 0.0, (lo, hi), resonant=False)

    start = truncation or default_truncation(n)
    trunc = converged_truncation(drive, 0.5 * (lo + hi), start, tol)
    while True:
        center, gap = _search(drive, trunc, lo, hi, xtol, scan_points)
        if quasienergies(build_floquet_matrix(drive, center, trunc), tol).converged:
            break
        trunc *= 2
        if trunc > MAX_TRUNCATION:
            raise ConvergenceError(f"n={n} resonance not converged at truncation {MAX_TRUNCATION}")
        log.debug("raising truncation to %d for n=%d", trunc, n)
    return ResonanceFix(n, center, gap, (lo, hi), resonant=True, truncation=trunc)


def _search(drive, trunc, lo, hi, xtol, scan_points):
    fields = np.linspace(lo, hi, scan_points)
    gaps = np.array([gap_at(drive, b, trunc) for b in fields])
    i = int(np.argmin(gaps))
    if i == 0 or i == scan_points - 1:
        raise ResonanceNotFound(
            f"gap is smallest at the window edge ({fields[i]:.6g} mT) of [{lo:.6g}, {hi:.6g}]"
        )
    return golden_section(lambda b: gap_at(drive, b, trunc), fields[i - 1], fields[i + 1], xtol)


@dataclass(frozen=True)
class AngularPoint:
    theta: float
    center: float
    gap: float
    flagged: bool


def angular_scan(
    n: int,
    drive: DriveParams,
    theta_grid,
    *,
    min_gap: float = 1e-8,
    **locate_kwargs,
) -> list[AngularPoint]:
    """Locate the n-photon resonance at each angle with B1 held fixed.

    Points whose gap falls below ``min_gap`` (rad/us), that have no avoided
    crossing, or whose search fails are returned with ``flagged=True`` and are
    meant to be left out of angular fits.
    """
    points = []
    for theta in theta_grid:
        theta = float(theta)
        if not 0.0 <= theta <= 90.0:
            raise ValueError(f"angle {theta} outside [0, 90] degrees")
        local = drive.replace(theta=theta)
        try:
            fix = locate_resonance(n, local, **locate_kwargs)
        except ResonanceNotFound:
            points.append(AngularPoint(theta, math.nan, math.nan, True))
            continue
        flagged = (not fix.resonant) or fix.gap < min_gap
        points.append(AngularPoint(theta, fix.center, fix.gap, flagged))
    return points
