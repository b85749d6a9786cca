"""Relaxation-augmented density-matrix dynamics and periodic steady state.

The spin-1/2 density matrix ``rho = (1 + r . sigma) / 2`` is propagated through
its Bloch vector ``r``, which keeps rho Hermitian with unit trace by
construction.  The coherent part is the same Hamiltonian as the Floquet
matrix; relaxation pulls ``r_z`` toward the equilibrium polarization along
B0 with time T1 and damps ``r_x, r_y`` with time T2.

One drive period is integrated with the fourth-order Magnus (Gauss-Legendre)
scheme on the affine 4x4 generator in homogeneous coordinates, so a single
period becomes an affine map that is then applied period after period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .drive import DriveParams
from .errors import ConvergenceError

MIN_STEPS = 100
DEFAULT_STEPS = 200

_PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@dataclass(frozen=True)
class RelaxationParams:
    """T1/T2 relaxation (us) toward polarization ``p0`` along B0.

    ``math.inf`` for both times switches relaxation off.
    """

    t1: float = 10.0
    t2: float = 1.0
    p0: float = 1e-3

    def __post_init__(self):
        if not (self.t1 > 0 and self.t2 > 0):
            raise ValueError(f"relaxation times must be positive, got t1={self.t1}, t2={self.t2}")
        if self.t2 > 2 * self.t1:
            raise ValueError(f"t2={self.t2} exceeds 2*t1={2 * self.t1}")
        if not -1.0 <= self.p0 <= 1.0:
            raise ValueError(f"p0 must lie in [-1, 1], got {self.p0}")

    def to_dict(self) -> dict:
        return {"t1": self.t1, "t2": self.t2, "p0": self.p0}


@dataclass(frozen=True, eq=False)
class DensityState:
    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (2, 2):
            raise ValueError(f"rho must be 2x2, got shape {rho.shape}")
        if abs(np.trace(rho) - 1.0) > 1e-9:
            raise ValueError(f"trace(rho) = {np.trace(rho)} differs from 1")
        if np.abs(rho - rho.conj().T).max() > 1e-9:
            raise ValueError("rho is not Hermitian")
        object.__setattr__(self, "rho", rho)

    @classmethod
    def from_bloch(cls, r) -> DensityState:
        rho = 0.5 * (np.eye(2) + sum(c * p for c, p in zip(r, _PAULI)))
        return cls(rho)

    @classmethod
    def equilibrium(cls, polarization: float) -> DensityState:
        return cls.from_bloch((0.0, 0.0, polarization))

    @property
    def bloch(self) -> np.ndarray:
        return np.array([np.trace(self.rho @ p).real for p in _PAULI])

    @property
    def purity(self) -> float:
        return float(np.trace(self.rho @ self.rho).real)


def equilibrium_polarization(b0: float, relax: RelaxationParams) -> float:
    """Polarization along +z at equilibrium; follows the sign of B0 (B0 = 0 counts as +)."""
    return relax.p0 if b0 >= 0 else -relax.p0


def _generators(t: np.ndarray, drive: DriveParams, b0: float, relax: RelaxationParams, peq: float):
    g = drive.gamma_angular
    drive_field = drive.b1 * np.cos(drive.omega * t)
    ox = g * drive_field * math.sin(drive.theta_rad)
    oz = g * (b0 + drive_field * math.cos(drive.theta_rad))
    gen = np.zeros((t.size, 4, 4))
    # dr/dt = Omega x r with Omega = (ox, 0, oz)
    gen[:, 0, 1] = -oz
    gen[:, 1, 0] = oz
    gen[:, 1, 2] = -ox
    gen[:, 2, 1] = ox
    gen[:, 0, 0] = gen[:, 1, 1] = -1.0 / relax.t2
    gen[:, 2, 2] = -1.0 / relax.t1
    gen[:, 2, 3] = peq / relax.t1
    return gen


@lru_cache(maxsize=4096)
def period_map(drive: DriveParams, b0: float, relax: RelaxationParams, steps: int = DEFAULT_STEPS):
    """Affine one-period propagator and its period average.

    Returns ``(P, A)``: 4x4 homogeneous matrices with ``v(T) = P v(0)`` and
    ``mean_j v(t_j) = A v(0)`` over the ``steps`` grid points of the period.
    """
    if steps < MIN_STEPS:
        raise ValueError(f"need at least {MIN_STEPS} steps per period, got {steps}")
    period = 2.0 * math.pi / drive.omega
    h = period / steps
    t0 = np.arange(steps) * h
    node = math.sqrt(3.0) / 6.0
    peq = equilibrium_polarization(b0, relax)
    a1 = _generators(t0 + (0.5 - node) * h, drive, b0, relax, peq)
    a2 = _generators(t0 + (0.5 + node) * h, drive, b0, relax, peq)
    magnus = 0.5 * h * (a1 + a2) + (math.sqrt(3.0) / 12.0) * h * h * (a2 @ a1 - a1 @ a2)
    step_maps = expm(magnus)

    total = np.eye(4)
    average = np.zeros((4, 4))
    for step in step_maps:
        average += total
        total = step @ total
    average /= steps
    total.setflags(write=False)
    average.setflags(write=False)
    return total, average


def propagate_period(
    state: DensityState,
    drive: DriveParams,
    b0: float,
    relax: RelaxationParams,
    steps: int = DEFAULT_STEPS,
) -> DensityState:
    """Advance ``state`` by exactly one drive period."""
    total, _ = period_map(drive, float(b0), relax, int(steps))
    v = total @ np.append(state.bloch, 1.0)
    return DensityState.from_bloch(v[:3])


def steady_state_signal(
    drive: DriveParams,
    b0: float,
    relax: RelaxationParams | None = None,
    *,
    steps: int = DEFAULT_STEPS,
    tol: float = 1e-8,
    max_periods: int = 2**48,
) -> float:
    """Time-averaged polarization deficit ``p0 - <r . b0_hat>`` in the periodic steady state.

    Starting from equilibrium the one-period map is composed with itself
    (1, 2, 4, ... periods).  The state is declared periodic once one further
    period changes rho by less than ``tol`` (Frobenius norm) and the memory of
    the initial state has decayed below ``tol``.

    Raises:
        ConvergenceError: if that needs more than ``max_periods`` periods.
    """
    relax = relax or RelaxationParams()
    if drive.b1 == 0.0:
        return 0.0
    b0 = float(b0)
    total, average = period_map(drive, b0, relax, int(steps))
    sign = 1.0 if b0 >= 0 else -1.0
    v0 = np.array([0.0, 0.0, sign * relax.p0, 1.0])

    block = total
    periods = 1
    while True:
        v = block @ v0
        # ||d rho||_F = |d r| / sqrt(2)
        change = np.linalg.norm(total @ v - v) / math.sqrt(2.0)
        if change < tol and np.linalg.norm(block[:3, :3], 2) < tol:
            break
        block = block @ block
        periods *= 2
        if periods > max_periods:
            raise ConvergenceError(
                f"no periodic steady state within {max_periods} periods at B0={b0} mT"
            )
    mean_z = (average @ v)[2]
    return float(relax.p0 - sign * mean_z)
