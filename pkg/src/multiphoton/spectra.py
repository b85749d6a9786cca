"""Swept-field spectra: synthesis, baseline removal, peak centers, field calibration."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import NamedTuple, Sequence

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.signal import find_peaks

from .analytic import analytic_center
from .drive import DriveParams
from .errors import ConvergenceError, InsufficientDataError
from .liouville import DEFAULT_STEPS, RelaxationParams, steady_state_signal

log = logging.getLogger(__name__)

# Systematic B0-scale uncertainty (mT) for the two lock-in modulation modes.
FIELD_FLOOR_20HZ = 0.020
FIELD_FLOOR_1KHZ = 0.150


@dataclass(frozen=True, eq=False)
class Spectrum:
    field_grid: np.ndarray
    signal: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        grid = np.asarray(self.field_grid, dtype=float)
        signal = np.asarray(self.signal, dtype=float)
        if grid.ndim != 1 or grid.shape != signal.shape:
            raise ValueError(f"grid and signal shapes differ: {grid.shape} vs {signal.shape}")
        if grid.size < 2 or np.any(np.diff(grid) <= 0):
            raise ValueError("field grid must be strictly increasing with at least two points")
        object.__setattr__(self, "field_grid", grid)
        object.__setattr__(self, "signal", signal)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def valid(self) -> np.ndarray:
        """Mask of points that carry a finite signal (failed solver points are NaN)."""
        return np.isfinite(self.signal)

    def with_signal(self, signal, **meta) -> Spectrum:
        return Spectrum(self.field_grid, signal, {**self.meta, **meta})


def field_grid(start: float, stop: float, step: float) -> np.ndarray:
    """Uniform grid from ``start`` to ``stop``; exactly mirror-symmetric when start == -stop."""
    if step <= 0 or stop <= start:
        raise ValueError(f"invalid grid ({start}, {stop}, {step})")
    count = int(round((stop - start) / step)) + 1
    mid = 0.5 * (start + stop)
    return mid + (np.arange(count) - 0.5 * (count - 1)) * step


def _as_grid(grid) -> np.ndarray:
    if isinstance(grid, dict):
        return field_grid(grid["start"], grid["stop"], grid["step"])
    if isinstance(grid, tuple) and len(grid) == 3:
        return field_grid(*grid)
    return np.asarray(grid, dtype=float)


def _safe_signal(b0, drive, relax, steps):
    try:
        return steady_state_signal(drive, b0, relax, steps=steps)
    except ConvergenceError:
        return math.nan


def _finish(grid, clean, noise_sigma, baseline, seed, meta) -> Spectrum:
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be >= 0, got {noise_sigma}")
    intercept, slope = baseline
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, noise_sigma, grid.size) if noise_sigma > 0 else 0.0
    signal = clean + intercept + slope * grid + noise
    meta = {
        **meta,
        "source": "synthesized",
        "noise_sigma": float(noise_sigma),
        "baseline": [float(intercept), float(slope)],
        "seed": seed,
    }
    return Spectrum(grid, signal, meta)


def synthesize_spectrum(
    drive: DriveParams,
    relax: RelaxationParams | None = None,
    grid=(-20.0, 20.0, 0.02),
    noise_sigma: float = 0.0,
    baseline: tuple[float, float] = (0.0, 0.0),
    seed=0,
    *,
    steps: int = DEFAULT_STEPS,
    threads: int = 1,
    meta: dict | None = None,
) -> Spectrum:
    """Steady-state signal over a B0 sweep plus linear baseline and white noise.

    Grid points where the steady state does not converge are NaN and counted
    in ``meta["failed_points"]``; the sweep itself never aborts.
    """
    relax = relax or RelaxationParams()
    grid = _as_grid(grid)
    point = partial(_safe_signal, drive=drive, relax=relax, steps=steps)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            clean = np.fromiter(pool.map(point, grid, chunksize=32), float, grid.size)
    else:
        clean = np.array([point(b0) for b0 in grid])
    failed = int(np.count_nonzero(~np.isfinite(clean)))
    if failed:
        log.warning("%d of %d grid points did not reach a steady state", failed, grid.size)
    info = {
        "model": "liouville",
        "drive": drive.to_dict(),
        "relax": relax.to_dict(),
        "steps": steps,
        "failed_points": failed,
        **(meta or {}),
    }
    return _finish(grid, clean, noise_sigma, baseline, seed, info)


class Line(NamedTuple):
    center: float  # mT
    amplitude: float  # signed, negative for inverted lines
    width: float  # half width at half maximum, mT


def lorentzian_lines(grid: np.ndarray, lines: Sequence[Line], mirror: bool = True) -> np.ndarray:
    out = np.zeros_like(grid, dtype=float)
    for line in lines:
        centers = (line.center, -line.center) if mirror else (line.center,)
        for c in centers:
            out += line.amplitude / (1.0 + ((grid - c) / line.width) ** 2)
    return out


def synthesize_line_spectrum(
    lines: Sequence[Line],
    grid=(-20.0, 20.0, 0.005),
    noise_sigma: float = 0.0,
    baseline: tuple[float, float] = (0.0, 0.0),
    seed=0,
    *,
    mirror: bool = True,
    meta: dict | None = None,
) -> Spectrum:
    """Spectrum of Lorentzian lines at prescribed centers (mirrored to -B0 by default).

    Used where the true line centers must be known exactly, e.g. to test the
    peak-center pipeline against injected values.
    """
    grid = _as_grid(grid)
    info = {"model": "lines", "lines": [list(map(float, line)) for line in lines], **(meta or {})}
    return _finish(grid, lorentzian_lines(grid, lines, mirror), noise_sigma, baseline, seed, info)


def _outside(grid, windows):
    keep = np.ones(grid.size, dtype=bool)
    for lo, hi in windows:
        keep &= ~((grid >= lo) & (grid <= hi))
    return keep


def baseline_correct(
    s: Spectrum, exclusion_windows: Sequence[tuple[float, float]] = (), min_points: int = 10
) -> Spectrum:
    """Subtract a straight line fitted to the points outside all exclusion windows."""
    keep = _outside(s.field_grid, exclusion_windows) & s.valid
    if np.count_nonzero(keep) < min_points:
        raise InsufficientDataError(
            f"only {np.count_nonzero(keep)} baseline points left, need {min_points}"
        )
    slope, intercept = np.polyfit(s.field_grid[keep], s.signal[keep], 1)
    corrected = s.signal - (intercept + slope * s.field_grid)
    return s.with_signal(
        corrected, baseline_correction={"intercept": float(intercept), "slope": float(slope)}
    )


@dataclass(frozen=True)
class PeakEstimate:
    center: float
    uncertainty: float
    extrema: tuple[float, ...]
    polarity: str
    height: float = math.nan  # smoothed signal at the strongest extremum

    def to_dict(self) -> dict:
        return {
            "center": self.center,
            "uncertainty": self.uncertainty,
            "extrema": list(self.extrema),
            "polarity": self.polarity,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, d: dict) -> PeakEstimate:
        return cls(d["center"], d["uncertainty"], tuple(d["extrema"]), d["polarity"], d.get("height", math.nan))


def extract_peak_center(
    s: Spectrum,
    window: tuple[float, float],
    polarity: str = "max",
    *,
    smooth: int = 5,
    floor: float = FIELD_FLOOR_20HZ,
    count: int = 3,
    rel_prominence: float = 0.5,
) -> PeakEstimate:
    """Average the field positions of the strongest local extrema inside ``window``.

    The signal is first smoothed with a ``smooth``-point moving average
    (``smooth=1`` disables it).  Of the local maxima (``polarity="max"``) or
    minima (``"min"``) inside the window, those with a prominence of at least
    ``rel_prominence`` times the strongest one are candidates, so noise
    ripples on the flanks of a single line do not count as maxima.  The
    ``count`` candidates with the largest magnitude are kept; ties go to the
    lower field.  The uncertainty adds in
    quadrature the systematic field floor, the grid spacing and the standard
    error of the extremum positions, and is inflated by ``sqrt(count / k)``
    when only ``k < count`` extrema exist.

    Raises:
        InsufficientDataError: if no extremum of the requested polarity is found.
    """
    if polarity not in ("max", "min"):
        raise ValueError(f"polarity must be 'max' or 'min', got {polarity!r}")
    lo, hi = window
    if lo < s.field_grid[0] or hi > s.field_grid[-1] or hi <= lo:
        raise ValueError(f"window {window} not inside the field range of the spectrum")
    ok = s.valid
    fields, values = s.field_grid[ok], s.signal[ok]
    if smooth > 1:
        values = uniform_filter1d(values, size=smooth, mode="nearest")
    inside = np.flatnonzero((fields >= lo) & (fields <= hi))
    if inside.size < 3:
        raise InsufficientDataError(f"fewer than three samples in window {window}")
    sign = 1.0 if polarity == "max" else -1.0
    local = sign * values[inside]
    found, props = find_peaks(local, prominence=0.0)
    if found.size == 0:
        raise InsufficientDataError(f"no local {polarity}imum in window {window}")
    prominence = props["prominences"]
    found = found[prominence >= rel_prominence * prominence.max()]
    order = np.argsort(-local[found], kind="stable")
    chosen = np.sort(found[order[:count]])
    positions = fields[inside][chosen]
    k = positions.size
    spacing = float(np.median(np.diff(fields[inside])))
    spread = float(np.std(positions)) / math.sqrt(k)
    sigma = math.sqrt(floor**2 + spacing**2 + spread**2) * math.sqrt(count / k)
    height = float(sign * local[found[order[0]]])
    return PeakEstimate(float(np.mean(positions)), sigma, tuple(map(float, positions)), polarity, height)


class Calibration(NamedTuple):
    scale: float
    offset: float


def calibrate_field_axis(
    low_drive_spectrum: Spectrum,
    drive: DriveParams,
    *,
    halfwidth: float | None = None,
    polarity: str = "max",
    **peak_kwargs,
) -> Calibration:
    """Affine correction sending the measured +/- one-photon centers to +/- w/g.

    The returned map ``B_true = scale * B_measured + offset`` applies to every
    spectrum of the same measurement series.
    """
    ref = drive.reference_field
    half = halfwidth if halfwidth is not None else 0.2 * ref
    peaks = []
    for side in (+1, -1):
        window = (side * ref - half, side * ref + half)
        window = (max(window[0], low_drive_spectrum.field_grid[0]), min(window[1], low_drive_spectrum.field_grid[-1]))
        if window[1] <= window[0]:
            raise InsufficientDataError(f"spectrum does not cover the {'+' if side > 0 else '-'} one-photon line")
        try:
            peaks.append(extract_peak_center(low_drive_spectrum, window, polarity, **peak_kwargs).center)
        except InsufficientDataError as exc:
            raise InsufficientDataError(
                f"one-photon peak missing at {'positive' if side > 0 else 'negative'} field: {exc}"
            ) from exc
    return calibration_from_peaks(peaks[0], peaks[1], ref)


def calibration_from_peaks(plus: float, minus: float, reference: float) -> Calibration:
    if plus <= minus:
        raise ValueError(f"positive-field peak {plus} must lie above negative-field peak {minus}")
    scale = 2.0 * reference / (plus - minus)
    return Calibration(scale, reference - scale * plus)


def apply_calibration(s: Spectrum, cal: Calibration) -> Spectrum:
    history = list(s.meta.get("calibration", []))
    history.append([cal.scale, cal.offset])
    return Spectrum(cal.scale * s.field_grid + cal.offset, s.signal, {**s.meta, "calibration": history})


def resonance_window(n: int, drive: DriveParams, halfwidth: float) -> tuple[float, float]:
    """Search window around the expected n-photon center."""
    c = analytic_center(n, drive)
    return c - halfwidth, c + halfwidth
