"""Statistics on extracted line centers: averaging, shifts, ratio and angular fits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .analytic import angular_factor, shift_ratio
from .drive import DriveParams
from .errors import InsufficientDataError
from .spectra import PeakEstimate


class Average(NamedTuple):
    mean: float
    uncertainty: float
    method: str  # "weighted" or "scatter"


def consistency_average(values: Sequence[tuple[float, float]]) -> Average:
    """Combine (value, sigma) pairs.

    If every pair agrees within two standard deviations (the larger of the
    two sigmas) the inverse-variance weighted mean is returned; otherwise the
    plain mean with the standard error of the sample scatter.
    """
    if len(values) == 0:
        raise InsufficientDataError("nothing to average")
    v = np.array([x for x, _ in values], dtype=float)
    s = np.array([e for _, e in values], dtype=float)
    if np.any(s <= 0):
        raise ValueError("uncertainties must be positive")
    gaps = np.abs(v[:, None] - v[None, :])
    limits = 2.0 * np.maximum(s[:, None], s[None, :])
    if np.all(gaps <= limits):
        w = 1.0 / s**2
        return Average(float(np.sum(w * v) / np.sum(w)), float(1.0 / math.sqrt(np.sum(w))), "weighted")
    return Average(float(np.mean(v)), float(np.std(v, ddof=1) / math.sqrt(v.size)), "scatter")


@dataclass(frozen=True)
class ShiftRecord:
    n: int
    drive_proxy: float
    shift: float
    uncertainty: float
    reference_field: float  # w/g used for the shift, mT

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "drive_proxy": self.drive_proxy,
            "shift": self.shift,
            "uncertainty": self.uncertainty,
            "reference_field": self.reference_field,
        }


def compute_shifts(
    centers: Iterable[tuple[int, float, PeakEstimate]], drive: DriveParams
) -> list[ShiftRecord]:
    """Turn tagged (n, drive_proxy, peak) triples into shifts ``n w/g - center``."""
    ref = drive.reference_field
    out = []
    for n, proxy, peak in centers:
        if int(n) != n or n < 1:
            raise ValueError(f"photon order must be a positive integer, got {n!r}")
        out.append(ShiftRecord(int(n), proxy, n * ref - peak.center, peak.uncertainty, ref))
    return out


@dataclass(frozen=True)
class RatioReport:
    pair: tuple[int, int]  # (n, m): slope of n-photon shift against m-photon shift
    slope: float
    slope_uncertainty: float
    predicted: Fraction
    point_count: int

    def to_dict(self) -> dict:
        return {
            "pair": list(self.pair),
            "slope": self.slope,
            "slope_uncertainty": self.slope_uncertainty,
            "predicted": f"{self.predicted.numerator}/{self.predicted.denominator}",
            "predicted_value": float(self.predicted),
            "point_count": self.point_count,
        }


def _by_proxy(records: Sequence[ShiftRecord], label: str) -> dict:
    table = {}
    for r in records:
        if r.drive_proxy in table:
            raise ValueError(f"duplicate drive_proxy {r.drive_proxy!r} in {label}; average first")
        table[r.drive_proxy] = r
    return table


def fit_ratio_through_origin(
    x: Sequence[ShiftRecord], y: Sequence[ShiftRecord], *, max_iter: int = 100
) -> RatioReport:
    """Weighted slope of ``y`` shifts against ``x`` shifts with the intercept fixed at zero.

    Records pair by identical ``drive_proxy``.  Weights use the effective
    variance ``sigma_y^2 + slope^2 sigma_x^2``, iterated to self-consistency.
    """
    xs, ys = _by_proxy(x, "x"), _by_proxy(y, "y")
    if set(xs) != set(ys):
        raise ValueError(f"unpaired drive_proxy values: {sorted(set(xs) ^ set(ys), key=str)}")
    if len(xs) < 2:
        raise InsufficientDataError(f"need at least 2 pairs, got {len(xs)}")
    m = {r.n for r in x}
    n = {r.n for r in y}
    if len(m) != 1 or len(n) != 1:
        raise ValueError("each side must hold a single photon order")
    (m,), (n,) = m, n
    keys = sorted(xs)
    xv = np.array([xs[k].shift for k in keys])
    yv = np.array([ys[k].shift for k in keys])
    sx = np.array([xs[k].uncertainty for k in keys])
    sy = np.array([ys[k].uncertainty for k in keys])
    if not np.any(xv):
        raise InsufficientDataError("all x shifts are zero")

    slope = float(np.sum(xv * yv) / np.sum(xv * xv))
    if np.all(sx == 0) and np.all(sy == 0):
        resid = yv - slope * xv
        dof = max(len(keys) - 1, 1)
        err = math.sqrt(float(np.sum(resid**2)) / dof / float(np.sum(xv * xv)))
    else:
        for _ in range(max_iter):
            w = 1.0 / (sy**2 + slope**2 * sx**2)
            new = float(np.sum(w * xv * yv) / np.sum(w * xv * xv))
            done = abs(new - slope) <= 1e-14 * abs(new)
            slope = new
            if done:
                break
        w = 1.0 / (sy**2 + slope**2 * sx**2)
        err = 1.0 / math.sqrt(float(np.sum(w * xv * xv)))
    return RatioReport((n, m), slope, err, shift_ratio(n, m), len(keys))


@dataclass(frozen=True)
class AngularFit:
    a: float
    b: float
    goodness: float  # coefficient of determination
    a_err: float
    b_err: float

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "goodness": self.goodness, "a_err": self.a_err, "b_err": self.b_err}


def fit_angular_law(points: Sequence[tuple[float, float]]) -> AngularFit:
    """Least-squares line ``intensity = a x + b`` with ``x = |sin t - (9/8) sin^3 t|``."""
    if len(points) < 3:
        raise InsufficientDataError(f"need at least 3 angles, got {len(points)}")
    theta = np.array([p[0] for p in points], dtype=float)
    y = np.array([p[1] for p in points], dtype=float)
    x = angular_factor(theta)
    if np.ptp(x) < 1e-12:
        raise ValueError("angular factor is constant over the given angles")
    design = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    ssr = float(resid @ resid)
    sst = float(np.sum((y - y.mean()) ** 2))
    goodness = 1.0 - ssr / sst if sst > 0 else 1.0
    cov = ssr / max(len(y) - 2, 1) * np.linalg.inv(design.T @ design)
    return AngularFit(float(coef[0]), float(coef[1]), goodness, float(math.sqrt(cov[0, 0])), float(math.sqrt(cov[1, 1])))
