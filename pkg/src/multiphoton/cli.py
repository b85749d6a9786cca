"""Command-line entry point: ``multiphoton {simulate,locate,analyze,angular}``.

Every run is driven by one JSON config document; ``--seed``, ``--threads``
and ``--out`` override the matching config fields.  The fully resolved config
is written next to the outputs so that the run can be repeated exactly.
Logs go to stderr; errors additionally emit one JSON line on stderr.

Exit status: 0 success, 2 invalid config or usage, 3 solver failure,
4 I/O failure, 5 partial failure (some inputs could not be processed).
"""

from __future__ import annotations

import argparse
import copy
import csv
import io as _io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from itertools import combinations
from pathlib import Path

import numpy as np

from . import io
from .analysis import (
    compute_shifts,
    consistency_average,
    fit_angular_law,
    fit_ratio_through_origin,
)
from .analytic import analytic_center, angular_factor
from .drive import DriveParams, default_gamma
from .errors import ConvergenceError, InsufficientDataError, ResonanceNotFound
from .floquet import angular_scan, default_window, locate_resonance
from .liouville import RelaxationParams
from .spectra import (
    Line,
    PeakEstimate,
    apply_calibration,
    baseline_correct,
    extract_peak_center,
    synthesize_line_spectrum,
    synthesize_spectrum,
)

log = logging.getLogger("multiphoton")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_IO = 4
EXIT_PARTIAL = 5

COMMANDS = ("simulate", "locate", "analyze", "angular")

DEFAULTS = {
    "simulate": {
        "model": "liouville",
        "freq": 100.0,
        "gamma": None,
        "b1": [1.0, 1.75, 2.5, 3.25, 4.0],
        "theta": [90.0],
        "grid": {"start": -20.0, "stop": 20.0, "step": 0.02},
        "relax": {"t1": 10.0, "t2": 1.0, "p0": 1e-3},
        "noise_sigma": 0.0,
        "baseline": [0.0, 0.0],
        "steps": 200,
        "lines": {
            "orders": [1, 2, 3],
            "centers": "analytic",
            "width": 0.05,
            "amplitude": {"1": 1.0, "2": 0.3, "3": 0.1},
        },
    },
    "locate": {
        "freq": 100.0,
        "gamma": None,
        "orders": [1, 2, 3],
        "b1": [0.5, 1.0, 1.5, 2.0, 2.5],
        "theta": [90.0],
        "window_scale": 3.0,
    },
    "analyze": {
        "freq": 100.0,
        "gamma": None,
        "inputs": [],
        "orders": [1, 2, 3],
        "sides": ["+", "-"],
        "window_halfwidth": 0.25,
        "exclusion_halfwidth": 0.5,
        "windows": {},
        "polarity": {"1": "max", "2": "max", "3": "max"},
        "smooth": 5,
        "floor": 0.02,
        "min_proxy": {},
        "calibration": None,
    },
    "angular": {
        "freq": 100.0,
        "gamma": None,
        "n": 3,
        "b1": 1.0,
        "theta": {"start": 65.0, "stop": 90.0, "step": 6.0},
        "min_gap": 1e-8,
    },
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Serializable run description: command, seed, worker count and parameters."""

    command: str
    seed: int = 0
    threads: int = 1
    out: str = "out"
    params: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {"command": self.command, "seed": self.seed, "threads": self.threads, "out": self.out, **self.params}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> RunConfig:
        doc = json.loads(text)
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        command = doc.pop("command", None)
        if command not in COMMANDS:
            raise ConfigError(f"unknown or missing command {command!r}")
        return cls(command, doc.pop("seed", 0), doc.pop("threads", 1), doc.pop("out", "out"), doc)

    def resolved(self) -> RunConfig:
        """Copy with every parameter filled from the command defaults."""
        params = copy.deepcopy(DEFAULTS[self.command])
        unknown = set(self.params) - set(params)
        if unknown:
            raise ConfigError(f"unknown {self.command} parameters: {sorted(unknown)}")
        for key, value in self.params.items():
            if isinstance(params[key], dict) and isinstance(value, dict) and key not in ("windows", "min_proxy"):
                params[key].update(value)
            else:
                params[key] = value
        if params.get("gamma") is None:
            params["gamma"] = default_gamma()
        return RunConfig(self.command, int(self.seed), int(self.threads), str(self.out), params)


def _error_line(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


def _pmap(func, items, threads):
    items = list(items)
    if threads > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(func, items))
    return [func(item) for item in items]


def _grid_values(spec) -> list[float]:
    if isinstance(spec, dict):
        start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
        if step <= 0 or stop < start:
            raise ConfigError(f"invalid range {spec}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        values = [start + i * step for i in range(count)]
        if stop - values[-1] > 1e-9:
            values.append(stop)
        return values
    return [float(v) for v in spec]


def _drive(params, b1, theta) -> DriveParams:
    try:
        return DriveParams(b1=float(b1), freq=float(params["freq"]), theta=float(theta), gamma=float(params["gamma"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


# simulate -----------------------------------------------------------------


def _simulate_one(job, params, seed):
    index, b1, theta = job
    drive = _drive(params, b1, theta)
    stream = [seed, index]
    extra = {"drive": drive.to_dict(), "drive_proxy": drive.b1}
    if params["model"] == "liouville":
        relax = RelaxationParams(**params["relax"])
        return synthesize_spectrum(
            drive, relax, params["grid"], params["noise_sigma"], tuple(params["baseline"]), stream,
            steps=int(params["steps"]), meta=extra,
        )
    spec = params["lines"]
    lines = []
    for n in spec["orders"]:
        if drive.theta == 0.0:
            break
        if spec["centers"] == "floquet":
            center = locate_resonance(int(n), drive).center
        else:
            center = analytic_center(int(n), drive)
        lines.append(Line(center, float(spec["amplitude"][str(n)]), float(spec["width"])))
    return synthesize_line_spectrum(
        lines, params["grid"], params["noise_sigma"], tuple(params["baseline"]), stream,
        meta={**extra, "centers": spec["centers"], "orders": list(spec["orders"])},
    )


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    p = cfg.params
    if p["model"] not in ("liouville", "lines"):
        raise ConfigError(f"model must be 'liouville' or 'lines', got {p['model']!r}")
    if p["model"] == "lines" and p["lines"]["centers"] not in ("analytic", "floquet"):
        raise ConfigError("lines.centers must be 'analytic' or 'floquet'")
    b1s, thetas = _grid_values(p["b1"]), _grid_values(p["theta"])
    if not b1s or not thetas:
        raise ConfigError("b1 and theta lists must not be empty")
    jobs = [(i, b1, th) for i, (th, b1) in enumerate((th, b1) for th in thetas for b1 in b1s)]
    for _, b1, th in jobs:
        _drive(p, b1, th)
    spectra = _pmap(partial(_simulate_one, params=p, seed=cfg.seed), jobs, cfg.threads)
    files = []
    for (index, b1, theta), s in zip(jobs, spectra):
        name = f"spectrum_{index:03d}_b1-{b1:g}_theta-{theta:g}.csv"
        io.write_spectrum(s, out / name)
        files.append({"path": name, "b1": b1, "theta": theta, "seed": [cfg.seed, index],
                      "failed_points": s.meta.get("failed_points", 0)})
        log.info("wrote %s", name)
    io.write_json({"command": "simulate", "files": files}, out / "manifest.json")
    return EXIT_OK


# locate --------------------------------------------------------------------

LOCATE_COLUMNS = ["n", "b1_mT", "theta_deg", "center_mT", "gap", "analytic_center_mT", "shift_mT", "status"]


def _locate_one(job, params):
    n, b1, theta = job
    drive = _drive(params, b1, theta)
    row = {"n": n, "b1_mT": b1, "theta_deg": theta, "analytic_center_mT": analytic_center(n, drive)}
    try:
        fix = locate_resonance(n, drive, default_window(n, drive, params["window_scale"]))
    except (ResonanceNotFound, ConvergenceError) as exc:
        row.update(center_mT="", gap="", shift_mT="", status=f"failed: {exc}")
        return row
    row.update(
        center_mT=fix.center, gap=fix.gap, shift_mT=n * drive.reference_field - fix.center,
        status="ok" if fix.resonant else "no-resonance",
    )
    return row


def _csv_text(columns, rows) -> str:
    buf = _io.StringIO()
    writer = csv.DictWriter(buf, columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in row.items()})
    return buf.getvalue()


def cmd_locate(cfg: RunConfig, out: Path) -> int:
    p = cfg.params
    orders = [int(n) for n in p["orders"]]
    if not orders or any(n < 1 for n in orders):
        raise ConfigError("orders must be a non-empty list of positive integers")
    b1s, thetas = _grid_values(p["b1"]), _grid_values(p["theta"])
    if not b1s or not thetas:
        raise ConfigError("b1 and theta lists must not be empty")
    jobs = [(n, b1, th) for n in orders for th in thetas for b1 in b1s]
    for _, b1, th in jobs:
        _drive(p, b1, th)
    rows = _pmap(partial(_locate_one, params=p), jobs, cfg.threads)
    failed = sum(1 for r in rows if r["status"].startswith("failed"))
    if failed:
        log.warning("%d of %d resonance searches failed (empty cells)", failed, len(rows))
    (out / "resonances.csv").write_text(_csv_text(LOCATE_COLUMNS, rows))
    io.write_json({"command": "locate", "files": [{"path": "resonances.csv", "rows": len(rows), "failed": failed}]},
                  out / "manifest.json")
    return EXIT_OK


# analyze -------------------------------------------------------------------


def _series_drive(p, meta) -> DriveParams | None:
    d = meta.get("drive")
    if not isinstance(d, dict):
        return None
    return DriveParams(b1=d["b1"], freq=d.get("freq", p["freq"]), theta=d.get("theta", 90.0), gamma=d.get("gamma", p["gamma"]))


def _analyze_file(path, params):
    """Peaks of one spectrum file; returns (path, records, error)."""
    try:
        s = io.read_spectrum(path)
        if params["calibration"]:
            cal = params["calibration"]
            from .spectra import Calibration

            s = apply_calibration(s, Calibration(cal["scale"], cal["offset"]))
        drive = _series_drive(params, s.meta)
        proxy = s.meta.get("drive_proxy", drive.b1 if drive else None)
        if proxy is None:
            raise ValueError("spectrum carries no drive_proxy or drive metadata")
        lo_field, hi_field = s.field_grid[0], s.field_grid[-1]
        windows = {}
        for n in params["orders"]:
            if str(n) in params["windows"]:
                lo, hi = params["windows"][str(n)]
            elif drive is not None:
                c = analytic_center(int(n), drive)
                lo, hi = c - params["window_halfwidth"], c + params["window_halfwidth"]
            else:
                raise ValueError(f"no window for order {n}: give windows or drive metadata")
            for side in params["sides"]:
                w = (lo, hi) if side == "+" else (-hi, -lo)
                if w[0] >= lo_field and w[1] <= hi_field:
                    windows[(int(n), side)] = w
        exclusions = []
        half = params["exclusion_halfwidth"]
        for (n, side), (lo, hi) in windows.items():
            mid = 0.5 * (lo + hi)
            exclusions.append((min(lo, mid - half), max(hi, mid + half)))
        corrected = baseline_correct(s, exclusions)
        records = []
        for (n, side), w in sorted(windows.items()):
            peak = extract_peak_center(
                corrected, w, params["polarity"].get(str(n), "max"),
                smooth=int(params["smooth"]), floor=float(params["floor"]),
            )
            if side == "-":
                peak = PeakEstimate(-peak.center, peak.uncertainty, tuple(-x for x in peak.extrema), peak.polarity, peak.height)
            records.append({"n": n, "side": side, "drive_proxy": proxy, "peak": peak.to_dict()})
        return str(path), records, None
    except (OSError, ValueError, KeyError, TypeError) as exc:
        return str(path), [], f"{type(exc).__name__}: {exc}"


def cmd_analyze(cfg: RunConfig, out: Path, inputs=()) -> int:
    p = cfg.params
    paths = list(p["inputs"]) + list(inputs)
    if not paths:
        raise ConfigError("no input spectra given")
    results = _pmap(partial(_analyze_file, params=p), paths, cfg.threads)
    failures = {path: err for path, _, err in results if err}
    for path, err in failures.items():
        log.error("%s: %s", path, err)
        _error_line("input", f"{path}: {err}")
    if len(failures) == len(paths):
        return EXIT_IO

    groups: dict = {}
    for _, records, _ in results:
        for r in records:
            groups.setdefault((r["n"], r["drive_proxy"]), []).append(PeakEstimate.from_dict(r["peak"]))
    averaged = []
    for (n, proxy), peaks in sorted(groups.items()):
        mean, sigma, method = consistency_average([(pk.center, pk.uncertainty) for pk in peaks])
        averaged.append((n, proxy, PeakEstimate(mean, sigma, (mean,), peaks[0].polarity), method, len(peaks)))

    ref_drive = DriveParams(b1=0.0, freq=float(p["freq"]), gamma=float(p["gamma"]))
    shifts = compute_shifts([(n, proxy, pk) for n, proxy, pk, _, _ in averaged], ref_drive)
    cut = {int(k): float(v) for k, v in p["min_proxy"].items()}
    shifts = [s for s in shifts if s.drive_proxy >= cut.get(s.n, -math.inf)]

    by_order: dict = {}
    for s in shifts:
        by_order.setdefault(s.n, []).append(s)
    ratios = []
    for m, n in combinations(sorted(by_order), 2):
        common = {s.drive_proxy for s in by_order[m]} & {s.drive_proxy for s in by_order[n]}
        xs = [s for s in by_order[m] if s.drive_proxy in common]
        ys = [s for s in by_order[n] if s.drive_proxy in common]
        try:
            ratios.append(fit_ratio_through_origin(xs, ys))
        except InsufficientDataError as exc:
            log.warning("ratio %d/%d skipped: %s", n, m, exc)
    for r in ratios:
        n, m = r.pair
        print(f"ratio {n}/{m}: slope = {r.slope:.6g} +/- {r.slope_uncertainty:.3g} "
              f"(predicted {r.predicted} = {float(r.predicted):.4g}, {r.point_count} points)")

    io.write_json({"files": [{"path": path, "peaks": recs, "error": err} for path, recs, err in results]},
                  out / "peaks.json")
    io.write_json({"shifts": shifts}, out / "shifts.json")
    io.write_json({"ratios": ratios}, out / "ratios.json")
    rows = [{"n": s.n, "drive_proxy": s.drive_proxy, "center": s.n * s.reference_field - s.shift,
             "shift": s.shift, "uncertainty": s.uncertainty} for s in shifts]
    (out / "shifts.csv").write_text(_csv_text(["n", "drive_proxy", "center", "shift", "uncertainty"], rows))
    io.write_json({"command": "analyze", "inputs": paths, "failed": sorted(failures),
                   "files": ["peaks.json", "shifts.json", "ratios.json", "shifts.csv"]}, out / "manifest.json")
    return EXIT_PARTIAL if failures else EXIT_OK


# angular -------------------------------------------------------------------

ANGULAR_COLUMNS = ["theta_deg", "x", "intensity", "center_mT", "gap", "flagged"]


def cmd_angular(cfg: RunConfig, out: Path) -> int:
    p = cfg.params
    thetas = _grid_values(p["theta"])
    if not thetas:
        raise ConfigError("theta grid is empty")
    drive = _drive(p, p["b1"], 90.0)
    n = int(p["n"])
    scan = _pmap(partial(_angular_one, n=n, drive=drive, min_gap=float(p["min_gap"])), thetas, cfg.threads)
    rows = [{"theta_deg": pt.theta, "x": angular_factor(pt.theta), "intensity": 0.5 * pt.gap,
             "center_mT": pt.center, "gap": pt.gap, "flagged": int(pt.flagged)} for pt in scan]
    (out / "angular.csv").write_text(_csv_text(ANGULAR_COLUMNS, rows))
    usable = [(r["theta_deg"], r["intensity"]) for r in rows if not r["flagged"]]
    fit = fit_angular_law(usable)
    ratio = angular_factor(90.0) / angular_factor(69.0)
    report = {
        "fit": fit,
        "n": n,
        "b1": drive.b1,
        "points": len(usable),
        "flagged": len(rows) - len(usable),
        "amplitude_ratio_90_69": ratio,
        "sqrt_amplitude_ratio_90_69": math.sqrt(ratio),
        "reported_intensity_ratio_90_69": 2.5,
        "measured_intensity_ratio_90_69": {"value": 4.0, "uncertainty": 2.0},
        "note": (
            "amplitude_ratio_90_69 is the ratio of the angular factor at 90 and 69 degrees. "
            "The quoted intensity ratio of 2.5 is closer to its square root, which would fit a "
            "saturated line whose intensity grows like the square root of the coupling. "
            "The discrepancy is reported, not resolved."
        ),
    }
    io.write_json(report, out / "angular_fit.json")
    io.write_json({"command": "angular", "files": ["angular.csv", "angular_fit.json"]}, out / "manifest.json")
    print(f"angular fit: a = {fit.a:.6g} +/- {fit.a_err:.2g}, b = {fit.b:.3g} +/- {fit.b_err:.2g}, "
          f"R^2 = {fit.goodness:.6f}; u(90)/u(69) = {ratio:.3f}")
    return EXIT_OK


def _angular_one(theta, n, drive, min_gap):
    return angular_scan(n, drive, [theta], min_gap=min_gap)[0]


# entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multiphoton", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", type=Path, help="JSON run config")
        cmd.add_argument("--out", type=Path, help="output directory")
        cmd.add_argument("--seed", type=int)
        cmd.add_argument("--threads", type=int)
        cmd.add_argument("-v", "--verbose", action="store_true")
        if name == "analyze":
            cmd.add_argument("inputs", nargs="*", type=Path, help="spectrum CSV files")
    return parser


HANDLERS = {"simulate": cmd_simulate, "locate": cmd_locate, "angular": cmd_angular}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config:
            cfg = RunConfig.from_json(args.config.read_text())
            if cfg.command != args.command:
                raise ConfigError(f"config is for {cfg.command!r}, not {args.command!r}")
        else:
            cfg = RunConfig(args.command)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.threads is not None:
            cfg.threads = args.threads
        if args.out is not None:
            cfg.out = str(args.out)
        cfg = cfg.resolved()
        if cfg.threads < 1:
            raise ConfigError("threads must be >= 1")
    except OSError as exc:
        _error_line("io", str(exc))
        return EXIT_IO
    except (ConfigError, json.JSONDecodeError, ValueError) as exc:
        _error_line("validation", str(exc))
        return EXIT_VALIDATION

    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(cfg.to_json())
        if cfg.command == "analyze":
            return cmd_analyze(cfg, out, [str(x) for x in args.inputs])
        return HANDLERS[cfg.command](cfg, out)
    except (ConfigError, KeyError, TypeError) as exc:
        _error_line("validation", str(exc))
        return EXIT_VALIDATION
    except (ConvergenceError, ResonanceNotFound, InsufficientDataError) as exc:
        _error_line("solver", str(exc))
        return EXIT_SOLVER
    except OSError as exc:
        _error_line("io", str(exc))
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
