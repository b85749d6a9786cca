"""Spectrum CSV files and JSON reports.

Spectrum files start with ``# key = value`` comment lines, one per metadata
entry with the value JSON-encoded, followed by the header ``b0_mT,signal`` and
one row per grid point.  Floats are written with ``repr`` so that reading a
file back reproduces the numeric columns bit for bit.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .spectra import Spectrum

HEADER = "b0_mT,signal"


class SpectrumFormatError(ValueError):
    pass


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else repr(float(x))


def format_spectrum(s: Spectrum) -> str:
    lines = [f"# {key} = {json.dumps(s.meta[key], sort_keys=True)}" for key in sorted(s.meta)]
    lines.append(HEADER)
    lines += [f"{_fmt(b)},{_fmt(v)}" for b, v in zip(s.field_grid, s.signal)]
    return "\n".join(lines) + "\n"


def write_spectrum(s: Spectrum, path) -> Path:
    path = Path(path)
    path.write_text(format_spectrum(s))
    return path


def parse_spectrum(text: str, source: str = "<string>") -> Spectrum:
    meta, fields, values = {}, [], []
    seen_header = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            if not sep:
                continue
            try:
                meta[key.strip()] = json.loads(value.strip())
            except json.JSONDecodeError:
                meta[key.strip()] = value.strip()
            continue
        if not seen_header:
            if line.replace(" ", "") != HEADER:
                raise SpectrumFormatError(f"{source}:{lineno}: expected header {HEADER!r}, got {line!r}")
            seen_header = True
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise SpectrumFormatError(f"{source}:{lineno}: expected 2 columns, got {len(parts)}")
        try:
            fields.append(float(parts[0]))
            values.append(float(parts[1]))
        except ValueError as exc:
            raise SpectrumFormatError(f"{source}:{lineno}: {exc}") from None
    if not seen_header:
        raise SpectrumFormatError(f"{source}: missing header {HEADER!r}")
    meta.setdefault("source", "ingested")
    try:
        return Spectrum(np.array(fields), np.array(values), meta)
    except ValueError as exc:
        raise SpectrumFormatError(f"{source}: {exc}") from None


def read_spectrum(path) -> Spectrum:
    path = Path(path)
    return parse_spectrum(path.read_text(), str(path))


def _default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default, allow_nan=True) + "\n"


def write_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(dumps(obj))
    return path
