"""CSV and JSON interchange formats.

Every float is written with 17 significant digits so that files round-trip
exactly.

Streamline samples (CSV)::

    line_id,k,x,y[,z],vx,vy[,vz]

Streamline samples (JSON): a list (or ``{"streamlines": [...]}``) of objects
with ``points``, ``velocities`` and an optional ``id``.

Sampled curve (CSV, written by ``curves``)::

    s,x,y[,z],dx,dy[,dz]

Read back as a single streamline whose segment tangents are ``ds * dphi/ds``
(uniform ``s`` spacing is required), i.e. derivatives with respect to the
local segment parameter.

Spline coefficients (CSV)::

    line_id,segment,component,a3,a2,a1,a0

Sampled spline (CSV)::

    line_id,s,x,y[,z],dx,dy[,dz]

ODE solutions (CSV)::

    line_id,s,u,udot,segment_index
"""

from __future__ import annotations

import csv
import io as _io
import json
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .errors import FormatError, SampleError, StreamflowError
from .geometry import PolylineSample
from .hermite import HermiteSpline

AXES = ("x", "y", "z")


def fmt(x):
    return format(float(x), ".17g")


@contextmanager
def _open_out(path):
    if path is None or str(path) == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _read_text(path):
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read input: {exc.strerror}", path=path) from None


def _float(value, line, path, column):
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise FormatError(f"column {column!r}: not a number: {value!r}", line=line, path=path) from None
    if not np.isfinite(out):
        raise FormatError(f"column {column!r}: non-finite value {value!r}", line=line, path=path)
    return out


def _dims_from_header(header, prefix, path):
    dims = [a for a in AXES if f"{prefix}{a}" in header]
    if dims not in (["x", "y"], ["x", "y", "z"]):
        raise FormatError(f"header needs {prefix}x,{prefix}y[,{prefix}z] columns, got {header}", line=1, path=path)
    return len(dims)


def detect_format(path):
    """``"json"``, ``"streamlines"``, ``"curve"`` or ``"coefficients"``."""
    if str(path).lower().endswith(".json"):
        return "json"
    text = _read_text(path)
    first = text.splitlines()[0] if text else ""
    header = [h.strip() for h in first.split(",")]
    if "a3" in header:
        return "coefficients"
    if "line_id" in header and "k" in header:
        return "streamlines"
    if header[:1] == ["s"] and "dx" in header:
        return "curve"
    raise FormatError(f"unrecognised CSV header {first!r}", line=1, path=path)


def _rows(path):
    reader = csv.DictReader(_io.StringIO(_read_text(path)))
    if reader.fieldnames is None:
        raise FormatError("empty file", path=path)
    header = [h.strip() for h in reader.fieldnames]
    reader.fieldnames = header
    for row in reader:
        if None in row or any(v is None for v in row.values()):
            raise FormatError("wrong number of fields", line=reader.line_num, path=path)
        yield reader.line_num, header, row


def _make_sample(line_id, points, vels, path, line=None):
    try:
        return PolylineSample(np.array(points), np.array(vels))
    except StreamflowError as exc:
        index = getattr(exc, "index", None)
        at = f" (point index {index})" if index is not None else ""
        raise SampleError(f"{path}: streamline {line_id}{at}: {exc}", index=index) from None


def read_streamlines_csv(path):
    lines = {}
    header = None
    for line, header, row in _rows(path):
        d = _dims_from_header(header, "", path)
        _dims_from_header(header, "v", path)
        lid = row["line_id"].strip()
        try:
            k = int(row["k"])
        except ValueError:
            raise FormatError(f"column 'k': not an integer: {row['k']!r}", line=line, path=path) from None
        p = [_float(row[a], line, path, a) for a in AXES[:d]]
        v = [_float(row["v" + a], line, path, "v" + a) for a in AXES[:d]]
        entries = lines.setdefault(lid, {})
        if k in entries:
            raise FormatError(f"duplicate k = {k} for streamline {lid}", line=line, path=path)
        entries[k] = (p, v, line)
    if header is None or not lines:
        raise FormatError("no streamline rows", path=path)
    out = []
    for lid, entries in lines.items():
        ks = sorted(entries)
        if ks != list(range(len(ks))):
            missing = sorted(set(range(max(ks) + 1)) - set(ks))
            raise FormatError(f"streamline {lid}: point indices not contiguous from 0 (missing {missing[:5]})", path=path)
        pts = [entries[k][0] for k in ks]
        vel = [entries[k][1] for k in ks]
        out.append((lid, _make_sample(lid, pts, vel, path)))
    return out


def read_streamlines_json(path):
    try:
        data = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", line=exc.lineno, path=path) from None
    if isinstance(data, dict):
        data = data.get("streamlines")
    if not isinstance(data, list) or not data:
        raise FormatError("expected a non-empty list of streamlines", path=path)
    out = []
    for r, entry in enumerate(data):
        if not isinstance(entry, dict) or "points" not in entry or "velocities" not in entry:
            raise FormatError(f"streamline {r}: needs 'points' and 'velocities'", path=path)
        lid = str(entry.get("id", r))
        try:
            pts = np.array(entry["points"], dtype=float)
            vel = np.array(entry["velocities"], dtype=float)
        except (TypeError, ValueError):
            raise FormatError(f"streamline {lid}: non-numeric or ragged arrays", path=path) from None
        out.append((lid, _make_sample(lid, pts, vel, path)))
    return out


def read_curve_csv(path, line_id="0"):
    s_vals, pts, tans = [], [], []
    for line, header, row in _rows(path):
        d = _dims_from_header(header, "", path)
        _dims_from_header(header, "d", path)
        s_vals.append(_float(row["s"], line, path, "s"))
        pts.append([_float(row[a], line, path, a) for a in AXES[:d]])
        tans.append([_float(row["d" + a], line, path, "d" + a) for a in AXES[:d]])
    if len(s_vals) < 2:
        raise FormatError("a sampled curve needs at least two rows", path=path)
    s = np.array(s_vals)
    ds = np.diff(s)
    span = s[-1] - s[0]
    if not span > 0 or np.max(np.abs(ds - span / (len(s) - 1))) > 1e-9 * max(1.0, abs(span)):
        raise FormatError("curve samples must be uniformly spaced and increasing in s", path=path)
    step = span / (len(s) - 1)
    return [(line_id, _make_sample(line_id, pts, step * np.array(tans), path))]


def read_streamlines(path):
    """``[(line_id, PolylineSample), ...]`` from any supported sample format."""
    kind = detect_format(path)
    if kind == "json":
        return read_streamlines_json(path)
    if kind == "streamlines":
        return read_streamlines_csv(path)
    if kind == "curve":
        return read_curve_csv(path)
    raise FormatError("expected streamline samples, got a coefficient file", path=path)


def read_coefficients(path):
    """``[(line_id, HermiteSpline), ...]`` from a coefficient CSV."""
    lines = {}
    for line, header, row in _rows(path):
        missing = {"line_id", "segment", "component", "a3", "a2", "a1", "a0"} - set(header)
        if missing:
            raise FormatError(f"missing columns {sorted(missing)}", line=1, path=path)
        lid = row["line_id"].strip()
        try:
            m, c = int(row["segment"]), int(row["component"])
        except ValueError:
            raise FormatError("segment/component must be integers", line=line, path=path) from None
        quad = [_float(row[a], line, path, a) for a in ("a3", "a2", "a1", "a0")]
        seg = lines.setdefault(lid, {})
        if (m, c) in seg:
            raise FormatError(f"duplicate segment {m} component {c}", line=line, path=path)
        seg[(m, c)] = quad
    out = []
    for lid, seg in lines.items():
        k = max(m for m, _ in seg) + 1
        d = max(c for _, c in seg) + 1
        if len(seg) != k * d:
            raise FormatError(f"streamline {lid}: incomplete coefficient table", path=path)
        coeffs = np.array([[seg[(m, c)] for c in range(d)] for m in range(k)])
        out.append((lid, HermiteSpline(coeffs)))
    return out


def write_curve_csv(path, s, points, tangents):
    d = points.shape[1]
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["s", *AXES[:d], *("d" + a for a in AXES[:d])])
        for si, p, t in zip(s, points, tangents):
            w.writerow([fmt(si), *map(fmt, p), *map(fmt, t)])


def write_streamlines_csv(path, named_samples):
    named_samples = list(named_samples)
    d = named_samples[0][1].dim
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["line_id", "k", *AXES[:d], *("v" + a for a in AXES[:d])])
        for lid, smp in named_samples:
            for k, (p, v) in enumerate(zip(smp.points, smp.velocities)):
                w.writerow([lid, k, *map(fmt, p), *map(fmt, v)])


def write_coefficients_csv(path, named_splines):
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["line_id", "segment", "component", "a3", "a2", "a1", "a0"])
        for lid, sp in named_splines:
            for m, seg in enumerate(sp.coeffs):
                for c, quad in enumerate(seg):
                    w.writerow([lid, m, c, *map(fmt, quad)])


def write_spline_samples_csv(path, named_splines, resolution):
    named_splines = list(named_splines)
    d = named_splines[0][1].dim
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["line_id", "s", *AXES[:d], *("d" + a for a in AXES[:d])])
        for lid, sp in named_splines:
            s = np.linspace(0.0, 1.0, resolution)
            for si, p, t in zip(s, sp.eval(s), sp.derivative(s)):
                w.writerow([lid, fmt(si), *map(fmt, p), *map(fmt, t)])


def write_solutions_csv(path, named_solutions):
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["line_id", "s", "u", "udot", "segment_index"])
        for lid, sol in named_solutions:
            for s, u, v, m in zip(sol.s, sol.u, sol.udot, sol.segment):
                w.writerow([lid, fmt(s), fmt(u), fmt(v), int(m)])


def read_pressure_samples(path):
    s, q = [], []
    for line, header, row in _rows(path):
        if not {"s", "q"} <= set(header):
            raise FormatError("pressure samples need columns s,q", line=1, path=path)
        s.append(_float(row["s"], line, path, "s"))
        q.append(_float(row["q"], line, path, "q"))
    if len(s) < 2:
        raise FormatError("need at least two pressure samples", path=path)
    return np.array(s), np.array(q)


def write_speedup_csv(path, reports, timings=True):
    """Rows per (M, strategy); without timings only the deterministic fields remain."""
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        if timings:
            w.writerow(["kind", "strategy", "workers", "M", "elapsed_ms", "speedup", "reliable", "peak_kib"])
        else:
            w.writerow(["kind", "strategy", "workers", "M"])
        for rep in reports:
            for row in rep.rows:
                base = [rep.kind, row.label, row.strategy.total_workers, rep.m]
                if timings:
                    peak = "" if row.peak_kib is None else fmt(row.peak_kib)
                    base += [fmt(row.elapsed * 1e3), fmt(row.speedup), int(row.reliable), peak]
                w.writerow(base)
