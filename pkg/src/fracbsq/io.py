"""Persistence: binary checkpoints, norm-series CSV and key-value reports.

Checkpoint layout (all little-endian)::

    offset  size  field
    0       4     magic b"BSQG"
    4       4     format version (uint32, currently 1)
    8       4     n_per_axis (uint32)
    12      8     time (float64)
    20      ...   u1, u2, u3, theta: n**3 complex values each, stored as
                  interleaved (real, imag) float64 pairs in C (row-major)
                  mode order, i.e. index (i, j, l) with l fastest; index i
                  holds wavenumber i for i < n/2 and i - n otherwise.

A trajectory file is a plain concatenation of checkpoint records.
"""

import csv
import io as _io
import math
import struct

import numpy as np

from .spectral import CoupledState, SpectralField, make_grid

MAGIC = b"BSQG"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIId")


class CheckpointFormatError(ValueError):
    pass


class UnsupportedVersionError(CheckpointFormatError):
    pass


def encode_checkpoint(state):
    grid = state.grid
    arr = np.ascontiguousarray(state.as_array(), dtype="<c16")
    return _HEADER.pack(MAGIC, FORMAT_VERSION, grid.n, float(state.time)) + arr.tobytes()


def _decode_one(buf, offset, expected_n=None):
    if len(buf) - offset < _HEADER.size:
        raise CheckpointFormatError("truncated checkpoint header")
    magic, version, n, time = _HEADER.unpack_from(buf, offset)
    if magic != MAGIC:
        raise CheckpointFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"unsupported checkpoint version {version} (reader supports {FORMAT_VERSION})")
    if expected_n is not None and n != expected_n:
        raise CheckpointFormatError(f"checkpoint grid n={n} does not match run grid n={expected_n}")
    grid = make_grid(n)
    count = 4 * n**3
    start = offset + _HEADER.size
    end = start + 16 * count
    if len(buf) < end:
        raise CheckpointFormatError("truncated checkpoint payload")
    arr = np.frombuffer(buf, dtype="<c16", count=count, offset=start).reshape((4,) + grid.shape)
    return CoupledState(SpectralField(grid, arr[:3]), SpectralField(grid, arr[3:4]), time), end


def write_checkpoint(state, path):
    with open(path, "wb") as fh:
        fh.write(encode_checkpoint(state))


def read_checkpoint(path, expected_n=None):
    with open(path, "rb") as fh:
        buf = fh.read()
    state, end = _decode_one(buf, 0, expected_n)
    if end != len(buf):
        raise CheckpointFormatError("trailing bytes after checkpoint record")
    return state


def write_trajectory(states, path):
    with open(path, "wb") as fh:
        for st in states:
            fh.write(encode_checkpoint(st))


def read_trajectory(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    out, offset = [], 0
    while offset < len(buf):
        st, offset = _decode_one(buf, offset)
        out.append(st)
    return out


def format_float(x):
    """Round-trippable 17-significant-digit rendering."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def write_table(columns, rows, path):
    """CSV with a fixed header, ``\\n`` line endings and 17-digit floats."""
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_float(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def write_series(series, path):
    write_table(series.columns, series.rows, path)


def read_series(path):
    from .integrator import NormSeries, series_columns

    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file (missing header)")
    header = tuple(rows[0])
    nmax = sum(1 for c in header if c.startswith("gevrey_pair_n"))
    if header != series_columns(nmax):
        raise ValueError(f"{path}: unexpected header {header}")
    series = NormSeries(nmax)
    for r in rows[1:]:
        series.append([float(v) for v in r])
    return series


def write_keyvalue(items, path, comment=None):
    """``key = value`` report; floats use the shortest round-trip form."""
    lines = []
    if comment:
        lines += [f"# {line}" for line in comment.splitlines()]
    for key, value in items:
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value) if math.isfinite(value) else format_float(value)
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_keyvalue(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                key, _, value = line.partition("=")
                out[key.strip()] = value.strip()
    return out


def certificate_items(cert):
    p, d = cert.params
    c = cert.bilinear_constant
    items = [
        ("certificate.valid", cert.valid),
        ("params.a", float(p.a)),
        ("params.sigma", float(p.sigma)),
        ("params.s", float(p.s)),
        ("params.alpha", float(d.alpha)),
        ("params.beta", float(d.beta)),
        ("initial_norm", float(cert.initial_norm)),
        ("bilinear_constant.value", float(c.value)),
        ("bilinear_constant.max_ratio", float(c.max_ratio)),
        ("bilinear_constant.samples", int(c.samples)),
        ("bilinear_constant.seed", int(c.seed)),
        ("bilinear_constant.safety_factor", float(c.safety_factor)),
        ("linear_constant", float(cert.linear_constant)),
        ("contraction_C2", float(cert.contraction_C2)),
        ("admissible_T", float(cert.admissible_T)),
        ("small_data_check", cert.small_data_check),
        ("time_nodes", int(cert.time_nodes)),
        ("tol", float(cert.tol)),
        ("iterations", int(cert.iterations)),
        ("converged", cert.converged),
        ("final_residual", float(cert.final_residual)),
        ("measured_contraction", float(cert.measured_contraction())),
        ("solution_sup_norm", float(cert.solution_sup_norm)),
        ("fixed_point_bound", float(cert.fixed_point_bound)),
        ("radius_bound", float(cert.radius_bound)),
        ("solution_norm_bound_ok", cert.solution_norm_bound_ok),
        ("trajectory_ref", cert.trajectory_ref or "none"),
    ]
    items += [(f"residual.{i}", float(r)) for i, r in enumerate(cert.residuals)]
    return items


def report_items(reports, label):
    """Serialize a batch of InequalityReports as ``label.i.field = value`` lines."""
    items = [
        (f"{label}.count", len(reports)),
        (f"{label}.violations", sum(1 for r in reports if not r.holds)),
        (f"{label}.max_ratio", max((r.ratio for r in reports), default=0.0)),
    ]
    for i, r in enumerate(reports):
        items += [
            (f"{label}.{i}.lhs", r.lhs),
            (f"{label}.{i}.rhs", r.rhs),
            (f"{label}.{i}.ratio", r.ratio),
            (f"{label}.{i}.holds", r.holds),
            (f"{label}.{i}.witness", r.witness),
        ]
    return items
