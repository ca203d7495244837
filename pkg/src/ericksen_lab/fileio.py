"""Binary field files, CSV profiles and defect reports.

Field file layout (all little-endian)::

    b"EDLF"                 magic
    uint32                  format version (1)
    uint8                   target mode (0 = Dk_quotient, 1 = Ck_no_quotient)
    float64                 k
    uint32 x 3              dims (nx, ny, nz)
    float64                 h
    float64 x 3             origin
    uint8 x nx*ny*nz        node roles, x fastest
    float64 x nx*ny*nz*3    w, x-fastest nodes, component innermost
"""

from __future__ import annotations

import csv
import io
import json
import struct
from pathlib import Path

import numpy as np

from .cone import ConeParams, TargetMode
from .grid import GridDomain, LineFieldState

MAGIC = b"EDLF"
VERSION = 1
_HEAD = struct.Struct("<4sIBd3Id3d")
_MODES = {TargetMode.DK_QUOTIENT: 0, TargetMode.CK_NO_QUOTIENT: 1}


class FieldFileError(IOError):
    """Corrupt, truncated or incompatible field file."""


def _x_fastest(a):
    # (nx, ny, nz, ...) C-order -> bytes with x varying fastest
    return np.ascontiguousarray(np.moveaxis(a, (0, 1, 2), (2, 1, 0)))


def _from_x_fastest(flat, dims, tail=()):
    nx, ny, nz = dims
    a = flat.reshape((nz, ny, nx) + tail)
    return np.ascontiguousarray(np.moveaxis(a, (0, 1, 2), (2, 1, 0)))


def encode_field(state: LineFieldState) -> bytes:
    dom = state.domain
    head = _HEAD.pack(MAGIC, VERSION, _MODES[state.params.target_mode], float(state.params.k),
                      *dom.dims, float(dom.h), *map(float, dom.origin))
    roles = _x_fastest(dom.roles.astype(np.uint8)).tobytes()
    payload = _x_fastest(state.values.astype("<f8")).tobytes()
    return head + roles + payload


def decode_field(data: bytes) -> LineFieldState:
    if len(data) < _HEAD.size:
        raise FieldFileError(f"truncated header: expected {_HEAD.size} bytes, got {len(data)}")
    magic, version, mode, k, nx, ny, nz, h, ox, oy, oz = _HEAD.unpack_from(data)
    if magic != MAGIC:
        raise FieldFileError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FieldFileError(f"unsupported format version {version}, expected {VERSION}")
    if mode not in (0, 1):
        raise FieldFileError(f"unknown target mode byte {mode}")
    n = nx * ny * nz
    expected = _HEAD.size + n + 8 * 3 * n
    if len(data) != expected:
        raise FieldFileError(f"payload length mismatch: expected {expected} bytes, got {len(data)}")
    roles = np.frombuffer(data, dtype=np.uint8, count=n, offset=_HEAD.size)
    vals = np.frombuffer(data, dtype="<f8", count=3 * n, offset=_HEAD.size + n)
    dims = (nx, ny, nz)
    dom = GridDomain(dims, h, (ox, oy, oz), _from_x_fastest(roles, dims))
    mode_enum = TargetMode.DK_QUOTIENT if mode == 0 else TargetMode.CK_NO_QUOTIENT
    values = _from_x_fastest(vals, dims, (3,)).astype(float)
    return LineFieldState(dom, values, ConeParams(k, mode_enum))


def save_field(path, state: LineFieldState) -> None:
    Path(path).write_bytes(encode_field(state))


def load_field(path) -> LineFieldState:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise FieldFileError(f"cannot read {path}: {exc}") from exc
    return decode_field(data)


def _g(x) -> str:
    return "%.17g" % float(x)


def profile_csv(profile) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r", "D", "E", "H", "N"])
    for row in profile.rows():
        w.writerow([_g(v) for v in row])
    return buf.getvalue()


def write_profile_csv(path, profile) -> None:
    Path(path).write_text(profile_csv(profile))


def read_profile_csv(path):
    """Rows of ``(r, D, E, H, N)`` floats."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["r", "D", "E", "H", "N"]:
        raise FieldFileError(f"{path}: not a profile CSV")
    return [tuple(float(x) for x in r) for r in rows[1:]]


def table_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_g(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def defect_report_lines(graph) -> str:
    """One JSON record per component."""
    out = []
    for i, c in enumerate(graph.components):
        rec = {
            "component": i,
            "label": c.label,
            "voxel_count": c.voxel_count,
            "diameter": c.diameter,
            "endpoints": c.endpoints,
            "polyline": c.polyline,
            "class_samples": [None if v is None else int(v) for v in c.class_samples],
            "flatness": [{"b": int(b), "r": r, "eps": e} for b, r, e in c.flatness],
            "junctions": c.junctions,
        }
        out.append(json.dumps(_jsonable(rec), sort_keys=True))
    return "\n".join(out) + ("\n" if out else "")


def defect_summary_csv(graph) -> str:
    rows = []
    for i, c in enumerate(graph.components):
        eps = max((e for _, _, e in c.flatness), default=float("nan"))
        defined = [v for v in c.class_samples if v is not None]
        frac = (sum(defined) / len(c.class_samples)) if c.class_samples else float("nan")
        rows.append([i, c.label, c.voxel_count, float(c.diameter), float(frac), float(eps),
                     len(c.junctions)])
    return table_csv(["component", "label", "voxels", "diameter", "class1_fraction",
                      "max_flatness", "junctions"], rows)


def write_defect_report(directory, graph, stem: str = "defects") -> None:
    d = Path(directory)
    (d / f"{stem}.jsonl").write_text(defect_report_lines(graph))
    (d / f"{stem}_summary.csv").write_text(defect_summary_csv(graph))
