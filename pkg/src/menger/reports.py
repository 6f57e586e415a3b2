"""Machine-readable outputs: scale-record CSV and canonical JSON."""

from __future__ import annotations

import hashlib
import json
import math

import numpy as np

RECORDS_FORMAT = "menger-scale-records/1"


def _num(v):
    return repr(float(v))


def records_header(n, m):
    cols = [f"c{i}" for i in range(n)] + ["r", "beta", "theta", "ahlfors_ratio"]
    cols += [f"f{i}_{j}" for i in range(n) for j in range(m)]
    cols += ["covering_radius", "tie_index"]
    return cols


def write_records_csv(records, fh):
    """One row per record; the plane frame is flattened row-major.

    The first line is a comment naming the format version and columns.
    """
    if not records:
        raise ValueError("no records to write")
    n, m = records[0].best_plane.frame.shape
    cols = records_header(n, m)
    fh.write(f"# {RECORDS_FORMAT} columns={','.join(cols)}\n")
    fh.write(",".join(cols) + "\n")
    for rec in records:
        row = [_num(c) for c in rec.center]
        row += [_num(rec.radius), _num(rec.beta), _num(rec.theta), _num(rec.ahlfors_ratio)]
        row += [_num(v) for v in np.asarray(rec.best_plane.frame).ravel()]
        row += [_num(rec.covering_radius), str(int(rec.tie_index))]
        fh.write(",".join(row) + "\n")


def read_records_csv(fh):
    """Parse a scale-record CSV into a list of dicts (frames as arrays)."""
    lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith(f"# {RECORDS_FORMAT}"):
        raise ValueError("not a scale-record CSV")
    cols = lines[1].split(",")
    out = []
    for ln in lines[2:]:
        vals = dict(zip(cols, ln.split(",")))
        out.append({k: float(v) for k, v in vals.items()})
    return out


def _clean(obj):
    """Make an object JSON-safe: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def canonical_json(obj):
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def config_hash(config):
    blob = json.dumps(_clean(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
