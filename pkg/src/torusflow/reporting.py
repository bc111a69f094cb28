"""Bit-stable output emission: field dumps, CSV series, JSON summaries.

Numbers are written with repr-faithful 17-significant-digit formatting and
'\n' newlines so identical manifests reproduce byte-identical artifacts.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .errors import ValidationError
from .grid import SpectralField, TorusGrid

FLOAT_FMT = "%.17g"


def _fmt(x) -> str:
    return FLOAT_FMT % float(x)


def default_output_dir() -> str:
    return os.environ.get("TORUSFLOW_OUT", ".")


# ---------------------------------------------------------------------------
# Field dumps: <base>.json header + <base>.csv or <base>.bin payload
# ---------------------------------------------------------------------------

def write_field_dump(f: SpectralField, base_path: str, time: float = 0.0,
                     fmt: str = "csv") -> str:
    """Dump physical values row-major with the x-axis fastest.

    The header JSON records {d, n_per_axis, rank, time, format}.  CSV holds
    one value per line (components concatenated, slowest axis outermost);
    'bin' holds little-endian float64 in the same order.
    """
    grid = f.grid
    header = {"d": grid.d, "n_per_axis": grid.n, "rank": f.rank,
              "time": float(time), "format": fmt}
    with open(base_path + ".json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(header, fh, sort_keys=True)
        fh.write("\n")
    vals = f.values
    comps = [vals] if f.rank == 0 else [vals[i] for i in range(grid.d)]
    flat = np.concatenate([np.ravel(c, order="F") for c in comps])  # x fastest
    if fmt == "csv":
        with open(base_path + ".csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(_fmt(v) for v in flat))
            fh.write("\n")
    elif fmt == "bin":
        flat.astype("<f8").tofile(base_path + ".bin")
    else:
        raise ValidationError(f"unknown dump format {fmt!r}")
    return base_path


def read_field_dump(base_path: str) -> SpectralField:
    with open(base_path + ".json", "r", encoding="utf-8") as fh:
        header = json.load(fh)
    grid = TorusGrid(header["d"], header["n_per_axis"])
    fmt = header.get("format", "csv")
    if fmt == "csv":
        flat = np.loadtxt(base_path + ".csv", dtype=np.float64, ndmin=1)
    else:
        flat = np.fromfile(base_path + ".bin", dtype="<f8")
    n_comp = 1 if header["rank"] == 0 else grid.d
    per = grid.n ** grid.d
    if flat.size != n_comp * per:
        raise ValidationError(f"field dump {base_path}: payload size mismatch")
    comps = [flat[i * per:(i + 1) * per].reshape(grid.shape, order="F")
             for i in range(n_comp)]
    values = comps[0] if header["rank"] == 0 else np.stack(comps)
    return SpectralField.from_values(grid, values)


# ---------------------------------------------------------------------------
# CSV / JSON emitters
# ---------------------------------------------------------------------------

def write_csv(path: str, header_cols, rows) -> str:
    """Write a CSV with locale-independent full-precision floats."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header_cols) + "\n")
        for row in rows:
            fh.write(",".join(c if isinstance(c, str) else _fmt(c) for c in row) + "\n")
    return path


def write_timeseries_csv(path: str, series_list) -> str:
    """One CSV for one or more TimeSeries sharing a time mesh."""
    first = series_list[0]
    for s in series_list[1:]:
        if len(s.times) != len(first.times):
            raise ValidationError("series do not share a time mesh")
    header = ["t"] + [s.label for s in series_list]
    rows = [[t] + [s.values[i] for s in series_list] for i, t in enumerate(first.times)]
    return write_csv(path, header, rows)


def write_loop_csv(path: str, loop_traj) -> str:
    """Loop trajectory dump: rows (t, s_index, x_1..x_d)."""
    d = loop_traj.initial.d
    header = ["t", "s_index"] + [f"x_{i + 1}" for i in range(d)]
    rows = []
    for i, t in enumerate(loop_traj.times):
        pts = loop_traj.ensemble.positions[i]
        for j in range(pts.shape[0]):
            rows.append([t, str(j)] + list(pts[j]))
    return write_csv(path, header, rows)


def _jsonify(obj):
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    return obj


def write_json(path: str, payload: dict) -> str:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonify(payload), fh, sort_keys=True, indent=1)
        fh.write("\n")
    return path


def write_manifest(out_dir: str, config, extra: dict | None = None) -> str:
    payload = {"config": config.raw, "digest": config.digest()}
    if extra:
        payload.update(_jsonify(extra))
    return write_json(os.path.join(out_dir, "manifest.json"), payload)
