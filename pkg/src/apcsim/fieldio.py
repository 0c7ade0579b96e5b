"""Plain-text output: per-species CSV snapshots with a JSON sidecar,
the diagnostics time series, the ledger and grayscale PPM heatmaps.

All writers are deterministic; values are printed with 17 significant
digits so a read-back reproduces the doubles exactly.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .solver import DensityField, MassLedger

SERIES_HEADER = ("t", "U", "U1", "U2", "U3", "U4", "U5", "minval", "max_rhotilde",
                 "outflow_cum", "mortality_cum")
SPECIES = ("alert", "panic", "control", "daily_before", "daily_after")


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def snapshot_paths(directory, stem: str):
    d = Path(directory)
    return [d / f"{stem}_rho{i}.csv" for i in range(1, 6)], d / f"{stem}.json"


def write_snapshot(f: DensityField, directory, stem: str, grid=None, params_hash: str = "") -> list:
    """Write one CSV per species (``ny`` rows by ``nx`` columns, first row
    at the top of the domain) plus ``<stem>.json`` metadata."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files, meta_path = snapshot_paths(directory, stem)
    for path, layer in zip(files, f.rho):
        rows = [",".join(_fmt(v) for v in row) for row in layer[::-1]]
        _write_text(path, "\n".join(rows) + "\n")
    meta = {"t": float(f.t), "species": list(SPECIES), "files": [p.name for p in files],
            "params_hash": params_hash}
    if grid is not None:
        meta.update({"nx": grid.nx, "ny": grid.ny, "dx": grid.dx, "dy": grid.dy,
                     "origin": list(grid.origin)})
    _write_text(meta_path, json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return files + [meta_path]


def read_snapshot(directory, stem: str) -> DensityField:
    files, meta_path = snapshot_paths(directory, stem)
    meta = json.loads(meta_path.read_text())
    layers = [np.loadtxt(p, delimiter=",", ndmin=2)[::-1] for p in files]
    return DensityField(np.ascontiguousarray(np.stack(layers)), meta["t"])


def write_timeseries(rows, path) -> None:
    """CSV with one row per output time; ``t`` must increase strictly."""
    ts = [r["t"] for r in rows]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("time series rows must have strictly increasing t")
    lines = [",".join(SERIES_HEADER)]
    lines += [",".join(_fmt(r[k]) for k in SERIES_HEADER) for r in rows]
    _write_text(Path(path), "\n".join(lines) + "\n")


def read_timeseries(path) -> list:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def write_ledger(ledger: MassLedger, path) -> None:
    data = {k: (float(v) if isinstance(v, float) else v) for k, v in vars(ledger).items()}
    data["closure_error"] = ledger.closure_error()
    _write_text(Path(path), json.dumps(data, indent=2, sort_keys=True) + "\n")


def render_heatmap(f: DensityField, species: int, path) -> float:
    """Binary PPM (P6) of one species, 0 -> white and the field maximum
    -> black, top row of the image at the top of the domain.

    Returns the maximum used for scaling, which is also stored in a
    header comment.
    """
    layer = np.asarray(f.rho[species - 1], dtype=float)
    vmax = float(max(layer.max(), 0.0))
    if vmax > 0:
        level = np.clip(layer / vmax, 0.0, 1.0)
    else:
        level = np.zeros_like(layer)
    gray = np.rint(255.0 * (1.0 - level)).astype(np.uint8)[::-1]
    ny, nx = gray.shape
    rgb = np.repeat(gray[:, :, None], 3, axis=2)
    header = f"P6\n# species={species} t={f.t:.17g} max={vmax:.17g}\n{nx} {ny}\n255\n".encode()
    Path(path).write_bytes(header + rgb.tobytes())
    return vmax


def read_ppm(path):
    """Return ``(gray, comments)`` for a P6 file written by :func:`render_heatmap`."""
    data = Path(path).read_bytes()
    fields, comments, pos = [], [], 0
    while len(fields) < 4:
        end = data.index(b"\n", pos)
        line = data[pos:end].decode()
        pos = end + 1
        if line.startswith("#"):
            comments.append(line[1:].strip())
        else:
            fields.extend(line.split())
    nx, ny = int(fields[1]), int(fields[2])
    pix = np.frombuffer(data[pos:pos + 3 * nx * ny], np.uint8).reshape(ny, nx, 3)
    return pix[:, :, 0].copy(), comments
