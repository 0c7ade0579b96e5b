import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from apcsim import fieldio
from apcsim.grid import GeometrySpec, build_grid
from apcsim.solver import DensityField, MassLedger


def test_snapshot_round_trip_exact(tmp_path):
    rng = np.random.default_rng(0)
    rho = rng.uniform(0, 1, size=(5, 4, 7)) ** 7  # spread of exponents
    g = build_grid(GeometrySpec(nx=7, ny=4))
    files = fieldio.write_snapshot(DensityField(rho, 12.5), tmp_path, "s", g, "abc")
    assert len(files) == 6
    back = fieldio.read_snapshot(tmp_path, "s")
    assert back.t == 12.5
    assert np.array_equal(back.rho, rho)
    meta = json.loads((tmp_path / "s.json").read_text())
    assert meta["params_hash"] == "abc" and meta["nx"] == 7 and meta["ny"] == 4


def test_snapshot_top_row_first(tmp_path):
    rho = np.zeros((5, 3, 3))
    rho[0, 2, :] = 1.0  # top row of the domain
    fieldio.write_snapshot(DensityField(rho), tmp_path, "s")
    first = (tmp_path / "s_rho1.csv").read_text().splitlines()[0]
    assert first == "1,1,1"


@given(arrays(np.float64, (5, 3, 4), elements=st.floats(0, 1e3)))
def test_snapshot_bytes_deterministic(tmp_path_factory, rho):
    a = tmp_path_factory.mktemp("a")
    b = tmp_path_factory.mktemp("b")
    fieldio.write_snapshot(DensityField(rho, 1.0), a, "x", params_hash="h")
    fieldio.write_snapshot(DensityField(rho.copy(), 1.0), b, "x", params_hash="h")
    for name in ["x.json"] + [f"x_rho{i}.csv" for i in range(1, 6)]:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert np.array_equal(fieldio.read_snapshot(a, "x").rho, rho)


def row(t, u=1.0):
    return {k: (t if k == "t" else u) for k in fieldio.SERIES_HEADER}


def test_timeseries_round_trip(tmp_path):
    rows = [row(0.0), row(0.5, 0.75), row(1.0, 1 / 3)]
    fieldio.write_timeseries(rows, tmp_path / "ts.csv")
    back = fieldio.read_timeseries(tmp_path / "ts.csv")
    assert back == rows
    assert (tmp_path / "ts.csv").read_text().splitlines()[0].split(",") == list(fieldio.SERIES_HEADER)


def test_timeseries_requires_increasing_time(tmp_path):
    with pytest.raises(ValueError, match="strictly increasing"):
        fieldio.write_timeseries([row(0.0), row(1.0), row(1.0)], tmp_path / "ts.csv")


def test_ledger_json(tmp_path):
    led = MassLedger(1.0, 0.25, 0.7, 0.05, clip_count=3, min_value=0.0)
    fieldio.write_ledger(led, tmp_path / "ledger.json")
    data = json.loads((tmp_path / "ledger.json").read_text())
    assert data["exit_outflow_cum"] == 0.7 and data["clip_count"] == 3
    assert data["closure_error"] == pytest.approx(0.0, abs=1e-16)


def test_heatmap_scaling(tmp_path):
    rho = np.zeros((5, 2, 3))
    rho[1] = [[0.0, 0.5, 1.0], [2.0, 0.0, 0.0]]  # row 1 is the top row
    vmax = fieldio.render_heatmap(DensityField(rho, 3.0), 2, tmp_path / "p.ppm")
    assert vmax == 2.0
    gray, comments = fieldio.read_ppm(tmp_path / "p.ppm")
    assert gray.shape == (2, 3)
    assert gray[0].tolist() == [0, 255, 255]  # max -> black, zero -> white
    assert gray[1].tolist() == [255, 191, 128]
    assert "max=2" in comments[0] and "species=2" in comments[0]
    assert (tmp_path / "p.ppm").read_bytes().startswith(b"P6\n")


def test_heatmap_all_zero(tmp_path):
    vmax = fieldio.render_heatmap(DensityField(np.zeros((5, 3, 3))), 1, tmp_path / "z.ppm")
    gray, _ = fieldio.read_ppm(tmp_path / "z.ppm")
    assert vmax == 0.0 and np.all(gray == 255)


def test_unwritable_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        fieldio.write_snapshot(DensityField(np.zeros((5, 3, 3))), blocker / "sub", "s")
