import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from apcsim.errors import ConfigError
from apcsim.grid import build_grid
from apcsim.scenario import BUILTIN, KEYS, Bump, echo, flatten, initial_field, load, parse


def test_defaults_are_reference_values():
    cfg = parse("")
    assert cfg.geometry.width == 2.0 and cfg.geometry.height == 1.0
    assert (cfg.geometry.nx, cfg.geometry.ny) == (100, 50)
    assert cfg.behavior.alpha12 == 0.7 and cfg.transport.v2max == 0.3
    assert cfg.schedule.gamma(0.0) == 1.0 and cfg.schedule.phi(100.0) == 0.0


def test_comments_and_overrides():
    cfg = parse("# header\nbehavior.c1 = 0.2  # trailing\n\nrun.name = x\n", ["behavior.c1=0.3"])
    assert cfg.behavior.c1 == 0.3
    assert cfg.name == "x"


def test_fifth_population_follows_fourth():
    cfg = parse("transport.d4 = 0.02\ntransport.v4_out = 0.05\n")
    assert cfg.transport.d[4] == 0.02 and cfg.transport.v_out[4] == 0.05
    cfg = parse("transport.d4 = 0.02\ntransport.d5 = 0.03\n")
    assert cfg.transport.d[4] == 0.03


@pytest.mark.parametrize("text, fragment", [
    ("behavior.c1 0.2", "line 1: expected"),
    ("\n\nbehavior.zeta = 1", "line 3: unknown key"),
    ("physics.c1 = 1", "unknown section"),
    ("behavior.c1 = fast", "cannot read 'fast' as float"),
    ("behavior.c1 = -0.1", "must be >= 0"),
    ("behavior.c1 = nan", "cannot read"),
    ("geometry.nx = 2.5", "as int"),
    ("output.heatmaps = maybe", "as bool"),
    ("geometry.target = 3", "two numbers"),
    ("geometry.obstacles = 1, 2, 3", "groups of four"),
    ("geometry.nx = 2", "at least 3x3"),
    ("behavior.epsilon = 0.5", "epsilon"),
    ("schedule.gamma = linear", "constant or smoothstep"),
    ("schedule.phi = smoothstep\nschedule.phi_t0 = 5\nschedule.phi_t1 = 5", "line 3"),
    ("initial.centers = 1", "x, y pairs"),
    ("initial.centers = 1, 0.5, 0.2, 0.2\ninitial.radii = 0.1, 0.1, 0.1", "2 bump centres"),
    ("initial.radii = 0", "radius must be positive"),
    ("initial.profile = flat", "bumps or uniform"),
    ("run.t_end = -1", "t_end"),
    ("run.dt = 0", "dt must be positive"),
    ("output.exit_depth = 0", "exit_depth"),
    ("geometry.target = 1.0, 0.5", "outside"),
    ("geometry.obstacles = 1.9, 0.2, 2.0, 0.8", "overlaps an obstacle"),
])
def test_errors_name_the_line(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse(text, origin="cfg")


def test_override_errors_name_the_override():
    with pytest.raises(ConfigError, match=r"--set #2 line 1: unknown key"):
        parse("", ["behavior.c1=0.1", "behavior.nope=1"])


def test_snapshots_past_end_dropped():
    cfg = parse("run.t_end = 120\nrun.snapshot_times = 250, 50, 100, 50")
    assert cfg.control.snapshot_times == (50.0, 100.0)


@pytest.mark.parametrize("name", sorted(BUILTIN))
def test_builtin_round_trip(name):
    cfg = load(name)
    assert parse(echo(cfg)) == cfg
    assert set(flatten(cfg)) == set(KEYS)


ov_values = {
    "behavior.c1": st.floats(0, 1), "behavior.alpha32": st.floats(0, 2),
    "transport.d2": st.floats(0, 0.1), "transport.v3_out": st.floats(0, 1),
    "run.t_end": st.floats(0, 500), "geometry.nx": st.integers(3, 400),
    "initial.radii": st.floats(0.01, 0.5), "output.heatmaps": st.booleans(),
}


@given(st.dictionaries(st.sampled_from(sorted(ov_values)), st.just(None)).flatmap(
    lambda keys: st.fixed_dictionaries({k: ov_values[k] for k in keys})))
def test_echo_round_trip_with_overrides(values):
    ov = [f"{k}={str(v).lower() if isinstance(v, bool) else repr(v)}" for k, v in values.items()]
    cfg = parse("", ov)
    again = parse(echo(cfg))
    assert again == cfg
    assert again.digest() == cfg.digest()


def test_digest_changes_with_content():
    assert load("scenario1").digest() != load("scenario1", ["behavior.c1=0.11"]).digest()
    assert load("scenario1").digest() == load("scenario1").digest()


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read config"):
        load("/nonexistent/scenario.cfg")


def test_file_config(tmp_path):
    path = tmp_path / "room.cfg"
    path.write_text("run.name = room\nbehavior.c2 = 0.3\n")
    cfg = load(str(path), ["run.t_end=10"])
    assert cfg.name == "room" and cfg.behavior.c2 == 0.3 and cfg.control.t_end == 10
    path.write_text("run.name = room\nbehavior.c2 = oops\n")
    with pytest.raises(ConfigError, match=r"room\.cfg line 2"):
        load(str(path))


def test_builtin_layouts():
    s1, s2, s3 = (load(n) for n in ("scenario1", "scenario2", "scenario3"))
    assert len(s1.bumps) == 1 and len(s2.bumps) == 3 and len(s3.bumps) == 1
    assert not s1.geometry.obstacles and not s2.geometry.obstacles
    assert len(s3.geometry.obstacles) == 1
    for cfg in (s1, s2, s3):
        g = cfg.geometry
        assert (g.width / g.height, g.nx, g.ny) == (2.0, 100, 50)
        assert g.exit_side == "right"
        assert (g.exit_start, g.exit_end) == (0.3 * g.height, 0.7 * g.height)
        assert g.target == (g.width + 0.25 * g.height, 0.5 * g.height)


@pytest.mark.parametrize("name", sorted(BUILTIN))
def test_initial_field_unit_mass(name):
    cfg = load(name)
    g = build_grid(cfg.geometry)
    f = initial_field(cfg, g)
    assert abs(math.fsum(f.rho.ravel()) * g.cell_area - 1.0) <= 1e-12
    assert np.all(f.rho[[0, 1, 2, 4]] == 0)
    assert np.all(f.rho[3][~g.active] == 0)
    assert f.rho.min() >= 0


def test_uniform_profile():
    cfg = parse("initial.profile = uniform\ngeometry.obstacles = 0.5, 0.2, 0.6, 0.4")
    g = build_grid(cfg.geometry)
    f = initial_field(cfg, g)
    vals = f.rho[3][g.active]
    assert np.all(vals == vals[0])
    assert vals[0] * g.active.sum() * g.cell_area == pytest.approx(1.0, rel=1e-14)


def test_initial_field_empty_rejected():
    cfg = parse("initial.centers = 50, 50\ninitial.radii = 0.1")
    with pytest.raises(ConfigError, match="zero everywhere"):
        initial_field(cfg, build_grid(cfg.geometry))


def test_bump_is_truncated_gaussian():
    b = Bump(0.0, 0.0, 0.2, 2.0)
    x = np.array([0.0, 0.1, 0.3, 0.30001])
    got = b.evaluate(x, np.zeros_like(x))
    np.testing.assert_allclose(got[:3], 2.0 * np.exp(-x[:3] ** 2 / (2 * 0.1 ** 2)))
    assert got[3] == 0.0
    with pytest.raises(ConfigError):
        Bump(0, 0, 0.1, -1)
