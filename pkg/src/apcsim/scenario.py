"""Scenario descriptions: a line-oriented config format, the built-in
evacuation scenarios and the initial density.

Format::

    # comment
    section.key = value
    section.list_key = 1.0, 2.5, 3

Sections are ``geometry``, ``behavior``, ``transport``, ``schedule``,
``initial``, ``run`` and ``output``.  Unknown keys are errors.  Later
assignments override earlier ones, which is how ``--set`` overrides are
applied.  :func:`echo` writes every key, so ``parse(echo(cfg)) == cfg``.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .grid import GeometrySpec, Grid2D, build_grid, direction_field
from .kinetics import BehaviorParams, Ramp, TransitionSchedule
from .solver import DensityField, StepControl, TransportParams

SECTIONS = ("geometry", "behavior", "transport", "schedule", "initial", "run", "output")


@dataclass(frozen=True)
class Bump:
    """Truncated Gaussian group of people: sigma = radius / 2, cut at 3 sigma."""

    x: float
    y: float
    radius: float
    weight: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigError(f"bump radius must be positive, got {self.radius!r}")
        if not self.weight >= 0:
            raise ConfigError(f"bump weight must be >= 0, got {self.weight!r}")

    def evaluate(self, X, Y):
        sigma = self.radius / 2.0
        r2 = (X - self.x) ** 2 + (Y - self.y) ** 2
        return np.where(r2 <= (3.0 * sigma) ** 2, self.weight * np.exp(-r2 / (2.0 * sigma * sigma)), 0.0)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "custom"
    geometry: GeometrySpec = field(default_factory=GeometrySpec)
    behavior: BehaviorParams = field(default_factory=BehaviorParams)
    transport: TransportParams = field(default_factory=TransportParams)
    schedule: TransitionSchedule = field(default_factory=TransitionSchedule)
    bumps: tuple = (Bump(1.0, 0.5, 0.2),)
    profile: str = "bumps"  # or "uniform": constant density on all active cells
    control: StepControl = field(default_factory=StepControl)
    output_dir: str = "out"
    heatmaps: bool = True
    exit_depth: float = 0.1

    def digest(self) -> str:
        """Stable hash of the full configuration text."""
        return hashlib.sha256(echo(self).encode()).hexdigest()[:16]


# key -> (kind, default); kinds: float, int, str, bool, floats, opt_float
_D = BehaviorParams()
_T = TransportParams()
_G = GeometrySpec()
_C = StepControl()
KEYS = {
    "geometry.width": ("float", _G.width),
    "geometry.height": ("float", _G.height),
    "geometry.nx": ("int", _G.nx),
    "geometry.ny": ("int", _G.ny),
    "geometry.exit_side": ("str", _G.exit_side),
    "geometry.exit_start": ("float", _G.exit_start),
    "geometry.exit_end": ("float", _G.exit_end),
    "geometry.target": ("floats", _G.target),
    "geometry.obstacles": ("floats", ()),
    **{f"behavior.{k}": ("float", getattr(_D, k)) for k in (
        "b1", "b2", "b3", "b4", "c1", "c2", "delta1", "delta2", "delta3",
        "alpha13", "alpha12", "alpha23", "alpha32", "epsilon")},
    **{f"transport.d{i + 1}": ("float", _T.d[i]) for i in range(5)},
    "transport.v2max": ("float", _T.v2max),
    "transport.v3max": ("float", _T.v3max),
    **{f"transport.v{i + 1}_out": ("float", _T.v_out[i]) for i in range(5)},
    "transport.clamp_velocity": ("bool", True),
    "schedule.gamma": ("str", "constant"),
    "schedule.gamma_value": ("float", 1.0),
    "schedule.gamma_t0": ("float", 1.0),
    "schedule.gamma_t1": ("float", 3.0),
    "schedule.phi": ("str", "constant"),
    "schedule.phi_value": ("float", 0.0),
    "schedule.phi_t0": ("float", 20.0),
    "schedule.phi_t1": ("float", 70.0),
    "initial.profile": ("str", "bumps"),
    "initial.centers": ("floats", (1.0, 0.5)),
    "initial.radii": ("floats", (0.2,)),
    "initial.weights": ("floats", (1.0,)),
    "run.name": ("str", "custom"),
    "run.t_end": ("float", _C.t_end),
    "run.cfl_safety": ("float", _C.cfl_safety),
    "run.dt": ("opt_float", None),
    "run.dt_max": ("float", _C.dt_max),
    "run.output_interval": ("float", _C.output_interval),
    "run.snapshot_times": ("floats", _C.snapshot_times),
    "output.dir": ("str", "out"),
    "output.heatmaps": ("bool", True),
    "output.exit_depth": ("float", 0.1),
}
# fall back to the d4 / v4_out value when not given explicitly
_INHERIT = {"transport.d5": "transport.d4", "transport.v5_out": "transport.v4_out"}
_NONNEG = {k for k, (kind, _) in KEYS.items() if kind == "float" and k.split(".")[0] in ("behavior", "transport")}


def _convert(key: str, raw: str, where: str):
    kind = KEYS[key][0]
    raw = raw.strip()
    try:
        if kind == "float":
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            if key in _NONNEG and v < 0:
                raise ConfigError(f"{where}: {key} must be >= 0, got {raw}")
            return v
        if kind == "int":
            return int(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError
        if kind == "opt_float":
            if raw.lower() in ("", "auto", "none"):
                return None
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        if kind == "floats":
            if not raw:
                return ()
            vals = tuple(float(tok) for tok in raw.split(","))
            if not all(math.isfinite(v) for v in vals):
                raise ValueError
            return vals
        return raw
    except ConfigError:
        raise
    except ValueError:
        raise ConfigError(f"{where}: cannot read {raw!r} as {kind} for {key}") from None


def _read_lines(text: str, values: dict, lines: dict, origin: str):
    for n, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        where = f"{origin} line {n}"
        if "=" not in body:
            raise ConfigError(f"{where}: expected 'section.key = value', got {body!r}")
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in KEYS:
            section = key.split(".", 1)[0]
            hint = "unknown section" if section not in SECTIONS else "unknown key"
            raise ConfigError(f"{where}: {hint} {key!r}")
        values[key] = _convert(key, raw, where)
        lines[key] = where


def parse(text: str, overrides=(), origin: str = "config") -> ScenarioConfig:
    """Build a validated :class:`ScenarioConfig` from config text.

    ``overrides`` are extra ``section.key=value`` strings applied after
    the document.
    """
    values, lines = {}, {}
    _read_lines(text, values, lines, origin)
    for k, ov in enumerate(overrides, 1):
        _read_lines(ov, values, lines, f"--set #{k}")
    for key, parent in _INHERIT.items():
        if key not in values and parent in values:
            values[key] = values[parent]
    full = {k: values.get(k, default) for k, (_, default) in KEYS.items()}
    return _build(full, lines)


def _locate(lines: dict, prefix: str) -> str:
    hits = [w for k, w in lines.items() if k.startswith(prefix)]
    return hits[-1] if hits else "defaults"


def _build(v: dict, lines: dict) -> ScenarioConfig:
    def section(prefix, build):
        try:
            return build()
        except ConfigError as exc:
            raise ConfigError(f"{_locate(lines, prefix)}: {exc}") from None

    target = v["geometry.target"]
    obstacles = v["geometry.obstacles"]
    if len(target) != 2:
        raise ConfigError(f"{_locate(lines, 'geometry.target')}: geometry.target needs two numbers")
    if len(obstacles) % 4:
        raise ConfigError(f"{_locate(lines, 'geometry.obstacles')}: geometry.obstacles needs groups "
                          f"of four numbers x0, y0, x1, y1")
    if v["geometry.nx"] < 3 or v["geometry.ny"] < 3:
        raise ConfigError(f"{_locate(lines, 'geometry.n')}: grid must be at least 3x3")
    geometry = GeometrySpec(
        width=v["geometry.width"], height=v["geometry.height"],
        nx=v["geometry.nx"], ny=v["geometry.ny"], exit_side=v["geometry.exit_side"],
        exit_start=v["geometry.exit_start"], exit_end=v["geometry.exit_end"],
        target=tuple(target), obstacles=tuple(tuple(obstacles[i:i + 4]) for i in range(0, len(obstacles), 4)),
    )
    behavior = section("behavior.", lambda: BehaviorParams(
        **{k.split(".")[1]: v[k] for k in KEYS if k.startswith("behavior.")}))
    transport = section("transport.", lambda: TransportParams(
        d=tuple(v[f"transport.d{i}"] for i in range(1, 6)),
        v2max=v["transport.v2max"], v3max=v["transport.v3max"],
        v_out=tuple(v[f"transport.v{i}_out"] for i in range(1, 6)),
        clamp_velocity=v["transport.clamp_velocity"]))

    def ramp(name):
        kind = v[f"schedule.{name}"]
        if kind == "constant":
            return Ramp.constant(v[f"schedule.{name}_value"])
        if kind == "smoothstep":
            return Ramp.smoothstep(v[f"schedule.{name}_t0"], v[f"schedule.{name}_t1"])
        raise ConfigError(f"schedule.{name} must be constant or smoothstep, got {kind!r}")

    schedule = section("schedule.", lambda: TransitionSchedule(gamma=ramp("gamma"), phi=ramp("phi")))

    def bumps():
        c, r, w = v["initial.centers"], v["initial.radii"], v["initial.weights"]
        if len(c) % 2 or not c:
            raise ConfigError("initial.centers needs x, y pairs")
        n = len(c) // 2
        if len(r) == 1:
            r = r * n
        if len(w) == 1:
            w = w * n
        if len(r) != n or len(w) != n:
            raise ConfigError(f"{n} bump centres but {len(r)} radii and {len(w)} weights")
        return tuple(Bump(c[2 * k], c[2 * k + 1], r[k], w[k]) for k in range(n))

    bump_list = section("initial.", bumps)
    if v["initial.profile"] not in ("bumps", "uniform"):
        raise ConfigError(f"{_locate(lines, 'initial.profile')}: initial.profile must be bumps or uniform")
    # snapshot times past t_end are dropped so that shortening a run needs one override
    snaps = tuple(sorted({t for t in v["run.snapshot_times"] if t <= v["run.t_end"]}))
    control = section("run.", lambda: StepControl(
        t_end=v["run.t_end"], cfl_safety=v["run.cfl_safety"], dt=v["run.dt"],
        dt_max=v["run.dt_max"], output_interval=v["run.output_interval"], snapshot_times=snaps))
    if any(s < 0 for s in snaps):
        raise ConfigError(f"{_locate(lines, 'run.snapshot_times')}: snapshot times must be >= 0")
    if not v["output.exit_depth"] > 0:
        raise ConfigError(f"{_locate(lines, 'output.')}: output.exit_depth must be positive")

    cfg = ScenarioConfig(
        name=v["run.name"], geometry=geometry, behavior=behavior, transport=transport,
        schedule=schedule, bumps=bump_list, profile=v["initial.profile"], control=control, output_dir=v["output.dir"],
        heatmaps=v["output.heatmaps"], exit_depth=v["output.exit_depth"])
    # geometry conflicts (exit vs obstacle, target inside) surface here with a line reference
    try:
        direction_field(build_grid(geometry), geometry.target)
    except ConfigError as exc:
        raise ConfigError(f"{_locate(lines, 'geometry.')}: {exc}") from None
    return cfg


def _fmt(kind, value) -> str:
    if kind == "bool":
        return "true" if value else "false"
    if kind == "opt_float":
        return "auto" if value is None else repr(float(value))
    if kind == "floats":
        return ", ".join(repr(float(x)) for x in value)
    if kind == "float":
        return repr(float(value))
    return str(value)


def flatten(cfg: ScenarioConfig) -> dict:
    g, b, t, s, c = cfg.geometry, cfg.behavior, cfg.transport, cfg.schedule, cfg.control
    out = {
        "geometry.width": g.width, "geometry.height": g.height, "geometry.nx": g.nx, "geometry.ny": g.ny,
        "geometry.exit_side": g.exit_side, "geometry.exit_start": g.exit_start,
        "geometry.exit_end": g.exit_end, "geometry.target": g.target,
        "geometry.obstacles": tuple(x for rect in g.obstacles for x in rect),
    }
    out.update({k: getattr(b, k.split(".")[1]) for k in KEYS if k.startswith("behavior.")})
    out.update({f"transport.d{i + 1}": t.d[i] for i in range(5)})
    out.update({"transport.v2max": t.v2max, "transport.v3max": t.v3max})
    out.update({f"transport.v{i + 1}_out": t.v_out[i] for i in range(5)})
    out["transport.clamp_velocity"] = t.clamp_velocity
    for name, r in (("gamma", s.gamma), ("phi", s.phi)):
        out[f"schedule.{name}"] = r.kind
        out[f"schedule.{name}_value"] = r.value
        out[f"schedule.{name}_t0"] = r.t0
        out[f"schedule.{name}_t1"] = r.t1
    out["initial.profile"] = cfg.profile
    out["initial.centers"] = tuple(x for bp in cfg.bumps for x in (bp.x, bp.y))
    out["initial.radii"] = tuple(bp.radius for bp in cfg.bumps)
    out["initial.weights"] = tuple(bp.weight for bp in cfg.bumps)
    out.update({"run.name": cfg.name, "run.t_end": c.t_end, "run.cfl_safety": c.cfl_safety,
                "run.dt": c.dt, "run.dt_max": c.dt_max, "run.output_interval": c.output_interval,
                "run.snapshot_times": c.snapshot_times,
                "output.dir": cfg.output_dir, "output.heatmaps": cfg.heatmaps,
                "output.exit_depth": cfg.exit_depth})
    return out


def echo(cfg: ScenarioConfig) -> str:
    """Full config text with every key spelled out."""
    flat = flatten(cfg)
    lines, section = [], None
    for key, (kind, _) in KEYS.items():
        sec = key.split(".")[0]
        if sec != section:
            if section is not None:
                lines.append("")
            section = sec
        lines.append(f"{key} = {_fmt(kind, flat[key])}")
    return "\n".join(lines) + "\n"


# Room shared by the built-in scenarios: the default shape scaled to
# 150 x 75 length units (cell size 1.5), so that with the behavioural
# speeds of order 0.1-0.3 the crowd reaches the exit within t = 250.
_ROOM = """
geometry.width = 150
geometry.height = 75
geometry.exit_start = 22.5
geometry.exit_end = 52.5
geometry.target = 168.75, 37.5
output.exit_depth = 7.5
"""

# Geometry constants chosen to match the three reference layouts
# qualitatively; no coordinates are published for them.
BUILTIN = {
    # one group in the middle of the room
    "scenario1": _ROOM + """
run.name = scenario1
initial.centers = 75, 37.5
initial.radii = 15
""",
    # three separate groups
    "scenario2": _ROOM + """
run.name = scenario2
initial.centers = 37.5, 18.75, 37.5, 56.25, 86.25, 37.5
initial.radii = 9, 9, 9
initial.weights = 1, 1, 1
""",
    # one central group, a wall segment between it and the exit
    "scenario3": _ROOM + """
run.name = scenario3
initial.centers = 75, 37.5
initial.radii = 15
geometry.obstacles = 120, 22.5, 127.5, 52.5
""",
}


def load(source: str, overrides=()) -> ScenarioConfig:
    """Parse a built-in scenario name or a config file path."""
    if source in BUILTIN:
        return parse(BUILTIN[source], overrides, origin=source)
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {source!r}: {exc.strerror or exc}") from None
    return parse(text, overrides, origin=str(path))


def initial_field(cfg: ScenarioConfig, g: Grid2D) -> DensityField:
    """Daily-behaviour density from the configured bumps, normalised to
    unit mass over the active cells; the other populations start empty."""
    if cfg.profile == "uniform":
        theta = g.active.astype(float)
    else:
        theta = bump_density(cfg.bumps, g)
    mass = float(theta.sum()) * g.cell_area
    if not mass > 0:
        raise ConfigError("initial density is zero everywhere (bumps outside the domain or inside obstacles)")
    rho = np.zeros((5,) + g.shape)
    rho[3] = theta / mass
    return DensityField(rho, 0.0)


def bump_density(bumps, g: Grid2D) -> np.ndarray:
    """Unnormalised sum of the rasterised bumps, zero on obstacle cells."""
    X, Y = g.centers()
    theta = np.zeros(g.shape)
    for bp in bumps:
        theta += bp.evaluate(X, Y)
    return np.where(g.active, theta, 0.0)
