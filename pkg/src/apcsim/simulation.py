"""Drive a scenario from t = 0 to ``t_end``: step size selection,
snapshot and time-series collection, ledger bookkeeping."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernel
from .errors import ConfigError, SolverError
from .grid import DirectionField, Grid2D, build_grid, direction_field
from .scenario import ScenarioConfig, initial_field
from .solver import (ABORT_TOL, CLIP_TOL, DensityField, MassLedger, cfl_dt, diagnostics, step)

log = logging.getLogger(__name__)



@dataclass
class RunResult:
    config: ScenarioConfig
    grid: Grid2D
    direction: DirectionField
    dt: float
    n_steps: int
    snapshots: list = field(default_factory=list)  # DensityField per requested time
    series: list = field(default_factory=list)  # dict rows keyed by SERIES_COLUMNS
    ledger: MassLedger | None = None
    final: DensityField | None = None
    min_value: float = math.inf  # over all species, cells and steps, before clipping
    max_mass_increase: float = -math.inf  # max over steps of U(t+dt) - U(t)
    wall_time: float = 0.0

    def snapshot_at(self, t: float) -> DensityField:
        return min(self.snapshots, key=lambda f: abs(f.t - t))

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.series])

    def peak_exit_density(self, species: int = 2, f: DensityField | None = None) -> float:
        """Largest density of ``species`` (1-based) in the cells within
        ``exit_depth`` of the exit."""
        f = f or self.final
        region = self.grid.exit_region(self.config.exit_depth)
        return float(f.rho[species - 1][region].max())

    def summary(self) -> dict:
        last = self.series[-1]
        return {
            "name": self.config.name, "t_end": self.final.t, "dt": self.dt, "steps": self.n_steps,
            "U_final": last["U"], "outflow_cum": self.ledger.exit_outflow_cum,
            "mortality_cum": self.ledger.mortality_cum, "ledger_closure": self.ledger.closure_error(),
            "min_density": self.min_value, "max_rhotilde": max(r["max_rhotilde"] for r in self.series),
            "velocity_clamps": self.ledger.velocity_clamp_count, "clips": self.ledger.clip_count,
            "peak_exit_panic": self.peak_exit_density(2), "wall_time_s": round(self.wall_time, 3),
        }


def choose_dt(cfg: ScenarioConfig, g: Grid2D):
    """Step size and step count covering ``[0, t_end]`` exactly."""
    c = cfg.control
    if c.t_end == 0:
        return 0.0, 0
    bound = cfl_dt(g, cfg.transport, safety=c.cfl_safety, dt_max=c.dt_max)
    if c.dt is not None:
        hard = cfl_dt(g, cfg.transport, safety=1.0, dt_max=math.inf)
        if c.dt > hard * (1 + 1e-12):
            raise ConfigError(f"run.dt={c.dt} exceeds the stability bound {hard:.6g}")
        bound = c.dt
    n = max(1, math.ceil(c.t_end / bound - 1e-9))
    return c.t_end / n, n


def _row(f: DensityField, g: Grid2D, ledger: MassLedger) -> dict:
    d = diagnostics(f, g)
    row = {"t": f.t, "U": d["U"]}
    row.update({f"U{i + 1}": u for i, u in enumerate(d["U_species"])})
    row.update({"minval": d["min"], "max_rhotilde": d["max_rhotilde"],
                "outflow_cum": ledger.exit_outflow_cum, "mortality_cum": ledger.mortality_cum})
    return row


def run(cfg: ScenarioConfig, engine: str = "kernel", progress=None) -> RunResult:
    """Simulate ``cfg``.

    ``engine="numpy"`` uses :func:`apcsim.solver.step` one step at a
    time (slow, for cross-checks); ``"kernel"`` the compiled driver.
    Snapshots are taken at the completed step nearest to each requested
    time.  Raises :class:`SolverError` stamped with the failure time.
    """
    started = time.perf_counter()
    g = build_grid(cfg.geometry)
    df = direction_field(g, cfg.geometry.target)
    f = initial_field(cfg, g)
    dt, n_steps = choose_dt(cfg, g)
    c = cfg.control

    every = max(1, round(c.output_interval / dt)) if n_steps else 1
    out_steps = set(range(0, n_steps + 1, every)) | {n_steps}
    snap_steps = {min(n_steps, round(ts / dt)) if n_steps else 0 for ts in c.snapshot_times}
    stops = sorted(out_steps | snap_steps | {0})

    res = RunResult(cfg, g, df, dt, n_steps)
    ledger = replace(MassLedger.start(diagnostics(f, g)["U"]), min_value=float(f.rho.min()))
    if 0 in out_steps:
        res.series.append(_row(f, g, ledger))
    if 0 in snap_steps:
        res.snapshots.append(f.copy())

    sched, p, tp = cfg.schedule, cfg.behavior, cfg.transport
    if engine == "kernel":
        rho = np.ascontiguousarray(f.rho)
        buf = np.empty_like(rho)
        fx = np.zeros((5, g.ny, g.nx + 1))
        fy = np.zeros((5, g.ny + 1, g.nx))
        d = np.array(tp.d)
        vout = np.array(tp.v_out)
    elif engine != "numpy":
        raise ValueError(f"unknown engine {engine!r}")

    done = 0
    for stop in stops[1:]:
        n = stop - done
        if engine == "kernel":
            times = (done + np.arange(n)) * dt
            gam = np.array([sched.gamma(t) for t in times])
            phi = np.array([sched.phi(t) for t in times])
            k, st = _kernel.advance(rho, buf, fx, fy, g.active, g.face_x, g.face_y, df.face_x, df.face_y,
                                    d, tp.v2max, tp.v3max, tp.clamp_velocity, vout, p.as_tuple(),
                                    dt, g.dx, g.dy, gam, phi, CLIP_TOL, ABORT_TOL)
            if k < n:
                raise SolverError(f"density {st[_kernel.FAIL_VALUE]:.3e} out of range after step "
                                  f"{done + k + 1}; dt={dt:.4g} too large?", t=(done + k + 1) * dt)
            ledger = replace(
                ledger, interior_mass=float(st[_kernel.MASS]),
                exit_outflow_cum=ledger.exit_outflow_cum + float(st[_kernel.OUTFLOW]),
                mortality_cum=ledger.mortality_cum + float(st[_kernel.MORTALITY]),
                clipped_cum=ledger.clipped_cum + float(st[_kernel.CLIPPED]),
                clip_count=ledger.clip_count + int(st[_kernel.CLIP_COUNT]),
                velocity_clamp_count=ledger.velocity_clamp_count + int(st[_kernel.CLAMP_COUNT]),
                negative_input_count=ledger.negative_input_count + int(st[_kernel.NEG_INPUTS]),
                min_value=min(ledger.min_value, float(st[_kernel.MIN_VALUE])))
            res.max_mass_increase = max(res.max_mass_increase, float(st[_kernel.MAX_DU]))
            f = DensityField(rho.copy(), stop * dt)
        else:
            for k in range(n):
                before = ledger.interior_mass
                f, ledger = step(f, ledger, dt, g, df, tp, p, sched)
                # same time stamps as the compiled driver (no accumulated sums)
                f.t = (done + k + 1) * dt
                res.max_mass_increase = max(res.max_mass_increase, ledger.interior_mass - before)
            f = DensityField(f.rho, stop * dt)
        done = stop
        if stop in out_steps:
            res.series.append(_row(f, g, ledger))
        if stop in snap_steps:
            res.snapshots.append(f.copy())
        if progress is not None:
            progress(stop, n_steps)

    res.final = f
    res.ledger = ledger
    res.min_value = ledger.min_value
    res.wall_time = time.perf_counter() - started
    if res.series and max(r["max_rhotilde"] for r in res.series) > 1.0:
        log.warning("total density exceeded 1 (max %.3g); speed law clamped %d times",
                    max(r["max_rhotilde"] for r in res.series), ledger.velocity_clamp_count)
    return res
