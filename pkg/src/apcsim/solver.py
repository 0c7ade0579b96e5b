"""Cell-centred finite-volume discretisation of the five-population
advection-diffusion-reaction system.

Fluxes are normal fluxes per unit face length, positive along +x on
vertical faces and along +y on horizontal faces.  Diffusion uses the
two-point flux, the panic and control populations are advected with a
first-order upwind flux, walls carry no flux and every exit face carries
the outgoing flux ``rho * v_out`` of the cell behind it.  Time stepping
is forward Euler, so the mass leaving through exits and through
mortality in one step is exactly what the update removed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, SolverError
from .grid import EXIT, OPEN, DirectionField, Grid2D
from .kinetics import N_PDE, BehaviorParams, TransitionSchedule, reaction_rhs_pde

CLIP_TOL = 1e-12
ABORT_TOL = -1e-8
ADVECTED = (1, 2)  # panic and control


@dataclass(frozen=True)
class TransportParams:
    """Diffusivities ``d`` (length^2/time), free speeds of the panic and
    control populations and exit speeds ``v_out`` (length/time).

    With ``clamp_velocity`` the linear speed-density law is cut at zero
    once the total density exceeds one; ``False`` keeps the raw law.
    """

    d: tuple = (0.001, 0.05, 0.01, 0.01, 0.01)
    v2max: float = 0.3
    v3max: float = 0.2
    v_out: tuple = (0.2, 0.1, 0.3, 0.2, 0.2)
    clamp_velocity: bool = True

    def __post_init__(self):
        object.__setattr__(self, "d", tuple(float(v) for v in self.d))
        object.__setattr__(self, "v_out", tuple(float(v) for v in self.v_out))
        if len(self.d) != N_PDE or len(self.v_out) != N_PDE:
            raise ConfigError("transport needs five diffusivities and five exit speeds")
        for name, v in [*zip(("d1", "d2", "d3", "d4", "d5"), self.d),
                        ("v2max", self.v2max), ("v3max", self.v3max),
                        *zip(("v1_out", "v2_out", "v3_out", "v4_out", "v5_out"), self.v_out)]:
            if not math.isfinite(v) or v < 0:
                raise ConfigError(f"transport.{name} must be finite and >= 0, got {v!r}")


@dataclass
class DensityField:
    rho: np.ndarray  # (5, ny, nx)
    t: float = 0.0

    def copy(self) -> "DensityField":
        return DensityField(self.rho.copy(), self.t)


@dataclass
class MassLedger:
    """Running account of where the initial mass went.

    ``clipped_cum`` is the (tiny) mass added by zeroing round-off
    undershoots; it enters the balance with a minus sign.  ``min_value``
    is the running minimum density seen before clipping.
    """

    initial_mass: float
    interior_mass: float
    exit_outflow_cum: float = 0.0
    mortality_cum: float = 0.0
    clipped_cum: float = 0.0
    clip_count: int = 0
    velocity_clamp_count: int = 0
    negative_input_count: int = 0
    min_value: float = math.inf

    @classmethod
    def start(cls, mass: float) -> "MassLedger":
        return cls(mass, mass)

    @property
    def balance(self) -> float:
        return self.interior_mass + self.exit_outflow_cum + self.mortality_cum - self.clipped_cum

    def closure_error(self) -> float:
        """Relative mismatch of the balance against the initial mass."""
        scale = self.initial_mass if self.initial_mass > 0 else 1.0
        return abs(self.balance - self.initial_mass) / scale


@dataclass(frozen=True)
class StepControl:
    """Time step policy.  ``dt=None`` takes ``cfl_safety`` times the CFL
    bound, shrunk so that ``t_end`` is a whole number of steps."""

    t_end: float = 250.0
    cfl_safety: float = 0.5
    dt: float | None = None
    dt_max: float = 0.1
    output_interval: float = 1.0
    snapshot_times: tuple = (50.0, 100.0, 150.0, 200.0, 250.0)

    def __post_init__(self):
        if self.t_end < 0:
            raise ConfigError("run.t_end must be >= 0")
        if not self.cfl_safety > 0:
            raise ConfigError("run.cfl_safety must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError("run.dt must be positive")
        if not self.output_interval > 0:
            raise ConfigError("run.output_interval must be positive")
        if not self.dt_max > 0:
            raise ConfigError("run.dt_max must be positive")


@dataclass
class Fluxes:
    x: np.ndarray  # (5, ny, nx+1)
    y: np.ndarray  # (5, ny+1, nx)
    exit_rate: float = 0.0  # total mass per unit time leaving through exits
    clamped: int = 0


def velocity_closure(rho, tp: TransportParams, clamp: bool | None = None):
    """Scalar speeds ``(V2, V3)`` from the linear law ``Vmax * (1 - total)``."""
    clamp = tp.clamp_velocity if clamp is None else clamp
    rho = np.asarray(rho, dtype=float)
    slack = 1.0 - rho.sum(axis=0)
    if clamp:
        slack = np.maximum(slack, 0.0)
    return tp.v2max * slack, tp.v3max * slack


def assemble_fluxes(f: DensityField, g: Grid2D, df: DirectionField, tp: TransportParams) -> Fluxes:
    """Normal flux of every species on every face."""
    rho = f.rho
    ns, ny, nx = rho.shape
    fx = np.zeros((ns, ny, nx + 1))
    fy = np.zeros((ns, ny + 1, nx))
    d = np.asarray(tp.d)[:, None, None]

    fx[:, :, 1:-1] = -d * (rho[:, :, 1:] - rho[:, :, :-1]) / g.dx
    fy[:, 1:-1, :] = -d * (rho[:, 1:, :] - rho[:, :-1, :]) / g.dy

    V2, V3 = velocity_closure(rho, tp)
    clamped = int(np.count_nonzero(rho.sum(axis=0)[g.active] > 1.0)) if tp.clamp_velocity else 0
    for s, V in zip(ADVECTED, (V2, V3)):
        # a_L, a_R: face-normal speeds seen from either side; the split
        # max(a_L, 0) rho_L + min(a_R, 0) rho_R is the upwind flux
        aL = V[:, :-1] * df.face_x[:, 1:-1]
        aR = V[:, 1:] * df.face_x[:, 1:-1]
        fx[s, :, 1:-1] += np.maximum(aL, 0.0) * rho[s, :, :-1] + np.minimum(aR, 0.0) * rho[s, :, 1:]
        aL = V[:-1, :] * df.face_y[1:-1, :]
        aR = V[1:, :] * df.face_y[1:-1, :]
        fy[s, 1:-1, :] += np.maximum(aL, 0.0) * rho[s, :-1, :] + np.minimum(aR, 0.0) * rho[s, 1:, :]

    fx *= g.face_x == OPEN
    fy *= g.face_y == OPEN

    vout = np.asarray(tp.v_out)[:, None]
    exits = 0.0
    m = g.face_x[:, 0] == EXIT
    if m.any():
        fx[:, m, 0] = -rho[:, m, 0] * vout
        exits += g.dy * float(rho[:, m, 0].sum(axis=1) @ np.asarray(tp.v_out))
    m = g.face_x[:, -1] == EXIT
    if m.any():
        fx[:, m, -1] = rho[:, m, -1] * vout
        exits += g.dy * float(rho[:, m, -1].sum(axis=1) @ np.asarray(tp.v_out))
    m = g.face_y[0, :] == EXIT
    if m.any():
        fy[:, 0, m] = -rho[:, 0, m] * vout
        exits += g.dx * float(rho[:, 0, m].sum(axis=1) @ np.asarray(tp.v_out))
    m = g.face_y[-1, :] == EXIT
    if m.any():
        fy[:, -1, m] = rho[:, -1, m] * vout
        exits += g.dx * float(rho[:, -1, m].sum(axis=1) @ np.asarray(tp.v_out))
    return Fluxes(fx, fy, exits, clamped)


def cfl_dt(g: Grid2D, tp: TransportParams, max_speed: float | None = None,
           safety: float = 0.5, dt_max: float = 0.1) -> float:
    """Largest explicit step allowed by the diffusion and transport bounds.

    ``max_speed`` defaults to the largest free speed plus the largest exit
    speed, which bounds every face speed of the clamped closure.
    """
    h = min(g.dx, g.dy)
    dmax = max(tp.d)
    if max_speed is None:
        max_speed = max(tp.v2max, tp.v3max) + max(tp.v_out)
    bounds = [h * h / (4.0 * dmax) if dmax > 0 else math.inf,
              h / max_speed if max_speed > 0 else math.inf]
    return min(safety * min(bounds), dt_max)


def mortality_rate(rho, p: BehaviorParams, area: float) -> float:
    r = np.maximum(rho[:3], 0.0)
    return area * float(p.delta1 * r[0].sum() + p.delta2 * r[1].sum() + p.delta3 * r[2].sum())


def step(f: DensityField, ledger: MassLedger, dt: float, g: Grid2D, df: DirectionField,
         tp: TransportParams, p: BehaviorParams, sched: TransitionSchedule):
    """One forward-Euler update; returns the new field and ledger.

    Raises :class:`SolverError` on non-finite values or on an undershoot
    below -1e-8.  Undershoots within 1e-12 of zero are clipped and the
    added mass is booked in the ledger.
    """
    rho = f.rho
    fl = assemble_fluxes(f, g, df, tp)
    div = (fl.x[:, :, 1:] - fl.x[:, :, :-1]) / g.dx + (fl.y[:, 1:, :] - fl.y[:, :-1, :]) / g.dy
    react = reaction_rhs_pde(f.t, rho, sched, p) * g.active
    new = rho + dt * (-div + react)
    new[:, ~g.active] = 0.0

    if not np.all(np.isfinite(new)):
        raise SolverError("non-finite density", t=f.t + dt)
    low = new.min()
    if low < ABORT_TOL:
        raise SolverError(f"density undershoot {low:.3e} below {ABORT_TOL:g}; dt too large?", t=f.t + dt)
    tiny = (new < 0.0) & (new >= -CLIP_TOL)
    clipped = -float(new[tiny].sum()) * g.cell_area
    new[tiny] = 0.0

    led = replace(
        ledger,
        interior_mass=math.fsum(new.ravel()) * g.cell_area,
        exit_outflow_cum=ledger.exit_outflow_cum + dt * fl.exit_rate,
        mortality_cum=ledger.mortality_cum + dt * mortality_rate(rho, p, g.cell_area),
        clipped_cum=ledger.clipped_cum + clipped,
        clip_count=ledger.clip_count + int(tiny.sum()),
        velocity_clamp_count=ledger.velocity_clamp_count + fl.clamped,
        negative_input_count=ledger.negative_input_count + int(np.count_nonzero(rho < 0)),
        min_value=min(ledger.min_value, float(low)),
    )
    return DensityField(new, f.t + dt), led


def diagnostics(f: DensityField, g: Grid2D) -> dict:
    """Cell-area weighted masses and extreme values of a field."""
    rho = f.rho
    per = rho.sum(axis=(1, 2)) * g.cell_area
    total = rho.sum(axis=0)
    return {
        "t": f.t,
        "U": math.fsum(rho.ravel()) * g.cell_area,
        "U_species": [float(v) for v in per],
        "min": float(rho[:, g.active].min()),
        "max": float(rho[:, g.active].max()),
        "max_rhotilde": float(total[g.active].max()),
    }
