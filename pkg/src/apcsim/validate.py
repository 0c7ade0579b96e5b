"""Self-checks of the simulator against independent oracles.

Each check returns a :class:`Check`; :func:`run_suite` collects them.
Two debug hooks exist to demonstrate that the suite bites: a sign error
injected into the panic/control imitation term, and a forced CFL safety
factor.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ApcError, SolverError
from .grid import EXIT, OPEN, WALL, GeometrySpec, build_grid, check_divergence, direction_field
from .kinetics import BehaviorParams, Ramp, TransitionSchedule, imitation_H, reaction_rhs
from .ode import OdeRun, conservation_report, integrate
from .scenario import BUILTIN, load, parse
from .simulation import run
from .solver import DensityField, MassLedger, TransportParams, step


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    limit: float
    detail: str = ""

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark}  {self.name:<24} value={self.value:<12.4g} limit={self.limit:<10.3g} {self.detail}"


def h_sign_error_rhs(t, s, sched, p):
    """Reaction rates with the imitation term H entering the panic
    equation with the wrong sign (mutation used to test the suite)."""
    out = reaction_rhs(t, s, sched, p)
    out[1] += 2.0 * imitation_H(s[1], s[2], p)
    return out


def check_conservation(inject_h_sign: bool = False, t_end: float = 250.0) -> Check:
    rhs = h_sign_error_rhs if inject_h_sign else reaction_rhs
    try:
        traj = integrate(OdeRun(t1=t_end, dt=0.01, store_every=10), rhs=rhs)
        drift = conservation_report(traj)
    except ApcError as exc:
        return Check("ode_conservation", False, float("nan"), 1e-10, str(exc))
    return Check("ode_conservation", drift <= 1e-10, drift, 1e-10)


def small_scenario(cfl_safety: float = 0.5, t_end: float = 20.0):
    """One central group in the default 2 x 1 room on a 40 x 20 grid.

    The cells are small enough for the diffusive stability bound to set
    the step, so ``cfl_safety`` above 1 produces an unstable run.
    """
    return parse("", ["run.name=small", "geometry.nx=40", "geometry.ny=20", f"run.t_end={t_end}",
                      f"run.cfl_safety={cfl_safety}", "run.output_interval=1"], origin="small")


def check_positivity_and_ledger(cfl_safety: float = 0.5):
    try:
        res = run(small_scenario(cfl_safety))
    except SolverError as exc:
        return [Check("pde_positivity", False, float("-inf"), -1e-12, f"solver aborted: {exc}"),
                Check("ledger_closure", False, float("nan"), 1e-10, "no run"),
                Check("mass_monotone", False, float("nan"), 1e-14, "no run")]
    return [
        Check("pde_positivity", res.min_value >= -1e-12, res.min_value, -1e-12, "min density"),
        Check("ledger_closure", res.ledger.closure_error() <= 1e-10, res.ledger.closure_error(), 1e-10),
        Check("mass_monotone", res.max_mass_increase <= 1e-14, res.max_mass_increase, 1e-14,
              "max U(t+dt)-U(t)"),
    ]


def zero_transport_difference(t_end: float = 10.0, dt: float = 0.01, nx: int = 8, ny: int = 4) -> float:
    """Max difference between every cell of a transport-free uniform PDE
    run and the Euler-integrated ODE from the same local state."""
    cfg = load("scenario1", [
        f"geometry.nx={nx}", f"geometry.ny={ny}", "initial.profile=uniform",
        *[f"transport.d{i}=0" for i in range(1, 6)],
        *[f"transport.v{i}_out=0" for i in range(1, 6)],
        "transport.v2max=0", "transport.v3max=0",
        f"run.t_end={t_end}", f"run.dt={dt}", "run.snapshot_times="])
    res = run(cfg)
    start = 1.0 / (cfg.geometry.width * cfg.geometry.height)
    traj = integrate(OdeRun(t1=t_end, dt=res.dt, method="euler", initial=(0, 0, 0, start, 0, 0),
                            store_every=10 ** 9), cfg.schedule, cfg.behavior)
    return float(np.max(np.abs(res.final.rho - traj.final[:5, None, None])))


def check_zero_transport() -> Check:
    diff = zero_transport_difference()
    return Check("zero_transport_oracle", diff <= 1e-6, diff, 1e-6, "PDE cell vs ODE at t=10")


def dense_diffusion_matrix(g, d: float, v_out: float) -> np.ndarray:
    """Operator of pure diffusion with no-flux walls and outflow ``v_out``
    through exit faces, built cell by cell from the face classification."""
    ny, nx = g.shape
    n = nx * ny
    L = np.zeros((n, n))

    def idx(j, i):
        return j * nx + i

    for j in range(ny):
        for i in range(nx):
            if not g.active[j, i]:
                continue
            c = idx(j, i)
            # (face kind, neighbour index or None, spacing)
            sides = [(g.face_x[j, i], (j, i - 1), g.dx), (g.face_x[j, i + 1], (j, i + 1), g.dx),
                     (g.face_y[j, i], (j - 1, i), g.dy), (g.face_y[j + 1, i], (j + 1, i), g.dy)]
            for kind, (jj, ii), h in sides:
                if kind == OPEN:
                    L[c, c] -= d / (h * h)
                    L[c, idx(jj, ii)] += d / (h * h)
                elif kind == EXIT:
                    L[c, c] -= v_out / h
    return L


def diffusion_oracle_error(rng, nx: int, ny: int, with_exit: bool = True) -> float:
    spec = GeometrySpec(width=nx * 0.1, height=ny * 0.1, nx=nx, ny=ny,
                        exit_side="right", exit_start=0.0, exit_end=ny * 0.1, target=(nx * 0.1 + 0.5, ny * 0.05))
    g = build_grid(spec)
    if not with_exit:
        g = replace(g, face_x=np.where(g.face_x == EXIT, WALL, g.face_x).astype(np.int8))
    df = direction_field(g, spec.target)
    d = float(rng.uniform(0.001, 0.05))
    v_out = float(rng.uniform(0.0, 0.3)) if with_exit else 0.0
    dt = 0.2 * 0.01 / (4 * d)
    rho = rng.uniform(0.0, 1.0, size=(5, ny, nx))
    tp = TransportParams(d=(d,) * 5, v2max=0.0, v3max=0.0, v_out=(v_out,) * 5)
    inert = BehaviorParams(b1=0, b2=0, b3=0, b4=0, c1=0, c2=0, alpha13=0, alpha12=0, alpha23=0, alpha32=0)
    sched = TransitionSchedule(gamma=Ramp.constant(0.0), phi=Ramp.constant(0.0))
    new, _ = step(DensityField(rho.copy()), MassLedger.start(1.0), dt, g, df, tp, inert, sched)
    L = dense_diffusion_matrix(g, d, v_out)
    err = 0.0
    for s in range(5):
        expect = rho[s].ravel() + dt * (L @ rho[s].ravel())
        err = max(err, float(np.max(np.abs(new.rho[s].ravel() - expect))))
    return err


def check_diffusion_oracle(trials: int = 100, seed: int = 7) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(trials):
        nx, ny = int(rng.integers(3, 6)), int(rng.integers(3, 6))
        worst = max(worst, diffusion_oracle_error(rng, nx, ny, with_exit=bool(k % 2)))
    return Check("diffusion_oracle", worst <= 1e-14, worst, 1e-14, f"{trials} random grids <= 5x5")


def check_divergence_builtin() -> Check:
    worst, flagged = -np.inf, 0
    for name in BUILTIN:
        cfg = load(name)
        g = build_grid(cfg.geometry)
        df = direction_field(g, cfg.geometry.target)
        worst = max(worst, check_divergence(df, g))
        flagged += df.n_into_wall
    return Check("direction_divergence", worst <= 1e-8, worst, 1e-8,
                 f"cells pointing into walls: {flagged}")


def run_suite(inject_h_sign: bool = False, cfl_safety: float = 0.5) -> list:
    checks = [check_conservation(inject_h_sign)]
    checks += check_positivity_and_ledger(cfl_safety)
    checks += [check_zero_transport(), check_diffusion_oracle(), check_divergence_builtin()]
    return checks
