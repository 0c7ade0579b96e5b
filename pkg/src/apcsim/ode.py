"""Fixed-step integration of the six-compartment temporal model."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, IntegrationError
from .kinetics import BehaviorParams, TransitionSchedule, reaction_rhs

BLOWUP = 1e3
UNDERSHOOT = -1e-8
DAILY_START = (0.0, 0.0, 0.0, 1.0, 0.0, 0.0)


@dataclass(frozen=True)
class OdeRun:
    """Integration request.  ``store_every`` thins the stored trajectory;
    the final state is always kept."""

    t0: float = 0.0
    t1: float = 250.0
    dt: float = 0.01
    method: str = "rk4"
    initial: tuple = DAILY_START
    store_every: int = 1

    def __post_init__(self):
        if self.method not in ("rk4", "euler"):
            raise ConfigError(f"unknown method {self.method!r}; expected rk4 or euler")
        if not self.t0 <= self.t1:
            raise ConfigError(f"need t0 <= t1, got {self.t0} > {self.t1}")
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.t1 > self.t0 and self.dt > self.t1 - self.t0:
            raise ConfigError(f"dt={self.dt} exceeds the time span {self.t1 - self.t0}")
        if self.store_every < 1:
            raise ConfigError("store_every must be >= 1")
        if len(self.initial) != 6:
            raise ConfigError(f"initial state needs 6 components, got {len(self.initial)}")
        if min(self.initial) < 0:
            raise ConfigError("initial state must be nonnegative")


@dataclass
class OdeTrajectory:
    times: np.ndarray
    states: np.ndarray  # shape (len(times), 6)
    method: str = "rk4"
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def write_csv(self, path) -> None:
        """Write ``t,rho1..rho6`` rows at 17 significant digits."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"rho{i}" for i in range(1, 7)])
            for t, s in zip(self.times, self.states):
                w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in s])

    @classmethod
    def read_csv(cls, path) -> "OdeTrajectory":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(times=data[:, 0], states=data[:, 1:])


def _rk4(rhs, t, y, h, sched, p):
    k1 = rhs(t, y, sched, p)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1, sched, p)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2, sched, p)
    k4 = rhs(t + h, y + h * k3, sched, p)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _euler(rhs, t, y, h, sched, p):
    return y + h * rhs(t, y, sched, p)


def integrate(run: OdeRun, sched: TransitionSchedule | None = None,
              p: BehaviorParams | None = None, rhs=reaction_rhs) -> OdeTrajectory:
    """Integrate the temporal model over ``[run.t0, run.t1]``.

    The last step is shortened so the trajectory lands exactly on
    ``run.t1``.  ``rhs`` may be swapped for diagnostics (mutation
    checks); it must have the signature of
    :func:`apcsim.kinetics.reaction_rhs`.

    Raises
    ------
    IntegrationError
        if a component exceeds 1e3 in magnitude, undershoots below
        -1e-8, or becomes non-finite.
    """
    sched = sched or TransitionSchedule()
    p = p or BehaviorParams()
    advance = _rk4 if run.method == "rk4" else _euler

    span = run.t1 - run.t0
    n_full = math.floor(span / run.dt + 1e-9)
    rest = span - n_full * run.dt
    if rest <= 1e-12 * max(1.0, span):
        rest = 0.0
    n_steps = n_full + (1 if rest > 0 else 0)

    y = np.array(run.initial, dtype=float)
    times = [run.t0]
    states = [y.copy()]
    t = run.t0
    for k in range(n_steps):
        h = run.dt if k < n_full else rest
        y = advance(rhs, t, y, h, sched, p)
        t = run.t1 if k == n_steps - 1 else run.t0 + (k + 1) * run.dt
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > BLOWUP:
            raise IntegrationError(f"blow-up at t={t:.6g}: state={y.tolist()}")
        if y.min() < UNDERSHOOT:
            raise IntegrationError(
                f"negative density {y.min():.3e} at t={t:.6g} (component {int(y.argmin()) + 1}); "
                f"reduce dt")
        if (k + 1) % run.store_every == 0 or k == n_steps - 1:
            times.append(t)
            states.append(y.copy())
    return OdeTrajectory(np.array(times), np.array(states), run.method,
                         meta={"dt": run.dt, "steps": n_steps})


def conservation_report(traj: OdeTrajectory) -> float:
    """Largest absolute drift of the six-compartment total from its
    initial value."""
    if len(traj.times) == 0:
        raise ValueError("empty trajectory")
    totals = traj.states.sum(axis=1)
    return float(np.max(np.abs(totals - totals[0])))
