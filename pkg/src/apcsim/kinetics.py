"""Alert / panic / control reaction kinetics.

Compartments, in order::

    rho1  alert
    rho2  panic
    rho3  control
    rho4  daily behaviour before the event
    rho5  daily behaviour after the event
    rho6  victims (ODE view only)

Every function here is pure.  Densities are clamped at zero before
evaluation so that the spatial stepper may call them on round-off
undershoots; counting such clamps is left to the caller.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError

N_ODE = 6
N_PDE = 5


@dataclass(frozen=True)
class BehaviorParams:
    """Kinetic rates of the behavioural transitions (all in 1/time).

    Attributes
    ----------
    b1 : alert -> control (intrinsic)
    b2 : alert -> panic (intrinsic)
    b3 : control -> alert (intrinsic)
    b4 : panic -> alert (intrinsic)
    c1 : panic -> control (intrinsic)
    c2 : control -> panic (intrinsic)
    delta1, delta2, delta3 : mortality of alert, panic and control individuals
    alpha13 : alert imitating control
    alpha12 : alert imitating panic
    alpha23 : panic imitating control
    alpha32 : control imitating panic
    epsilon : dimensionless guard added to the denominators of the
        population ratios fed to :func:`xi`

    Defaults are the low-risk-culture values used for the evacuation
    scenarios, with no mortality.
    """

    b1: float = 0.1
    b2: float = 0.2
    b3: float = 0.001
    b4: float = 0.001
    c1: float = 0.1
    c2: float = 0.4
    delta1: float = 0.0
    delta2: float = 0.0
    delta3: float = 0.0
    alpha13: float = 0.6
    alpha12: float = 0.7
    alpha23: float = 0.6
    alpha32: float = 0.7
    epsilon: float = 1e-3

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not math.isfinite(value) or value < 0:
                raise ConfigError(f"behavior.{name} must be finite and >= 0, got {value!r}")
        if not 0 < self.epsilon <= 0.1:
            raise ConfigError(f"behavior.epsilon must lie in (0, 0.1], got {self.epsilon!r}")
        if self.epsilon > 0.01:
            warnings.warn(f"epsilon={self.epsilon} is not small; imitation terms are distorted",
                          stacklevel=3)

    def as_tuple(self):
        """Rates in the positional order expected by :func:`reaction_terms`."""
        return (self.b1, self.b2, self.b3, self.b4, self.c1, self.c2,
                self.delta1, self.delta2, self.delta3,
                self.alpha13, self.alpha12, self.alpha23, self.alpha32, self.epsilon)

    def replace(self, **changes) -> "BehaviorParams":
        return BehaviorParams(**{**asdict(self), **changes})


@dataclass(frozen=True)
class Ramp:
    """A transition schedule in time: ``constant`` or cosine ``smoothstep``."""

    kind: str = "constant"
    value: float = 1.0
    t0: float = 0.0
    t1: float = 1.0

    def __post_init__(self):
        if self.kind == "constant":
            if not 0.0 <= self.value <= 1.0:
                raise ConfigError(f"constant ramp value must lie in [0, 1], got {self.value!r}")
        elif self.kind == "smoothstep":
            if not self.t0 < self.t1:
                raise ConfigError(f"smoothstep needs t0 < t1, got t0={self.t0!r}, t1={self.t1!r}")
        else:
            raise ConfigError(f"unknown ramp kind {self.kind!r} (expected constant or smoothstep)")

    def __call__(self, t: float) -> float:
        if self.kind == "constant":
            return float(self.value)
        return zeta(t, self.t0, self.t1)

    @classmethod
    def constant(cls, value: float) -> "Ramp":
        return cls("constant", float(value))

    @classmethod
    def smoothstep(cls, t0: float, t1: float) -> "Ramp":
        return cls("smoothstep", 1.0, float(t0), float(t1))


@dataclass(frozen=True)
class TransitionSchedule:
    """Onset ramp ``gamma`` (daily -> alert) and recovery ramp ``phi``
    (control -> post-event daily).

    The default is the evacuation setting: immediate onset, no return
    to daily life.
    """

    gamma: Ramp = field(default_factory=lambda: Ramp.constant(1.0))
    phi: Ramp = field(default_factory=lambda: Ramp.constant(0.0))


def xi(w):
    """Dominant-behaviour weight ``w**2 / (1 + w**2)``, valued in [0, 1)."""
    w2 = np.square(w) if isinstance(w, np.ndarray) else w * w
    return w2 / (1.0 + w2)


def zeta(t: float, z0: float, z1: float) -> float:
    """Cosine ramp from 0 (before ``z0``) to 1 (after ``z1``)."""
    if not z0 < z1:
        raise ValueError(f"zeta needs z0 < z1, got z0={z0!r}, z1={z1!r}")
    if t < z0:
        return 0.0
    if t > z1:
        return 1.0
    # clip guards the last ulp of cos near the endpoints
    return min(1.0, max(0.0, 0.5 - 0.5 * math.cos(math.pi * (t - z0) / (z1 - z0))))


def gamma_at(t: float, sched: TransitionSchedule) -> float:
    return sched.gamma(t)


def phi_at(t: float, sched: TransitionSchedule) -> float:
    return sched.phi(t)


def _nonneg(x):
    if isinstance(x, np.ndarray):
        return np.maximum(x, 0.0)
    return x if x > 0.0 else 0.0


def imitation_F(rho1, rho3, p: BehaviorParams):
    """Alert individuals imitating control behaviour (rate >= 0)."""
    rho1, rho3 = _nonneg(rho1), _nonneg(rho3)
    return p.alpha13 * xi(rho3 / (rho1 + p.epsilon)) * rho1 * rho3


def imitation_G(rho1, rho2, p: BehaviorParams):
    """Alert individuals imitating panic behaviour (rate >= 0)."""
    rho1, rho2 = _nonneg(rho1), _nonneg(rho2)
    return p.alpha12 * xi(rho2 / (rho1 + p.epsilon)) * rho1 * rho2


def imitation_H(rho2, rho3, p: BehaviorParams):
    """Net panic -> control imitation flow; negative when control
    individuals predominantly copy panic."""
    rho2, rho3 = _nonneg(rho2), _nonneg(rho3)
    return (p.alpha23 * xi(rho3 / (rho2 + p.epsilon))
            - p.alpha32 * xi(rho2 / (rho3 + p.epsilon))) * rho2 * rho3


def reaction_terms(r1, r2, r3, r4, r5, gamma, phi,
                   b1, b2, b3, b4, c1, c2, d1, d2, d3, a13, a12, a23, a32, eps):
    """Right-hand sides of all six compartments from nonnegative inputs.

    Plain arithmetic only, so the same source serves python floats,
    numpy arrays and the compiled stepping kernel.  The panic -> control
    intrinsic flow enters the control equation as ``c1 * r2``; that is
    the reading under which the six rates sum to zero.
    """
    w13 = r3 / (r1 + eps)
    w12 = r2 / (r1 + eps)
    w23 = r3 / (r2 + eps)
    w32 = r2 / (r3 + eps)
    F = a13 * (w13 * w13 / (1.0 + w13 * w13)) * r1 * r3
    G = a12 * (w12 * w12 / (1.0 + w12 * w12)) * r1 * r2
    H = (a23 * (w23 * w23 / (1.0 + w23 * w23)) - a32 * (w32 * w32 / (1.0 + w32 * w32))) * r2 * r3
    onset = gamma * r4
    recovery = phi * r3
    f1 = -(b1 + b2 + d1) * r1 + onset + b3 * r3 + b4 * r2 - F - G
    f2 = -(b4 + c1 + d2) * r2 + b2 * r1 + c2 * r3 + G - H
    f3 = -(b3 + c2 + d3) * r3 + b1 * r1 + c1 * r2 - recovery + F + H
    f4 = -onset
    f5 = recovery
    f6 = d1 * r1 + d2 * r2 + d3 * r3
    return f1, f2, f3, f4, f5, f6


def reaction_rhs(t: float, s, sched: TransitionSchedule, p: BehaviorParams) -> np.ndarray:
    """Time derivative of the six-compartment state ``s``."""
    r = [_nonneg(float(v)) for v in s]
    if len(r) != N_ODE:
        raise ValueError(f"expected {N_ODE} compartments, got {len(r)}")
    return np.array(reaction_terms(*r[:5], sched.gamma(t), sched.phi(t), *p.as_tuple()))


def reaction_rhs_pde(t: float, rho, sched: TransitionSchedule, p: BehaviorParams) -> np.ndarray:
    """Local reaction rates of the five spatial densities.

    ``rho`` has a leading axis of length 5; any trailing shape (a single
    cell, a grid) is carried through.  Mortality leaves the system
    rather than feeding a victims compartment.
    """
    rho = np.maximum(np.asarray(rho, dtype=float), 0.0)
    if rho.shape[0] != N_PDE:
        raise ValueError(f"expected {N_PDE} densities on the leading axis, got {rho.shape[0]}")
    terms = reaction_terms(*rho, sched.gamma(t), sched.phi(t), *p.as_tuple())
    return np.stack([np.broadcast_to(f, rho.shape[1:]) for f in terms[:5]]).astype(float)
