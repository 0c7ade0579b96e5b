"""Alert/panic/control crowd evacuation simulator.

Spatially homogeneous behaviour dynamics (:mod:`apcsim.ode`), their
spatial advection-diffusion-reaction counterpart on a 2-D room
(:mod:`apcsim.solver`, :mod:`apcsim.simulation`), scenario configs,
plain-text output and a command-line interface.
"""
from .errors import ApcError, ConfigError, IntegrationError, SolverError
from .kinetics import BehaviorParams, Ramp, TransitionSchedule, reaction_rhs
from .ode import OdeRun, OdeTrajectory, conservation_report, integrate
from .scenario import BUILTIN, ScenarioConfig, load, parse
from .simulation import RunResult, run

__all__ = [
    "ApcError", "ConfigError", "IntegrationError", "SolverError",
    "BehaviorParams", "Ramp", "TransitionSchedule", "reaction_rhs",
    "OdeRun", "OdeTrajectory", "conservation_report", "integrate",
    "BUILTIN", "ScenarioConfig", "load", "parse", "RunResult", "run",
]
__version__ = "0.1.0"
