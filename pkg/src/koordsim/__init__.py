"""Round-synchronous coordination-language toolkit for simulated robot fleets.

A small event-driven language compiles onto a distributed-shared-memory
runtime; a lock-step harness simulates vehicle motion, networking, and safety
monitors; a CLI drives compilation, simulation, scaling studies, and trace
analysis.
"""

from koordsim.config import ConfigError, SimConfig, load_config
from koordsim.harness import RunResult, make_app_config, run, scaling_experiment
from koordsim.runtime import AgentRuntime, RoundClock, StaleMessageError, compile_program, run_fleet

__version__ = "0.1.0"

__all__ = [
    "AgentRuntime",
    "ConfigError",
    "RoundClock",
    "RunResult",
    "SimConfig",
    "StaleMessageError",
    "compile_program",
    "load_config",
    "make_app_config",
    "run",
    "run_fleet",
    "scaling_experiment",
    "__version__",
]
