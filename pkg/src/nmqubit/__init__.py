"""
Coherence control of a qubit in a non-Markovian reservoir.

Start with ReservoirParams and build_coefficient_table for the reservoir
rates, simulate for single measured trajectories, forward_backward_sweep
for the optimal control and run_ensemble for ensemble statistics.
"""
from .version import __version__  # noqa: F401
from .kernels import (  # noqa: F401
    CoefficientTable,
    QuadratureOptions,
    ReservoirParams,
    build_coefficient_table,
)
from .qubit import BlochState, ControlInput, ModeFlag  # noqa: F401
from .sde import IntegratorConfig, TrajectoryRecord, simulate  # noqa: F401
from .control import (  # noqa: F401
    OCConfig,
    OCResult,
    feedback_policy,
    forward_backward_sweep,
)
from .ensemble import (  # noqa: F401
    EnsembleStats,
    compare_modes,
    run_ensemble,
    temperature_scan,
)
from .config import RunConfig, load_config, parse_config  # noqa: F401
