"""Experience replay, its mean-field ODE model and the adaptive-memory controller."""

from .linesearch import (
    LineSearchConfig,
    LinearTheta,
    MetricPair,
    Transition,
    TrueWeights,
    env_step,
    greedy_action,
    measure_M,
    metrics,
    q_value,
    reward,
    td_error,
    td_update,
)
from .ode_model import OdeParams, OdeSolution, integrate_linesearch, integrate_pinned, rk4_integrate
from .replay import AdaptiveMemory, AerConfig, AerState, PrioritizationConfig, ReplayBuffer

__version__ = "0.1.0"

__all__ = [
    "AdaptiveMemory", "AerConfig", "AerState", "LineSearchConfig", "LinearTheta", "MetricPair",
    "OdeParams", "OdeSolution", "PrioritizationConfig", "ReplayBuffer", "Transition", "TrueWeights",
    "env_step", "greedy_action", "integrate_linesearch", "integrate_pinned", "measure_M", "metrics",
    "q_value", "reward", "rk4_integrate", "td_error", "td_update",
]
