"""Q-network agents and classic control environments."""

from .dqn import (
    DqnAgent,
    DqnConfig,
    EpsilonSchedule,
    PairedTraces,
    TrainingTrace,
    dqn_step,
    epsilon_greedy,
    preset_config,
    train_dqn,
    train_paired,
)
from .envs import Acrobot, CartPole, ControlEnvState, MountainCar, control_env_step, make_env
from .mlp import MlpParams, init_mlp, mlp_forward, mlp_gradient

__all__ = [
    "Acrobot", "CartPole", "ControlEnvState", "DqnAgent", "DqnConfig", "EpsilonSchedule",
    "MlpParams", "MountainCar", "control_env_step", "dqn_step", "epsilon_greedy", "init_mlp",
    "make_env", "mlp_forward", "mlp_gradient", "preset_config", "train_dqn",
    "PairedTraces", "TrainingTrace", "train_paired",
]
