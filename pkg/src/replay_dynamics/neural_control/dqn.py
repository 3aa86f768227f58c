"""DQN-style training with (adaptive) experience replay on the control tasks.

Each environment step stores one transition and then performs ``m``
sequential single-sample TD updates bootstrapped from the current weights.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..linesearch import Transition
from ..replay import (
    AdaptiveMemory,
    AerConfig,
    AerEvent,
    PrioritizationConfig,
    ReplayBuffer,
    _draw,
    priority_probabilities,
)
from . import _kernels
from .envs import ControlEnv, ControlEnvState, make_env
from .mlp import ACTIVATIONS, MlpParams, init_mlp, mlp_forward


@dataclass(frozen=True)
class EpsilonSchedule:
    """Linear decay from ``start`` to ``end`` over the first ``fraction`` of training."""

    start: float = 1.0
    end: float = 0.05
    fraction: float = 0.2

    def value(self, step: int, total_steps: int) -> float:
        span = max(self.fraction * total_steps, 1.0)
        frac = min(step / span, 1.0)
        return self.start + frac * (self.end - self.start)


@dataclass(frozen=True)
class DqnConfig:
    alpha: float
    gamma: float
    m: int = 50
    total_steps: int = 20_000
    capacity: int = 100
    aer: AerConfig | None = None
    prioritization: PrioritizationConfig | None = None
    hidden: tuple[int, ...] = (32,)
    activation: str = "relu"
    epsilon: EpsilonSchedule = EpsilonSchedule()

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.aer is not None and self.prioritization is not None:
            raise ValueError("adaptive memory and prioritization are exclusive")


# discounts, network depths and aER sample counts of the published control
# experiments; the acrobot step size is lowered from 1e-3 because plain
# sequential SGD without a target network diverges there
PRESETS = {
    "cartpole": dict(alpha=2e-5, gamma=0.9, hidden=(32,), aer_sample=50),
    "mountaincar": dict(alpha=6e-4, gamma=0.99, hidden=(64, 64), aer_sample=1000),
    "acrobot": dict(alpha=1e-4, gamma=0.99, hidden=(64, 64), aer_sample=1000),
}


def preset_config(env: str, capacity: int, adaptive: bool = False, k: int = 20, **overrides) -> DqnConfig:
    """Config with the published hyperparameters; the aER window is half the initial size."""
    preset = dict(PRESETS[env])
    sample = preset.pop("aer_sample")
    aer = None
    if adaptive:
        n_old = max(capacity // 2, 1)
        aer = AerConfig(n0=capacity, k=k, n_old=n_old, sample_count=min(sample, n_old))
    preset.update(overrides)
    return DqnConfig(capacity=capacity, aer=aer, **preset)


def epsilon_greedy(q, eps: float, rng: np.random.Generator) -> int:
    """Greedy action (lowest index on ties) or, with probability ``eps``, a uniform one."""
    q = np.asarray(q)
    if q.size == 0:
        raise ValueError("empty Q-value vector")
    if not 0 <= eps <= 1:
        raise ValueError(f"eps must lie in [0, 1], got {eps}")
    if rng.random() < eps:
        return int(rng.integers(q.size))
    return int(np.argmax(q))


class DqnAgent:
    def __init__(self, params: MlpParams):
        self.params = params
        self._sizes = np.asarray(params.layer_sizes, dtype=np.int64)
        self._act = ACTIVATIONS[params.activation]

    def q(self, obs) -> np.ndarray:
        return _kernels.forward(self.params.flat, self._sizes, self._act, np.asarray(obs, dtype=float))

    def td(self, batch: Transition, gamma: float) -> np.ndarray:
        """TD errors of a batch of stored transitions under the current weights."""
        q = mlp_forward(self.params, np.atleast_2d(batch.x))
        q_next = mlp_forward(self.params, np.atleast_2d(batch.x_next)).max(axis=1)
        a = np.asarray(batch.a, dtype=np.int64)
        target = batch.r + gamma * np.where(batch.terminal, 0.0, q_next)
        return target - q[np.arange(len(a)), a]

    def update(self, buffer: ReplayBuffer, slots: np.ndarray, alpha: float, gamma: float) -> np.ndarray:
        return _kernels.td_updates(
            self.params.flat, self._sizes, self._act,
            buffer.x, buffer.a, buffer.r, buffer.x_next, buffer.terminal,
            np.asarray(slots, dtype=np.int64), alpha, gamma,
        )


@dataclass
class DqnRun:
    """Mutable state of one training run (agent, memory, environment)."""

    agent: DqnAgent
    buffer: ReplayBuffer
    env: ControlEnv
    state: ControlEnvState
    memory: AdaptiveMemory | None = None
    step: int = 0
    episode_return: float = 0.0
    returns: list[float] = field(default_factory=list)
    capacities: list[int] = field(default_factory=list)

    @property
    def events(self) -> list[AerEvent]:
        return self.memory.events if self.memory else []


def new_run(env: str | ControlEnv, cfg: DqnConfig, rng: np.random.Generator) -> DqnRun:
    env = make_env(env) if isinstance(env, str) else env
    state = env.reset(rng)
    sizes = (env.obs_dim, *cfg.hidden, env.n_actions)
    agent = DqnAgent(init_mlp(sizes, rng, cfg.activation))
    memory = AdaptiveMemory(cfg.aer) if cfg.aer else None
    buffer = memory.new_buffer() if memory else ReplayBuffer(cfg.capacity)
    return DqnRun(agent, buffer, env, state, memory)


def dqn_step(run: DqnRun, cfg: DqnConfig, rng: np.random.Generator) -> DqnRun:
    """Act, store, replay ``m`` sampled transitions, then let aER adjust the memory."""
    run.step += 1
    obs = run.env.observe(run.state)
    eps = cfg.epsilon.value(run.step, cfg.total_steps)
    action = epsilon_greedy(run.agent.q(obs), eps, rng)
    nxt, reward, terminal = run.env.step(run.state, action)
    done = terminal and not nxt.truncated
    run.buffer.push(Transition(obs, action, reward, run.env.observe(nxt), done))
    run.episode_return += reward

    td = lambda batch: run.agent.td(batch, cfg.gamma)  # noqa: E731
    if cfg.prioritization is None:
        positions = rng.integers(len(run.buffer), size=cfg.m)
        deltas = run.agent.update(run.buffer, run.buffer.storage_slots(positions), cfg.alpha, cfg.gamma)
    else:
        deltas = np.empty(cfg.m)
        for j in range(cfg.m):
            probs = priority_probabilities(td(run.buffer.view()), cfg.prioritization.beta_exp)
            slot = run.buffer.storage_slots([_draw(probs, rng)])
            deltas[j] = run.agent.update(run.buffer, slot, cfg.alpha, cfg.gamma)[0]
    if not np.all(np.isfinite(deltas)):
        raise FloatingPointError(f"TD learning diverged at step {run.step}")

    if run.memory is not None:
        run.memory.step(run.step, run.buffer, td, rng)

    if terminal:
        run.returns.append(run.episode_return)
        run.capacities.append(run.buffer.capacity)
        run.episode_return = 0.0
        run.state = run.env.reset(rng)
    else:
        run.state = nxt
    return run


@dataclass
class TrainingTrace:
    returns: np.ndarray
    capacities: np.ndarray
    events: list[AerEvent]
    steps: int

    @property
    def mean_return(self) -> float:
        return float(np.mean(self.returns)) if len(self.returns) else float("nan")


def _trace(run: DqnRun, first_episode: int = 0) -> TrainingTrace:
    return TrainingTrace(
        np.asarray(run.returns[first_episode:]),
        np.asarray(run.capacities[first_episode:], dtype=np.int64),
        list(run.events),
        run.step,
    )


def train_dqn(env: str, cfg: DqnConfig, seed: int) -> TrainingTrace:
    rng = np.random.default_rng(seed)
    run = new_run(env, cfg, rng)
    for _ in range(cfg.total_steps):
        dqn_step(run, cfg, rng)
    return _trace(run)


@dataclass
class PairedTraces:
    """Fixed-capacity and adaptive runs sharing everything up to the first fill."""

    fixed: TrainingTrace
    adaptive: TrainingTrace
    fill_step: int

    @property
    def adaptive_wins(self) -> bool:
        return self.adaptive.mean_return >= self.fixed.mean_return


def train_paired(env: str, fixed: DqnConfig, adaptive: DqnConfig, seed: int) -> PairedTraces:
    """Train a fixed-memory and an aER agent from one seed, sharing the fill-up phase.

    Until the buffer first fills, the controller never fires, so both runs are
    identical; the prefix is simulated once and then copied (with the random
    state). Returned traces cover only the episodes finished after the split,
    which is where the two memories can differ.
    """
    if fixed.aer is not None or adaptive.aer is None:
        raise ValueError("need one fixed-capacity and one adaptive config")
    if fixed.capacity != adaptive.aer.n0 or fixed.total_steps != adaptive.total_steps:
        raise ValueError("paired configs must share the initial capacity and step budget")
    rng = np.random.default_rng(seed)
    run = new_run(env, fixed, rng)
    while not run.buffer.full and run.step < fixed.total_steps:
        dqn_step(run, fixed, rng)
    split = len(run.returns)
    fill_step = run.step
    twin, twin_rng = copy.deepcopy(run), copy.deepcopy(rng)
    twin.memory = AdaptiveMemory(adaptive.aer)
    while run.step < fixed.total_steps:
        dqn_step(run, fixed, rng)
    while twin.step < adaptive.total_steps:
        dqn_step(twin, adaptive, twin_rng)
    return PairedTraces(_trace(run, split), _trace(twin, split), fill_step)
