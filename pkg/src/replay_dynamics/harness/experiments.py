"""Experiment runners: simulated LineSearch agents, theory curves, sweeps, aER."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .. import analytic
from ..linesearch import (
    LinearTheta,
    env_step,
    greedy_action,
    measure_M,
    td_error,
    td_update,
)
from ..neural_control.dqn import (
    PRESETS,
    DqnConfig,
    TrainingTrace,
    preset_config,
    train_dqn,
    train_paired,
)
from ..ode_model import OdeSolution, integrate_linesearch
from ..replay import AdaptiveMemory, AerEvent, ReplayBuffer
from .config import ExperimentConfig

WORKERS_ENV = "REPLAY_DYNAMICS_WORKERS"


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{WORKERS_ENV} must be >= 1, got {n}")
    return n


def parallel_map(fn: Callable, items: Sequence) -> list:
    """Ordered map over independent jobs, in a process pool when workers > 1."""
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# -- LineSearch simulation ---------------------------------------------------


@dataclass
class LineSearchTrace:
    """Metrics (against the learning target) and memory size after every step.

    Row ``t`` is the state after ``t`` learning steps; row 0 is the start.
    When repetitions are averaged, ``capacity`` is the mean capacity.
    """

    times: np.ndarray
    values: np.ndarray
    capacity: np.ndarray
    events: list[AerEvent] = field(default_factory=list)

    @property
    def d1(self) -> np.ndarray:
        return self.values[:, 0]

    @property
    def d2(self) -> np.ndarray:
        return self.values[:, 1]

    @property
    def final_M(self) -> float:
        return measure_M(*self.values[-1])


def simulate_linesearch(cfg: ExperimentConfig, seed, alpha: float | None = None) -> LineSearchTrace:
    """One greedy agent on LineSearch with ER, pER or aER replay."""
    ls = cfg.linesearch()
    alpha = cfg.resolved_alpha() if alpha is None else alpha
    gamma = ls.gamma
    target = cfg.ode_params().target()
    rng = np.random.default_rng(seed)
    memory = AdaptiveMemory(cfg.aer()) if cfg.replay == "aer" else None
    buffer = memory.new_buffer() if memory else ReplayBuffer(cfg.N)
    prio = cfg.prioritization() if cfg.replay == "per" else None

    theta = cfg.initial_theta()
    agent_td = lambda batch: td_error(theta, batch, gamma)  # noqa: E731
    x = ls.x0
    T = ls.horizon
    values = np.empty((T + 1, 2))
    capacity = np.empty(T + 1, dtype=np.int64)
    values[0] = (theta.theta1 - target.theta1, theta.theta2 - target.theta2)
    capacity[0] = buffer.capacity
    for t in range(1, T + 1):
        tr = env_step(ls, x, greedy_action(theta, ls.v))
        buffer.push(tr)
        x = tr.x_next
        for _ in range(cfg.m):
            if prio is None:
                sample = buffer.sample_uniform(rng)
            else:
                sample = buffer.sample_prioritized(agent_td, prio, rng)
            theta = td_update(theta, sample, alpha, gamma)
        if memory is not None:
            memory.step(t, buffer, agent_td, rng)
        values[t] = (theta.theta1 - target.theta1, theta.theta2 - target.theta2)
        capacity[t] = buffer.capacity
    events = list(memory.events) if memory else []
    return LineSearchTrace(np.arange(T + 1, dtype=float), values, capacity, events)


def _simulate_job(job) -> LineSearchTrace:
    cfg, seed, alpha = job
    return simulate_linesearch(cfg, seed, alpha)


def simulate_repetitions(cfg: ExperimentConfig, alpha: float | None = None) -> list[LineSearchTrace]:
    return parallel_map(_simulate_job, [(cfg, int(s), alpha) for s in cfg.seeds()])


def average_traces(traces: Sequence[LineSearchTrace]) -> LineSearchTrace:
    if len(traces) == 1:
        return traces[0]
    values = np.mean([tr.values for tr in traces], axis=0)
    capacity = np.mean([tr.capacity for tr in traces], axis=0)
    return LineSearchTrace(traces[0].times, values, capacity, [])


def run_linesearch(cfg: ExperimentConfig, alpha: float | None = None) -> LineSearchTrace:
    """Seed-averaged metric trace of simulated agents."""
    if cfg.environment != "linesearch" or cfg.mode != "simulate":
        raise ValueError("run_linesearch needs mode=simulate on linesearch")
    return average_traces(simulate_repetitions(cfg, alpha))


# -- theory curves -----------------------------------------------------------


def _ode_initial_metrics(cfg: ExperimentConfig, params) -> tuple[float, float]:
    theta0, target = cfg.initial_theta(), params.target()
    return theta0.theta1 - target.theta1, theta0.theta2 - target.theta2


def run_ode(cfg: ExperimentConfig, sweep: bool = False) -> OdeSolution:
    """Integrated theory curve (uniform or prioritized replay)."""
    if cfg.environment != "linesearch":
        raise ValueError("the ODE model describes linesearch only")
    if cfg.replay == "aer":
        raise ValueError("the ODE model covers er and per replay only")
    params = cfg.ode_params(sweep)
    d0 = _ode_initial_metrics(cfg, params)
    return integrate_linesearch(params, d0, cfg.horizon, cfg.h, cfg.replay)


def run_analytic(cfg: ExperimentConfig) -> OdeSolution:
    """Closed-form curve sampled every ``h`` over the horizon."""
    if cfg.environment != "linesearch":
        raise ValueError("closed forms describe linesearch only")
    p = analytic.AnalyticParams(
        m=cfg.m, alpha=cfg.resolved_alpha(), N=cfg.N, v=cfg.v, x0=cfg.x0, d1_0=cfg.d1_0, d2_0=cfg.d2_0
    )
    times = cfg.h * np.arange(int(round(cfg.horizon / cfg.h)) + 1)
    if cfg.analytic_form == "beginning":
        values = np.column_stack(analytic.beginning_stage(times, p))
    elif cfg.analytic_form == "fixed_intercept":
        values = np.column_stack([analytic.fixed_intercept_solution(times, p), np.zeros_like(times)])
    else:
        values = np.column_stack([np.zeros_like(times), analytic.fixed_slope_solution(times, p)])
    return OdeSolution(times, values, (cfg.beta1, cfg.beta2))


# -- sweeps ------------------------------------------------------------------

SIMILARITY_BAND = 1.5e-3
ALT_BETTER, SIMILAR, BASE_BETTER = 1, 0, -1


@dataclass
class SweepResult:
    """Measure M on an ``N x m`` grid; ``M_alt`` holds a second scheme when differenced."""

    N_values: np.ndarray
    m_values: np.ndarray
    M: np.ndarray
    M_alt: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.N_values = np.asarray(self.N_values)
        self.m_values = np.asarray(self.m_values)
        shape = (len(self.N_values), len(self.m_values))
        for name in ("M", "M_alt"):
            mat = getattr(self, name)
            if mat is not None and np.shape(mat) != shape:
                raise ValueError(f"{name} has shape {np.shape(mat)}, expected {shape}")

    @property
    def difference(self) -> np.ndarray:
        """``M - M_alt``; positive where the alternative scheme ends closer to the target."""
        if self.M_alt is None:
            raise ValueError("no second matrix to difference against")
        return self.M - self.M_alt

    def classify(self, band: float = SIMILARITY_BAND) -> np.ndarray:
        return classify_difference(self.difference, band)


def classify_difference(diff, band: float = SIMILARITY_BAND) -> np.ndarray:
    """+1 where the alternative wins by more than ``band``, -1 where it loses, else 0."""
    diff = np.asarray(diff, dtype=float)
    return np.where(diff > band, ALT_BETTER, np.where(diff < -band, BASE_BETTER, SIMILAR))


def _sweep_cell(job) -> float:
    cfg, N, m = job
    return average_traces(simulate_repetitions(cfg.replace(N=int(N), m=int(m)), cfg.resolved_alpha(True))).final_M


def sweep_M(cfg: ExperimentConfig, replay: str | None = None) -> SweepResult:
    """M at the horizon over ``cfg.grid_N x cfg.grid_m``.

    ODE mode integrates the whole grid as one batched system; simulate mode
    runs seed-averaged agents per cell (M of the averaged metrics).
    """
    replay = replay or cfg.replay
    cfg = cfg.replace(replay=replay)
    N_values = np.asarray(cfg.grid_N, dtype=float)
    m_values = np.asarray(cfg.grid_m, dtype=float)
    if cfg.mode == "ode":
        Ng, mg = np.meshgrid(N_values, m_values, indexing="ij")
        params = cfg.ode_params(sweep=True, m=mg, N=Ng)
        sol = integrate_linesearch(params, _ode_initial_metrics(cfg, params), cfg.horizon, cfg.h, replay)
        M = np.abs(sol.values[-1, 0]) + np.abs(sol.values[-1, 1])
    elif cfg.mode == "simulate":
        cells = [(cfg, N, m) for N in N_values for m in m_values]
        M = np.asarray([_sweep_cell(c) for c in cells]).reshape(len(N_values), len(m_values))
    else:
        raise ValueError("sweeps run in ode or simulate mode")
    return SweepResult(N_values.astype(int), m_values.astype(int), M)


def difference_map(base: SweepResult, alt: SweepResult) -> SweepResult:
    if not (np.array_equal(base.N_values, alt.N_values) and np.array_equal(base.m_values, alt.m_values)):
        raise ValueError("sweeps were computed on different grids")
    return SweepResult(base.N_values, base.m_values, base.M, alt.M)


def compare_per(cfg: ExperimentConfig) -> SweepResult:
    """ER and pER sweeps on one grid; ``difference`` is ``M_ER - M_pER``."""
    return difference_map(sweep_M(cfg, "er"), sweep_M(cfg, "per"))


# -- adaptive memory ---------------------------------------------------------


@dataclass
class AerComparison:
    """Adaptive run next to its fixed-capacity baseline."""

    adaptive: LineSearchTrace | TrainingTrace
    fixed: LineSearchTrace | TrainingTrace


def dqn_config(cfg: ExperimentConfig, replay: str | None = None) -> DqnConfig:
    replay = replay or cfg.replay
    overrides = {"m": cfg.m, "total_steps": cfg.total_steps}
    if cfg.alpha is not None:
        overrides["alpha"] = cfg.alpha
    if cfg.gamma is not None:
        overrides["gamma"] = cfg.gamma
    if replay == "aer":
        aer = cfg.aer()
        if cfg.sample_count is None:
            sample = min(PRESETS[cfg.environment]["aer_sample"], aer.n_old)
            aer = type(aer)(aer.n0, aer.k, aer.n_old, sample)
        base = preset_config(cfg.environment, cfg.N, **overrides)
        return DqnConfig(**{**base.__dict__, "aer": aer})
    if replay == "per":
        overrides["prioritization"] = cfg.prioritization()
    return preset_config(cfg.environment, cfg.N, **overrides)


def run_dqn(cfg: ExperimentConfig) -> TrainingTrace:
    if cfg.environment == "linesearch":
        raise ValueError("dqn runs need a control environment")
    return train_dqn(cfg.environment, dqn_config(cfg), int(cfg.seeds()[0]))


def _paired_job(job):
    cfg, seed = job
    return train_paired(cfg.environment, dqn_config(cfg, "er"), dqn_config(cfg, "aer"), int(seed))


def run_aer(cfg: ExperimentConfig) -> list[AerComparison]:
    """aER against a fixed memory of the initial size, one pair per repetition.

    On LineSearch both agents share the seed. On control tasks the pair also
    shares the trajectory up to the first buffer fill (see ``train_paired``).
    """
    aer_cfg = cfg.replace(replay="aer")
    seeds = [int(s) for s in cfg.seeds()]
    if cfg.environment == "linesearch":
        alpha = cfg.resolved_alpha(sweep=True)
        jobs = [(c, s, alpha) for s in seeds for c in (aer_cfg, cfg.replace(replay="er"))]
        traces = parallel_map(_simulate_job, jobs)
        return [AerComparison(traces[2 * i], traces[2 * i + 1]) for i in range(len(seeds))]
    pairs = parallel_map(_paired_job, [(aer_cfg, s) for s in seeds])
    return [AerComparison(p.adaptive, p.fixed) for p in pairs]


__all__ = [
    "AerComparison",
    "LineSearchTrace",
    "SweepResult",
    "classify_difference",
    "compare_per",
    "difference_map",
    "run_aer",
    "run_analytic",
    "run_dqn",
    "run_linesearch",
    "run_ode",
    "simulate_linesearch",
    "sweep_M",
]
