"""Experiment configuration shared by the harness entry points and the CLI."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from ..linesearch import LineSearchConfig, LinearTheta, TrueWeights
from ..ode_model import OdeParams
from ..replay import AerConfig, PrioritizationConfig

MODES = ("simulate", "ode", "analytic")
ENVIRONMENTS = ("linesearch", "cartpole", "mountaincar", "acrobot")
REPLAYS = ("er", "per", "aer")
ANALYTIC_FORMS = ("beginning", "fixed_intercept", "fixed_slope")

# single learning curves use the larger step, sweeps and aER the smaller one
CURVE_ALPHA = 0.01
SWEEP_ALPHA = 1e-3


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat description of one experiment.

    Initial metrics ``d1_0, d2_0`` are measured against the true weights, so
    the default start is ``theta0 = (0, 1)`` for any discount. ``alpha`` and
    ``gamma`` left as ``None`` resolve per experiment type (see
    ``resolved_alpha``).
    """

    mode: str = "simulate"
    environment: str = "linesearch"
    replay: str = "er"
    beta_exp: float = 2.0
    m: int = 5
    alpha: float | None = None
    gamma: float | None = None
    N: int = 100
    k: int = 20
    n_old: int | None = None
    sample_count: int | None = None
    v: float = 0.01
    x0: float = -5.0
    beta1: float = 0.1
    beta2: float = 0.5
    d1_0: float = -0.1
    d2_0: float = 0.5
    horizon: int = 1000
    h: float = 0.1
    seed: int = 0
    repetitions: int = 1
    total_steps: int = 20000
    analytic_form: str = "beginning"
    grid_N: tuple[int, ...] = tuple(range(50, 1001, 50))
    grid_m: tuple[int, ...] = tuple(range(5, 41, 5))

    def __post_init__(self) -> None:
        for name, allowed in (
            ("mode", MODES),
            ("environment", ENVIRONMENTS),
            ("replay", REPLAYS),
            ("analytic_form", ANALYTIC_FORMS),
        ):
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        if self.mode != "simulate" and self.environment != "linesearch":
            raise ValueError(f"mode {self.mode!r} requires the linesearch environment")
        if self.mode == "ode" and self.replay == "aer":
            raise ValueError("the ODE model covers er and per replay only")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.m < 1 or self.N < 1 or self.horizon < 1 or self.total_steps < 1:
            raise ValueError("m, N, horizon and total_steps must be >= 1")
        if self.alpha is not None and not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.gamma is not None and not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")
        if not self.h > 0:
            raise ValueError("h must be positive")
        if not self.grid_N or not self.grid_m:
            raise ValueError("sweep grids must be non-empty")
        # build the component configs once so their own checks run up front
        self.weights()
        if self.replay == "per":
            self.prioritization()
        if self.replay == "aer":
            self.aer()

    # -- construction -----------------------------------------------------

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> ExperimentConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - names)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        clean = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
        return cls(**clean)

    @classmethod
    def from_file(cls, path: str | Path) -> ExperimentConfig:
        with open(path) as fh:
            values = json.load(fh)
        if not isinstance(values, dict):
            raise ValueError(f"{path}: config must be a flat JSON object")
        return cls.from_mapping(values)

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict[str, Any]:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(self).items()}

    # -- derived settings -------------------------------------------------

    def resolved_alpha(self, sweep: bool = False) -> float:
        if self.alpha is not None:
            return self.alpha
        return SWEEP_ALPHA if sweep else CURVE_ALPHA

    def resolved_gamma(self) -> float:
        return 0.0 if self.gamma is None else self.gamma

    def weights(self) -> TrueWeights:
        return TrueWeights(self.beta1, self.beta2)

    def initial_theta(self) -> LinearTheta:
        return LinearTheta(self.beta1 + self.d1_0, self.beta2 + self.d2_0)

    def linesearch(self) -> LineSearchConfig:
        return LineSearchConfig(self.weights(), self.v, self.x0, self.resolved_gamma(), self.horizon)

    def ode_params(self, sweep: bool = False, m=None, N=None) -> OdeParams:
        return OdeParams(
            m=self.m if m is None else m,
            alpha=self.resolved_alpha(sweep),
            N=self.N if N is None else N,
            v=self.v,
            x0=self.x0,
            gamma=self.resolved_gamma(),
            beta=self.weights(),
        )

    def prioritization(self) -> PrioritizationConfig:
        return PrioritizationConfig(self.beta_exp)

    def aer(self) -> AerConfig:
        n_old = self.n_old if self.n_old is not None else max(self.N // 2, 1)
        return AerConfig(n0=self.N, k=self.k, n_old=n_old, sample_count=self.sample_count)

    def seeds(self) -> np.ndarray:
        """One independent seed per repetition, derived from ``seed``."""
        return np.random.SeedSequence(self.seed).generate_state(self.repetitions, dtype=np.uint64)
