"""Replay memory with uniform, prioritized and adaptive-capacity variants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .linesearch import Transition

TdFunction = Callable[[Transition], np.ndarray]


class ReplayBuffer:
    """Bounded FIFO store of transitions with a mutable capacity.

    Storage is a set of parallel numpy ring arrays allocated on the first
    push, so the same class holds scalar LineSearch states and vector
    observations. Every entry carries a global insertion index.
    """

    def __init__(self, capacity: int):
        if int(capacity) != capacity or capacity < 1:
            raise ValueError(f"capacity must be a positive integer, got {capacity}")
        self._capacity = int(capacity)
        self._alloc = 0
        self._head = 0
        self._count = 0
        self._next_index = 0
        self.x = self.x_next = self.a = self.r = self.terminal = self.index = None

    # -- storage -----------------------------------------------------------

    def _allocate(self, t: Transition, size: int) -> None:
        shape = np.shape(t.x)
        self.x = np.empty((size, *shape))
        self.x_next = np.empty((size, *shape))
        self.a = np.empty(size, dtype=np.asarray(t.a).dtype if np.ndim(t.a) == 0 else float)
        self.r = np.empty(size)
        self.terminal = np.zeros(size, dtype=bool)
        self.index = np.empty(size, dtype=np.int64)
        self._alloc = size

    def _grow(self, size: int) -> None:
        order = self.storage_slots()
        for name in ("x", "x_next", "a", "r", "terminal", "index"):
            old = getattr(self, name)
            new = np.zeros((size, *old.shape[1:]), dtype=old.dtype)
            new[: self._count] = old[order]
            setattr(self, name, new)
        self._head = 0
        self._alloc = size

    @property
    def capacity(self) -> int:
        return self._capacity

    @capacity.setter
    def capacity(self, value: int) -> None:
        if int(value) != value or value < 1:
            raise ValueError(f"capacity must be a positive integer, got {value}")
        self._capacity = int(value)
        if self._count > self._capacity:
            self.delete_oldest(self._count - self._capacity)

    def __len__(self) -> int:
        return self._count

    @property
    def full(self) -> bool:
        return self._count == self._capacity

    def storage_slots(self, positions=None) -> np.ndarray:
        """Ring-array slots for FIFO positions (0 = oldest); all entries by default."""
        if positions is None:
            positions = np.arange(self._count)
        return (self._head + np.asarray(positions)) % max(self._alloc, 1)

    # -- mutation ----------------------------------------------------------

    def push(self, t: Transition) -> None:
        if self._alloc == 0:
            self._allocate(t, min(self._capacity, 1024))
        if self._count == self._capacity:
            self.delete_oldest(1)
        if self._count == self._alloc:
            self._grow(min(max(2 * self._alloc, 1), max(self._capacity, 1)))
        slot = (self._head + self._count) % self._alloc
        self.x[slot] = t.x
        self.x_next[slot] = t.x_next
        self.a[slot] = t.a
        self.r[slot] = t.r
        self.terminal[slot] = t.terminal
        self.index[slot] = self._next_index
        self._next_index += 1
        self._count += 1

    def delete_oldest(self, k: int) -> None:
        if not 0 <= k <= self._count:
            raise ValueError(f"cannot delete {k} of {self._count} entries")
        if self._alloc:
            self._head = (self._head + k) % self._alloc
        self._count -= k

    # -- access ------------------------------------------------------------

    def get(self, position: int) -> Transition:
        if not 0 <= position < self._count:
            raise IndexError(position)
        s = (self._head + position) % self._alloc
        x, x_next = self.x[s], self.x_next[s]
        if x.ndim == 0:
            x, x_next = float(x), float(x_next)
        else:
            x, x_next = x.copy(), x_next.copy()
        return Transition(x, self.a[s].item(), float(self.r[s]), x_next, bool(self.terminal[s]))

    def view(self, positions=None) -> Transition:
        """Batch of entries (oldest first by default) as a Transition of arrays."""
        s = self.storage_slots(positions)
        return Transition(self.x[s], self.a[s], self.r[s], self.x_next[s], self.terminal[s])

    def insertion_indices(self) -> np.ndarray:
        if self._count == 0:
            return np.empty(0, dtype=np.int64)
        return self.index[self.storage_slots()]

    def __iter__(self):
        return (self.get(i) for i in range(self._count))

    # -- sampling ----------------------------------------------------------

    def _require_entries(self) -> None:
        if self._count == 0:
            raise IndexError("cannot sample from an empty replay buffer")

    def sample_uniform(self, rng: np.random.Generator) -> Transition:
        self._require_entries()
        return self.get(int(rng.integers(self._count)))

    def sample_prioritized(
        self, agent_td: TdFunction, cfg: PrioritizationConfig, rng: np.random.Generator
    ) -> Transition:
        self._require_entries()
        probs = priority_probabilities(agent_td(self.view()), cfg.beta_exp)
        return self.get(_draw(probs, rng))


def _draw(probs: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(probs)
    i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(i, len(probs) - 1)


@dataclass(frozen=True)
class PrioritizationConfig:
    beta_exp: float = 2.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.beta_exp) or self.beta_exp < 0:
            raise ValueError(f"beta_exp must be finite and >= 0, got {self.beta_exp}")


def priority_probabilities(deltas, beta_exp: float) -> np.ndarray:
    """Sampling distribution ``|delta|^beta / sum |delta|^beta``.

    A buffer whose TD errors are all zero falls back to uniform sampling.
    """
    w = np.abs(np.asarray(deltas, dtype=float)) ** beta_exp
    total = w.sum()
    if not total > 0:
        return np.full(w.shape, 1.0 / w.size)
    return w / total


# -- adaptive memory ---------------------------------------------------------


@dataclass(frozen=True)
class AerConfig:
    """Settings for the adaptive-capacity controller.

    ``n_old`` oldest entries are examined every ``k`` steps; ``sample_count``
    of them (drawn without replacement) estimate their summed |TD error|.
    """

    n0: int = 100
    k: int = 20
    n_old: int = 50
    sample_count: int | None = None

    def __post_init__(self) -> None:
        if self.sample_count is None:
            object.__setattr__(self, "sample_count", self.n_old)
        if not self.n0 >= self.k >= 1:
            raise ValueError(f"need n0 >= k >= 1, got n0={self.n0}, k={self.k}")
        if not 1 <= self.sample_count <= self.n_old <= self.n0:
            raise ValueError(
                "need 1 <= sample_count <= n_old <= n0, got "
                f"sample_count={self.sample_count}, n_old={self.n_old}, n0={self.n0}"
            )


@dataclass
class AerState:
    delta_old: float
    capacity: int

    def __post_init__(self) -> None:
        if self.delta_old < 0:
            raise ValueError("delta_old must be >= 0")


class AerEvent(NamedTuple):
    step: int
    direction: str  # "enlarge" | "shrink"
    capacity: int


def old_td_magnitude(
    buffer: ReplayBuffer, agent_td: TdFunction, cfg: AerConfig, rng: np.random.Generator
) -> float:
    """Summed |TD error| over (a sample of) the ``n_old`` oldest entries."""
    if not buffer.full:
        raise ValueError("old_td_magnitude requires a full buffer")
    n_old = min(cfg.n_old, len(buffer))
    count = min(cfg.sample_count, n_old)
    if count == n_old:
        positions = np.arange(n_old)
    else:
        positions = np.sort(rng.choice(n_old, size=count, replace=False))
    return float(np.abs(agent_td(buffer.view(positions))).sum())


def aer_adjust(
    state: AerState,
    buffer: ReplayBuffer,
    delta_old_new: float,
    agent_td: TdFunction,
    cfg: AerConfig,
    rng: np.random.Generator,
) -> AerState:
    """Grow or shrink the buffer by ``cfg.k`` from the change in old-entry TD error.

    Mutates ``buffer`` (its capacity, and its oldest entries on a shrink) and
    returns the new controller state.
    """
    k = cfg.k
    if delta_old_new > state.delta_old or state.capacity == k:
        new = AerState(delta_old=delta_old_new, capacity=state.capacity + k)
        buffer.capacity = new.capacity
        return new
    capacity = state.capacity - k
    buffer.delete_oldest(k)
    buffer.capacity = capacity
    return AerState(delta_old=old_td_magnitude(buffer, agent_td, cfg, rng), capacity=capacity)


@dataclass
class AdaptiveMemory:
    """Runs the capacity controller against a buffer once per learning step."""

    cfg: AerConfig
    state: AerState = None
    events: list[AerEvent] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.state is None:
            self.state = AerState(delta_old=0.0, capacity=self.cfg.n0)

    def new_buffer(self) -> ReplayBuffer:
        return ReplayBuffer(self.state.capacity)

    def step(
        self, t: int, buffer: ReplayBuffer, agent_td: TdFunction, rng: np.random.Generator
    ) -> AerEvent | None:
        if t % self.cfg.k != 0 or not buffer.full:
            return None
        before = self.state.capacity
        fresh = old_td_magnitude(buffer, agent_td, self.cfg, rng)
        self.state = aer_adjust(self.state, buffer, fresh, agent_td, self.cfg, rng)
        direction = "enlarge" if self.state.capacity > before else "shrink"
        event = AerEvent(t, direction, self.state.capacity)
        self.events.append(event)
        return event
