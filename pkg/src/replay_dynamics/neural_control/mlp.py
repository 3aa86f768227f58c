"""Fully connected Q-network with hand-written backpropagation.

Parameters live in one flat vector, layer by layer: the weight matrix
(``out x in``, row-major) followed by the bias. ``MlpParams.weights`` and
``MlpParams.biases`` are views into that vector, so updating ``flat`` in
place updates the network.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ACTIVATIONS = {"tanh": 0, "relu": 1}


@dataclass
class MlpParams:
    layer_sizes: tuple[int, ...]
    flat: np.ndarray
    activation: str = "tanh"

    def __post_init__(self) -> None:
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ValueError(f"bad layer sizes {self.layer_sizes}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        self.flat = np.ascontiguousarray(self.flat, dtype=float)
        if self.flat.shape != (n_parameters(self.layer_sizes),):
            raise ValueError("flat parameter vector does not match layer sizes")
        if not np.all(np.isfinite(self.flat)):
            raise ValueError("parameters must be finite")

    @property
    def n_actions(self) -> int:
        return self.layer_sizes[-1]

    def layers(self):
        """(W, b) views per layer."""
        out, off = [], 0
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            w = self.flat[off : off + fan_in * fan_out].reshape(fan_out, fan_in)
            off += fan_in * fan_out
            b = self.flat[off : off + fan_out]
            off += fan_out
            out.append((w, b))
        return out

    @property
    def weights(self) -> list[np.ndarray]:
        return [w for w, _ in self.layers()]

    @property
    def biases(self) -> list[np.ndarray]:
        return [b for _, b in self.layers()]

    def copy(self) -> MlpParams:
        return MlpParams(self.layer_sizes, self.flat.copy(), self.activation)


def n_parameters(layer_sizes) -> int:
    return sum((i + 1) * o for i, o in zip(layer_sizes[:-1], layer_sizes[1:]))


def init_mlp(layer_sizes, rng: np.random.Generator, activation: str = "tanh") -> MlpParams:
    """Uniform initialisation in +/- 1/sqrt(fan_in) for weights and biases."""
    chunks = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        chunks.append(rng.uniform(-bound, bound, fan_in * fan_out))
        chunks.append(rng.uniform(-bound, bound, fan_out))
    return MlpParams(tuple(layer_sizes), np.concatenate(chunks), activation)


def _act(z, activation):
    return np.tanh(z) if activation == "tanh" else np.maximum(z, 0.0)


def _act_grad(z, a, activation):
    return 1.0 - a**2 if activation == "tanh" else (z > 0).astype(float)


def _check_input(p: MlpParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p.layer_sizes[0] or x.ndim > 2:
        raise ValueError(f"input shape {x.shape} does not match input size {p.layer_sizes[0]}")
    return x


def mlp_forward(p: MlpParams, x) -> np.ndarray:
    """Q-values for one state (shape ``(in,)``) or a batch (shape ``(B, in)``)."""
    h = _check_input(p, x)
    layers = p.layers()
    for i, (w, b) in enumerate(layers):
        z = h @ w.T + b
        h = z if i == len(layers) - 1 else _act(z, p.activation)
    return h


def mlp_gradient(p: MlpParams, x, action_index: int, td_target: float | None = None) -> np.ndarray:
    """Gradient of ``Q(x)[action_index]`` with respect to the flat parameters.

    ``td_target`` is accepted for call-site symmetry with the TD update and is
    not used: the TD error factor is applied by the caller.
    """
    x = _check_input(p, x)
    if x.ndim != 1:
        raise ValueError("mlp_gradient takes a single state")
    if not 0 <= action_index < p.n_actions:
        raise IndexError(action_index)
    layers = p.layers()
    hs, zs = [x], []
    for i, (w, b) in enumerate(layers):
        z = w @ hs[-1] + b
        zs.append(z)
        hs.append(z if i == len(layers) - 1 else _act(z, p.activation))

    grads = []
    delta = np.zeros(p.n_actions)
    delta[action_index] = 1.0
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        grads.append((np.outer(delta, hs[i]).ravel(), delta.copy()))
        if i > 0:
            delta = (w.T @ delta) * _act_grad(zs[i - 1], hs[i], p.activation)
    return np.concatenate([g for pair in reversed(grads) for g in pair])
