"""Compiled inner loops for the Q-network (same layout as ``mlp.MlpParams``)."""

import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def _forward(theta, sizes, offs, act, x, hs, zs):
    # hs[0] is the input; hs[i+1] the activation of layer i, zs[i] its pre-activation
    n_layers = sizes.shape[0] - 1
    for j in range(sizes[0]):
        hs[0, j] = x[j]
    for layer in range(n_layers):
        fi = sizes[layer]
        fo = sizes[layer + 1]
        off = offs[layer]
        boff = off + fi * fo
        last = layer == n_layers - 1
        h_in = hs[layer]
        h_out = hs[layer + 1]
        z = zs[layer]
        for o in range(fo):
            w = theta[off + o * fi : off + (o + 1) * fi]
            s = theta[boff + o]
            for i in range(fi):
                s += w[i] * h_in[i]
            z[o] = s
            if last:
                h_out[o] = s
            elif act == 0:
                h_out[o] = np.tanh(s)
            else:
                h_out[o] = s if s > 0.0 else 0.0


@njit(cache=True)
def layer_offsets(sizes):
    n_layers = sizes.shape[0] - 1
    offs = np.zeros(n_layers, dtype=np.int64)
    off = 0
    for layer in range(n_layers):
        offs[layer] = off
        off += (sizes[layer] + 1) * sizes[layer + 1]
    return offs


@njit(cache=True)
def forward(theta, sizes, act, x):
    width = sizes.max()
    hs = np.zeros((sizes.shape[0], width))
    zs = np.zeros((sizes.shape[0], width))
    _forward(theta, sizes, layer_offsets(sizes), act, x, hs, zs)
    return hs[sizes.shape[0] - 1, : sizes[-1]].copy()


@njit(cache=True, fastmath=True)
def _add_gradient(theta, sizes, offs, act, hs, zs, action, scale, deltas):
    # theta += scale * dQ[action]/dtheta; deltas[l] holds dQ/dz of layer l
    n_layers = sizes.shape[0] - 1
    for j in range(deltas.shape[1]):
        deltas[n_layers - 1, j] = 0.0
    deltas[n_layers - 1, action] = 1.0
    for layer in range(n_layers - 1, -1, -1):
        fi = sizes[layer]
        fo = sizes[layer + 1]
        off = offs[layer]
        h_in = hs[layer]
        d_out = deltas[layer]
        if layer > 0:
            # propagate through the pre-update weights of this layer
            d_in = deltas[layer - 1]
            z_in = zs[layer - 1]
            for i in range(fi):
                d_in[i] = 0.0
            for o in range(fo):
                d = d_out[o]
                if d != 0.0:
                    w = theta[off + o * fi : off + (o + 1) * fi]
                    for i in range(fi):
                        d_in[i] += w[i] * d
            for i in range(fi):
                if act == 0:
                    d_in[i] *= 1.0 - h_in[i] * h_in[i]
                elif z_in[i] <= 0.0:
                    d_in[i] = 0.0
        boff = off + fi * fo
        for o in range(fo):
            d = d_out[o] * scale
            if d != 0.0:
                w = theta[off + o * fi : off + (o + 1) * fi]
                for i in range(fi):
                    w[i] += d * h_in[i]
                theta[boff + o] += d


@njit(cache=True)
def td_updates(theta, sizes, act, X, A, R, Xn, done, slots, alpha, gamma):
    """Sequential single-transition TD updates, one per entry of ``slots``.

    Each update bootstraps from the current weights (no target network).
    Returns the TD errors seen.
    """
    L = sizes.shape[0]
    width = sizes.max()
    offs = layer_offsets(sizes)
    hs = np.zeros((L, width))
    zs = np.zeros((L, width))
    deltas = np.zeros((L, width))
    n_out = sizes[L - 1]
    out = np.empty(slots.shape[0])
    for k in range(slots.shape[0]):
        s = slots[k]
        target = R[s]
        if not done[s] and gamma != 0.0:
            _forward(theta, sizes, offs, act, Xn[s], hs, zs)
            best = hs[L - 1, 0]
            for j in range(1, n_out):
                if hs[L - 1, j] > best:
                    best = hs[L - 1, j]
            target += gamma * best
        _forward(theta, sizes, offs, act, X[s], hs, zs)
        a = A[s]
        delta = target - hs[L - 1, a]
        out[k] = delta
        _add_gradient(theta, sizes, offs, act, hs, zs, a, alpha * delta, deltas)
    return out
