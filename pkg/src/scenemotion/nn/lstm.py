"""Bi-directional LSTM with hand-written backpropagation through time."""

from __future__ import annotations

import numpy as np

from .params import Module, Param, uniform_init


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class LSTMCell(Module):
    """Single-direction LSTM; gate order in the stacked weights is i, f, g, o."""

    def __init__(self, in_dim, hidden, rng, name="lstm"):
        self.in_dim = in_dim
        self.hidden = hidden
        self.Wx = Param(f"{name}.Wx", uniform_init(rng, (4 * hidden, in_dim), in_dim))
        self.Wh = Param(f"{name}.Wh", uniform_init(rng, (4 * hidden, hidden), hidden))
        b = uniform_init(rng, (4 * hidden,), hidden)
        b[hidden:2 * hidden] += 1.0  # open forget gates so endpoint info survives the clip
        self.b = Param(f"{name}.b", b)

    def forward(self, xs):
        """xs: (N, T, D) -> h: (N, T, H) with zero initial state."""
        N, T, D = xs.shape
        H = self.hidden
        h = np.zeros((N, H))
        c = np.zeros((N, H))
        hs = np.empty((N, T, H))
        steps = []
        for t in range(T):
            x = xs[:, t, :]
            z = x @ self.Wx.value.T + h @ self.Wh.value.T + self.b.value
            i = _sigmoid(z[:, :H])
            f = _sigmoid(z[:, H:2 * H])
            g = np.tanh(z[:, 2 * H:3 * H])
            o = _sigmoid(z[:, 3 * H:])
            c_new = f * c + i * g
            tc = np.tanh(c_new)
            h_new = o * tc
            steps.append((x, h, c, i, f, g, o, tc))
            h, c = h_new, c_new
            hs[:, t, :] = h
        return hs, steps

    def backward(self, cache, ghs):
        """ghs: (N, T, H) cotangent on every step's hidden output."""
        steps = cache
        N, T, H = ghs.shape
        gh = np.zeros((N, H))
        gc = np.zeros((N, H))
        gxs = np.empty((N, T, self.in_dim))
        for t in range(T - 1, -1, -1):
            x, h_prev, c_prev, i, f, g, o, tc = steps[t]
            gh = gh + ghs[:, t, :]
            gc = gc + gh * o * (1.0 - tc * tc)
            go = gh * tc
            gi = gc * g
            gg = gc * i
            gf = gc * c_prev
            gc = gc * f
            gz = np.concatenate([
                gi * i * (1.0 - i),
                gf * f * (1.0 - f),
                gg * (1.0 - g * g),
                go * o * (1.0 - o),
            ], axis=1)
            self.Wx.grad += gz.T @ x
            self.Wh.grad += gz.T @ h_prev
            self.b.grad += gz.sum(axis=0)
            gxs[:, t, :] = gz @ self.Wx.value
            gh = gz @ self.Wh.value
        return gxs


class BiLSTM(Module):
    """Per-step concatenation of a forward and a backward LSTM pass."""

    def __init__(self, in_dim, hidden, rng, name="bilstm"):
        self.hidden = hidden
        self.fwd = LSTMCell(in_dim, hidden, rng, name=f"{name}.fwd")
        self.bwd = LSTMCell(in_dim, hidden, rng, name=f"{name}.bwd")

    def forward(self, xs):
        """xs: (N, T, D) -> (N, T, 2H); T must be at least 3 (endpoints + 1)."""
        if xs.ndim != 3:
            raise ValueError(f"expected (N, T, D) input, got shape {xs.shape}")
        if xs.shape[1] < 3:
            raise ValueError(f"sequence too short for a bi-directional pass: T={xs.shape[1]}")
        hf, cf = self.fwd.forward(xs)
        hb_rev, cb = self.bwd.forward(xs[:, ::-1, :])
        hb = hb_rev[:, ::-1, :]
        return np.concatenate([hf, hb], axis=2), (cf, cb)

    def backward(self, cache, gy):
        cf, cb = cache
        H = self.hidden
        gxf = self.fwd.backward(cf, gy[:, :, :H])
        gxb_rev = self.bwd.backward(cb, gy[:, ::-1, H:])
        return gxf + gxb_rev[:, ::-1, :]
