"""Minimal layer engine with exact backpropagation, float64 throughout.

Layers cache whatever the backward pass needs during a train-mode forward;
inference-mode forwards write no state, so concurrent inference on a shared
graph is safe. ``backward`` is only valid after a ``train=True`` forward.

A :class:`ModelGraph` chains layers; training drives it through
``forward_logits`` / ``backward_from_logits`` with the fused softmax
cross-entropy below, inference through ``forward`` (which includes the
trailing Softmax layer when present).

Weight init is Glorot uniform (limit sqrt(6 / (fan_in + fan_out))) for
dense, convolution and LSTM matrices; biases start at zero except the LSTM
forget gate, which starts at 1. All draws come from the single generator
passed in, in layer order (Dense: W; Conv1D: K; LSTM: W then U).
"""

from __future__ import annotations

import numpy as np


def _glorot(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class Layer:
    """Base class; parameter-free layers inherit the empty defaults."""

    def params(self) -> list[np.ndarray]:
        return []

    def grads(self) -> list[np.ndarray]:
        return []

    def zero_grads(self) -> None:
        for g in self.grads():
            g[...] = 0.0

    def forward(self, x: np.ndarray, train: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def spec(self) -> dict:
        raise NotImplementedError


class Dense(Layer):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator | None = None):
        self.in_dim, self.out_dim = in_dim, out_dim
        if rng is None:
            self.w = np.zeros((in_dim, out_dim))
        else:
            self.w = _glorot(rng, (in_dim, out_dim), in_dim, out_dim)
        self.b = np.zeros(out_dim)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._x = None

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.dw, self.db]

    def forward(self, x, train=False, rng=None):
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValueError(f"dense expects [batch, {self.in_dim}], got {x.shape}")
        if train:
            self._x = x
        return x @ self.w + self.b

    def backward(self, dy):
        self.dw += self._x.T @ dy
        self.db += dy.sum(axis=0)
        return dy @ self.w.T

    def spec(self):
        return {"kind": "dense", "in": self.in_dim, "out": self.out_dim}


class ReLU(Layer):
    def forward(self, x, train=False, rng=None):
        if train:
            self._mask = x > 0
        return np.maximum(x, 0.0)

    def backward(self, dy):
        return dy * self._mask

    def spec(self):
        return {"kind": "relu"}


class Dropout(Layer):
    """Inverted dropout: kept elements are scaled by 1/(1-rate); inference is identity."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self._mask = None

    def forward(self, x, train=False, rng=None):
        if not train:
            return x
        if self.rate == 0.0:
            self._mask = None
            return x
        if rng is None:
            raise ValueError("training-mode dropout needs a generator")
        keep = rng.random(x.shape) >= self.rate
        self._mask = keep / (1.0 - self.rate)
        return x * self._mask

    def backward(self, dy):
        return dy if self._mask is None else dy * self._mask

    def spec(self):
        return {"kind": "dropout", "rate": self.rate}


class Conv1D(Layer):
    """Same-length 1-D convolution over time, channels last. Odd kernels only."""

    def __init__(self, in_channels: int, out_channels: int, kernel: int, rng: np.random.Generator | None = None):
        if kernel % 2 == 0:
            raise ValueError(f"kernel width must be odd, got {kernel}")
        self.in_channels, self.out_channels, self.kernel = in_channels, out_channels, kernel
        fan_in, fan_out = kernel * in_channels, kernel * out_channels
        if rng is None:
            self.k = np.zeros((kernel, in_channels, out_channels))
        else:
            self.k = _glorot(rng, (kernel, in_channels, out_channels), fan_in, fan_out)
        self.b = np.zeros(out_channels)
        self.dk = np.zeros_like(self.k)
        self.db = np.zeros_like(self.b)

    def params(self):
        return [self.k, self.b]

    def grads(self):
        return [self.dk, self.db]

    def forward(self, x, train=False, rng=None):
        if x.ndim != 3 or x.shape[2] != self.in_channels:
            raise ValueError(f"conv expects [batch, T, {self.in_channels}], got {x.shape}")
        pad = (self.kernel - 1) // 2
        padded = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
        t = x.shape[1]
        y = np.tile(self.b, (x.shape[0], t, 1))
        for dt in range(self.kernel):
            y += padded[:, dt : dt + t, :] @ self.k[dt]
        if train:
            self._xp, self._t = padded, t
        return y

    def backward(self, dy):
        batch, t = dy.shape[0], self._t
        dxp = np.zeros_like(self._xp)
        flat_dy = dy.reshape(batch * t, self.out_channels)
        for dt in range(self.kernel):
            dxp[:, dt : dt + t, :] += dy @ self.k[dt].T
            slab = self._xp[:, dt : dt + t, :].reshape(batch * t, self.in_channels)
            self.dk[dt] += slab.T @ flat_dy
        self.db += dy.sum(axis=(0, 1))
        pad = (self.kernel - 1) // 2
        return dxp[:, pad : pad + t, :]

    def spec(self):
        return {"kind": "conv1d", "in": self.in_channels, "out": self.out_channels, "kernel": self.kernel}


class MaxPool1D(Layer):
    """Window maximum over time; trailing remainder dropped; ties route to the first index."""

    def __init__(self, width: int):
        if width < 1:
            raise ValueError(f"pool width must be >= 1, got {width}")
        self.width = width

    def forward(self, x, train=False, rng=None):
        batch, t, channels = x.shape
        t_out = t // self.width
        windows = x[:, : t_out * self.width, :].reshape(batch, t_out, self.width, channels)
        if train:
            self._in_shape = x.shape
            self._argmax = windows.argmax(axis=2)
        return windows.max(axis=2)

    def backward(self, dy):
        batch, t, channels = self._in_shape
        t_out = dy.shape[1]
        dwin = np.zeros((batch, t_out, self.width, channels))
        np.put_along_axis(dwin, self._argmax[:, :, None, :], dy[:, :, None, :], axis=2)
        dx = np.zeros(self._in_shape)
        dx[:, : t_out * self.width, :] = dwin.reshape(batch, t_out * self.width, channels)
        return dx

    def spec(self):
        return {"kind": "maxpool1d", "width": self.width}


class GlobalAvgPool1D(Layer):
    """Mean over the time axis: [batch, T, C] -> [batch, C]."""

    def forward(self, x, train=False, rng=None):
        if train:
            self._t = x.shape[1]
        return x.mean(axis=1)

    def backward(self, dy):
        return np.repeat(dy[:, None, :], self._t, axis=1) / self._t

    def spec(self):
        return {"kind": "globalavgpool1d"}


class LSTM(Layer):
    """Single-layer LSTM consuming [batch, T, in]; emits the last hidden state.

    Gate order in the packed matrices is (input, forget, cell, output).
    Backward is full backpropagation through time.
    """

    def __init__(self, in_dim: int, hidden: int, rng: np.random.Generator | None = None):
        self.in_dim, self.hidden = in_dim, hidden
        h4 = 4 * hidden
        if rng is None:
            self.w = np.zeros((in_dim, h4))
            self.u = np.zeros((hidden, h4))
        else:
            self.w = _glorot(rng, (in_dim, h4), in_dim, h4)
            self.u = _glorot(rng, (hidden, h4), hidden, h4)
        self.b = np.zeros(h4)
        self.b[hidden : 2 * hidden] = 1.0  # forget-gate bias aids trainability
        self.dw = np.zeros_like(self.w)
        self.du = np.zeros_like(self.u)
        self.db = np.zeros_like(self.b)

    def params(self):
        return [self.w, self.u, self.b]

    def grads(self):
        return [self.dw, self.du, self.db]

    @staticmethod
    def step(x_t, h_prev, c_prev, w, u, b, hidden: int):
        """One cell update; returns the new state plus gate values for BPTT."""
        z = x_t @ w + h_prev @ u + b
        i = _sigmoid(z[:, :hidden])
        f = _sigmoid(z[:, hidden : 2 * hidden])
        g = np.tanh(z[:, 2 * hidden : 3 * hidden])
        o = _sigmoid(z[:, 3 * hidden :])
        c = f * c_prev + i * g
        h = o * np.tanh(c)
        return h, c, (i, f, g, o)

    def forward(self, x, train=False, rng=None):
        if x.ndim != 3 or x.shape[2] != self.in_dim:
            raise ValueError(f"lstm expects [batch, T, {self.in_dim}], got {x.shape}")
        batch, t, _ = x.shape
        h = np.zeros((batch, self.hidden))
        c = np.zeros((batch, self.hidden))
        cache = [] if train else None
        for step in range(t):
            h_prev, c_prev = h, c
            h, c, gates = self.step(x[:, step, :], h_prev, c_prev, self.w, self.u, self.b, self.hidden)
            if train:
                cache.append((h_prev, c_prev, c, gates))
        if train:
            self._x, self._cache = x, cache
        return h

    def backward(self, dh_last):
        batch, t, _ = self._x.shape
        dx = np.zeros_like(self._x)
        dh = dh_last
        dc = np.zeros((batch, self.hidden))
        for step in range(t - 1, -1, -1):
            h_prev, c_prev, c, (i, f, g, o) = self._cache[step]
            tanh_c = np.tanh(c)
            do = dh * tanh_c
            dc = dc + dh * o * (1.0 - tanh_c**2)
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            dc = dc * f
            dz = np.concatenate(
                [di * i * (1 - i), df * f * (1 - f), dg * (1 - g**2), do * o * (1 - o)], axis=1
            )
            self.dw += self._x[:, step, :].T @ dz
            self.du += h_prev.T @ dz
            self.db += dz.sum(axis=0)
            dx[:, step, :] = dz @ self.w.T
            dh = dz @ self.u.T
        return dx

    def spec(self):
        return {"kind": "lstm", "in": self.in_dim, "hidden": self.hidden}


class Softmax(Layer):
    """Row-wise softmax head; training paths fuse this into the loss instead."""

    def forward(self, x, train=False, rng=None):
        shifted = x - x.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        p = e / e.sum(axis=-1, keepdims=True)
        if train:
            self._p = p
        return p

    def backward(self, dy):
        dot = (dy * self._p).sum(axis=-1, keepdims=True)
        return self._p * (dy - dot)

    def spec(self):
        return {"kind": "softmax"}


_LAYER_KINDS = {
    "dense": lambda d: Dense(d["in"], d["out"]),
    "relu": lambda d: ReLU(),
    "dropout": lambda d: Dropout(d["rate"]),
    "conv1d": lambda d: Conv1D(d["in"], d["out"], d["kernel"]),
    "maxpool1d": lambda d: MaxPool1D(d["width"]),
    "globalavgpool1d": lambda d: GlobalAvgPool1D(),
    "lstm": lambda d: LSTM(d["in"], d["hidden"]),
    "softmax": lambda d: Softmax(),
}


def layer_from_spec(d: dict) -> Layer:
    try:
        return _LAYER_KINDS[d["kind"]](d)
    except KeyError as exc:
        raise ValueError(f"unknown layer kind {d.get('kind')!r}") from exc


class ModelGraph:
    """A fixed chain of layers, optionally ending in Softmax."""

    def __init__(self, layers: list[Layer]):
        self.layers = layers

    @property
    def has_softmax_head(self) -> bool:
        return bool(self.layers) and isinstance(self.layers[-1], Softmax)

    def _body(self) -> list[Layer]:
        return self.layers[:-1] if self.has_softmax_head else self.layers

    def forward(self, x, train: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x, train=train, rng=rng)
        return x

    def forward_logits(self, x, train: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
        for layer in self._body():
            x = layer.forward(x, train=train, rng=rng)
        return x

    def backward_from_logits(self, dlogits: np.ndarray) -> np.ndarray:
        grad = dlogits
        for layer in reversed(self._body()):
            grad = layer.backward(grad)
        return grad

    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params()]

    def grads(self) -> list[np.ndarray]:
        return [g for layer in self.layers for g in layer.grads()]

    def zero_grads(self) -> None:
        for layer in self.layers:
            layer.zero_grads()

    @property
    def param_count(self) -> int:
        return sum(p.size for p in self.params())

    def specs(self) -> list[dict]:
        return [layer.spec() for layer in self.layers]

    @classmethod
    def from_specs(cls, specs: list[dict]) -> "ModelGraph":
        return cls([layer_from_spec(d) for d in specs])


def softmax_cross_entropy(logits: np.ndarray, onehot: np.ndarray):
    """Mean categorical cross-entropy with a max-shifted softmax.

    Returns (loss, probabilities, dloss/dlogits). The gradient is
    (probs - onehot) / batch, exact for the mean-reduced loss.
    """
    if logits.shape != onehot.shape:
        raise ValueError(f"logits {logits.shape} and onehot {onehot.shape} must match")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    probs = np.exp(log_probs)
    batch = logits.shape[0]
    loss = float(-(onehot * log_probs).sum() / batch)
    dlogits = (probs - onehot) / batch
    return loss, probs, dlogits
