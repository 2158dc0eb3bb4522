"""Layers with hand-written forward and backward passes (float64)."""

from __future__ import annotations

import zlib

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class ShapeMismatch(ValueError):
    pass


class NoForwardCache(RuntimeError):
    pass


def layer_rng(seed: int, name: str) -> np.random.Generator:
    """Per-layer stream so a layer's init depends only on (seed, name)."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, zlib.crc32(name.encode())])


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


ACTIVATIONS = ("identity", "relu", "tanh")


def _act(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _act_grad(kind: str, z: np.ndarray, y: np.ndarray, dy: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return dy * (z > 0)
    if kind == "tanh":
        return dy * (1.0 - y * y)
    return dy


class Layer:
    """Base: ``params``/``grads`` are name → array dicts of equal shapes."""

    kind = "Layer"

    def __init__(self, name: str):
        self.name = name
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def zero_grad(self) -> None:
        for k, v in self.params.items():
            self.grads[k] = np.zeros_like(v)

    def _need_cache(self):
        if self._cache is None:
            raise NoForwardCache(f"{self.name}: backward called before forward")
        return self._cache

    def spec(self) -> dict:
        return {"kind": self.kind, "name": self.name}


class Dense(Layer):
    kind = "Dense"

    def __init__(self, name: str, n_in: int, units: int, activation: str = "relu", seed: int = 0):
        super().__init__(name)
        if units < 1 or n_in < 1:
            raise ValueError("Dense needs n_in, units >= 1")
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.n_in, self.units, self.activation = n_in, units, activation
        limit = np.sqrt((6.0 if activation == "relu" else 3.0) / n_in)
        self.params = {"W": layer_rng(seed, name).uniform(-limit, limit, (n_in, units)), "b": np.zeros(units)}
        self.zero_grad()

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ShapeMismatch(f"{self.name}: expected (batch, {self.n_in}), got {x.shape}")
        z = x @ self.params["W"] + self.params["b"]
        y = _act(self.activation, z)
        self._cache = (x, z, y)
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        x, z, y = self._need_cache()
        dz = _act_grad(self.activation, z, y, dy)
        self.grads["W"] += x.T @ dz
        self.grads["b"] += dz.sum(axis=0)
        return dz @ self.params["W"].T

    def spec(self) -> dict:
        return {**super().spec(), "n_in": self.n_in, "units": self.units, "activation": self.activation}


class Conv1D(Layer):
    """Valid cross-correlation along axis 1 of a (batch, length, channels) input."""

    kind = "Conv1D"

    def __init__(self, name: str, channels: int, filters: int, width: int, activation: str = "relu", seed: int = 0):
        super().__init__(name)
        if min(channels, filters, width) < 1:
            raise ValueError("Conv1D needs channels, filters, width >= 1")
        self.channels, self.filters, self.width, self.activation = channels, filters, width, activation
        fan_in = channels * width
        limit = np.sqrt((6.0 if activation == "relu" else 3.0) / fan_in)
        self.params = {"W": layer_rng(seed, name).uniform(-limit, limit, (width, channels, filters)),
                       "b": np.zeros(filters)}
        self.zero_grad()

    def out_length(self, length: int) -> int:
        return length - self.width + 1

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 3 or x.shape[2] != self.channels or x.shape[1] < self.width:
            raise ShapeMismatch(f"{self.name}: expected (batch, >={self.width}, {self.channels}), got {x.shape}")
        win = sliding_window_view(x, self.width, axis=1)  # (B, Lo, C, w)
        z = np.einsum("blcw,wcf->blf", win, self.params["W"], optimize=True) + self.params["b"]
        y = _act(self.activation, z)
        self._cache = (x, win, z, y)
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        x, win, z, y = self._need_cache()
        dz = _act_grad(self.activation, z, y, dy)
        self.grads["W"] += np.einsum("blcw,blf->wcf", win, dz, optimize=True)
        self.grads["b"] += dz.sum(axis=(0, 1))
        dx = np.zeros_like(x)
        lo = dz.shape[1]
        for j in range(self.width):
            dx[:, j:j + lo, :] += dz @ self.params["W"][j].T
        return dx

    def spec(self) -> dict:
        return {**super().spec(), "channels": self.channels, "filters": self.filters,
                "width": self.width, "activation": self.activation}


class GlobalAvgPool(Layer):
    kind = "GlobalAvgPool"

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._cache = x.shape
        return x.mean(axis=1)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        shape = self._need_cache()
        return np.broadcast_to(dy[:, None, :] / shape[1], shape).copy()


class LSTM(Layer):
    """Standard LSTM over (batch, steps, features) with a (batch, steps)
    validity mask; a masked step leaves (h, c) unchanged.  Gate order in
    the stacked weights is i, f, g, o."""

    kind = "LSTM"

    def __init__(self, name: str, n_in: int, units: int, seed: int = 0, return_sequences: bool = False):
        super().__init__(name)
        if units < 1 or n_in < 1:
            raise ValueError("LSTM needs n_in, units >= 1")
        self.n_in, self.units, self.return_sequences = n_in, units, return_sequences
        rng = layer_rng(seed, name)
        H = units
        lx, lh = np.sqrt(3.0 / n_in), np.sqrt(3.0 / H)
        b = np.zeros(4 * H)
        b[H:2 * H] = 1.0
        self.params = {"Wx": rng.uniform(-lx, lx, (n_in, 4 * H)), "Wh": rng.uniform(-lh, lh, (H, 4 * H)), "b": b}
        self.zero_grad()

    def forward(self, x: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
        if x.ndim != 3 or x.shape[2] != self.n_in:
            raise ShapeMismatch(f"{self.name}: expected (batch, steps, {self.n_in}), got {x.shape}")
        B, T, _ = x.shape
        H = self.units
        m = np.ones((B, T)) if mask is None else np.asarray(mask, dtype=float)
        if m.shape != (B, T):
            raise ShapeMismatch(f"{self.name}: mask shape {m.shape} != {(B, T)}")
        Wx, Wh, b = self.params["Wx"], self.params["Wh"], self.params["b"]
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        steps = []
        hs = np.zeros((B, T, H))
        for t in range(T):
            a = x[:, t] @ Wx + h @ Wh + b
            i, f, o = sigmoid(a[:, :H]), sigmoid(a[:, H:2 * H]), sigmoid(a[:, 3 * H:])
            g = np.tanh(a[:, 2 * H:3 * H])
            c_new = f * c + i * g
            tc = np.tanh(c_new)
            h_new = o * tc
            mt = m[:, t:t + 1]
            steps.append((h, c, i, f, g, o, tc, mt))
            h = mt * h_new + (1 - mt) * h
            c = mt * c_new + (1 - mt) * c
            hs[:, t] = h
        self._cache = (x, steps)
        return hs if self.return_sequences else h

    def backward(self, dy: np.ndarray) -> np.ndarray:
        x, steps = self._need_cache()
        B, T, _ = x.shape
        H = self.units
        Wx, Wh = self.params["Wx"], self.params["Wh"]
        dx = np.zeros_like(x)
        dh = np.zeros((B, H)) if self.return_sequences else dy.copy()
        dc = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            if self.return_sequences:
                dh = dh + dy[:, t]
            h_prev, c_prev, i, f, g, o, tc, mt = steps[t]
            dh_new, dc_new = mt * dh, mt * dc
            do = dh_new * tc
            dcn = dc_new + dh_new * o * (1 - tc * tc)
            di, df, dg = dcn * g, dcn * c_prev, dcn * i
            da = np.concatenate([di * i * (1 - i), df * f * (1 - f), dg * (1 - g * g), do * o * (1 - o)], axis=1)
            self.grads["Wx"] += x[:, t].T @ da
            self.grads["Wh"] += h_prev.T @ da
            self.grads["b"] += da.sum(axis=0)
            dx[:, t] = da @ Wx.T
            dh = (1 - mt) * dh + da @ Wh.T
            dc = (1 - mt) * dc + dcn * f
        return dx

    def spec(self) -> dict:
        return {**super().spec(), "n_in": self.n_in, "units": self.units, "return_sequences": self.return_sequences}


class Concat(Layer):
    kind = "Concat"

    def forward(self, parts: list[np.ndarray]) -> np.ndarray:
        self._cache = [p.shape[1] for p in parts]
        return np.concatenate(parts, axis=1)

    def backward(self, dy: np.ndarray) -> list[np.ndarray]:
        widths = self._need_cache()
        return np.split(dy, np.cumsum(widths)[:-1], axis=1)


class SoftmaxCE(Layer):
    """Softmax probabilities and mean cross-entropy."""

    kind = "SoftmaxCE"

    def forward(self, logits: np.ndarray, labels: np.ndarray | None = None):
        z = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(z)
        p = e / e.sum(axis=1, keepdims=True)
        if labels is None:
            self._cache = None
            return p, None
        labels = np.asarray(labels, dtype=int)
        if labels.shape != (logits.shape[0],):
            raise ShapeMismatch(f"{self.name}: {labels.shape[0]} labels for {logits.shape[0]} rows")
        logp = z - np.log(e.sum(axis=1, keepdims=True))
        loss = float(-logp[np.arange(len(labels)), labels].mean())
        self._cache = (p, labels)
        return p, loss

    def backward(self, dloss: float = 1.0) -> np.ndarray:
        p, labels = self._need_cache()
        d = p.copy()
        d[np.arange(len(labels)), labels] -= 1.0
        return d * (dloss / len(labels))


def softmax(logits: np.ndarray) -> np.ndarray:
    return SoftmaxCE("softmax").forward(logits)[0]
