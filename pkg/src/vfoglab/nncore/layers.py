"""Dense and LSTM layers with explicit forward/backward passes.

Shapes follow the batch-first convention: dense inputs are (N, in), sequence
inputs are (N, T, D) with a (N, T) validity mask. A masked step leaves the
recurrent state untouched and receives no gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("sigmoid", "softmax", "linear")
GATES = ("i", "f", "o", "g")


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    """Raised when a layer produces NaN/inf; `layer_index` locates it."""

    def __init__(self, layer_index, where="activation"):
        super().__init__(f"non-finite {where} in layer {layer_index}")
        self.layer_index = layer_index


def sigmoid(z):
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z):
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def glorot(rng, n_out, n_in):
    limit = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, size=(n_out, n_in))


class Dense:
    """Affine map W @ x + b followed by an activation; W is (out, in)."""

    def __init__(self, n_in, n_out, activation="sigmoid", rng=None):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.n_in, self.n_out, self.activation = int(n_in), int(n_out), activation
        rng = rng if rng is not None else np.random.default_rng(0)
        self.W = glorot(rng, self.n_out, self.n_in)
        self.b = np.zeros(self.n_out)
        self._x = self._a = None

    def params(self):
        return {"W": self.W, "b": self.b}

    def spec(self):
        return {"kind": "dense", "n_in": self.n_in, "n_out": self.n_out, "activation": self.activation}

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ShapeError(f"dense expects (N, {self.n_in}), got {x.shape}")
        z = x @ self.W.T + self.b
        if self.activation == "sigmoid":
            a = sigmoid(z)
        elif self.activation == "softmax":
            a = softmax(z)
        else:
            a = z
        self._x, self._a = x, a
        return a

    def backward_z(self, dz):
        """Gradients from dLoss/d(pre-activation); returns (grads, dLoss/dx)."""
        grads = {"W": dz.T @ self._x, "b": dz.sum(axis=0)}
        return grads, dz @ self.W

    def backward(self, da):
        if self.activation == "sigmoid":
            dz = da * self._a * (1.0 - self._a)
        elif self.activation == "linear":
            dz = da
        else:
            # full softmax Jacobian-vector product
            dz = self._a * (da - (da * self._a).sum(axis=1, keepdims=True))
        return self.backward_z(dz)


def dense_forward(layer, x):
    """Single-vector or batched forward through one dense layer."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return layer.forward(x[None, :])[0]
    return layer.forward(x)


@dataclass
class LstmState:
    c: np.ndarray
    h: np.ndarray


class Lstm:
    """LSTM layer; gate weights act on the concatenation [x ; h_prev]."""

    def __init__(self, n_in, hidden, rng=None, forget_bias=1.0):
        self.n_in, self.hidden = int(n_in), int(hidden)
        rng = rng if rng is not None else np.random.default_rng(0)
        for g in GATES:
            setattr(self, f"W_{g}", glorot(rng, self.hidden, self.n_in + self.hidden))
            setattr(self, f"b_{g}", np.zeros(self.hidden))
        self.b_f[:] = forget_bias
        self._cache = None

    def params(self):
        out = {f"W_{g}": getattr(self, f"W_{g}") for g in GATES}
        out.update({f"b_{g}": getattr(self, f"b_{g}") for g in GATES})
        return out

    def spec(self):
        return {"kind": "lstm", "n_in": self.n_in, "hidden": self.hidden}

    def _stacked(self):
        W = np.vstack([self.W_i, self.W_f, self.W_o, self.W_g])
        b = np.concatenate([self.b_i, self.b_f, self.b_o, self.b_g])
        return W, b

    def zero_state(self, n):
        return LstmState(np.zeros((n, self.hidden)), np.zeros((n, self.hidden)))

    def _gates(self, z):
        H = self.hidden
        i = sigmoid(z[:, :H])
        f = sigmoid(z[:, H:2 * H])
        o = sigmoid(z[:, 2 * H:3 * H])
        g = np.tanh(z[:, 3 * H:])
        return i, f, o, g

    def step(self, x_t, prev, mask=None):
        """One time step for a batch; mask (N,) of 0/1 selects real steps."""
        x_t = np.atleast_2d(np.asarray(x_t, dtype=float))
        if x_t.shape[1] != self.n_in:
            raise ShapeError(f"lstm expects input width {self.n_in}, got {x_t.shape[1]}")
        W, b = self._stacked()
        z = np.hstack([x_t, prev.h]) @ W.T + b
        i, f, o, g = self._gates(z)
        c = f * prev.c + i * g
        h = o * np.tanh(c)
        if mask is not None:
            m = np.asarray(mask, dtype=float).reshape(-1, 1)
            c = m * c + (1.0 - m) * prev.c
            h = m * h + (1.0 - m) * prev.h
        return LstmState(c, h)

    def forward(self, X, mask=None):
        """Run the full sequence; returns hidden outputs (N, T, hidden)."""
        if X.ndim != 3 or X.shape[2] != self.n_in:
            raise ShapeError(f"lstm expects (N, T, {self.n_in}), got {X.shape}")
        N, T, D = X.shape
        H = self.hidden
        if mask is None:
            mask = np.ones((N, T))
        W, b = self._stacked()
        Wx, Wh = W[:, :D], W[:, D:]
        zx = X @ Wx.T + b
        h = np.zeros((N, H))
        c = np.zeros((N, H))
        hs = np.empty((N, T, H))
        cache = []
        for t in range(T):
            m = mask[:, t:t + 1]
            z = zx[:, t] + h @ Wh.T
            i, f, o, g = self._gates(z)
            c_new = f * c + i * g
            tc = np.tanh(c_new)
            h_new = o * tc
            cache.append((h, c, i, f, o, g, tc, m))
            c = m * c_new + (1.0 - m) * c
            h = m * h_new + (1.0 - m) * h
            hs[:, t] = h
        self._cache = (X, W, cache)
        return hs

    def backward(self, dhs):
        """BPTT given dLoss/dh_t for every step; returns (grads, dLoss/dX)."""
        X, W, cache = self._cache
        N, T, D = X.shape
        H = self.hidden
        Wh = W[:, D:]
        dzs = np.empty((N, T, 4 * H))
        hprev = np.empty((N, T, H))
        dh_next = np.zeros((N, H))
        dc_next = np.zeros((N, H))
        for t in reversed(range(T)):
            h_prev, c_prev, i, f, o, g, tc, m = cache[t]
            dh = dhs[:, t] + dh_next
            dh_new = m * dh
            dc_new = m * dc_next + dh_new * o * (1.0 - tc * tc)
            dz = np.hstack([
                dc_new * g * i * (1.0 - i),
                dc_new * c_prev * f * (1.0 - f),
                dh_new * tc * o * (1.0 - o),
                dc_new * i * (1.0 - g * g),
            ])
            dzs[:, t] = dz
            hprev[:, t] = h_prev
            dh_next = dz @ Wh + (1.0 - m) * dh
            dc_next = dc_new * f + (1.0 - m) * dc_next
        dz2 = dzs.reshape(N * T, 4 * H)
        dWx = dz2.T @ X.reshape(N * T, D)
        dWh = dz2.T @ hprev.reshape(N * T, H)
        dW = np.hstack([dWx, dWh])
        db = dz2.sum(axis=0)
        dX = dzs @ W[:, :D]
        grads = {}
        for k, gname in enumerate(GATES):
            grads[f"W_{gname}"] = dW[k * H:(k + 1) * H]
            grads[f"b_{gname}"] = db[k * H:(k + 1) * H]
        return grads, dX


def lstm_step(layer, x_t, prev_state=None, mask=None):
    """Single-sample or batched LSTM step (zero state when prev_state is None)."""
    x_t = np.asarray(x_t, dtype=float)
    single = x_t.ndim == 1
    xb = x_t[None, :] if single else x_t
    if prev_state is None:
        prev_state = layer.zero_state(xb.shape[0])
    elif single:
        prev_state = LstmState(np.atleast_2d(prev_state.c), np.atleast_2d(prev_state.h))
    st = layer.step(xb, prev_state, None if mask is None else np.atleast_1d(mask))
    if single:
        return LstmState(st.c[0], st.h[0])
    return st
