"""Network containers: a dense MLP classifier/regressor and a stacked-LSTM regressor.

Both expose the same small surface used by the trainer:
``params()`` (ordered name -> array, live references), ``predict(inputs)``,
``loss(inputs, targets)`` and ``backprop(inputs, targets) -> (loss, grads)``.
Sequence inputs are ``(X, mask)`` tuples.
"""

from __future__ import annotations

import numpy as np

from .layers import Dense, Lstm, NonFiniteError, ShapeError
from .losses import ce_loss, mae_loss

LOSSES = ("ce", "mae")


def _check_finite(a, layer_index):
    if not np.all(np.isfinite(a)):
        raise NonFiniteError(layer_index)


class _Net:
    layers: list
    loss_name: str

    def params(self):
        out = {}
        for k, layer in enumerate(self.layers):
            for name, arr in layer.params().items():
                out[f"{k}.{name}"] = arr
        return out

    def n_params(self):
        return int(sum(a.size for a in self.params().values()))

    def get_flat(self):
        return {k: v.copy() for k, v in self.params().items()}

    def set_flat(self, values):
        for k, arr in self.params().items():
            arr[...] = values[k]

    def _output_dz(self, out, targets):
        n = out.shape[0]
        if self.loss_name == "ce":
            return (out - targets) / n
        return np.sign(out - targets) / n

    def loss(self, inputs, targets):
        out = self.predict(inputs)
        if self.loss_name == "ce":
            return ce_loss(out, targets)
        return mae_loss(out, targets)


class MLP(_Net):
    """Stack of dense layers. Softmax output pairs with "ce", linear with "mae"."""

    def __init__(self, sizes, hidden_activation="sigmoid", output_activation="softmax",
                 loss="ce", rng=None):
        if loss not in LOSSES:
            raise ValueError(f"unknown loss {loss!r}")
        if loss == "ce" and output_activation != "softmax":
            raise ValueError("cross-entropy head must be softmax")
        if loss == "mae" and output_activation != "linear":
            raise ValueError("MAE head must be linear")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.sizes = tuple(int(s) for s in sizes)
        self.hidden_activation = hidden_activation
        self.output_activation = output_activation
        self.loss_name = loss
        self.layers = []
        for k, (a, b) in enumerate(zip(self.sizes, self.sizes[1:])):
            last = k == len(self.sizes) - 2
            self.layers.append(Dense(a, b, output_activation if last else hidden_activation, rng))

    def spec(self):
        return {"type": "mlp", "sizes": list(self.sizes), "hidden_activation": self.hidden_activation,
                "output_activation": self.output_activation, "loss": self.loss_name}

    def predict(self, X):
        a = np.asarray(X, dtype=float)
        for k, layer in enumerate(self.layers):
            a = layer.forward(a)
            _check_finite(a, k)
        return a

    def backprop(self, X, targets):
        out = self.predict(X)
        targets = np.asarray(targets, dtype=float).reshape(out.shape)
        loss = ce_loss(out, targets) if self.loss_name == "ce" else mae_loss(out, targets)
        grads = {}
        g, dx = self.layers[-1].backward_z(self._output_dz(out, targets))
        for name, v in g.items():
            grads[f"{len(self.layers) - 1}.{name}"] = v
        for k in range(len(self.layers) - 2, -1, -1):
            g, dx = self.layers[k].backward(dx)
            for name, v in g.items():
                grads[f"{k}.{name}"] = v
        return loss, grads


class LstmRegressor(_Net):
    """Stacked LSTM over the window, last hidden state -> dense head -> linear scalar."""

    def __init__(self, n_in, hidden_sizes=(32, 32), head_sizes=(20,), head_activation="sigmoid",
                 rng=None, forget_bias=1.0):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.n_in = int(n_in)
        self.hidden_sizes = tuple(int(h) for h in hidden_sizes)
        self.head_sizes = tuple(int(h) for h in head_sizes)
        self.head_activation = head_activation
        self.loss_name = "mae"
        self.lstms = []
        width = self.n_in
        for h in self.hidden_sizes:
            self.lstms.append(Lstm(width, h, rng, forget_bias))
            width = h
        self.head = []
        for h in self.head_sizes:
            self.head.append(Dense(width, h, head_activation, rng))
            width = h
        self.head.append(Dense(width, 1, "linear", rng))
        self.layers = self.lstms + self.head

    def spec(self):
        return {"type": "lstm_regressor", "n_in": self.n_in, "hidden_sizes": list(self.hidden_sizes),
                "head_sizes": list(self.head_sizes), "head_activation": self.head_activation}

    @staticmethod
    def _unpack(inputs):
        if isinstance(inputs, tuple):
            X, mask = inputs
        else:
            X, mask = inputs, None
        X = np.asarray(X, dtype=float)
        if X.ndim != 3:
            raise ShapeError(f"sequence input must be (N, T, D), got {X.shape}")
        if mask is None:
            mask = np.ones(X.shape[:2])
        return X, np.asarray(mask, dtype=float)

    def predict(self, inputs):
        X, mask = self._unpack(inputs)
        a = X
        for k, layer in enumerate(self.lstms):
            a = layer.forward(a, mask)
            _check_finite(a, k)
        a = a[:, -1, :]
        for j, layer in enumerate(self.head):
            a = layer.forward(a)
            _check_finite(a, len(self.lstms) + j)
        return a[:, 0]

    def backprop(self, inputs, targets):
        out = self.predict(inputs)
        targets = np.asarray(targets, dtype=float).reshape(out.shape)
        loss = mae_loss(out, targets)
        grads = {}
        n_l = len(self.lstms)
        g, da = self.head[-1].backward_z(self._output_dz(out, targets)[:, None])
        for name, v in g.items():
            grads[f"{len(self.layers) - 1}.{name}"] = v
        for j in range(len(self.head) - 2, -1, -1):
            g, da = self.head[j].backward(da)
            for name, v in g.items():
                grads[f"{n_l + j}.{name}"] = v
        X, _ = self._unpack(inputs)
        dhs = np.zeros((X.shape[0], X.shape[1], self.hidden_sizes[-1]))
        dhs[:, -1] = da
        for k in range(n_l - 1, -1, -1):
            g, dhs = self.lstms[k].backward(dhs)
            for name, v in g.items():
                grads[f"{k}.{name}"] = v
        return loss, grads


def backprop(model, batch):
    """Loss and gradient for every parameter on one (inputs, targets) batch."""
    inputs, targets = batch
    n = len(targets)
    if n == 0:
        raise ValueError("empty batch")
    return model.backprop(inputs, targets)


def build(spec, rng=None):
    kind = spec.get("type")
    if kind == "mlp":
        return MLP(spec["sizes"], spec["hidden_activation"], spec["output_activation"], spec["loss"], rng)
    if kind == "lstm_regressor":
        return LstmRegressor(spec["n_in"], spec["hidden_sizes"], spec["head_sizes"],
                             spec["head_activation"], rng)
    raise ValueError(f"unknown network type {kind!r}")


def mlp_param_count(sizes):
    return int(sum(a * b + b for a, b in zip(sizes, sizes[1:])))


def lstm_regressor_param_count(n_in, hidden_sizes, head_sizes):
    total = 0
    width = n_in
    for h in hidden_sizes:
        total += 4 * (h * (width + h) + h)
        width = h
    return total + mlp_param_count((width,) + tuple(head_sizes) + (1,))
