"""Categorical cross-entropy and mean absolute error, batch-mean reduced."""

import numpy as np

P_FLOOR = 1e-12


def _check(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def ce_loss(probabilities, onehot):
    """-sum(y * log p) per sample, averaged over the batch for 2-D input."""
    p, y = _check(probabilities, onehot)
    per = -(y * np.log(np.maximum(p, P_FLOOR))).sum(axis=-1)
    return float(np.mean(per))


def ce_grad(probabilities, onehot):
    """Gradient of the summed loss at the softmax input: p - y."""
    p, y = _check(probabilities, onehot)
    return p - y


def mae_loss(pred, target):
    p, y = _check(pred, target)
    return float(np.mean(np.abs(p - y)))


def mae_grad(pred, target):
    """Elementwise subgradient sign(pred - target); 0 at equality."""
    p, y = _check(pred, target)
    return np.sign(p - y)
