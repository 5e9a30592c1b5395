"""Central finite differences over every scalar parameter of a network."""

import numpy as np


def worst_relative_error(model, inputs, targets, h=1e-5, floor=1e-8):
    _, grads = model.backprop(inputs, targets)
    worst = 0.0
    where = None
    for name, arr in model.params().items():
        flat = arr.reshape(-1)
        g = grads[name].reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = model.loss(inputs, targets)
            flat[i] = old - h
            down = model.loss(inputs, targets)
            flat[i] = old
            num = (up - down) / (2 * h)
            rel = abs(g[i] - num) / max(abs(g[i]), abs(num), floor)
            if rel > worst:
                worst, where = rel, (name, i, float(g[i]), num)
    return worst, where


def param_classes(model):
    """Suffixes like "W", "b", "W_i", "b_f" present in the model."""
    return {name.split(".", 1)[1] for name in model.params()}
