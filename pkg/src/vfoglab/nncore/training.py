"""Seeded mini-batch training with best-validation snapshotting and patience."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .optim import AdamState, adam_step

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    max_epochs: int = 3000
    batch_size: int = 64
    patience: int = 50
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    log_every: int = 0

    def to_dict(self):
        return asdict(self)


@dataclass
class History:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_accuracy: list = field(default_factory=list)
    best_epoch: int = -1
    epochs_run: int = 0

    def to_dict(self):
        return asdict(self)


def take(inputs, idx):
    if isinstance(inputs, tuple):
        return tuple(a[idx] for a in inputs)
    return inputs[idx]


def _accuracy(model, inputs, targets):
    pred = model.predict(inputs)
    return float(np.mean(pred.argmax(axis=1) == np.asarray(targets).argmax(axis=1)))


def train(model, train_set, val_set=None, hyper=None, seed=0):
    """Fit `model` in place and return (model, History).

    The parameters with the lowest validation loss are restored at the end.
    Training stops after `max_epochs`, or once `patience` + 1 consecutive
    epochs fail to improve on the best validation loss.
    """
    hyper = hyper or TrainConfig()
    inputs, targets = train_set
    n = len(targets)
    if n == 0:
        raise ValueError("empty training set")
    if val_set is not None and len(val_set[1]) == 0:
        val_set = None
    rng = np.random.default_rng(seed)
    opt = AdamState(lr=hyper.lr, beta1=hyper.beta1, beta2=hyper.beta2, eps=hyper.eps)
    params = model.params()
    classifier = getattr(model, "loss_name", "") == "ce"
    hist = History()
    best_loss = np.inf
    best = None
    stale = 0
    for epoch in range(hyper.max_epochs):
        perm = rng.permutation(n)
        total = 0.0
        for s in range(0, n, hyper.batch_size):
            idx = perm[s:s + hyper.batch_size]
            loss, grads = model.backprop(take(inputs, idx), targets[idx])
            adam_step(params, grads, opt)
            total += loss * len(idx)
        hist.train_loss.append(total / n)
        if val_set is not None:
            vloss = model.loss(*val_set)
            if classifier:
                hist.val_accuracy.append(_accuracy(model, *val_set))
        else:
            vloss = model.loss(inputs, targets)
        hist.val_loss.append(float(vloss))
        hist.epochs_run = epoch + 1
        if vloss < best_loss:
            best_loss = vloss
            best = model.get_flat()
            hist.best_epoch = epoch
            stale = 0
        else:
            stale += 1
        if hyper.log_every and (epoch + 1) % hyper.log_every == 0:
            log.info("epoch %d train %.5f val %.5f", epoch + 1, hist.train_loss[-1], vloss)
        if stale > hyper.patience:
            break
    if best is not None:
        model.set_flat(best)
    return model, hist
