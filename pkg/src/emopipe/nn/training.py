"""Seeded mini-batch training loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import DimensionMismatch, EmptyDataset
from .adam import DEFAULT_LR, Adam
from .models import Model

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 5000
    batch_size: int = 32
    seed: int = 0
    lr: float = DEFAULT_LR
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)

    def __len__(self):
        return len(self.train_loss)

    def rows(self):
        for i, row in enumerate(zip(self.train_loss, self.train_acc, self.val_acc), start=1):
            yield (i, *row)


def accuracy(model: Model, x, y) -> float:
    """Argmax accuracy in inference mode; ties go to the lower class index."""
    if len(x) == 0:
        return float("nan")
    probs = model.forward(x)
    return float(np.mean(probs.argmax(axis=1) == np.asarray(y)))


def train(model: Model, train_set, val_set=None, config: Optional[TrainConfig] = None,
          on_epoch: Optional[Callable[[int, TrainHistory], None]] = None):
    """Train ``model`` in place on ``(inputs, labels)`` pairs.

    Shuffling and dropout masks draw from one generator seeded with
    ``config.seed``, so a run is reproducible bit for bit on one thread.
    Training loss/accuracy are averaged over the epoch's train-mode passes.
    """
    config = config or TrainConfig()
    x, y = np.asarray(train_set[0]), np.asarray(train_set[1], dtype=np.intp)
    if len(x) == 0:
        raise EmptyDataset("training set is empty")
    if len(x) != len(y):
        raise DimensionMismatch("inputs and labels differ in length")
    x = x.astype(model.dtype, copy=False)
    if val_set is not None:
        vx, vy = np.asarray(val_set[0]), np.asarray(val_set[1], dtype=np.intp)
    rng = np.random.default_rng(config.seed)
    opt = Adam(model.params(), lr=config.lr, beta1=config.beta1, beta2=config.beta2,
               epsilon=config.epsilon)
    history = TrainHistory()
    n = len(x)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        loss_sum, correct = 0.0, 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb, yb = x[idx], y[idx]
            masks = model.sample_masks(len(idx), rng)
            loss, grads, probs = model.backprop(xb, yb, masks)
            correct += int(np.sum(probs.argmax(axis=1) == yb))
            loss_sum += loss * len(idx)
            opt.step(model.params(), grads)
        history.train_loss.append(loss_sum / n)
        history.train_acc.append(correct / n)
        history.val_acc.append(accuracy(model, vx, vy) if val_set is not None else float("nan"))
        if on_epoch is not None:
            on_epoch(epoch + 1, history)
    return model, history
