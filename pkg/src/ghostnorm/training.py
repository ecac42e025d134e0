"""SGD training of SimpleNet with optional gradient accumulation."""

from dataclasses import dataclass, field

import numpy as np

from .data import batches, n_batches
from .errors import ConfigError
from .model import loss_and_grads, predict
from .schedules import Constant, lr_at


@dataclass
class TrainConfig:
    batch_size: int = 512
    acc_steps: int = 1
    epochs: int = 1
    seed: int = 0
    schedule: object = field(default_factory=lambda: Constant(0.4))
    shuffle: bool = True

    def __post_init__(self):
        if self.acc_steps < 1:
            raise ConfigError("must be >= 1", "train.acc_steps")
        if self.batch_size % self.acc_steps:
            raise ConfigError(
                f"batch_size {self.batch_size} is not divisible by acc_steps {self.acc_steps}", "train.batch_size"
            )


def compute_gradients(net, x, y, acc_steps=1, update_stats=True):
    """Mean-loss gradients of one logical batch, formed from ``acc_steps`` sequential sub-passes.

    Each sub-batch is forwarded on its own, so a batch-statistics norm only
    sees ``M / acc_steps`` samples at a time.  Returns ``(loss, grads)``.
    """
    m = len(x)
    if acc_steps < 1 or m % acc_steps:
        raise ConfigError(f"batch of {m} cannot be split into {acc_steps} equal sub-batches", "train.acc_steps")
    size = m // acc_steps
    total_loss, total = 0.0, None
    for k in range(acc_steps):
        part = slice(k * size, (k + 1) * size)
        loss, grads = loss_and_grads(net, x[part], y[part], update_stats)
        total_loss += loss / acc_steps
        if total is None:
            total = {name: g / acc_steps for name, g in grads.items()}
        else:
            for name, g in grads.items():
                total[name] += g / acc_steps
    return total_loss, total


def sgd_step(net, grads, lr):
    for name, param in net.parameters().items():
        param -= lr * grads[name]


def train_step_accumulating(net, x, y, acc_steps, lr):
    """One optimizer update from ``acc_steps`` accumulated sub-passes; updates ``net`` in place.

    Returns the batch loss and the gradients that were applied.
    """
    net.train()
    loss, grads = compute_gradients(net, x, y, acc_steps)
    sgd_step(net, grads, lr)
    return loss, grads


def evaluate(net, dataset, batch_size=1000):
    """Argmax accuracy with batch-dependent norms switched to their running statistics."""
    modes = [layer.state.training for layer in net.layers]
    net.eval()
    try:
        pred = predict(net, dataset.images, batch_size)
    finally:
        for layer, mode in zip(net.layers, modes):
            layer.state.training = mode
    return float(np.mean(pred == dataset.labels))


def fit(net, train, config, val=None, test=None, on_step=None, on_epoch=None):
    """Train ``net`` in place and return one metrics dict per epoch.

    ``on_step(net, x, y, loss, grads, step, epoch)`` runs after the gradients
    of a batch are known and before they are applied.
    """
    steps_per_epoch = n_batches(train, config.batch_size)
    history = []
    step = 0
    for epoch in range(config.epochs):
        net.train()
        losses = []
        lr = lr_at(config.schedule, step, steps_per_epoch)
        for x, y in batches(train, config.batch_size, (config.seed, epoch), config.shuffle):
            lr = lr_at(config.schedule, step, steps_per_epoch)
            loss, grads = compute_gradients(net, x, y, config.acc_steps)
            if on_step is not None:
                on_step(net, x, y, loss, grads, step, epoch)
            sgd_step(net, grads, lr)
            losses.append(loss)
            step += 1
        row = {
            "epoch": epoch + 1,
            "lr": lr,
            "train_loss": float(np.mean(losses)),
            "val_accuracy": evaluate(net, val) if val is not None else float("nan"),
            "test_accuracy": evaluate(net, test) if test is not None else float("nan"),
        }
        history.append(row)
        if on_epoch is not None:
            on_epoch(row)
    return history
