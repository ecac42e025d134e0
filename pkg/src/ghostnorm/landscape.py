"""Loss-landscape smoothness probe.

At every optimizer step the loss is re-evaluated on the same mini-batch at
``theta - lr * grad`` for several candidate rates, and the min/max of those
losses is recorded.  A narrow envelope means the gradient predicts the loss
well along its own direction.  Probes run on parameter copies with the
running-statistics update disabled, so the optimization trajectory is the
same as an unprobed run.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .data import n_batches
from .model import net_forward, softmax_cross_entropy
from .schedules import lr_at
from .training import compute_gradients, fit


@dataclass
class LandscapeRecord:
    step: int
    epoch: int
    train_loss: float
    min_loss: float
    max_loss: float
    probe_lrs: list
    probe_losses: list = field(default_factory=list)
    nonfinite: bool = False

    @property
    def width(self):
        return self.max_loss - self.min_loss


def batch_loss(net, x, y, acc_steps=1):
    """Training-mode loss of a batch without touching running statistics."""
    size = len(x) // acc_steps
    total = 0.0
    for k in range(acc_steps):
        part = slice(k * size, (k + 1) * size)
        logits, _ = net_forward(net, x[part], update_stats=False)
        loss, _ = softmax_cross_entropy(logits, y[part])
        total += loss / acc_steps
    return total


def probed_losses(loss_at, params, grads, probe_lrs):
    """``[loss_at(params - lr * grads) for lr in probe_lrs]``; ``params`` is never modified."""
    out = []
    for lr in probe_lrs:
        candidate = {name: p - lr * grads[name] for name, p in params.items()}
        out.append(float(loss_at(candidate)))
    return out


def envelope(losses):
    """``(min, max, nonfinite)``; non-finite losses count as +inf for the max and are left out of the min."""
    finite = [v for v in losses if math.isfinite(v)]
    nonfinite = len(finite) != len(losses)
    hi = math.inf if nonfinite else max(finite)
    lo = min(finite) if finite else math.inf
    return lo, hi, nonfinite


def _check_lrs(probe_lrs):
    probe_lrs = [float(lr) for lr in probe_lrs]
    if not probe_lrs or any(lr < 0 for lr in probe_lrs):
        raise ValueError("probe_lrs must be a non-empty list of non-negative rates")
    return probe_lrs


def probe_step(net, x, y, probe_lrs, grads=None, train_loss=None, acc_steps=1, step=0, epoch=0):
    """Envelope of the batch loss along ``-grads`` at each probe rate."""
    probe_lrs = _check_lrs(probe_lrs)
    if grads is None or train_loss is None:
        train_loss, grads = compute_gradients(net, x, y, acc_steps, update_stats=False)
    params = net.parameters()
    with np.errstate(over="ignore", invalid="ignore"):
        losses = probed_losses(
            lambda p: batch_loss(net.with_parameters(p), x, y, acc_steps), params, grads, probe_lrs
        )
    lo, hi, bad = envelope(losses)
    return LandscapeRecord(step, epoch, float(train_loss), lo, hi, probe_lrs, losses, bad)


def run_landscape_experiment(net, train, config, probe_lrs=None, probe_schedules=None, on_record=None,
                             probe_batch=None):
    """Train ``net`` in place, probing at every optimizer step.

    Probe rates are either the fixed ``probe_lrs`` or, for cyclical policies,
    the instantaneous rate of each schedule in ``probe_schedules``.  Probes
    use the pending mini-batch unless ``probe_batch=(x, y)`` names a fixed
    held-out batch.  Returns ``(records, history)``.
    """
    if (probe_lrs is None) == (probe_schedules is None):
        raise ValueError("give exactly one of probe_lrs and probe_schedules")
    if probe_lrs is not None:
        probe_lrs = _check_lrs(probe_lrs)
    steps_per_epoch = n_batches(train, config.batch_size)
    records = []

    def on_step(net, x, y, loss, grads, step, epoch):
        lrs = probe_lrs
        if lrs is None:
            lrs = [lr_at(s, step, steps_per_epoch) for s in probe_schedules]
        if probe_batch is None:
            record = probe_step(net, x, y, lrs, grads, loss, config.acc_steps, step, epoch + 1)
        else:
            px, py = probe_batch
            record = probe_step(net, px, py, lrs, grads, batch_loss(net, px, py), 1, step, epoch + 1)
        records.append(record)
        if on_record is not None:
            on_record(record)

    history = fit(net, train, config, on_step=on_step)
    return records, history
