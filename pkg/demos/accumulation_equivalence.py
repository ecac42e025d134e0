"""
Gradient accumulation with BatchNorm is GhostNorm
=================================================

Splitting a batch of 64 into k sub-batches, running forward/backward on
each and averaging the gradients gives exactly the gradients of one pass
through GhostNorm with k groups.  Without normalization the split changes
nothing at all.
"""

import numpy as np

from ghostnorm.model import SimpleNet
from ghostnorm.norms import NormSpec
from ghostnorm.training import compute_gradients

rng = np.random.default_rng(0)
x = rng.normal(size=(64, 784))
y = rng.integers(0, 10, 64)


def max_diff(a, b):
    return max(np.max(np.abs(a[k] - b[k])) for k in a)


bn_net = SimpleNet.build(norm=NormSpec("batch"), seed=1)
_, full = compute_gradients(bn_net, x, y, acc_steps=1)

for k in (2, 4, 8):
    ghost_net = bn_net.copy()
    for layer in ghost_net.layers:
        layer.norm = NormSpec("ghost", g_m=k)
    _, accumulated = compute_gradients(bn_net, x, y, acc_steps=k)
    _, ghost = compute_gradients(ghost_net, x, y)
    print(f"k={k}: |accumulated - ghost| = {max_diff(accumulated, ghost):.1e}   "
          f"|accumulated - full batch| = {max_diff(accumulated, full):.1e}")

plain = SimpleNet.build(seed=1)
_, once = compute_gradients(plain, x, y)
_, split = compute_gradients(plain, x, y, acc_steps=8)
print(f"no norm, k=8: |accumulated - full batch| = {max_diff(once, split):.1e}")
