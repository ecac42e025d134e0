"""
Batch statistics versus ghost-batch statistics on eight numbers
===============================================================

One channel, eight samples.  BatchNorm uses all eight for its mean and
variance; GhostNorm with two groups normalizes the first and last four
separately, which can swap the order of samples from different groups.
"""

import numpy as np

from ghostnorm import norms, tensor
from ghostnorm.norms import NormSpec, NormState

x = tensor.from_values((8, 1, 1), [35, 39, 30, 4, 38, 26, 27, 19])


def normalize(spec):
    y, _ = norms.forward(spec, NormState.create(1), x, update_stats=False)
    return y


bn = normalize(NormSpec("batch"))
ghost = normalize(NormSpec("ghost", g_m=2))

np.set_printoptions(precision=3, suppress=True)
print("x        ", x.ravel())
print("batch    ", bn.ravel())
print("ghost g=2", ghost.ravel())

# batch statistics are an affine map of the whole channel, so order survives
print("batch keeps order:", norms.rank_order_preserved(x, bn))

# across the two ghost groups the second sample overtakes the fifth
flips = norms.rank_flips(x, ghost)
print("ghost flips (index pairs):", flips)
i, j = flips[0]
print(f"x[{i}]={x.ravel()[i]:.0f} > x[{j}]={x.ravel()[j]:.0f}, "
      f"but y[{i}]={ghost.ravel()[i]:.3f} < y[{j}]={ghost.ravel()[j]:.3f}")

# groups of two degenerate to +-1 no matter what the values are
pairs = normalize(NormSpec("ghost", g_m=4))
print("ghost g=4", pairs.ravel())
