"""
Loss envelope along the gradient during MNIST training
======================================================

At every update the batch loss is re-evaluated at eight step sizes
0.1 .. 0.8 along the gradient.  The spread between the smallest and the
largest of those losses says how far the gradient can be trusted.  One
epoch each for BatchNorm, GhostNorm (g_m=4) and no normalization.

Needs the MNIST IDX files (see README); writes landscape.svg.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ghostnorm.data import load_mnist
from ghostnorm.landscape import run_landscape_experiment
from ghostnorm.model import SimpleNet
from ghostnorm.norms import NormSpec
from ghostnorm.training import TrainConfig

train, _, _ = load_mnist()
config = TrainConfig(batch_size=512, epochs=1, seed=0)
probes = np.arange(1, 9) / 10

fig, ax = plt.subplots(figsize=(8, 4))
for label, norm in [("BatchNorm", NormSpec("batch")), ("GhostNorm g_m=4", NormSpec("ghost", g_m=4)), ("none", None)]:
    records, _ = run_landscape_experiment(SimpleNet.build(norm=norm, seed=0), train, config, probe_lrs=probes)
    width = np.array([r.width for r in records])
    steps = [r.step for r in records]
    line, = ax.plot(steps, [r.max_loss for r in records], label=f"{label} max")
    ax.plot(steps, [r.min_loss for r in records], ls="--", color=line.get_color(), label=f"{label} min")
    print(f"{label:16s} median envelope width {np.median(width):.4f}, last {width[-1]:.4f}")

ax.set_xlabel("optimizer step")
ax.set_ylabel("batch loss")
ax.set_yscale("log")
ax.legend(fontsize=7)
fig.savefig("landscape.svg")
