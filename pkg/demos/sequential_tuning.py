"""
Grid versus sequential tuning of SeqNorm group counts
=====================================================

Grid search trains every (g_c, g_m) pair.  Sequential tuning sweeps g_m at
g_c = 1, keeps the largest g_m within delta of the best, then sweeps g_c.
On synthetic clusters both are run with two repeats per configuration.
"""

from ghostnorm.data import split_dataset, standardize, synthetic_classification
from ghostnorm.model import SimpleNet
from ghostnorm.norms import NormSpec
from ghostnorm.schedules import Constant
from ghostnorm.training import TrainConfig, evaluate, fit
from ghostnorm.tuning import tune

train, val, _ = standardize(*split_dataset(synthetic_classification(3000, 32, 8, seed=3, separation=2.5), seed=3))


def run_trial(g_c, g_m, repeat):
    net = SimpleNet.build(in_dim=32, widths=(64, 32), n_classes=8, norm=NormSpec("seq", g_c=g_c, g_m=g_m), seed=repeat)
    fit(net, train, TrainConfig(batch_size=128, epochs=2, seed=repeat, schedule=Constant(0.2)))
    return evaluate(net, val)


gm, gc = [2, 4, 8, 16], [1, 2, 4, 8, 16]
for strategy in ("grid", "sequential"):
    results, chosen, trials = tune(strategy, gm, gc, run_trial, repeats=2)
    print(f"{strategy}: {trials} training runs, picked g_c={chosen.g_c}, g_m={chosen.g_m} "
          f"(val accuracy {chosen.mean:.4f})")
    for r in results:
        print(f"   {r.phase:5s} g_c={r.g_c:2d} g_m={r.g_m:2d}  mean {r.mean:.4f}  var {r.variance:.2e}"
              + ("  <-" if r.selected else ""))
