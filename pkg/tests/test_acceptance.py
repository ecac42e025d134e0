"""One test per acceptance criterion; each prints a single PASS/FAIL line.

The lines are repeated in the pytest terminal summary under "acceptance
criteria".  Criterion 8 trains four MNIST models for 10 epochs and takes a
few minutes on one CPU core.
"""

import time
import warnings

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from ghostnorm import data, norms, tensor, verify
from ghostnorm.landscape import probed_losses, run_landscape_experiment
from ghostnorm.model import SimpleNet
from ghostnorm.norms import NormSpec, NormState, rank_flips, rank_order_preserved
from ghostnorm.schedules import Constant
from ghostnorm.training import TrainConfig, compute_gradients, evaluate, fit
from ghostnorm.tuning import TuneResult, select_largest_gm, tune
from test_gradients import check_norm_against_fd, net_gradient_error

EXAMPLE = (35, 39, 30, 4, 38, 26, 27, 19)
BATCH_EXPECTED = (0.718, 1.089, 0.255, -2.155, 0.996, -0.116, -0.023, -0.765)
GHOST_EXPECTED = (0.586, 0.879, 0.220, -1.684, 1.544, -0.221, -0.074, -1.250)

needs_mnist = pytest.mark.skipif(not data.mnist_available(), reason="MNIST files not present")


def report(number, title, passed, detail, started):
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {title} | {detail} | {time.perf_counter() - started:.1f}s"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


def normalize(kind, x, **kw):
    spec = NormSpec(kind, **kw)
    return norms.forward(spec, NormState.create(x.shape[1]), x, update_stats=False)[0]


def test_criterion_1_worked_examples():
    t0 = time.perf_counter()
    x = tensor.from_values((8, 1, 1), EXAMPLE)
    bn = normalize("batch", x).ravel()
    ghost = normalize("ghost", x, g_m=2).ravel()
    dev_bn = np.max(np.abs(bn - verify.BATCH_PUBLISHED))
    dev_gh = np.max(np.abs(ghost - verify.GHOST_PUBLISHED))
    rounded = np.allclose(np.round(bn, 3), BATCH_EXPECTED, atol=1e-12) and np.allclose(
        np.round(ghost, 3), GHOST_EXPECTED, atol=1e-12
    )
    passed = dev_bn <= 0.05 and dev_gh <= 0.05 and rounded
    report(1, "worked examples", passed,
           f"batch max dev {dev_bn:.4f}, ghost max dev {dev_gh:.4f} (limit 0.05), 3-dp values match: {rounded}", t0)


def test_criterion_2_rank_order():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    kept = 0
    for _ in range(1000):
        shape = tuple(int(v) for v in rng.integers(1, [33, 9, 9]))
        x = rng.normal(size=shape) * rng.uniform(0.1, 100) + rng.normal() * 10
        y = normalize("batch", x)
        kept += all(rank_order_preserved(x, y, norms.channel_scope(shape, c)) for c in range(shape[1]))
    ex = tensor.from_values((8, 1, 1), EXAMPLE)
    flips = rank_flips(ex, normalize("ghost", ex, g_m=2))
    passed = kept == 1000 and flips[:1] == [(1, 4)]
    report(2, "rank order", passed, f"batch preserved in {kept}/1000 tensors, first ghost flip {flips[:1]}", t0)


GRAD_KINDS = [("batch", 1, 1), ("ghost", 1, 2), ("layer", 1, 1), ("instance", 1, 1),
              ("group", 2, 1), ("seq", 2, 2), ("seq", 1, 2)]


def random_norm_instance(rng, kind, g_c, g_m):
    """Random tensor, affine state and upstream gradient whose slices all hold at least 4 elements.

    Two-element slices saturate and their tiny gradients defeat central
    differences; they are covered by the complex-step test in test_gradients.
    """
    spec = NormSpec(kind, g_c=g_c, g_m=g_m)
    while True:
        shape = (g_m * int(rng.integers(2, 5)), g_c * int(rng.integers(1, 4)), int(rng.integers(1, 5)))
        if min(s.slice_size for s in norms.slicings_for(spec, shape)) >= 4:
            break
    c = shape[1]
    state = NormState.create(c)
    state.gamma = rng.uniform(0.5, 2.0, c) * rng.choice([-1, 1], c)
    state.beta = rng.normal(size=c)
    return spec, state, rng.normal(0.5, 2.0, shape), rng.normal(size=shape)


def test_criterion_3_gradients():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = {}
    for kind, g_c, g_m in GRAD_KINDS:
        key = f"{kind}(g_c={g_c},g_m={g_m})"
        worst[key] = max(max(check_norm_against_fd(*random_norm_instance(rng, kind, g_c, g_m))) for _ in range(50))
    net_norms = [None, NormSpec("batch"), NormSpec("ghost", g_m=4), NormSpec("layer"),
                 NormSpec("group", g_c=4), NormSpec("instance"), NormSpec("seq", g_c=4, g_m=4)]
    net_errs = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for i in range(56):
            net = SimpleNet.build(norm=net_norms[i % len(net_norms)], seed=100 + i)
            for layer in net.layers:
                # keep pre-activations off the rectifier kink at exactly zero
                layer.state.gamma = rng.uniform(0.5, 1.5, layer.state.gamma.shape)
                layer.state.beta = rng.normal(scale=0.5, size=layer.state.beta.shape)
            x, y = rng.normal(size=(16, 784)), rng.integers(0, 10, 16)
            net_errs.append(net_gradient_error(net, x, y, rng, per_tensor=8))
    worst["SimpleNet total loss"] = max(net_errs)
    passed = all(v < 1e-6 for v in worst.values())
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    report(3, "gradient correctness (50 instances per norm, 56 SimpleNets)", passed, "max rel err " + detail, t0)


def test_criterion_4_accumulation_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    x, y = rng.normal(size=(64, 784)), rng.integers(0, 10, 64)
    diffs = {}
    for k in (2, 4, 8):
        bn = SimpleNet.build(norm=NormSpec("batch"), seed=k)
        ghost = bn.copy()
        for layer in ghost.layers:
            layer.norm = NormSpec("ghost", g_m=k)
        _, g_acc = compute_gradients(bn, x, y, acc_steps=k)
        _, g_ghost = compute_gradients(ghost, x, y)
        diffs[f"bn k={k}"] = max(float(np.max(np.abs(g_acc[n] - g_ghost[n]))) for n in g_acc)
        plain = SimpleNet.build(seed=k)
        _, g_acc = compute_gradients(plain, x, y, acc_steps=k)
        _, g_full = compute_gradients(plain, x, y)
        diffs[f"none k={k}"] = max(float(np.max(np.abs(g_acc[n] - g_full[n]))) for n in g_acc)
    passed = all(v < (1e-10 if k.startswith("bn") else 1e-12) for k, v in diffs.items())
    report(4, "accumulation equivalence", passed, ", ".join(f"{k} {v:.1e}" for k, v in diffs.items()), t0)


def test_criterion_5_sub_batch_forward():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    worst = 0.0
    for k in (2, 4, 8):
        for _ in range(20):
            x = rng.normal(size=(k * int(rng.integers(2, 9)), int(rng.integers(1, 9)), int(rng.integers(1, 9))))
            ghost = normalize("ghost", x, g_m=k)
            parts = np.concatenate([normalize("batch", p) for p in np.split(x, k)])
            worst = max(worst, float(np.max(np.abs(ghost - parts))))
    report(5, "ghost forward equals per-sub-batch batch norm", worst <= 1e-12,
           f"max |diff| {worst:.1e} over 60 tensors, k in 2,4,8", t0)


def test_criterion_6_saturation():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    eps = 1e-5
    worst, signs = 0.0, True
    for _ in range(200):
        pair = rng.normal(size=2) * 10 ** rng.uniform(-3, 3)
        x = np.array([[[pair[0]]], [[pair[1]]], [[pair[0] + 1]], [[pair[1] - 1]]])
        y = normalize("ghost", x, g_m=2)[:2].ravel()
        var = ((pair[0] - pair[1]) / 2) ** 2
        worst = max(worst, float(np.max(np.abs(np.abs(y) - np.sqrt(var / (var + eps))))))
        signs &= bool(np.sign(y[0]) == np.sign(pair[0] - pair[1]) == -np.sign(y[1]))
    const = np.full((4, 4, 3), 7.25)
    zero = all(
        not normalize(kind, const, **kw).any()
        for kind, kw in [("batch", {}), ("ghost", {"g_m": 2}), ("layer", {}), ("instance", {}),
                         ("group", {"g_c": 2}), ("seq", {"g_c": 2, "g_m": 2})]
    )
    passed = worst <= 1e-12 and signs and zero
    report(6, "degenerate saturation", passed,
           f"max ||y| - sqrt(var/(var+eps))| {worst:.1e}, opposite signs {signs}, constant -> 0 {zero}", t0)


@needs_mnist
def test_criterion_7_probe_non_interference():
    t0 = time.perf_counter()
    train, _, _ = data.load_mnist()
    cfg = TrainConfig(batch_size=512, epochs=1, seed=7)
    plain = SimpleNet.build(norm=NormSpec("batch"), seed=7)
    probed = plain.copy()
    fit(plain, train, cfg)
    records, _ = run_landscape_experiment(probed, train, cfg, probe_lrs=[0.1 * i for i in range(1, 9)])
    identical = all(np.array_equal(p, probed.parameters()[n]) for n, p in plain.parameters().items()) and all(
        np.array_equal(a.state.running_mean, b.state.running_mean)
        and np.array_equal(a.state.running_var, b.state.running_var)
        for a, b in zip(plain.layers, probed.layers)
    )
    eight = all(len(r.probe_losses) == 8 and r.min_loss <= r.max_loss for r in records)
    theta = np.array([1.0])
    losses = probed_losses(lambda p: 0.5 * p["t"][0] ** 2, {"t": theta}, {"t": theta}, [0.5, 1.0, 2.0])
    quad = float(np.max(np.abs(np.array(losses) - [0.125, 0.0, 0.5])))
    passed = identical and eight and len(records) == 50_000 // 512 and quad <= 1e-12
    report(7, "probe non-interference", passed,
           f"bit-identical params and EMA {identical}, {len(records)} records of 8 probes, quadratic err {quad:.1e}", t0)


@pytest.mark.slow
@needs_mnist
def test_criterion_8_mnist_convergence():
    t0 = time.perf_counter()
    train, val, test = data.load_mnist()
    final = {}
    for name, spec in [("batch", NormSpec("batch")), ("ghost2", NormSpec("ghost", g_m=2)),
                       ("ghost4", NormSpec("ghost", g_m=4)), ("ghost8", NormSpec("ghost", g_m=8))]:
        net = SimpleNet.build(norm=spec, seed=0)
        history = fit(net, train, TrainConfig(batch_size=512, epochs=10, seed=0), test=test)
        final[name] = history[-1]["test_accuracy"]
    bn = final["batch"]
    passed = bn >= 0.97 and all(abs(final[k] - bn) <= 0.005 for k in ("ghost2", "ghost4", "ghost8"))
    report(8, "MNIST 10 epochs, batch 512, lr 0.4", passed,
           ", ".join(f"{k} {v:.4f}" for k, v in final.items()), t0)


def test_criterion_9_tuning_complexity():
    t0 = time.perf_counter()
    full = data.synthetic_classification(1200, 16, 4, seed=9)
    train, val, _ = data.standardize(*data.split_dataset(full, 0.2, 0.0, seed=9))
    counter = {"n": 0}

    def run_trial(g_c, g_m, repeat):
        counter["n"] += 1
        net = SimpleNet.build(in_dim=16, widths=(32, 16), n_classes=4,
                              norm=NormSpec("seq", g_c=g_c, g_m=g_m), seed=repeat)
        fit(net, train, TrainConfig(batch_size=64, epochs=1, seed=repeat, schedule=Constant(0.1)))
        return evaluate(net, val)

    gm, gc, repeats = [2, 4, 8, 16], [1, 2, 4, 8, 16], 2
    _, grid_sel, grid_trials = tune("grid", gm, gc, run_trial, repeats)
    grid_calls, counter["n"] = counter["n"], 0
    _, seq_sel, seq_trials = tune("sequential", gm, gc, run_trial, repeats)
    fixture = [TuneResult(i, "g_m", 1, m, [a, a]) for i, (m, a) in enumerate(zip(gm, [0.80, 0.81, 0.81, 0.78]))]
    chosen = select_largest_gm(fixture, 0.001).g_m
    passed = (grid_trials == grid_calls == 20 * repeats and seq_trials == counter["n"] == 9 * repeats
              and chosen == 8 and grid_sel is not None and seq_sel is not None)
    report(9, "tuning driver complexity", passed,
           f"grid {grid_trials} trials, sequential {seq_trials} trials (repeats {repeats}), fixture selects g_m={chosen}", t0)


def test_criterion_10_excluded_targets():
    t0 = time.perf_counter()
    # large-scale image benchmark accuracies are out of scope; criteria 1-9 stand in for them
    no_loader = not any("cifar" in name.lower() for name in dir(data))
    report(10, "excluded large-scale targets", no_loader,
           "not reproducible at desk scale; no benchmark accuracy is asserted, invariant suites 1-9 substitute", t0)
