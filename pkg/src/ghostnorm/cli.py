"""Command-line front end: ``ghostnorm {train,landscape,tune,verify}``.

Exit status is 0 on success, 1 on a runtime or verification failure and 2
for an invalid configuration.
"""

import argparse
import csv
import dataclasses
import os
import sys

from . import data, verify
from .config import arm_norm, load_config, norm_infeasibility
from .errors import ConfigError
from .landscape import run_landscape_experiment
from .model import SimpleNet, save_snapshot
from .norms import NormSpec
from .schedules import OneCycleTriangular
from .training import evaluate, fit
from .tuning import tune


def fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def load_datasets(cfg):
    """(train, val, test, n_classes) for the configured dataset."""
    if cfg.dataset_kind == "mnist":
        spec = cfg.dataset["mnist"]
        paths = {k: spec[k] for k in data.MNIST_FILES if k in spec}
        train, val, test = data.load_mnist(spec.get("dir"), spec.get("val_size", 10_000), paths)
        return train, val, test, 10
    spec = cfg.dataset["synthetic"]
    seed = spec.get("seed", 0)
    full = data.synthetic_classification(spec["n"], spec["d"], spec["k"], seed, spec.get("separation", 4.0))
    parts = data.split_dataset(full, spec.get("val_fraction", 0.1), spec.get("test_fraction", 0.1), seed)
    train, val, test = data.standardize(*parts)
    return train, val, test, spec["k"]


def build_net(cfg, norm, in_dim, n_classes, seed=None):
    seed = cfg.train.seed if seed is None else seed
    return SimpleNet.build(in_dim, cfg.widths, n_classes, norm, seed)


def cmd_train(cfg, out_dir):
    train, val, test, k = load_datasets(cfg)
    net = build_net(cfg, cfg.norm, train.images.shape[1], k)
    history = fit(net, train, cfg.train, val=val, test=test)
    os.makedirs(out_dir, exist_ok=True)
    header = ["epoch", "lr", "train_loss", "val_accuracy", "test_accuracy"]
    write_csv(os.path.join(out_dir, "metrics.csv"), header, [[r[h] for h in header] for r in history])
    save_snapshot(net, os.path.join(out_dir, "model.npz"))
    last = history[-1]
    print(f"trained {last['epoch']} epochs: val {last['val_accuracy']:.4f}, test {last['test_accuracy']:.4f}")
    return out_dir


def _probe_schedules(cfg):
    ranges = cfg.landscape.get("probe_ranges")
    if not ranges:
        return None
    sched = cfg.train.schedule
    tail = {}
    if isinstance(sched, OneCycleTriangular):
        tail = {"final_lr": sched.final_lr, "final_fraction": sched.final_fraction}
    return [OneCycleTriangular(lo, hi, cfg.train.epochs, **tail) for lo, hi in ranges]


def plot_envelope(records, path, title):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    steps = [r.step for r in records]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(steps, [r.min_loss for r in records], label="min loss")
    ax.plot(steps, [r.max_loss for r in records], label="max loss")
    ax.set_xlabel("optimizer step")
    ax.set_ylabel("loss")
    ax.set_title(title)
    ax.legend()
    fig.savefig(path, format="svg")
    plt.close(fig)


def cmd_landscape(cfg, out_dir, svg=False):
    if not cfg.landscape or not (cfg.landscape.get("probe_lrs") or cfg.landscape.get("probe_ranges")):
        raise ConfigError("probe_lrs or probe_ranges is required for the landscape command", "landscape")
    train, _, _, k = load_datasets(cfg)
    arms = cfg.landscape.get("arms") or ["none" if cfg.norm is None else cfg.norm.kind.value]
    os.makedirs(out_dir, exist_ok=True)
    outputs = {}
    for arm in arms:
        net = build_net(cfg, arm_norm(cfg, arm), train.images.shape[1], k)
        records, _ = run_landscape_experiment(
            net, train, cfg.train, cfg.landscape.get("probe_lrs"), _probe_schedules(cfg)
        )
        path = os.path.join(out_dir, f"landscape_{arm}.csv")
        rows = [[r.step, r.epoch, r.train_loss, r.min_loss, r.max_loss] for r in records]
        write_csv(path, ["step", "epoch", "train_loss", "min_loss", "max_loss"], rows)
        if svg:
            plot_envelope(records, os.path.join(out_dir, f"landscape_{arm}.svg"), f"loss envelope ({arm})")
        outputs[arm] = path
        print(f"{arm}: {len(records)} steps -> {path}")
    return outputs


def _seq_spec(cfg, g_c, g_m):
    base = cfg.norm
    eps = base.eps if base is not None else 1e-5
    momentum = base.momentum if base is not None else 0.1
    return NormSpec("seq", g_c=g_c, g_m=g_m, eps=eps, momentum=momentum)


def cmd_tune(cfg, out_dir, strategy="sequential", gm=None, gc=None, repeats=None):
    opts = cfg.tune
    strategy = strategy or opts.get("strategy", "sequential")
    gm = gm or opts.get("gm", [2, 4, 8, 16])
    gc = gc or opts.get("gc", [1, 2, 4, 8, 16])
    repeats = repeats or opts.get("repeats", 2)
    train, val, _, k = load_datasets(cfg)
    in_dim = train.images.shape[1]

    def feasible(g_c, g_m):
        problem = norm_infeasibility(_seq_spec(cfg, g_c, g_m), cfg.widths, cfg.train.batch_size, cfg.train.acc_steps)
        return problem[1] if problem else None

    def run_trial(g_c, g_m, repeat):
        seed = cfg.train.seed + repeat
        net = build_net(cfg, _seq_spec(cfg, g_c, g_m), in_dim, k, seed)
        fit(net, train, dataclasses.replace(cfg.train, seed=seed))
        return evaluate(net, val)

    results, selected, trials = tune(
        strategy, gm, gc, run_trial, repeats, opts.get("delta", 0.001), feasible, opts.get("workers", 1)
    )
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"tune_{strategy}.csv")
    header = ["trial", "phase", "g_c", "g_m", "mean_val_accuracy", "val_accuracy_variance", "feasible", "selected", "note"]
    rows = [[r.trial, r.phase, r.g_c, r.g_m, r.mean, r.variance, r.feasible, r.selected, r.note] for r in results]
    write_csv(path, header, rows)
    if selected is None:
        print(f"{strategy}: no feasible configuration among {trials} trials")
    else:
        print(f"{strategy}: {trials} trials, selected g_c={selected.g_c}, g_m={selected.g_m} "
              f"(val {selected.mean:.4f}) -> {path}")
    return results, selected, trials


def cmd_verify(eps=1e-5):
    checks = verify.run_checks(eps=eps)
    for check in checks:
        print(check.line())
    failed = [c.name for c in checks if not c.passed]
    if failed:
        print("FAILED: " + "; ".join(failed))
        return 1
    print(f"all {len(checks)} checks passed")
    return 0


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}") from None


def build_parser():
    parser = argparse.ArgumentParser(prog="ghostnorm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON experiment configuration")
    common.add_argument("--out-dir", help="output directory (overrides output_dir)")
    common.add_argument("--seed", type=int, help="run seed (overrides train.seed)")

    sub.add_parser("train", parents=[common], help="train SimpleNet and write per-epoch metrics")
    land = sub.add_parser("landscape", parents=[common], help="train while probing the loss envelope")
    land.add_argument("--svg", action="store_true", help="also plot each envelope as SVG")
    tn = sub.add_parser("tune", parents=[common], help="grid or sequential (g_c, g_m) tuning")
    tn.add_argument("--strategy", choices=["grid", "sequential"])
    tn.add_argument("--gm", type=_int_list, help="comma-separated g_m candidates")
    tn.add_argument("--gc", type=_int_list, help="comma-separated g_c candidates")
    tn.add_argument("--repeats", type=int)
    sub.add_parser("verify", help="recompute the worked normalization examples")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        return cmd_verify()
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.train = dataclasses.replace(cfg.train, seed=args.seed)
        if args.command == "tune" and args.repeats is not None and args.repeats < 1:
            raise ConfigError("must be >= 1", "--repeats")
        out_dir = args.out_dir or cfg.output_dir
        if args.command == "train":
            cmd_train(cfg, out_dir)
        elif args.command == "landscape":
            cmd_landscape(cfg, out_dir, args.svg)
        else:
            cmd_tune(cfg, out_dir, args.strategy, args.gm, args.gc, args.repeats)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def run():
    sys.exit(main())
