"""Experiment configuration: a JSON document validated against ``config.schema.json``.

Unknown keys are rejected.  All divisibility constraints between batch size,
accumulation steps, group counts and layer widths are checked here, before
any data is loaded.
"""

import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema

from .errors import ConfigError
from .norms import BATCH_DEPENDENT, NormKind, NormSpec
from .schedules import Constant, CosineWithWarmup, OneCycleTriangular
from .training import TrainConfig

# smallest samples-per-group used in experiments; 1 is undefined and 2 saturates to +-1
MIN_GROUP_SIZE = 4


def schema():
    return json.loads(resources.files("ghostnorm").joinpath("config.schema.json").read_text())


@dataclass
class ExperimentConfig:
    dataset: dict
    widths: tuple = (512, 300)
    norm: NormSpec = None
    train: TrainConfig = field(default_factory=TrainConfig)
    landscape: dict = None
    tune: dict = field(default_factory=dict)
    output_dir: str = "runs"

    @property
    def dataset_kind(self):
        (kind,) = self.dataset
        return kind


def _schema_error(err):
    path = ".".join(str(p) for p in err.absolute_path) or "<root>"
    return ConfigError(err.message, path)


def norm_infeasibility(spec, widths, batch_size, acc_steps=1):
    """Why ``spec`` cannot run with these sizes, as ``(field, reason)``, or None."""
    if spec is None:
        return None
    sub = batch_size // acc_steps
    if spec.kind in BATCH_DEPENDENT:
        g_m = spec.g_m if spec.kind is not NormKind.BATCH else 1
        if sub % g_m:
            return "norm.g_m", f"g_m={g_m} does not divide the per-pass batch of {sub}"
        if sub // g_m < MIN_GROUP_SIZE:
            return "norm.g_m", f"g_m={g_m} leaves {sub // g_m} samples per group (minimum {MIN_GROUP_SIZE})"
    if spec.kind in (NormKind.GROUP, NormKind.SEQ):
        for w in widths:
            if w % spec.g_c:
                return "norm.g_c", f"g_c={spec.g_c} does not divide layer width {w}"
    return None


def _schedule(raw, epochs):
    kind = raw.get("kind", "constant")
    try:
        if kind == "constant":
            return Constant(raw.get("lr", 0.4))
        if kind == "one_cycle":
            return OneCycleTriangular(
                raw["lo"], raw["hi"], epochs, raw.get("final_lr", 1e-4), raw.get("final_fraction", 0.1)
            )
        return CosineWithWarmup(
            raw["base_lr"], epochs, raw.get("warmup_epochs", 5), raw.get("warmup_multiplier", 4.0)
        )
    except KeyError as exc:
        raise ConfigError(f"'{exc.args[0]}' is required for a {kind} schedule", "train.schedule") from None
    except ValueError as exc:
        raise ConfigError(str(exc), "train.schedule") from None


def norm_from_dict(raw):
    kind = raw.get("kind", "batch")
    if kind == "none":
        return None
    return NormSpec(
        kind,
        g_c=raw.get("g_c", 1),
        g_m=raw.get("g_m", 1),
        eps=raw.get("eps", 1e-5),
        momentum=raw.get("momentum", 0.1),
        affine=raw.get("affine", True),
    )


def parse_config(raw):
    validator = jsonschema.Draft202012Validator(schema())
    err = jsonschema.exceptions.best_match(validator.iter_errors(raw))
    if err is not None:
        raise _schema_error(err)

    model = raw.get("model", {})
    widths = tuple(model.get("widths", (512, 300)))
    norm = norm_from_dict(raw.get("norm", {}))
    t = raw.get("train", {})
    epochs = t.get("epochs", 1)
    train = TrainConfig(
        batch_size=t.get("batch_size", 512),
        acc_steps=t.get("acc_steps", 1),
        epochs=epochs,
        seed=t.get("seed", 0),
        schedule=_schedule(t.get("schedule", {}), epochs),
        shuffle=t.get("shuffle", True),
    )
    cfg = ExperimentConfig(
        dataset=raw["dataset"],
        widths=widths,
        norm=norm,
        train=train,
        landscape=raw.get("landscape"),
        tune=raw.get("tune", {}),
        output_dir=raw.get("output_dir", "runs"),
    )
    validate(cfg)
    return cfg


def validate(cfg):
    problem = norm_infeasibility(cfg.norm, cfg.widths, cfg.train.batch_size, cfg.train.acc_steps)
    if problem:
        raise ConfigError(problem[1], problem[0])
    if cfg.landscape:
        for arm in cfg.landscape.get("arms", []):
            problem = norm_infeasibility(arm_norm(cfg, arm), cfg.widths, cfg.train.batch_size, cfg.train.acc_steps)
            if problem:
                raise ConfigError(f"arm {arm!r}: {problem[1]}", "landscape.arms")
        if "probe_lrs" in cfg.landscape and "probe_ranges" in cfg.landscape:
            raise ConfigError("give probe_lrs or probe_ranges, not both", "landscape")
        for lo, hi in cfg.landscape.get("probe_ranges", []):
            if not lo < hi:
                raise ConfigError(f"range ({lo}, {hi}) must have lo < hi", "landscape.probe_ranges")
    synth = cfg.dataset.get("synthetic")
    if synth and synth.get("val_fraction", 0.1) + synth.get("test_fraction", 0.1) >= 1:
        raise ConfigError("val_fraction + test_fraction must stay below 1", "dataset.synthetic")


def arm_norm(cfg, arm):
    """Norm for a landscape arm, reusing the configured group counts and eps."""
    if arm == "none":
        return None
    base = cfg.norm
    if base is not None and base.kind.value == arm:
        return base
    kind = NormKind(arm)
    g_c = base.g_c if base is not None and kind in (NormKind.GROUP, NormKind.SEQ) else 1
    g_m = base.g_m if base is not None and kind in (NormKind.GHOST, NormKind.SEQ) else 1
    eps = base.eps if base is not None else 1e-5
    momentum = base.momentum if base is not None else 0.1
    return NormSpec(kind, g_c=g_c, g_m=g_m, eps=eps, momentum=momentum)


def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", str(path)) from None
    return parse_config(raw)
