"""Self-checks reproducing the eight-value BatchNorm/GhostNorm example."""

from dataclasses import dataclass

import numpy as np

from . import norms
from .norms import NormSpec, NormState
from .tensor import from_values

EXAMPLE = (35, 39, 30, 4, 38, 26, 27, 19)
# published outputs, rounded to one or two decimals
BATCH_PUBLISHED = (0.7, 1.1, 0.3, -2.2, 1.0, -0.1, -0.02, -0.8)
GHOST_PUBLISHED = (0.6, 0.9, 0.2, -1.7, 1.5, -0.2, -0.07, -1.2)
PUBLISHED_TOL = 0.05


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def _norm(kind, x, eps, g_m=1):
    y, _ = norms.forward(NormSpec(kind, g_m=g_m, eps=eps), NormState.create(x.shape[1]), x)
    return y


def _matches(name, got, published):
    err = float(np.max(np.abs(got.ravel() - np.asarray(published))))
    shown = ", ".join(f"{v:.3f}" for v in got.ravel())
    return Check(name, err <= PUBLISHED_TOL, f"({shown}); max deviation {err:.3f} (limit {PUBLISHED_TOL})")


def run_checks(eps=1e-5, seed=0):
    x = from_values((8, 1, 1), EXAMPLE)
    bn = _norm("batch", x, eps)
    gn = _norm("ghost", x, eps, g_m=2)
    checks = [
        _matches("batchnorm worked example", bn, BATCH_PUBLISHED),
        _matches("ghostnorm (g_m=2) worked example", gn, GHOST_PUBLISHED),
    ]

    preserved = norms.rank_order_preserved(x, bn)
    checks.append(Check("batchnorm preserves rank order", preserved, f"order isomorphism holds: {preserved}"))
    flips = norms.rank_flips(x, gn)
    witness = flips[0] if flips else None
    checks.append(
        Check(
            "ghostnorm rank flip witness",
            witness == (1, 4),
            f"first flipped pair {witness}; x: {EXAMPLE[1]} > {EXAMPLE[4]}, "
            f"y: {gn.ravel()[1]:.3f} < {gn.ravel()[4]:.3f}" if witness == (1, 4) else f"flips {flips}",
        )
    )

    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in (2, 4, 8):
        t = rng.normal(size=(32, 3, 5)) * 3 + 1
        ghost = _norm("ghost", t, eps, g_m=k)
        parts = np.concatenate([_norm("batch", p, eps) for p in np.split(t, k)])
        worst = max(worst, float(np.max(np.abs(ghost - parts))))
    checks.append(Check("ghostnorm equals per-sub-batch batchnorm", worst <= 1e-12, f"max |diff| {worst:.2e} over k=2,4,8"))

    pairs = rng.normal(size=(16, 1, 1)) * 5
    y = _norm("ghost", pairs, eps, g_m=8).ravel()
    var = ((pairs[0::2] - pairs[1::2]).ravel() / 2) ** 2
    expected = np.sqrt(var / (var + eps))
    mag_err = float(np.max(np.abs(np.abs(y).reshape(-1, 2) - expected[:, None])))
    signs_ok = bool(np.all(np.sign(y[0::2]) == -np.sign(y[1::2])) and np.allclose(y[0::2], -y[1::2], atol=1e-12))
    checks.append(
        Check(
            "two-sample groups saturate to +-1",
            mag_err <= 1e-12 and signs_ok,
            f"|y| equals sqrt(var/(var+eps)) to {mag_err:.1e}, opposite signs: {signs_ok}",
        )
    )
    const = _norm("batch", np.full((4, 2, 3), 7.5), eps)
    checks.append(Check("constant slices normalize to zero", bool(np.all(const == 0)), f"max |y| {np.abs(const).max()}"))
    return checks
