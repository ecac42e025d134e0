"""Batch, Layer, Instance, Group, Ghost and Sequential normalization.

Every technique is the same kernel applied to a different partition of the
``(M, C, F)`` input into slices:

    =========  ==========================  ====================
    kind       slices                      slice extent
    =========  ==========================  ====================
    batch      C                           (M, F)
    ghost      C * g_m                     (M / g_m, F)
    layer      M                           (C, F)
    group      M * g_c                     (C / g_c, F)
    instance   M * C                       (F,)
    seq        group slicing, then ghost slicing of the result
    =========  ==========================  ====================

Each slice is standardized with its own biased mean and variance,
``x_hat = (x - mean) / sqrt(var + eps)``, and a per-channel affine
``y = x_hat * gamma[c] + beta[c]`` follows.  Batch-dependent kinds (batch,
ghost, seq) keep per-channel running statistics for inference.

A slicing is expressed as a 5-d view ``(g_m, M/g_m, g_c, C/g_c, F)`` of the
input plus the view axes to reduce over, so every kernel call is a single
vectorized reduction and the reshape never copies.
"""

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, SlicingError, UninitializedStatsError, UnsupportedKindError
from .tensor import as_tensor3, batch_group_size, channel_group_size


class NormKind(str, enum.Enum):
    BATCH = "batch"
    LAYER = "layer"
    INSTANCE = "instance"
    GROUP = "group"
    GHOST = "ghost"
    SEQ = "seq"


BATCH_DEPENDENT = frozenset({NormKind.BATCH, NormKind.GHOST, NormKind.SEQ})


@dataclass(frozen=True)
class NormSpec:
    kind: NormKind
    g_c: int = 1
    g_m: int = 1
    eps: float = 1e-5
    momentum: float = 0.1
    affine: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", NormKind(self.kind))
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.g_c < 1 or self.g_m < 1:
            raise ValueError(f"group counts must be >= 1, got g_c={self.g_c}, g_m={self.g_m}")
        if not 0 < self.momentum <= 1:
            raise ValueError(f"momentum must lie in (0, 1], got {self.momentum}")


@dataclass
class NormState:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray = None
    running_var: np.ndarray = None
    training: bool = True

    @classmethod
    def create(cls, channels):
        return cls(gamma=np.ones(channels), beta=np.zeros(channels))

    @property
    def channels(self):
        return self.gamma.shape[0]

    def copy(self):
        def dup(a):
            return None if a is None else a.copy()

        return NormState(
            self.gamma.copy(), self.beta.copy(), dup(self.running_mean), dup(self.running_var), self.training
        )


@dataclass(frozen=True)
class Slicing:
    """A partition of an ``(M, C, F)`` tensor into independently normalized slices."""

    view_shape: tuple
    axes: tuple

    @property
    def n_slices(self):
        return int(np.prod([n for i, n in enumerate(self.view_shape) if i not in self.axes]))

    @property
    def slice_size(self):
        return int(np.prod([self.view_shape[i] for i in self.axes]))

    def labels(self, shape):
        """Slice id of every element of a tensor with ``shape``."""
        kept = [n if i not in self.axes else 1 for i, n in enumerate(self.view_shape)]
        ids = np.arange(int(np.prod(kept))).reshape(kept)
        return np.broadcast_to(ids, self.view_shape).reshape(shape)


def batch_slicing(shape, g_m=1):
    """C * g_m slices of extent (M / g_m, F): BatchNorm for ``g_m == 1``, GhostNorm otherwise."""
    m, c, f = shape
    return Slicing((g_m, batch_group_size(m, g_m), c, 1, f), (1, 3, 4))


def group_slicing(shape, g_c=1):
    """M * g_c slices of extent (C / g_c, F): LayerNorm, GroupNorm or InstanceNorm."""
    m, c, f = shape
    return Slicing((1, m, g_c, channel_group_size(c, g_c), f), (3, 4))


def slicings_for(spec, shape):
    """The ordered slicings a norm of ``spec`` applies to a tensor of ``shape``."""
    kind = spec.kind
    if kind is NormKind.BATCH:
        return (batch_slicing(shape),)
    if kind is NormKind.GHOST:
        return (batch_slicing(shape, spec.g_m),)
    if kind is NormKind.LAYER:
        return (group_slicing(shape),)
    if kind is NormKind.GROUP:
        return (group_slicing(shape, spec.g_c),)
    if kind is NormKind.INSTANCE:
        return (group_slicing(shape, shape[1]),)
    return (group_slicing(shape, spec.g_c), batch_slicing(shape, spec.g_m))


@dataclass
class SliceCache:
    slicing: Slicing
    mean: np.ndarray
    var: np.ndarray
    inv_std: np.ndarray
    xhat: np.ndarray
    # statistics were fixed constants (running-statistics inference), not functions of the input
    frozen: bool = False


@dataclass
class NormCache:
    kind: NormKind
    shape: tuple
    stages: tuple = field(default_factory=tuple)

    @property
    def xhat(self):
        return self.stages[-1].xhat


def _check_slicing(x, slicing):
    view, axes = slicing.view_shape, slicing.axes
    if int(np.prod(view)) != x.size:
        raise SlicingError(f"slicing view {view} does not cover a tensor of shape {x.shape}")
    if not axes or len(set(axes)) != len(axes) or any(not 0 <= a < len(view) for a in axes):
        raise SlicingError(f"invalid reduction axes {axes} for view {view}")
    if slicing.slice_size == 0:
        raise SlicingError("slicing contains empty slices")


def normalize_slices(x, slicing, eps=1e-5):
    """Standardize every slice of ``x`` independently.  Returns ``(x_hat, cache)``."""
    x = as_tensor3(x)
    _check_slicing(x, slicing)
    v = x.reshape(slicing.view_shape)
    mean = v.mean(axis=slicing.axes, keepdims=True)
    var = np.mean((v - mean) ** 2, axis=slicing.axes, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = ((v - mean) * inv_std).reshape(x.shape)
    return xhat, SliceCache(slicing, mean, var, inv_std, xhat)


def _normalize_running(x, state, eps):
    if state.running_mean is None:
        raise UninitializedStatsError("running statistics are unset; run a training-mode forward first")
    slicing = batch_slicing(x.shape)
    view = slicing.view_shape
    mean = state.running_mean.reshape(1, 1, -1, 1, 1)
    var = state.running_var.reshape(1, 1, -1, 1, 1)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = ((x.reshape(view) - mean) * inv_std).reshape(x.shape)
    return xhat, SliceCache(slicing, mean, var, inv_std, xhat, frozen=True)


def slice_backward(cache, dxhat):
    """Gradient through one standardization stage given the gradient w.r.t. its output."""
    view, axes = cache.slicing.view_shape, cache.slicing.axes
    g = dxhat.reshape(view)
    if cache.frozen:
        return (g * cache.inv_std).reshape(dxhat.shape)
    xh = cache.xhat.reshape(view)
    dx = cache.inv_std * (g - g.mean(axis=axes, keepdims=True) - xh * (g * xh).mean(axis=axes, keepdims=True))
    return dx.reshape(dxhat.shape)


def _affine(spec, state, xhat):
    if not spec.affine:
        return xhat.copy()
    return xhat * state.gamma[None, :, None] + state.beta[None, :, None]


def _check_state(state, x):
    if state.channels != x.shape[1]:
        raise ContractError(f"state holds {state.channels} channels, input has {x.shape[1]}")


def forward(spec, state, x, update_stats=True):
    """Normalize ``x`` according to ``spec``.  Returns ``(y, cache)``.

    In training mode, batch-dependent kinds fold this batch's statistics into
    the running averages unless ``update_stats`` is false.  In inference mode
    they standardize each channel with the running statistics instead.
    """
    x = as_tensor3(x)
    _check_state(state, x)
    if spec.kind is NormKind.SEQ:
        return seq_forward(spec, state, x, update_stats)
    if spec.kind is NormKind.INSTANCE and x.shape[2] == 1:
        warnings.warn("InstanceNorm with F=1 normalizes singleton slices to zero", RuntimeWarning, stacklevel=2)

    if spec.kind in BATCH_DEPENDENT and not state.training:
        xhat, stage = _normalize_running(x, state, spec.eps)
    else:
        (slicing,) = slicings_for(spec, x.shape)
        xhat, stage = normalize_slices(x, slicing, spec.eps)
    cache = NormCache(spec.kind, x.shape, (stage,))
    if spec.kind in BATCH_DEPENDENT and state.training and update_stats:
        update_running_stats(spec, state, cache)
    return _affine(spec, state, xhat), cache


def seq_forward(spec, state, x, update_stats=True):
    """GroupNorm slicing, then GhostNorm slicing of the result, then one affine."""
    if spec.kind is not NormKind.SEQ:
        raise UnsupportedKindError(f"seq_forward needs a seq spec, got {spec.kind.value}")
    x = as_tensor3(x)
    _check_state(state, x)
    h, first = normalize_slices(x, group_slicing(x.shape, spec.g_c), spec.eps)
    if state.training:
        xhat, second = normalize_slices(h, batch_slicing(x.shape, spec.g_m), spec.eps)
    else:
        xhat, second = _normalize_running(h, state, spec.eps)
    cache = NormCache(spec.kind, x.shape, (first, second))
    if state.training and update_stats:
        update_running_stats(spec, state, cache)
    return _affine(spec, state, xhat), cache


def backward(spec, state, cache, dy):
    """Gradients ``(dx, dgamma, dbeta)`` for the forward call that produced ``cache``."""
    dy = np.asarray(dy, dtype=np.float64)
    if cache.kind is not spec.kind:
        raise ContractError(f"cache from a {cache.kind.value} forward passed to {spec.kind.value} backward")
    if dy.shape != tuple(cache.shape):
        raise ContractError(f"upstream gradient shape {dy.shape} != forward output shape {cache.shape}")
    xhat = cache.xhat
    if spec.affine:
        dgamma = (dy * xhat).sum(axis=(0, 2))
        dbeta = dy.sum(axis=(0, 2))
        g = dy * state.gamma[None, :, None]
    else:
        dgamma = np.zeros(cache.shape[1])
        dbeta = np.zeros(cache.shape[1])
        g = dy
    for stage in reversed(cache.stages):
        g = slice_backward(stage, g)
    return g, dgamma, dbeta


def update_running_stats(spec, state, cache):
    """Fold a training batch's statistics into the per-channel running averages.

    The batch statistic of channel c is the simple average of the mean (and
    biased variance) of every ghost batch covering c; all ghost batches have
    the same size.  The first update replaces the unset running values.
    """
    if spec.kind not in BATCH_DEPENDENT:
        raise UnsupportedKindError(f"{spec.kind.value} norm keeps no running statistics")
    stage = cache.stages[-1]
    if stage.frozen:
        raise ContractError("running statistics can only be updated from a training-mode cache")
    batch_mean = stage.mean.mean(axis=0).ravel()
    batch_var = stage.var.mean(axis=0).ravel()
    if state.running_mean is None:
        state.running_mean = batch_mean.copy()
        state.running_var = batch_var.copy()
    else:
        k = spec.momentum
        state.running_mean = (1 - k) * state.running_mean + k * batch_mean
        state.running_var = (1 - k) * state.running_var + k * batch_var
    return state


def _order_signs(values, tol):
    d = values[:, None] - values[None, :]
    return np.where(np.abs(d) <= tol, 0, np.sign(d))


def _scope_values(x, y, scope):
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ContractError("rank comparison needs tensors of the same shape")
    idx = np.arange(x.size) if scope is None else np.asarray(scope, dtype=np.intp).ravel()
    return idx, x[idx], y[idx]


def rank_order_preserved(x, y, scope=None, tol=1e-12):
    """True iff ``y`` orders the elements of ``scope`` exactly as ``x`` does, ties included.

    ``scope`` is a sequence of flat element indices; ``None`` means all elements.
    Differences within ``tol`` count as ties.
    """
    _, xs, ys = _scope_values(x, y, scope)
    return bool(np.array_equal(_order_signs(xs, tol), _order_signs(ys, tol)))


def rank_flips(x, y, scope=None, tol=1e-12):
    """Flat index pairs ``(i, j)``, ``i < j``, whose relative order differs between x and y."""
    idx, xs, ys = _scope_values(x, y, scope)
    bad = np.argwhere(np.triu(_order_signs(xs, tol) != _order_signs(ys, tol), k=1))
    return [(int(idx[i]), int(idx[j])) for i, j in bad]


def channel_scope(shape, c):
    """Flat indices of the (M, F) plane of channel ``c``."""
    m, channels, f = shape
    return np.arange(m * channels * f).reshape(shape)[:, c, :].ravel()
