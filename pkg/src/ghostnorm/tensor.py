"""Dense (M, C, F) activation tensors and the few shape operations the norms need.

Activations are plain float64 ``numpy.ndarray`` objects of shape ``(M, C, F)``:
M samples, C channels, F spatial positions, row-major so that the flat index
of ``(m, c, f)`` is ``m*C*F + c*F + f``.  Grouping is always contiguous along
the grouped axis.
"""

import numpy as np

from .errors import DegenerateGroupError, DomainError, GroupingError, ShapeError


def from_values(shape, values):
    """Build a float64 ``(M, C, F)`` tensor from a flat row-major sequence."""
    shape = tuple(int(s) for s in shape)
    if len(shape) != 3 or any(s < 1 for s in shape):
        raise ShapeError(f"expected a positive (M, C, F) shape, got {shape}")
    data = np.array(values, dtype=np.float64).ravel()
    expected = shape[0] * shape[1] * shape[2]
    if data.size != expected:
        raise ShapeError(f"{data.size} values cannot fill shape {shape} ({expected} needed)")
    return data.reshape(shape)


def as_tensor3(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"expected an (M, C, F) tensor, got ndim={x.ndim}")
    return x


def batch_group_size(m, g_m):
    """Samples per ghost batch when M samples are split into ``g_m`` groups.

    A single group (``g_m == 1``) is always valid; otherwise every group must
    hold at least two samples.
    """
    if g_m < 1 or m % g_m:
        raise GroupingError(f"g_m={g_m} does not divide the batch size M={m}")
    size = m // g_m
    if g_m > 1 and size < 2:
        raise DegenerateGroupError(
            f"g_m={g_m} leaves {size} sample per group; normalizing one sample is undefined"
        )
    return size


def channel_group_size(c, g_c):
    if g_c < 1 or c % g_c:
        raise GroupingError(f"g_c={g_c} does not divide the channel count C={c}")
    return c // g_c


def regroup_batch(x, g_m):
    """View ``x`` as ``(g_m, M/g_m, C, F)``; group i holds samples ``[i*M/g_m, (i+1)*M/g_m)``."""
    x = as_tensor3(x)
    m, c, f = x.shape
    return x.reshape(g_m, batch_group_size(m, g_m), c, f)


def regroup_channels(x, g_c):
    """View ``x`` as ``(M, g_c, C/g_c, F)``; group j holds channels ``[j*C/g_c, (j+1)*C/g_c)``."""
    x = as_tensor3(x)
    m, c, f = x.shape
    return x.reshape(m, g_c, channel_group_size(c, g_c), f)


def flatten_batch(groups):
    """Inverse of :func:`regroup_batch`."""
    g, size, c, f = groups.shape
    return groups.reshape(g * size, c, f)


def flatten_channels(groups):
    """Inverse of :func:`regroup_channels`."""
    m, g, size, f = groups.shape
    return groups.reshape(m, g * size, f)


def slice_stats(values):
    """Mean and biased (divisor n) variance of a flat slice."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise DomainError("cannot compute statistics of an empty slice")
    mean = values.mean()
    var = np.mean((values - mean) ** 2)
    return float(mean), float(var)


def matmul(x, w):
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if x.ndim != 2 or w.ndim != 2:
        raise ShapeError("matmul expects two matrices")
    if x.shape[1] != w.shape[0]:
        raise ShapeError(f"cannot multiply {x.shape} by {w.shape}")
    return x @ w
