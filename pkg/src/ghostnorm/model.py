"""Fully-connected SimpleNet with hand-derived gradients.

Each hidden layer computes ``a = relu(norm(h @ W) * gamma + beta)``; the
product ``h @ W`` is treated as an ``(M, C, 1)`` tensor by the norm.  Without
a norm the layer is ``relu(h @ W + beta)``, so ``beta`` doubles as the bias.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import norms
from .errors import ContractError, DataError
from .norms import NormSpec, NormState
from .tensor import matmul


@dataclass
class HiddenLayer:
    weight: np.ndarray
    norm: NormSpec
    state: NormState

    def copy(self):
        return HiddenLayer(self.weight.copy(), self.norm, self.state.copy())


class SimpleNet:
    def __init__(self, layers, head_weight, head_bias):
        self.layers = list(layers)
        self.head_weight = head_weight
        self.head_bias = head_bias

    @classmethod
    def build(cls, in_dim=784, widths=(512, 300), n_classes=10, norm=None, seed=0):
        """Randomly initialized net; ``norm`` is a NormSpec (or None) shared by all hidden layers.

        Weights are drawn uniformly in ``+-sqrt(6 / fan_in)`` from ``seed``.
        """
        rng = np.random.default_rng(seed)
        dims = [in_dim, *widths]
        layers = []
        for fan_in, width in zip(dims[:-1], dims[1:]):
            w = rng.uniform(-1, 1, size=(fan_in, width)) * np.sqrt(6.0 / fan_in)
            layers.append(HiddenLayer(w, norm, NormState.create(width)))
        head = rng.uniform(-1, 1, size=(dims[-1], n_classes)) * np.sqrt(1.0 / dims[-1])
        return cls(layers, head, np.zeros(n_classes))

    @property
    def in_dim(self):
        return self.layers[0].weight.shape[0] if self.layers else self.head_weight.shape[0]

    @property
    def widths(self):
        return tuple(layer.weight.shape[1] for layer in self.layers)

    def parameters(self):
        """Trainable arrays by name, in a fixed order.  The arrays are live references."""
        params = {}
        for i, layer in enumerate(self.layers):
            params[f"layers.{i}.weight"] = layer.weight
            if layer.norm is None or layer.norm.affine:
                if layer.norm is not None:
                    params[f"layers.{i}.gamma"] = layer.state.gamma
                params[f"layers.{i}.beta"] = layer.state.beta
        params["head.weight"] = self.head_weight
        params["head.bias"] = self.head_bias
        return params

    def set_parameter(self, name, value):
        value = np.asarray(value, dtype=np.float64)
        if name == "head.weight":
            self.head_weight = value
        elif name == "head.bias":
            self.head_bias = value
        else:
            _, i, attr = name.split(".")
            layer = self.layers[int(i)]
            if attr == "weight":
                layer.weight = value
            else:
                setattr(layer.state, attr, value)

    def copy(self):
        return SimpleNet([layer.copy() for layer in self.layers], self.head_weight.copy(), self.head_bias.copy())

    def with_parameters(self, params):
        """A new net holding ``params`` in place of this net's trainable arrays."""
        net = self.copy()
        for name, value in params.items():
            net.set_parameter(name, value)
        return net

    def train(self):
        for layer in self.layers:
            layer.state.training = True
        return self

    def eval(self):
        for layer in self.layers:
            layer.state.training = False
        return self


def net_forward(net, x, update_stats=True):
    """Logits for a batch ``x`` of shape (M, in_dim), plus the caches for :func:`net_backward`."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.in_dim:
        raise ContractError(f"expected a batch with {net.in_dim} columns, got shape {x.shape}")
    h = x
    caches = []
    for layer in net.layers:
        z = matmul(h, layer.weight)
        if layer.norm is None:
            pre, norm_cache = z + layer.state.beta, None
        else:
            y, norm_cache = norms.forward(layer.norm, layer.state, z[:, :, None], update_stats)
            pre = y[:, :, 0]
        caches.append((h, norm_cache, pre > 0))
        h = np.maximum(pre, 0.0)
    logits = matmul(h, net.head_weight) + net.head_bias
    caches.append(h)
    return logits, caches


def net_backward(net, caches, dlogits):
    """Parameter gradients keyed like :meth:`SimpleNet.parameters`."""
    h = caches[-1]
    grads = {"head.weight": h.T @ dlogits, "head.bias": dlogits.sum(axis=0)}
    g = dlogits @ net.head_weight.T
    for i in reversed(range(len(net.layers))):
        layer = net.layers[i]
        h_in, norm_cache, active = caches[i]
        g = g * active
        if layer.norm is None:
            grads[f"layers.{i}.beta"] = g.sum(axis=0)
            dz = g
        else:
            dz, dgamma, dbeta = norms.backward(layer.norm, layer.state, norm_cache, g[:, :, None])
            dz = dz[:, :, 0]
            if layer.norm.affine:
                grads[f"layers.{i}.gamma"] = dgamma
                grads[f"layers.{i}.beta"] = dbeta
        grads[f"layers.{i}.weight"] = h_in.T @ dz
        if i:
            g = dz @ layer.weight.T
    return {name: grads[name] for name in net.parameters()}


def softmax_cross_entropy(logits, labels):
    """Mean negative log-likelihood over the batch and its gradient w.r.t. ``logits``."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    n, k = logits.shape
    if labels.shape != (n,) or not np.issubdtype(labels.dtype, np.integer):
        raise DataError("labels must be one integer per row of logits")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= k:
        raise DataError(f"labels must lie in [0, {k})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_z
    rows = np.arange(n)
    loss = -log_p[rows, labels].mean()
    dlogits = np.exp(log_p)
    dlogits[rows, labels] -= 1.0
    return float(loss), dlogits / n


def loss_and_grads(net, x, y, update_stats=True):
    logits, caches = net_forward(net, x, update_stats)
    loss, dlogits = softmax_cross_entropy(logits, y)
    return loss, net_backward(net, caches, dlogits)


def predict(net, x, batch_size=1000):
    out = []
    for start in range(0, len(x), batch_size):
        logits, _ = net_forward(net, x[start : start + batch_size], update_stats=False)
        out.append(logits.argmax(axis=1))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def _norm_meta(spec):
    if spec is None:
        return None
    return {"kind": spec.kind.value, "g_c": spec.g_c, "g_m": spec.g_m, "eps": spec.eps,
            "momentum": spec.momentum, "affine": spec.affine}


def save_snapshot(net, path):
    arrays = {"head_weight": net.head_weight, "head_bias": net.head_bias}
    for i, layer in enumerate(net.layers):
        arrays[f"l{i}_weight"] = layer.weight
        arrays[f"l{i}_gamma"] = layer.state.gamma
        arrays[f"l{i}_beta"] = layer.state.beta
        if layer.state.running_mean is not None:
            arrays[f"l{i}_running_mean"] = layer.state.running_mean
            arrays[f"l{i}_running_var"] = layer.state.running_var
    meta = {"norms": [_norm_meta(layer.norm) for layer in net.layers]}
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_snapshot(path):
    with np.load(path) as z:
        meta = json.loads(z["meta"].tobytes().decode())
        layers = []
        for i, spec in enumerate(meta["norms"]):
            state = NormState(z[f"l{i}_gamma"].copy(), z[f"l{i}_beta"].copy())
            if f"l{i}_running_mean" in z:
                state.running_mean = z[f"l{i}_running_mean"].copy()
                state.running_var = z[f"l{i}_running_var"].copy()
            norm = None if spec is None else NormSpec(**spec)
            layers.append(HiddenLayer(z[f"l{i}_weight"].copy(), norm, state))
        return SimpleNet(layers, z["head_weight"].copy(), z["head_bias"].copy())
