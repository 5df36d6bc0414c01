"""Tiny numpy MLP with hand-written reverse-mode gradients and Adam."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import serialization
from ._validation import as_generator, check_batch

ACTIVATIONS = ("relu", "tanh")


class Mlp:
    """Fully connected network ``x -> act(x W1 + b1) -> ... -> x Wn + bn``.

    Weights are stored as ``(fan_in, fan_out)`` matrices.  Hidden layers use
    ``activation``; the output layer is linear.
    """

    def __init__(self, sizes, activation="relu", rng=None):
        sizes = [int(s) for s in sizes]
        if len(sizes) < 2 or min(sizes) < 1:
            raise ValueError(f"need at least input and output sizes >= 1, got {sizes}")
        if activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        self.sizes = sizes
        self.activation = activation
        rng = as_generator(rng)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def n_inputs(self):
        return self.sizes[0]

    @property
    def n_outputs(self):
        return self.sizes[-1]

    def parameters(self):
        """Parameter arrays in layer order: W1, b1, W2, b2, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def n_parameters(self):
        return sum(p.size for p in self.parameters())

    def copy(self):
        clone = Mlp.__new__(Mlp)
        clone.sizes = list(self.sizes)
        clone.activation = self.activation
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def __call__(self, x):
        return forward(self, x)


@dataclass
class GradBundle:
    weights: list
    biases: list
    input: np.ndarray

    def parameters(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_net(cls, net: Mlp, lr=3e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        params = net.parameters()
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params],
                   0, lr, beta1, beta2, eps)


def _act(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def forward(net: Mlp, x, return_cache=False):
    """Evaluate ``net`` on a vector or a batch of row vectors.

    With ``return_cache`` the layer inputs are returned as well, for reuse
    in :func:`backward`.
    """
    single = np.ndim(x) == 1
    h = check_batch(x, net.n_inputs)
    cache = [h]
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w + b
        if k < last:
            h = _act(h, net.activation)
        cache.append(h)
    out = h[0] if single else h
    return (out, cache) if return_cache else out


def backward(net: Mlp, x, upstream, cache=None, params=True, wrt_input=True) -> GradBundle:
    """Gradients of ``sum(upstream * forward(net, x))``.

    Batched inputs sum the per-row gradients.  The ``input`` field holds the
    gradient with respect to ``x`` and keeps its shape.  ``params=False``
    skips the parameter gradients (their entries are left as ``None``) and
    ``wrt_input=False`` skips the input gradient.
    """
    single = np.ndim(x) == 1
    if cache is None:
        _, cache = forward(net, x, return_cache=True)
    g = check_batch(upstream, net.n_outputs, name="upstream")
    if g.shape[0] != cache[0].shape[0]:
        raise ValueError(f"upstream batch {g.shape[0]} does not match input batch {cache[0].shape[0]}")
    n_layers = len(net.weights)
    gw = [None] * n_layers
    gb = [None] * n_layers
    for k in range(n_layers - 1, -1, -1):
        if k < n_layers - 1:
            act = cache[k + 1]
            if net.activation == "relu":
                g = g * (act > 0.0)
            else:
                g = g * (1.0 - act * act)
        if params:
            gw[k] = cache[k].T @ g
            gb[k] = g.sum(axis=0)
        if k > 0 or wrt_input:
            g = g @ net.weights[k].T
    if not wrt_input:
        return GradBundle(gw, gb, None)
    return GradBundle(gw, gb, g[0] if single else g)


def adam_step(net: Mlp, grads: GradBundle, opt: AdamState):
    """Bias-corrected Adam update applied in place; returns ``(net, opt)``."""
    params = net.parameters()
    gparams = grads.parameters()
    if len(gparams) != len(params):
        raise ValueError("gradient bundle does not match network")
    for p, gp in zip(params, gparams):
        if p.shape != gp.shape:
            raise ValueError(f"gradient shape {gp.shape} does not match parameter {p.shape}")
        if not np.all(np.isfinite(gp)):
            raise ValueError("non-finite gradient entries")
    opt.step += 1
    b1, b2 = opt.beta1, opt.beta2
    step_size = opt.lr / (1.0 - b1 ** opt.step)
    inv_bc2 = 1.0 / (1.0 - b2 ** opt.step)
    for p, gp, m, v in zip(params, gparams, opt.m, opt.v):
        m *= b1
        m += (1.0 - b1) * gp
        v *= b2
        v += (1.0 - b2) * (gp * gp)
        denom = v * inv_bc2
        np.sqrt(denom, out=denom)
        denom += opt.eps
        np.divide(m, denom, out=denom)
        denom *= step_size
        p -= denom
    return net, opt


def mlp_arrays(net: Mlp, prefix=""):
    out = []
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        out.append((f"{prefix}W{k}", w))
        out.append((f"{prefix}b{k}", b))
    return out


def mlp_from_arrays(sizes, activation, arrays):
    net = Mlp.__new__(Mlp)
    net.sizes = [int(s) for s in sizes]
    net.activation = activation
    values = [a for _, a in arrays]
    net.weights = values[0::2]
    net.biases = values[1::2]
    expected = list(zip(net.sizes[:-1], net.sizes[1:]))
    if len(net.weights) != len(expected) or any(w.shape != s for w, s in zip(net.weights, expected)):
        raise serialization.CheckpointError("parameter shapes do not match layer sizes")
    return net


def adam_arrays(opt: AdamState, prefix=""):
    return [(f"{prefix}m{k}", m) for k, m in enumerate(opt.m)] + [
        (f"{prefix}v{k}", v) for k, v in enumerate(opt.v)
    ]


def adam_meta(opt: AdamState):
    return {"step": opt.step, "lr": opt.lr, "beta1": opt.beta1, "beta2": opt.beta2, "eps": opt.eps}


def adam_from(meta, arrays):
    values = [a for _, a in arrays]
    half = len(values) // 2
    return AdamState(values[:half], values[half:], meta["step"], meta["lr"], meta["beta1"],
                     meta["beta2"], meta["eps"])


def mlp_to_bytes(net: Mlp) -> bytes:
    return serialization.dumps("mlp", {"sizes": net.sizes, "activation": net.activation}, mlp_arrays(net))


def mlp_from_bytes(data: bytes) -> Mlp:
    _, meta, arrays = serialization.loads(data, kind="mlp")
    return mlp_from_arrays(meta["sizes"], meta["activation"], arrays)


def save_mlp(net: Mlp, path):
    return serialization.save(path, "mlp", {"sizes": net.sizes, "activation": net.activation},
                              mlp_arrays(net))


def load_mlp(path) -> Mlp:
    _, meta, arrays = serialization.load(path, kind="mlp")
    return mlp_from_arrays(meta["sizes"], meta["activation"], arrays)
