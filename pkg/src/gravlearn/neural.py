"""Dense multilayer perceptron with exact reverse-mode differentiation.

Parameters live in one flat vector.  Canonical order: the weight matrices
of every layer in forward order, each stored row-major with shape
``(fan_in, fan_out)``, followed by the bias vectors of every layer in the
same order.  ``unpack_params`` returns zero-copy views into that vector,
which is what lets the optimizers treat the whole network as a single
point in R^p.

The output layer is always linear; hidden layers use one of tanh, relu or
swish (``x * sigmoid(x)``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch

__all__ = [
    "ACTIVATIONS",
    "MLPSpec",
    "init_params",
    "unpack_params",
    "mlp_forward",
    "mlp_backward",
    "save_params",
    "load_params",
]

ACTIVATIONS = ("tanh", "relu", "swish")


@dataclass(frozen=True)
class MLPSpec:
    """Layer sizes ``[in, h_1, ..., h_L, out]`` plus activation and init seed."""

    layer_sizes: tuple[int, ...]
    hidden_activation: str = "tanh"
    seed: int = 0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 3:
            raise ValueError("need at least one hidden layer: [in, h, out]")
        if any(s < 1 for s in sizes):
            raise ValueError("all layer sizes must be >= 1")
        if self.hidden_activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.hidden_activation!r}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def in_size(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_size(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_params(self) -> int:
        sizes = self.layer_sizes
        return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


def init_params(spec: MLPSpec) -> np.ndarray:
    """Glorot-uniform hidden weights, zero output layer and biases.

    Deterministic in ``spec.seed``.  The output layer starts at zero so the
    network begins as the zero function: a freshly initialized model adds
    nothing to whatever known structure surrounds it, and the first
    gradient steps fit the output layer on fixed random features instead
    of unwinding a random vector field.  (Glorot on the output layer makes
    the training rollout explode and the optimizer spends its entire
    budget collapsing the network back toward zero.)
    """
    rng = np.random.default_rng(spec.seed)
    sizes = spec.layer_sizes
    weights = []
    n_bias = 0
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        if i == len(sizes) - 2:
            weights.append(np.zeros(fan_in * fan_out))
        else:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=fan_in * fan_out))
        n_bias += fan_out
    return np.concatenate(weights + [np.zeros(n_bias)])


def unpack_params(spec: MLPSpec, params: np.ndarray):
    """Views ``[(W_0, b_0), ...]`` into the flat vector; no copies."""
    params = np.asarray(params)
    if params.size != spec.n_params:
        raise DimensionMismatch(
            f"parameter vector has {params.size} entries, spec needs {spec.n_params}"
        )
    sizes = spec.layer_sizes
    weights = []
    offset = 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(params[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out))
        offset += fan_in * fan_out
    biases = []
    for fan_out in sizes[1:]:
        biases.append(params[offset : offset + fan_out])
        offset += fan_out
    return list(zip(weights, biases))


def _sigmoid(z):
    # tanh form is overflow-safe for any z
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _activate(name, z):
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    return z * _sigmoid(z)  # swish


def _activate_prime(name, z, a_out):
    """Derivative of the hidden activation; ``a_out`` is activate(z)."""
    if name == "tanh":
        return 1.0 - a_out * a_out
    if name == "relu":
        # subgradient at exactly 0 pinned to 0
        return (z > 0.0).astype(z.dtype)
    s = _sigmoid(z)
    return s * (1.0 + z * (1.0 - s))


def forward_plain(activation: str, layers, x: np.ndarray) -> np.ndarray:
    """Forward pass without caching; ``x`` is (in,) or (batch, in)."""
    a = x
    last = len(layers) - 1
    for l, (w, b) in enumerate(layers):
        z = a @ w + b
        a = z if l == last else _activate(activation, z)
    return a


def forward_cached(activation: str, layers, x: np.ndarray):
    """Forward pass keeping what the reverse sweep needs.

    Returns ``(output, (inputs, preacts))`` where ``inputs[l]`` is the input
    of layer ``l`` and ``preacts[l]`` its pre-activation (hidden layers only).
    """
    inputs = [x]
    preacts = []
    a = x
    last = len(layers) - 1
    for l, (w, b) in enumerate(layers):
        z = a @ w + b
        if l == last:
            return z, (inputs, preacts)
        preacts.append(z)
        a = _activate(activation, z)
        inputs.append(a)
    raise AssertionError("unreachable")


def vjp_from_cache(activation: str, layers, cache, ybar, grads) -> np.ndarray:
    """Accumulate parameter cotangents into ``grads`` and return the input one.

    ``grads`` holds ``(gW, gb)`` arrays matching ``layers``; they are added
    to in place so one accumulator can serve many calls.  ``ybar`` must be
    batched the same way the cached forward input was.
    """
    inputs, preacts = cache
    da = ybar
    last = len(layers) - 1
    for l in range(last, -1, -1):
        if l == last:
            dz = da
        else:
            dz = da * _activate_prime(activation, preacts[l], inputs[l + 1])
        a_in = inputs[l]
        gw, gb = grads[l]
        if a_in.ndim == 1:
            gw += np.outer(a_in, dz)
            gb += dz
        else:
            gw += a_in.T @ dz
            gb += dz.sum(axis=0)
        da = dz @ layers[l][0].T
    return da


def _check_input(spec, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.in_size:
        raise DimensionMismatch(
            f"input size {x.shape[-1]} does not match spec input {spec.in_size}"
        )
    return x


def mlp_forward(spec: MLPSpec, params: np.ndarray, x) -> np.ndarray:
    """Evaluate the network at ``x`` ((in,) or (batch, in))."""
    x = _check_input(spec, x)
    return forward_plain(spec.hidden_activation, unpack_params(spec, params), x)


def mlp_backward(spec: MLPSpec, params: np.ndarray, x, output_cotangent):
    """Exact vector-Jacobian products of the forward pass.

    Returns ``(input_cotangent, parameter_gradient)`` for the scalar
    ``<output_cotangent, mlp(x)>``; batched inputs sum the parameter
    gradient over the batch.
    """
    x = _check_input(spec, x)
    ybar = np.asarray(output_cotangent, dtype=float)
    if ybar.shape != x.shape[:-1] + (spec.out_size,):
        raise DimensionMismatch(
            f"cotangent shape {ybar.shape} does not match output size "
            f"{spec.out_size}"
        )
    layers = unpack_params(spec, params)
    grad = np.zeros(spec.n_params)
    grads = unpack_params(spec, grad)
    _, cache = forward_cached(spec.hidden_activation, layers, x)
    xbar = vjp_from_cache(spec.hidden_activation, layers, cache, ybar, grads)
    return xbar, grad


def save_params(path, spec: MLPSpec, params: np.ndarray) -> None:
    """Write a JSON checkpoint of the spec header plus the flat vector."""
    payload = {
        "layer_sizes": list(spec.layer_sizes),
        "hidden_activation": spec.hidden_activation,
        "seed": spec.seed,
        "params": [float(v) for v in np.asarray(params, dtype=float)],
    }
    Path(path).write_text(json.dumps(payload))


def load_params(path):
    """Inverse of :func:`save_params`; returns ``(spec, params)``."""
    payload = json.loads(Path(path).read_text())
    spec = MLPSpec(
        layer_sizes=tuple(payload["layer_sizes"]),
        hidden_activation=payload["hidden_activation"],
        seed=payload["seed"],
    )
    params = np.asarray(payload["params"], dtype=float)
    if params.size != spec.n_params:
        raise DimensionMismatch("checkpoint parameter count does not match header")
    return spec, params
