"""Minimal multilayer perceptron with exact reverse-mode gradients.

Hidden layers use tanh (bounded and smooth, which keeps critic outputs well
scaled for covariance estimates); the output layer is affine.  Weights are
initialized uniform(-s, s) with s = 1/sqrt(fan_in) from a caller-supplied
generator, so runs are deterministic given a seed.

``backward`` differentiates the scalar sum(upstream * output) with respect to
every parameter and to the input batch; the input gradient is what lets a
critic's gradient flow back into the feature network that feeds it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

__all__ = [
    "Mlp",
    "GradientTape",
    "forward",
    "backward",
    "sgd_step",
    "Sgd",
    "mlp_to_dict",
    "mlp_from_dict",
]


class Mlp:
    """Fully connected network defined by its layer widths.

    ``layer_dims`` = [d_in, h1, ..., d_out]; a two-entry list is a single
    affine layer.  Parameters live in ``weights[i]`` of shape (d_in, d_out)
    and ``biases[i]`` of shape (d_out,).
    """

    def __init__(self, layer_dims, rng: np.random.Generator | None = None):
        dims = [int(d) for d in layer_dims]
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise InputError(f"layer_dims needs >= 2 positive entries, got {layer_dims}")
        rng = rng if rng is not None else np.random.default_rng()
        self.layer_dims = dims
        self.weights = []
        self.biases = []
        for d_in, d_out in zip(dims[:-1], dims[1:]):
            scale = 1.0 / np.sqrt(d_in)
            self.weights.append(rng.uniform(-scale, scale, size=(d_in, d_out)))
            self.biases.append(rng.uniform(-scale, scale, size=d_out))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def param_count(self) -> int:
        return sum((d_in + 1) * d_out for d_in, d_out in zip(self.layer_dims[:-1], self.layer_dims[1:]))

    def copy(self) -> "Mlp":
        dup = Mlp.__new__(Mlp)
        dup.layer_dims = list(self.layer_dims)
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        return dup


@dataclass
class GradientTape:
    """Per-parameter gradients mirroring an Mlp's shapes, plus the gradient
    with respect to the input batch and the scalar the tape differentiates."""

    weight_grads: list
    bias_grads: list
    input_grad: np.ndarray
    loss: float


def _check_batch(net: Mlp, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=float)
    if batch.ndim != 2 or batch.shape[1] != net.layer_dims[0]:
        raise InputError(
            f"batch must be (n, {net.layer_dims[0]}), got shape {batch.shape}"
        )
    return batch


def _forward_pass(net: Mlp, batch: np.ndarray):
    """Layer activations, input first, output last."""
    activations = [batch]
    h = batch
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        h = np.tanh(z) if i < net.n_layers - 1 else z
        activations.append(h)
    return activations


def forward(net: Mlp, batch) -> np.ndarray:
    """Evaluate the network on a batch of rows."""
    return _forward_pass(net, _check_batch(net, batch))[-1]


def backward(net: Mlp, batch, upstream_grad) -> GradientTape:
    """Exact gradients of sum(upstream * output) w.r.t. parameters and input."""
    batch = _check_batch(net, batch)
    upstream = np.asarray(upstream_grad, dtype=float)
    activations = _forward_pass(net, batch)
    if upstream.shape != activations[-1].shape:
        raise InputError(
            f"upstream_grad shape {upstream.shape} != output shape {activations[-1].shape}"
        )
    loss = float(np.sum(upstream * activations[-1]))
    weight_grads = [None] * net.n_layers
    bias_grads = [None] * net.n_layers
    delta = upstream
    for i in range(net.n_layers - 1, -1, -1):
        if i < net.n_layers - 1:
            # activations[i + 1] = tanh(z); d tanh / dz = 1 - tanh^2
            delta = delta * (1.0 - activations[i + 1] ** 2)
        weight_grads[i] = activations[i].T @ delta
        bias_grads[i] = delta.sum(axis=0)
        delta = delta @ net.weights[i].T
    return GradientTape(weight_grads, bias_grads, input_grad=delta, loss=loss)


def sgd_step(net: Mlp, tape: GradientTape, learning_rate: float) -> Mlp:
    """Plain in-place descent step theta <- theta - lr * grad; returns the net."""
    for w, gw in zip(net.weights, tape.weight_grads):
        w -= learning_rate * gw
    for b, gb in zip(net.biases, tape.bias_grads):
        b -= learning_rate * gb
    return net


class Sgd:
    """Optional momentum variant; with momentum = 0 it matches ``sgd_step``."""

    def __init__(self, learning_rate: float, momentum: float = 0.9):
        self.learning_rate = learning_rate
        self.momentum = momentum
        self._velocity = None

    def step(self, net: Mlp, tape: GradientTape) -> Mlp:
        if self._velocity is None:
            self._velocity = [
                [np.zeros_like(w) for w in net.weights],
                [np.zeros_like(b) for b in net.biases],
            ]
        vw, vb = self._velocity
        for w, v, g in zip(net.weights, vw, tape.weight_grads):
            v *= self.momentum
            v += g
            w -= self.learning_rate * v
        for b, v, g in zip(net.biases, vb, tape.bias_grads):
            v *= self.momentum
            v += g
            b -= self.learning_rate * v
        return net


_MLP_FORMAT = "fairmaxcorr/mlp"


def mlp_to_dict(net: Mlp) -> dict:
    return {
        "format": _MLP_FORMAT,
        "layer_dims": list(net.layer_dims),
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def mlp_from_dict(payload: dict) -> Mlp:
    if payload.get("format") != _MLP_FORMAT:
        raise InputError("not an MLP parameter document")
    net = Mlp(payload["layer_dims"])
    net.weights = [np.array(w, dtype=float) for w in payload["weights"]]
    net.biases = [np.array(b, dtype=float) for b in payload["biases"]]
    for w, b, d_in, d_out in zip(
        net.weights, net.biases, net.layer_dims[:-1], net.layer_dims[1:]
    ):
        if w.shape != (d_in, d_out) or b.shape != (d_out,):
            raise InputError("parameter shapes disagree with layer_dims")
    return net
