"""MLP definition: seeded initialization, forward pass with cache, loss.

A network is a chain of dense layers, each mapping ``in_dim`` to
``out_dim`` through ``z = W y + b`` followed by an elementwise
activation. The forward pass caches every pre-activation and activation
because all backward strategies need them.

The loss is per-class binary cross-entropy summed over the sigmoid
outputs, which makes the output-layer error exactly ``y - target``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .rng import substream
from .tensor import Matrix, ShapeError, Vector

__all__ = [
    "Activation",
    "LayerSpec",
    "NetworkSpec",
    "NetworkState",
    "ForwardCache",
    "mnist_spec",
    "cifar10_spec",
    "init_network",
    "activation_apply",
    "activation_deriv",
    "forward",
    "forward_batch",
    "loss_and_output_delta",
    "predict_class",
]


class Activation(Enum):
    TANH = "tanh"
    SIGMOID = "sigmoid"


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: Activation

    def __post_init__(self) -> None:
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError(f"layer dimensions must be positive, got ({self.in_dim}, {self.out_dim})")


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple[LayerSpec, ...]

    def __post_init__(self) -> None:
        if len(self.layers) < 1:
            raise ValueError("a network needs at least one layer")
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.out_dim != b.in_dim:
                raise ValueError(
                    f"layer {i} outputs {a.out_dim} values but layer {i + 1} expects {b.in_dim}"
                )

    @classmethod
    def from_dims(
        cls,
        dims: Sequence[int],
        hidden_activation: Activation = Activation.TANH,
        output_activation: Activation = Activation.SIGMOID,
    ) -> "NetworkSpec":
        """Chain of layers through the given widths; dims[0] is the input."""
        if len(dims) < 2:
            raise ValueError("need at least an input and an output width")
        layers = []
        for i in range(len(dims) - 1):
            act = output_activation if i == len(dims) - 2 else hidden_activation
            layers.append(LayerSpec(dims[i], dims[i + 1], act))
        return cls(tuple(layers))

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim


def mnist_spec() -> NetworkSpec:
    """784-768-256-128-10 net, tanh hidden layers, sigmoid output."""
    return NetworkSpec.from_dims([784, 768, 256, 128, 10])


def cifar10_spec() -> NetworkSpec:
    """3072-768-256-128-10 net, tanh hidden layers, sigmoid output."""
    return NetworkSpec.from_dims([3072, 768, 256, 128, 10])


@dataclass
class NetworkState:
    """Per-layer weights and biases; W_i is (out_dim x in_dim)."""

    spec: NetworkSpec
    weights: list[Matrix]
    biases: list[Vector]

    def __post_init__(self) -> None:
        n = self.spec.n_layers
        if len(self.weights) != n or len(self.biases) != n:
            raise ShapeError(
                f"state holds {len(self.weights)} weight / {len(self.biases)} bias tensors "
                f"for a {n}-layer spec"
            )
        for i, layer in enumerate(self.spec.layers):
            if self.weights[i].shape != (layer.out_dim, layer.in_dim):
                raise ShapeError(
                    f"layer {i} weights are {self.weights[i].shape}, "
                    f"expected ({layer.out_dim}, {layer.in_dim})"
                )
            if len(self.biases[i]) != layer.out_dim:
                raise ShapeError(
                    f"layer {i} bias has length {len(self.biases[i])}, expected {layer.out_dim}"
                )

    @property
    def n_layers(self) -> int:
        return self.spec.n_layers

    def weight_bytes(self) -> bytes:
        """All parameters as little-endian float64, layer by layer (W then b)."""
        chunks = []
        for w, b in zip(self.weights, self.biases):
            chunks.append(w.tobytes())
            chunks.append(b.tobytes())
        return b"".join(chunks)


@dataclass
class ForwardCache:
    """Stored pre-activations z_i and activations y_i; activations[0] is the input."""

    pre_activations: list[Vector]
    activations: list[Vector]


def init_network(spec: NetworkSpec, seed: int) -> NetworkState:
    """Seeded state: W entries i.i.d. Uniform(-1/sqrt(in_dim), +1/sqrt(in_dim)), zero biases.

    Weights come from the dedicated "weights" stream of ``seed``, so the
    same (spec, seed) pair always reproduces bit-identical parameters no
    matter what other randomness a run consumes.
    """
    rng = substream(seed, "weights")
    weights = []
    biases = []
    for layer in spec.layers:
        bound = 1.0 / np.sqrt(layer.in_dim)
        weights.append(Matrix(rng.uniform(-bound, bound, size=(layer.out_dim, layer.in_dim))))
        biases.append(Vector.zeros(layer.out_dim))
    return NetworkState(spec, weights, biases)


def _apply_activation(kind: Activation, z: np.ndarray) -> np.ndarray:
    if kind is Activation.TANH:
        return np.tanh(z)
    # Sigmoid, split by sign so neither branch exponentiates a large positive value.
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _activation_derivative(kind: Activation, z: np.ndarray) -> np.ndarray:
    if kind is Activation.TANH:
        t = np.tanh(z)
        return 1.0 - t * t
    s = _apply_activation(Activation.SIGMOID, z)
    return s * (1.0 - s)


def activation_apply(kind: Activation, z: Vector) -> Vector:
    """tanh or logistic sigmoid, elementwise."""
    return Vector(_apply_activation(kind, z.data))


def activation_deriv(kind: Activation, z: Vector) -> Vector:
    """Derivative of the activation: 1 - tanh^2(z) or sigma(z)(1 - sigma(z))."""
    return Vector(_activation_derivative(kind, z.data))


def forward_batch(state: NetworkState, x: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Vectorized forward pass over a batch of row vectors.

    Returns (pre_activations, activations) where pre_activations[i] is the
    (m, out_dim_i) batch of z values for layer i and activations[0] is the
    input batch itself. A single sample is just a one-row batch; the math
    is identical to :func:`forward`.
    """
    if x.ndim != 2 or x.shape[1] != state.spec.input_dim:
        raise ShapeError(
            f"input batch has shape {x.shape}, expected (m, {state.spec.input_dim})"
        )
    pre: list[np.ndarray] = []
    acts: list[np.ndarray] = [x]
    a = x
    for layer, w, b in zip(state.spec.layers, state.weights, state.biases):
        z = a @ w.data.T + b.data
        a = _apply_activation(layer.activation, z)
        pre.append(z)
        acts.append(a)
    return pre, acts


def forward(state: NetworkState, x: Vector) -> ForwardCache:
    """Forward pass for one sample, caching every z_i and y_i."""
    if len(x) != state.spec.input_dim:
        raise ShapeError(f"input has length {len(x)}, expected {state.spec.input_dim}")
    pre, acts = forward_batch(state, x.data.reshape(1, -1))
    return ForwardCache(
        pre_activations=[Vector(z[0]) for z in pre],
        activations=[Vector(a[0]) for a in acts],
    )


# Probabilities this close to 0 or 1 are clamped inside the loss so the
# reported value stays finite even when a sigmoid output saturates in
# float64; the returned delta always uses the raw outputs.
_LOSS_CLAMP = 1e-12


def _loss_and_delta_batch(y: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    yc = np.clip(y, _LOSS_CLAMP, 1.0 - _LOSS_CLAMP)
    losses = -(target * np.log(yc) + (1.0 - target) * np.log1p(-yc)).sum(axis=1)
    return losses, y - target


def _is_one_hot(target: np.ndarray) -> bool:
    ones = target == 1.0
    return bool(ones.sum() == 1 and np.all(ones | (target == 0.0)))


def loss_and_output_delta(y_out: Vector, target: Vector) -> tuple[float, Vector]:
    """Summed per-class binary cross-entropy and its gradient wrt the output z.

    loss = -sum_k [t_k ln(y_k) + (1 - t_k) ln(1 - y_k)]; because the output
    layer is sigmoid, the gradient wrt the output pre-activation collapses
    to y - target, which is what the returned delta holds.
    """
    if len(y_out) != len(target):
        raise ShapeError(f"output has length {len(y_out)}, target {len(target)}")
    if not _is_one_hot(target.data):
        raise ValueError("target must be one-hot (exactly one 1.0, rest 0.0)")
    losses, deltas = _loss_and_delta_batch(
        y_out.data.reshape(1, -1), target.data.reshape(1, -1)
    )
    return float(losses[0]), Vector(deltas[0])


def predict_class(y_out: Vector) -> int:
    """Index of the largest output; ties break toward the lowest index."""
    return int(np.argmax(y_out.data))
