"""The five backward-pass strategies and the update machinery.

All strategies share the same output-layer rule: with sigmoid outputs and
per-class cross-entropy the output error is ``delta_out = y - target``,
giving ``dW_out = -delta_out y_prev^T``. They differ only in how the error
reaches the hidden layers:

* ``BP``   propagates through the transposed forward weights (exact gradients).
* ``FA``   propagates through fixed random matrices, layer by layer.
* ``USFA`` like FA, but each matrix is refreshed to sign(W^T) after every
  parameter update, keeping only the signs of the transpose.
* ``DFA``  projects the output error straight into each hidden layer
  through that layer's own fixed random matrix.
* ``WDFA`` computes DFA deltas and scales each layer's learning rate by a
  factor that grows toward the output while averaging to 1.

Deltas carry a leading minus sign (they are descent directions), so the
update rule adds ``lr * delta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .datasets import Dataset
from .network import (
    Activation,
    ForwardCache,
    NetworkSpec,
    NetworkState,
    _activation_derivative,
    _loss_and_delta_batch,
    forward_batch,
)
from .rng import substream
from .tensor import Matrix, ShapeError, Vector

__all__ = [
    "Algorithm",
    "FeedbackState",
    "LayerDeltas",
    "OptimizerKind",
    "OptimizerState",
    "TrainConfig",
    "init_feedback",
    "bp_backward",
    "fa_backward",
    "usfa_sync_feedback",
    "dfa_backward",
    "wdfa_lr_factors",
    "backward",
    "apply_update",
    "train_epoch",
    "train_network",
]


class Algorithm(Enum):
    BP = "bp"
    FA = "fa"
    USFA = "usfa"
    DFA = "dfa"
    WDFA = "wdfa"

    @classmethod
    def from_token(cls, token: str) -> "Algorithm":
        try:
            return cls(token.strip().lower())
        except ValueError:
            valid = ", ".join(a.value for a in cls)
            raise ValueError(f"unknown algorithm {token!r} (valid: {valid})") from None


ALL_ALGORITHMS: tuple[Algorithm, ...] = tuple(Algorithm)

# FA and USFA share the layer-by-layer feedback shape; DFA and WDFA share
# the direct-projection shape.
_FA_FAMILY = (Algorithm.FA, Algorithm.USFA)
_DFA_FAMILY = (Algorithm.DFA, Algorithm.WDFA)


@dataclass
class FeedbackState:
    """Fixed random backward matrices B_i; empty for BP."""

    matrices: list[Matrix]


def _fa_shapes(spec: NetworkSpec) -> list[tuple[int, int]]:
    # One matrix per layer boundary, shaped like W_{i+1}^T.
    return [
        (spec.layers[i].out_dim, spec.layers[i + 1].out_dim)
        for i in range(spec.n_layers - 1)
    ]


def _dfa_shapes(spec: NetworkSpec) -> list[tuple[int, int]]:
    # One matrix per hidden layer, mapping the output error into that layer's width.
    return [(spec.layers[i].out_dim, spec.output_dim) for i in range(spec.n_layers - 1)]


def _expected_feedback_shapes(spec: NetworkSpec, algorithm: Algorithm) -> list[tuple[int, int]]:
    if algorithm is Algorithm.BP:
        return []
    if algorithm in _FA_FAMILY:
        return _fa_shapes(spec)
    return _dfa_shapes(spec)


def _check_feedback(state: NetworkState, feedback: FeedbackState, algorithm: Algorithm) -> None:
    expected = _expected_feedback_shapes(state.spec, algorithm)
    got = [m.shape for m in feedback.matrices]
    if got != expected:
        raise ShapeError(
            f"feedback shapes {got} do not match {algorithm.value} expectation {expected}"
        )


def init_feedback(spec: NetworkSpec, algorithm: Algorithm, seed: int) -> FeedbackState:
    """Random feedback matrices for the run, drawn from the feedback stream.

    Entries are i.i.d. Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) where
    fan_in is the matrix's input dimension (its column count). BP gets an
    empty state; USFA starts from the same draw as FA but is overwritten
    by :func:`usfa_sync_feedback` before and during training.
    """
    rng = substream(seed, f"feedback:{algorithm.value}")
    matrices = []
    for rows, cols in _expected_feedback_shapes(spec, algorithm):
        bound = 1.0 / np.sqrt(cols)
        matrices.append(Matrix(rng.uniform(-bound, bound, size=(rows, cols))))
    return FeedbackState(matrices)


def usfa_sync_feedback(state: NetworkState) -> FeedbackState:
    """Feedback carrying only the signs of the weight transposes: B = sign(W^T)."""
    return FeedbackState([Matrix(np.sign(w.data.T)) for w in state.weights[1:]])


@dataclass
class LayerDeltas:
    """Per-layer update directions (with the leading minus sign baked in)."""

    dW: list[Matrix]
    db: list[Vector]


def _backward_sums(
    algorithm: Algorithm,
    state: NetworkState,
    feedback: FeedbackState,
    pre: list[np.ndarray],
    acts: list[np.ndarray],
    out_delta: np.ndarray,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Summed (not averaged) deltas over a batch of rows.

    ``pre[i]`` is the (m, out_dim_i) pre-activation batch, ``acts[0]`` the
    input batch, ``out_delta`` the (m, out_dim) loss gradient wrt the
    output pre-activation. One-row batches reproduce the per-sample ops
    exactly.
    """
    n = state.n_layers
    kinds = [layer.activation for layer in state.spec.layers]
    dW: list[np.ndarray] = [np.empty(0)] * n
    db: list[np.ndarray] = [np.empty(0)] * n

    dW[n - 1] = -(out_delta.T @ acts[n - 1])
    db[n - 1] = -out_delta.sum(axis=0)

    if algorithm in _DFA_FAMILY:
        for i in range(n - 2, -1, -1):
            err = (out_delta @ feedback.matrices[i].data.T) * _activation_derivative(
                kinds[i], pre[i]
            )
            dW[i] = -(err.T @ acts[i])
            db[i] = -err.sum(axis=0)
    else:
        err = out_delta
        for i in range(n - 2, -1, -1):
            if algorithm is Algorithm.BP:
                back = err @ state.weights[i + 1].data
            else:
                back = err @ feedback.matrices[i].data.T
            err = back * _activation_derivative(kinds[i], pre[i])
            dW[i] = -(err.T @ acts[i])
            db[i] = -err.sum(axis=0)
    return dW, db


def _backward_single(
    algorithm: Algorithm,
    state: NetworkState,
    feedback: FeedbackState,
    cache: ForwardCache,
    out_delta: Vector,
) -> LayerDeltas:
    if len(out_delta) != state.spec.output_dim:
        raise ShapeError(
            f"output delta has length {len(out_delta)}, expected {state.spec.output_dim}"
        )
    _check_feedback(state, feedback, algorithm)
    pre = [z.data.reshape(1, -1) for z in cache.pre_activations]
    acts = [a.data.reshape(1, -1) for a in cache.activations]
    dW, db = _backward_sums(algorithm, state, feedback, pre, acts, out_delta.data.reshape(1, -1))
    return LayerDeltas([Matrix(m) for m in dW], [Vector(v) for v in db])


_EMPTY_FEEDBACK = FeedbackState([])


def bp_backward(state: NetworkState, cache: ForwardCache, out_delta: Vector) -> LayerDeltas:
    """Exact gradients: each layer's error arrives through W^T of the layer above."""
    return _backward_single(Algorithm.BP, state, _EMPTY_FEEDBACK, cache, out_delta)


def fa_backward(
    state: NetworkState, feedback: FeedbackState, cache: ForwardCache, out_delta: Vector
) -> LayerDeltas:
    """Same recursion as BP with the fixed random B replacing each W^T."""
    return _backward_single(Algorithm.FA, state, feedback, cache, out_delta)


def dfa_backward(
    state: NetworkState, feedback: FeedbackState, cache: ForwardCache, out_delta: Vector
) -> LayerDeltas:
    """Every hidden layer receives the output error through its own B."""
    return _backward_single(Algorithm.DFA, state, feedback, cache, out_delta)


def backward(
    algorithm: Algorithm,
    state: NetworkState,
    feedback: FeedbackState,
    cache: ForwardCache,
    out_delta: Vector,
) -> LayerDeltas:
    """Dispatch to the strategy's backward rule.

    WDFA produces the same deltas as DFA; its per-layer weighting is an
    update-time concern handled by :func:`apply_update`. USFA uses the FA
    recursion with its sign-synced feedback.
    """
    return _backward_single(algorithm, state, feedback, cache, out_delta)


def wdfa_lr_factors(n: int) -> list[float]:
    """Per-layer learning-rate factors n*sqrt(j)/sum(sqrt(i)), j = 1..n.

    Strictly increasing toward the output layer, averaging exactly 1 so the
    configured learning rate stays the mean rate across layers.
    """
    if n < 1:
        raise ValueError(f"layer count must be at least 1, got {n}")
    roots = np.sqrt(np.arange(1, n + 1, dtype=np.float64))
    return [float(f) for f in n * roots / roots.sum()]


class OptimizerKind(Enum):
    NONE = "none"
    ADAM = "adam"


ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class OptimizerState:
    """Adam moment estimates mirroring the network parameters; empty for plain updates."""

    kind: OptimizerKind
    first_moment_w: list[Matrix] = field(default_factory=list)
    second_moment_w: list[Matrix] = field(default_factory=list)
    first_moment_b: list[Vector] = field(default_factory=list)
    second_moment_b: list[Vector] = field(default_factory=list)
    step_count: int = 0

    @classmethod
    def fresh(cls, kind: OptimizerKind, spec: NetworkSpec) -> "OptimizerState":
        if kind is OptimizerKind.NONE:
            return cls(kind)
        zeros_w = lambda: [Matrix.zeros(l.out_dim, l.in_dim) for l in spec.layers]
        zeros_b = lambda: [Vector.zeros(l.out_dim) for l in spec.layers]
        return cls(kind, zeros_w(), zeros_w(), zeros_b(), zeros_b())


@dataclass(frozen=True)
class TrainConfig:
    algorithm: Algorithm
    seed: int
    learning_rate: float = 1e-4
    epochs: int = 60
    batch_size: int = 64
    weight_decay: float = 1e-5
    optimizer: OptimizerKind = OptimizerKind.NONE

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be at least 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be non-negative, got {self.weight_decay}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")


def _check_deltas(state: NetworkState, deltas: LayerDeltas) -> None:
    n = state.n_layers
    if len(deltas.dW) != n or len(deltas.db) != n:
        raise ShapeError(f"deltas hold {len(deltas.dW)} layers, state holds {n}")
    for i in range(n):
        if deltas.dW[i].shape != state.weights[i].shape:
            raise ShapeError(
                f"layer {i} delta is {deltas.dW[i].shape}, weights are {state.weights[i].shape}"
            )
        if len(deltas.db[i]) != len(state.biases[i]):
            raise ShapeError(
                f"layer {i} bias delta has length {len(deltas.db[i])}, "
                f"bias has {len(state.biases[i])}"
            )


def apply_update(
    state: NetworkState,
    deltas: LayerDeltas,
    config: TrainConfig,
    optimizer: OptimizerState,
    lr_factors: list[float],
) -> tuple[NetworkState, OptimizerState]:
    """One parameter update; returns fresh state and optimizer values.

    Plain mode: W <- (1 - lr*decay) W + lr*factor*dW and b <- b + lr*factor*db
    (deltas already carry the minus sign; biases are never decayed).
    Adam mode: standard bias-corrected moment update treating -delta as the
    gradient, followed by the same multiplicative decay on the weights.
    """
    _check_deltas(state, deltas)
    n = state.n_layers
    if len(lr_factors) != n:
        raise ShapeError(f"{len(lr_factors)} lr factors for {n} layers")
    lr = config.learning_rate
    decay = 1.0 - lr * config.weight_decay

    if optimizer.kind is OptimizerKind.NONE:
        new_w = [
            Matrix(decay * w.data + (lr * f) * dw.data)
            for w, dw, f in zip(state.weights, deltas.dW, lr_factors)
        ]
        new_b = [
            Vector(b.data + (lr * f) * db.data)
            for b, db, f in zip(state.biases, deltas.db, lr_factors)
        ]
        return NetworkState(state.spec, new_w, new_b), optimizer

    t = optimizer.step_count + 1
    correct1 = 1.0 - ADAM_BETA1**t
    correct2 = 1.0 - ADAM_BETA2**t

    def adam_step(param: np.ndarray, delta: np.ndarray, m: np.ndarray, v: np.ndarray, f: float):
        g = -delta
        m_new = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g
        v_new = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * g * g
        step = (lr * f) * (m_new / correct1) / (np.sqrt(v_new / correct2) + ADAM_EPS)
        return param - step, m_new, v_new

    new_w, new_b = [], []
    m_w, v_w, m_b, v_b = [], [], [], []
    for i, f in enumerate(lr_factors):
        w, mw, vw = adam_step(
            state.weights[i].data,
            deltas.dW[i].data,
            optimizer.first_moment_w[i].data,
            optimizer.second_moment_w[i].data,
            f,
        )
        new_w.append(Matrix(decay * w))
        m_w.append(Matrix(mw))
        v_w.append(Matrix(vw))
        b, mb, vb = adam_step(
            state.biases[i].data,
            deltas.db[i].data,
            optimizer.first_moment_b[i].data,
            optimizer.second_moment_b[i].data,
            f,
        )
        new_b.append(Vector(b))
        m_b.append(Vector(mb))
        v_b.append(Vector(vb))

    new_state = NetworkState(state.spec, new_w, new_b)
    new_opt = OptimizerState(optimizer.kind, m_w, v_w, m_b, v_b, t)
    return new_state, new_opt


def _one_hot_targets(labels: np.ndarray, n_classes: int) -> np.ndarray:
    targets = np.zeros((labels.shape[0], n_classes))
    targets[np.arange(labels.shape[0]), labels] = 1.0
    return targets


def _lr_factors_for(config: TrainConfig, n_layers: int) -> list[float]:
    if config.algorithm is Algorithm.WDFA:
        return wdfa_lr_factors(n_layers)
    return [1.0] * n_layers


def train_epoch(
    state: NetworkState,
    feedback: FeedbackState,
    optimizer: OptimizerState,
    dataset: Dataset,
    config: TrainConfig,
    shuffle_rng: np.random.Generator,
) -> tuple[NetworkState, FeedbackState, OptimizerState, float]:
    """One pass over the dataset in shuffled mini-batches.

    Per batch the deltas are averaged over the samples before the update.
    For USFA the feedback is re-synced to sign(W^T) after every update.
    Returns the new state/feedback/optimizer and the mean per-sample
    training loss of the epoch.
    """
    if dataset.n_samples == 0:
        raise ValueError("cannot train on an empty dataset")
    _check_feedback(state, feedback, config.algorithm)
    targets = _one_hot_targets(dataset.labels, state.spec.output_dim)
    factors = _lr_factors_for(config, state.n_layers)
    order = shuffle_rng.permutation(dataset.n_samples)
    loss_total = 0.0
    for start in range(0, dataset.n_samples, config.batch_size):
        idx = order[start : start + config.batch_size]
        pre, acts = forward_batch(state, dataset.inputs[idx])
        losses, out_delta = _loss_and_delta_batch(acts[-1], targets[idx])
        loss_total += float(losses.sum())
        m = idx.shape[0]
        dw_sums, db_sums = _backward_sums(config.algorithm, state, feedback, pre, acts, out_delta)
        deltas = LayerDeltas([Matrix(d / m) for d in dw_sums], [Vector(d / m) for d in db_sums])
        state, optimizer = apply_update(state, deltas, config, optimizer, factors)
        if config.algorithm is Algorithm.USFA:
            feedback = usfa_sync_feedback(state)
    return state, feedback, optimizer, loss_total / dataset.n_samples


def train_network(
    state: NetworkState,
    feedback: FeedbackState,
    optimizer: OptimizerState,
    dataset: Dataset,
    config: TrainConfig,
) -> tuple[NetworkState, FeedbackState, OptimizerState, list[float]]:
    """Full training run: config.epochs passes with a per-epoch loss curve.

    Sample order comes from the "shuffle" stream of config.seed and keeps
    advancing across epochs. For USFA the feedback is synced from the
    initial weights before the first update so B is well-defined at step 0.
    """
    shuffle_rng = substream(config.seed, "shuffle")
    if config.algorithm is Algorithm.USFA:
        feedback = usfa_sync_feedback(state)
    curve: list[float] = []
    for _ in range(config.epochs):
        state, feedback, optimizer, mean_loss = train_epoch(
            state, feedback, optimizer, dataset, config, shuffle_rng
        )
        curve.append(mean_loss)
    return state, feedback, optimizer, curve
