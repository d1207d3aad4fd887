"""Fully connected sigmoid networks with hand-written backpropagation.

Parameters live in one flat float64 vector. Layers are packed in order; for
each layer the ``fan_in x fan_out`` weight matrix (row-major) comes first,
followed by its ``fan_out`` biases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import DimensionError

HIDDEN_ACTIVATIONS = ("sigmoid",)
OUTPUT_ACTIVATIONS = {"linear": "mse", "softmax": "cross_entropy"}


class ModeError(ValueError):
    """Operation is not defined for this kind of network."""


@dataclass(frozen=True)
class NetworkSpec:
    layer_sizes: tuple[int, ...]
    hidden_activation: str = "sigmoid"
    output_activation: str = "linear"
    loss: str = "mse"

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ValueError("a network needs at least an input and an output layer")
        if min(sizes) < 1:
            raise ValueError(f"layer sizes must be >= 1, got {sizes}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"unsupported hidden activation {self.hidden_activation!r}")
        if OUTPUT_ACTIVATIONS.get(self.output_activation) != self.loss:
            raise ValueError(
                f"output activation {self.output_activation!r} cannot be paired with loss {self.loss!r}"
            )

    @classmethod
    def parse(cls, text: str, **kw) -> "NetworkSpec":
        """Build a spec from a dashed size list such as ``"11-10-4-1"``."""
        return cls(tuple(int(p) for p in text.strip().split("-")), **kw)

    @property
    def n_params(self) -> int:
        return param_count(self)

    @property
    def is_classifier(self) -> bool:
        return self.loss == "cross_entropy"

    def __str__(self):
        return "-".join(map(str, self.layer_sizes))


@dataclass(frozen=True)
class Batch:
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        y = np.asarray(self.targets, dtype=np.float64)
        if y.ndim == 1:
            y = y[:, None]
        if x.shape[0] != y.shape[0] or x.shape[0] < 1:
            raise DimensionError(f"inputs have {x.shape[0]} rows, targets {y.shape[0]}")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)

    @property
    def size(self) -> int:
        return self.inputs.shape[0]


def param_count(spec: NetworkSpec) -> int:
    sizes = spec.layer_sizes
    return sum((fan_in + 1) * fan_out for fan_in, fan_out in zip(sizes[:-1], sizes[1:]))


def unpack(spec: NetworkSpec, w, dtype=np.float64) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a flat parameter vector into per-layer ``(W, b)`` views."""
    w = np.asarray(w, dtype=dtype)
    if w.ndim != 1 or w.size != param_count(spec):
        raise DimensionError(f"{spec} needs {param_count(spec)} parameters, got shape {w.shape}")
    layers = []
    pos = 0
    for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        W = w[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out)
        pos += fan_in * fan_out
        b = w[pos:pos + fan_out]
        pos += fan_out
        layers.append((W, b))
    return layers


def sigmoid(z):
    # branch on sign so exp never overflows
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def _check_batch(spec, batch):
    if batch.inputs.shape[1] != spec.layer_sizes[0]:
        raise DimensionError(f"{spec} expects {spec.layer_sizes[0]} inputs, got {batch.inputs.shape[1]}")
    if batch.targets.shape[1] != spec.layer_sizes[-1]:
        raise DimensionError(f"{spec} has {spec.layer_sizes[-1]} outputs, targets have {batch.targets.shape[1]}")


def _forward(spec, layers, x):
    """Return the list of layer activations (input first) and the output pre-activation."""
    acts = [x]
    a = x
    for W, b in layers[:-1]:
        a = sigmoid(a @ W + b)
        acts.append(a)
    W, b = layers[-1]
    return acts, a @ W + b


def predict(spec: NetworkSpec, w, inputs) -> np.ndarray:
    """Network outputs (class probabilities for softmax networks)."""
    x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    _, z = _forward(spec, unpack(spec, w), x)
    if spec.output_activation == "softmax":
        return np.exp(_log_softmax(z))
    return z


def _per_sample_loss(spec, z, y):
    if spec.loss == "mse":
        r = z - y
        return 0.5 * np.sum(r * r, axis=1)
    return -np.sum(y * _log_softmax(z), axis=1)


def loss(spec: NetworkSpec, w, batch: Batch, dtype=np.float64):
    """Mean per-sample loss: ``0.5*||out - target||^2`` or cross-entropy.

    ``dtype=np.longdouble`` evaluates in extended precision (used by finite
    difference checks) and returns a scalar of that type.
    """
    _check_batch(spec, batch)
    x = batch.inputs.astype(dtype)
    _, z = _forward(spec, unpack(spec, w, dtype), x)
    value = np.mean(_per_sample_loss(spec, z, batch.targets.astype(dtype)))
    return float(value) if dtype == np.float64 else value


def loss_and_gradient(spec: NetworkSpec, w, batch: Batch) -> tuple[float, np.ndarray]:
    _check_batch(spec, batch)
    layers = unpack(spec, w)
    acts, z = _forward(spec, layers, batch.inputs)
    y = batch.targets
    b = batch.size
    value = float(np.mean(_per_sample_loss(spec, z, y)))

    # linear+MSE and softmax+CE share the output delta (out - target)
    out = z if spec.loss == "mse" else np.exp(_log_softmax(z))
    delta = (out - y) / b

    grads = []
    for li in range(len(layers) - 1, -1, -1):
        W, _ = layers[li]
        a_prev = acts[li]
        grads.append((a_prev.T @ delta).ravel())
        grads.append(delta.sum(axis=0))
        if li > 0:
            delta = (delta @ W.T) * a_prev * (1.0 - a_prev)
    # grads were collected output-first as (W, b) pairs; restore packing order
    pairs = [(grads[i], grads[i + 1]) for i in range(0, len(grads), 2)][::-1]
    return value, np.concatenate([g for pair in pairs for g in pair])


def gradient(spec: NetworkSpec, w, batch: Batch) -> np.ndarray:
    return loss_and_gradient(spec, w, batch)[1]


def rmse(spec: NetworkSpec, w, batch: Batch) -> float:
    """Root mean squared residual over all samples and outputs."""
    if spec.is_classifier:
        raise ModeError("RMSE is defined for regression networks only")
    r = predict(spec, w, batch.inputs) - batch.targets
    return float(np.sqrt(np.mean(r * r)))


def accuracy(spec: NetworkSpec, w, batch: Batch) -> float:
    if not spec.is_classifier:
        raise ModeError("accuracy is defined for classification networks only")
    _check_batch(spec, batch)
    pred = np.argmax(predict(spec, w, batch.inputs), axis=1)
    return float(np.mean(pred == np.argmax(batch.targets, axis=1)))


class Objective:
    """Training objective over a fixed dataset, counting gradient evaluations.

    ``full_gradient`` evaluates the whole training set; ``batch_gradient``
    evaluates the rows selected by an index array. Each call bumps the
    matching counter, which the harness reports as the optimizer's budget.
    """

    def __init__(self, spec: NetworkSpec, inputs, targets):
        self.spec = spec
        self.data = Batch(inputs, targets)
        _check_batch(spec, self.data)
        self.full_grad_evals = 0
        self.minibatch_grad_evals = 0

    @property
    def n_samples(self) -> int:
        return self.data.size

    @property
    def dim(self) -> int:
        return param_count(self.spec)

    def batch(self, idx) -> Batch:
        return Batch(self.data.inputs[idx], self.data.targets[idx])

    def loss(self, w, idx=None) -> float:
        return loss(self.spec, w, self.data if idx is None else self.batch(idx))

    def full_gradient(self, w) -> np.ndarray:
        self.full_grad_evals += 1
        return gradient(self.spec, w, self.data)

    def batch_gradient(self, w, idx) -> np.ndarray:
        self.minibatch_grad_evals += 1
        return gradient(self.spec, w, self.batch(idx))
