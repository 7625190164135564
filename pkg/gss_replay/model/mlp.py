"""
Feed-forward classifier with exact analytic gradients.

The network is input -> H1 -> ... -> K with ReLU hidden layers and a
softmax cross-entropy loss. Gradients are flattened in a fixed order so
that gradient vectors from different examples live in the same space:

    layer-major, weights before biases, row-major within each matrix.

Weight matrices have shape (out, in), so a layer computes ``W @ x + b``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import numpy.typing as npt
from scipy.special import logsumexp, softmax

from ..errors import EmptyInputError, LabelError, NonFiniteGradientError, ShapeError

FloatArray = npt.NDArray[np.float64]

# Flattened parameter-space gradient of a loss. One row per example when stacked.
GradientVector = FloatArray

DEFAULT_HIDDEN_SIZES = (100, 100)
DEFAULT_LEARNING_RATE = 0.05


@dataclass(frozen=True, eq=False)
class Example:
    """One labeled input flowing through the stream.

    Carries no task information; task ids live on the evaluation side
    of a stream only.
    """

    features: FloatArray
    label: int
    stream_index: int = -1

    def with_index(self, stream_index: int) -> Example:
        return Example(self.features, self.label, stream_index)

    def with_features(self, features: FloatArray) -> Example:
        return Example(features, self.label, self.stream_index)


@dataclass(eq=False)
class MlpModel:
    """Parameter record of a small ReLU network."""

    weights: list[FloatArray]
    biases: list[FloatArray]
    learning_rate: float = DEFAULT_LEARNING_RATE
    _shapes: list[tuple[int, int]] = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeError("MlpModel needs one bias vector per weight matrix")
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ShapeError(f"Layer {i}: weight {w.shape} and bias {b.shape} disagree")
            if i > 0 and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ShapeError(
                    f"Layer {i} expects {w.shape[1]} inputs, previous layer emits "
                    f"{self.weights[i - 1].shape[0]}"
                )
        self._shapes = [w.shape for w in self.weights]

    @classmethod
    def initialize(
        cls,
        input_dim: int,
        n_classes: int,
        hidden_sizes: Sequence[int] = DEFAULT_HIDDEN_SIZES,
        learning_rate: float = DEFAULT_LEARNING_RATE,
        rng: Optional[np.random.Generator] = None,
    ) -> MlpModel:
        """Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases."""
        rng = rng if rng is not None else np.random.default_rng(0)
        sizes = [input_dim, *hidden_sizes, n_classes]
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(weights, biases, learning_rate)

    @property
    def input_dim(self) -> int:
        return self._shapes[0][1]

    @property
    def n_classes(self) -> int:
        return self._shapes[-1][0]

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return tuple(shape[0] for shape in self._shapes[:-1])

    @property
    def parameter_count(self) -> int:
        return sum(out * inp + out for out, inp in self._shapes)

    def flatten(self) -> FloatArray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def load_flat(self, vector: FloatArray) -> None:
        """Overwrite all parameters from a flattened vector, in place."""
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.parameter_count,):
            raise ShapeError(
                f"Flat parameter vector has shape {vector.shape}, "
                f"model has {self.parameter_count} parameters"
            )
        offset = 0
        for i, (out, inp) in enumerate(self._shapes):
            n_w = out * inp
            self.weights[i] = vector[offset:offset + n_w].reshape(out, inp).copy()
            offset += n_w
            self.biases[i] = vector[offset:offset + out].copy()
            offset += out

    def unflatten(self, vector: FloatArray) -> MlpModel:
        """Return a new model with this architecture and the given parameters."""
        model = self.copy()
        model.load_flat(vector)
        return model

    def copy(self) -> MlpModel:
        return MlpModel(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.learning_rate,
        )


def stack_examples(examples: Sequence[Example]) -> tuple[FloatArray, npt.NDArray[np.int64]]:
    """Stack examples into a feature matrix and a label vector."""
    if len(examples) == 0:
        raise EmptyInputError("Cannot stack an empty sequence of examples")
    features = np.stack([np.asarray(e.features, dtype=np.float64) for e in examples])
    labels = np.fromiter((e.label for e in examples), dtype=np.int64, count=len(examples))
    return features, labels


def _check_inputs(model: MlpModel, features: FloatArray) -> None:
    if features.ndim != 2 or features.shape[1] != model.input_dim:
        raise ShapeError(
            f"Input has {features.shape[-1] if features.ndim else 0} features, "
            f"model expects {model.input_dim}"
        )


def _check_labels(model: MlpModel, labels: npt.NDArray[np.int64]) -> None:
    if labels.size and (labels.min() < 0 or labels.max() >= model.n_classes):
        bad = labels[(labels < 0) | (labels >= model.n_classes)][0]
        raise LabelError(f"Label {bad} outside [0, {model.n_classes})")


def _forward_pass(model: MlpModel, features: FloatArray) -> tuple[list[FloatArray], list[FloatArray], FloatArray]:
    """Batched forward pass keeping activations and pre-activations for backprop."""
    activations = [features]
    pre_activations = []
    a = features
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        z = a @ w.T + b
        a = np.maximum(z, 0.0)
        pre_activations.append(z)
        activations.append(a)
    logits = a @ model.weights[-1].T + model.biases[-1]
    return activations, pre_activations, logits


def forward(model: MlpModel, features: FloatArray) -> FloatArray:
    """Pre-softmax logits (length K) for one feature vector."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 1:
        raise ShapeError(f"forward expects a 1-D feature vector, got shape {features.shape}")
    batch = features[None, :]
    _check_inputs(model, batch)
    return _forward_pass(model, batch)[2][0]


def predict_logits(model: MlpModel, features: FloatArray) -> FloatArray:
    """Logits for a (n, input_dim) feature matrix."""
    features = np.asarray(features, dtype=np.float64)
    _check_inputs(model, features)
    return _forward_pass(model, features)[2]


def hidden_features(model: MlpModel, features: FloatArray) -> FloatArray:
    """Activations of the last hidden layer (the input itself without hidden layers).

    Accepts a single feature vector or an (n, input_dim) matrix.
    """
    features = np.asarray(features, dtype=np.float64)
    single = features.ndim == 1
    batch = features[None, :] if single else features
    _check_inputs(model, batch)
    activations, _, _ = _forward_pass(model, batch)
    return activations[-1][0] if single else activations[-1]


def softmax_probabilities(logits: FloatArray) -> FloatArray:
    return softmax(np.asarray(logits, dtype=np.float64), axis=-1)


def loss(logits: FloatArray, label: int) -> float:
    """Softmax cross-entropy in log-sum-exp form."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1:
        raise ShapeError(f"loss expects 1-D logits, got shape {logits.shape}")
    if not 0 <= label < logits.shape[0]:
        raise LabelError(f"Label {label} outside [0, {logits.shape[0]})")
    return max(float(logsumexp(logits) - logits[label]), 0.0)


def per_example_gradients(model: MlpModel, examples: Sequence[Example]) -> FloatArray:
    """Gradients of the loss for each example, one flattened row per example."""
    features, labels = stack_examples(examples)
    _check_inputs(model, features)
    _check_labels(model, labels)
    n = features.shape[0]

    activations, pre_activations, logits = _forward_pass(model, features)
    delta = softmax(logits, axis=1)
    delta[np.arange(n), labels] -= 1.0

    layer_grads: list[tuple[FloatArray, FloatArray]] = []
    for layer in range(len(model.weights) - 1, -1, -1):
        a_prev = activations[layer]
        grad_w = delta[:, :, None] * a_prev[:, None, :]
        layer_grads.append((grad_w.reshape(n, -1), delta))
        if layer > 0:
            delta = (delta @ model.weights[layer]) * (pre_activations[layer - 1] > 0)

    parts = []
    for grad_w, grad_b in reversed(layer_grads):
        parts.append(grad_w)
        parts.append(grad_b)
    gradients = np.concatenate(parts, axis=1)

    if not np.all(np.isfinite(gradients)):
        raise NonFiniteGradientError(
            f"Non-finite gradient for examples {[e.stream_index for e in examples]}"
        )
    return gradients


def example_gradient(model: MlpModel, example: Example) -> GradientVector:
    """Exact gradient of loss(forward(x), y) with respect to the flattened parameters."""
    return per_example_gradients(model, [example])[0]


def batch_gradient(model: MlpModel, batch: Sequence[Example]) -> GradientVector:
    """Mean of the per-example gradients of a nonempty batch."""
    if len(batch) == 0:
        raise EmptyInputError("batch_gradient needs at least one example")
    return per_example_gradients(model, batch).mean(axis=0)


def sgd_step(model: MlpModel, direction: GradientVector, lr: float) -> MlpModel:
    """parameters <- parameters - lr * direction, applied in place."""
    direction = np.asarray(direction, dtype=np.float64)
    if direction.shape != (model.parameter_count,):
        raise ShapeError(
            f"Update direction has shape {direction.shape}, "
            f"model has {model.parameter_count} parameters"
        )
    if lr == 0.0:
        return model
    model.load_flat(model.flatten() - lr * direction)
    return model
