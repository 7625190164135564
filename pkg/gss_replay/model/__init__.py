from .evaluation import Evaluation, evaluate
from .mlp import (
    Example,
    GradientVector,
    MlpModel,
    batch_gradient,
    example_gradient,
    forward,
    hidden_features,
    loss,
    per_example_gradients,
    predict_logits,
    sgd_step,
    softmax_probabilities,
    stack_examples,
)

__all__ = [
    "Evaluation",
    "Example",
    "GradientVector",
    "MlpModel",
    "batch_gradient",
    "evaluate",
    "example_gradient",
    "forward",
    "hidden_features",
    "loss",
    "per_example_gradients",
    "predict_logits",
    "sgd_step",
    "softmax_probabilities",
    "stack_examples",
]
