"""
Classifiers on low-dimensional PCA summaries of per-object statistics.

Each statistic family (mean, std, min, max) gets its own 2D PCA; the
variant decides which families are concatenated:

* ``mean``: 2 inputs
* ``mean+std``: 4 inputs
* ``all``: 8 inputs
"""
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal, Optional

import numpy
from numpy.typing import ArrayLike, NDArray

from surfeat.analytics.projection import Projection2D, pca_2d
from surfeat.exceptions import InvalidArgumentError, InvalidDataError
from surfeat.featurestore import STAT_NAMES, ObjectStats
from surfeat.logger import get_logger
from surfeat.nncore import autograd
from surfeat.nncore.autograd import default_dtype
from surfeat.nncore.layers import Linear, Module
from surfeat.nncore.optim import AdamW

VARIANTS = {"mean": ("mean",), "mean+std": ("mean", "std"), "all": STAT_NAMES}
# training architectures that run these classifiers, and the model each selects
STAT_ARCHITECTURES = {"pca-logistic": "logistic", "pca-mlp": "small-mlp"}
LOGISTIC_TOLERANCE = 1e-6
LOGISTIC_MAX_ITERATIONS = 10000
MLP_HIDDEN = 16
MLP_STEPS = 500

Variant = Literal["mean", "mean+std", "all"]
ModelKind = Literal["small-mlp", "logistic"]


class LogisticRegression:
    """
    Binary logistic regression with intercept, fit by full-batch gradient
    descent on the mean logistic loss.

    The step size is the inverse Lipschitz constant of the loss gradient.
    Iteration stops once the gradient norm drops below ``tolerance`` or
    after ``max_iterations``.
    """

    def __init__(
        self,
        *,
        tolerance: float = LOGISTIC_TOLERANCE,
        max_iterations: int = LOGISTIC_MAX_ITERATIONS,
    ):
        self.tolerance = tolerance
        self.max_iterations = max_iterations
        self.coef_: Optional[NDArray] = None
        self.intercept_: float = 0.0
        self.iterations_: int = 0
        self.gradient_norm_: float = numpy.inf

    @staticmethod
    def _design(inputs: ArrayLike) -> NDArray:
        inputs = numpy.asarray(inputs, dtype=numpy.float64)
        if inputs.ndim == 1:
            inputs = inputs[:, None]
        return numpy.column_stack([inputs, numpy.ones(inputs.shape[0])])

    def fit(self, inputs: ArrayLike, targets: ArrayLike) -> "LogisticRegression":
        """Fit to (n, d) inputs and binary targets."""
        design = self._design(inputs)
        targets = numpy.asarray(targets, dtype=numpy.float64)
        if targets.shape != (design.shape[0],):
            raise InvalidDataError("One target per input row is required.")
        count = design.shape[0]
        lipschitz = 0.25 * numpy.linalg.eigvalsh(design.T @ design / count).max()
        step = 1.0 / lipschitz
        weights = numpy.zeros(design.shape[1])
        gradient = numpy.zeros_like(weights)
        for iteration in range(1, self.max_iterations + 1):
            probabilities = 0.5 * (1.0 + numpy.tanh(0.5 * (design @ weights)))
            gradient = design.T @ (probabilities - targets) / count
            self.iterations_ = iteration
            if numpy.linalg.norm(gradient) < self.tolerance:
                break
            weights = weights - step * gradient
        self.gradient_norm_ = float(numpy.linalg.norm(gradient))
        self.coef_ = weights[:-1]
        self.intercept_ = float(weights[-1])
        return self

    def decision_function(self, inputs: ArrayLike) -> NDArray:
        """Signed distance-like score; positive means class 1."""
        if self.coef_ is None:
            raise InvalidArgumentError("Model is not fitted.")
        return self._design(inputs) @ numpy.append(self.coef_, self.intercept_)

    def predict(self, inputs: ArrayLike) -> NDArray:
        """Hard 0/1 labels."""
        return (self.decision_function(inputs) > 0).astype(numpy.int64)


class _SmallMLP(Module):
    def __init__(self, inputs: int):
        super().__init__()
        self.hidden = Linear(inputs, MLP_HIDDEN)
        self.out = Linear(MLP_HIDDEN, 2)

    def forward(self, inputs):
        return self.out(autograd.relu(self.hidden(inputs)))


@dataclass
class PCAStatClassifier:
    """
    Fitted PCA projections plus the downstream classifier.

    Parameters
    ----------
    variant: {"mean", "mean+std", "all"}
    model: {"small-mlp", "logistic"}
    projections: dict[str, Projection2D]
        One PCA per statistic family.
    scale: tuple[numpy.ndarray, numpy.ndarray]
        Mean and standard deviation used to standardize the PCA inputs.
    classifier: LogisticRegression or the small MLP module
    """

    variant: Variant
    model: ModelKind
    projections: dict
    scale: tuple
    classifier: object

    def inputs(self, stats: Sequence[ObjectStats]) -> NDArray:
        """Standardized concatenated PCA coordinates of each object."""
        blocks = [
            self.projections[name].transform(numpy.stack([record.get(name) for record in stats]))
            for name in VARIANTS[self.variant]
        ]
        mean, std = self.scale
        return (numpy.concatenate(blocks, axis=1) - mean) / std


def _validate_training_labels(labels: NDArray) -> None:
    if labels.size and (labels.min() < 0 or labels.max() > 1):
        raise InvalidDataError("Stat classifiers are binary; labels must be 0 or 1.")
    counts = numpy.bincount(labels, minlength=2)
    if (counts > 0).sum() < 2:
        raise InvalidDataError("Training set contains a single class.")
    if counts.min() < 2:
        raise InvalidDataError("Need at least 2 objects per class to fit.")


def pca_stat_classifier_fit(
    stats: Sequence[ObjectStats],
    labels: ArrayLike,
    *,
    variant: Variant = "mean",
    model: ModelKind = "logistic",
    seed: int = 0,
) -> PCAStatClassifier:
    """
    Fit PCA projections of the selected statistics and a classifier on them.

    Parameters
    ----------
    stats: sequence of :obj:`surfeat.featurestore.ObjectStats`
    labels: array-like
        Binary object labels.
    variant: {"mean", "mean+std", "all"}
    model: {"small-mlp", "logistic"}
    seed: int
        Initialization seed of the small MLP.
    """
    if variant not in VARIANTS:
        raise InvalidArgumentError(f"Unknown statistic variant: {variant}")
    if model not in ("small-mlp", "logistic"):
        raise InvalidArgumentError(f"Unknown classifier: {model}")
    labels = numpy.asarray(labels, dtype=numpy.int64)
    if labels.shape != (len(stats),):
        raise InvalidDataError("One label per object is required.")
    _validate_training_labels(labels)
    projections: dict[str, Projection2D] = {
        name: pca_2d(numpy.stack([record.get(name) for record in stats]))
        for name in VARIANTS[variant]
    }
    raw = numpy.concatenate([projections[name].coordinates for name in VARIANTS[variant]], axis=1)
    mean = raw.mean(axis=0)
    std = raw.std(axis=0)
    std[std == 0] = 1.0
    inputs = (raw - mean) / std

    if model == "logistic":
        classifier = LogisticRegression().fit(inputs, labels)
    else:
        with default_dtype(numpy.float64):
            classifier = _SmallMLP(inputs.shape[1]).reset_parameters(seed)
        optimizer = AdamW(classifier.named_parameters(), total_steps=MLP_STEPS)
        for _ in range(MLP_STEPS):
            optimizer.zero_grad()
            autograd.cross_entropy(classifier(inputs), labels).backward()
            optimizer.step()
    get_logger().info(
        f"Fitted {model} on {inputs.shape[1]} PCA inputs ({variant}) for {len(stats)} objects."
    )
    return PCAStatClassifier(
        variant=variant,
        model=model,
        projections=projections,
        scale=(mean, std),
        classifier=classifier,
    )


def pca_stat_classifier_predict(
    fitted: PCAStatClassifier, stats: Sequence[ObjectStats]
) -> NDArray:
    """Predicted 0/1 labels for new objects."""
    inputs = fitted.inputs(stats)
    if isinstance(fitted.classifier, LogisticRegression):
        return fitted.classifier.predict(inputs)
    logits = fitted.classifier(inputs).data
    return numpy.argmax(logits, axis=1).astype(numpy.int64)
