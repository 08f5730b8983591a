"""
Two-dimensional projections of per-object (or per-point) feature vectors:
PCA by power iteration with deflation, and exact t-SNE.
"""
import math
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy
import pandas
from numpy.typing import ArrayLike, NDArray
from scipy.spatial.distance import cdist

from surfeat.exceptions import InvalidArgumentError, InvalidDataError
from surfeat.logger import get_logger

POWER_TOLERANCE = 1e-10
POWER_MAX_ITERATIONS = 10000

TSNE_PERPLEXITY = 30.0
TSNE_ITERATIONS = 1000
TSNE_LEARNING_RATE = 200.0
TSNE_EXAGGERATION = 12.0
TSNE_EXAGGERATION_ITERATIONS = 250
TSNE_MOMENTUM = (0.5, 0.8)
TSNE_MOMENTUM_SWITCH = 250
TSNE_INIT_SCALE = 1e-4
TSNE_ENTROPY_TOLERANCE = 1e-4
TSNE_MAX_BISECTIONS = 50
TSNE_MIN_GAIN = 0.01
TSNE_GAIN_STEP = 0.2
TSNE_GAIN_DECAY = 0.8


@dataclass(frozen=True)
class Projection2D:
    """
    Parameters
    ----------
    coordinates: numpy.ndarray
        (n, 2) embedding.
    method: {"pca", "tsne"}
    labels: dict[str, numpy.ndarray]
        Label columns per embedded vector (class, dataset origin, part).
    components: numpy.ndarray, optional
        (2, d) principal axes (PCA only).
    explained_variance: numpy.ndarray, optional
        Shares of total variance of each axis (PCA only).
    center: numpy.ndarray, optional
        Mean subtracted before projecting (PCA only).
    """

    coordinates: NDArray
    method: Literal["pca", "tsne"]
    labels: dict = field(default_factory=dict)
    components: Optional[NDArray] = None
    explained_variance: Optional[NDArray] = None
    center: Optional[NDArray] = None

    def __post_init__(self):
        for name, values in self.labels.items():
            if len(values) != self.coordinates.shape[0]:
                raise InvalidDataError(
                    f"Label column {name} has {len(values)} rows, "
                    f"expected {self.coordinates.shape[0]}."
                )

    def transform(self, vectors: ArrayLike) -> NDArray:
        """Project new vectors onto the stored principal axes."""
        if self.components is None or self.center is None:
            raise InvalidArgumentError("Only PCA projections can embed new vectors.")
        vectors = numpy.asarray(vectors, dtype=numpy.float64)
        return (vectors - self.center) @ self.components.T

    def to_frame(self) -> pandas.DataFrame:
        """Coordinates and label columns as a table."""
        table = pandas.DataFrame(
            {"x": self.coordinates[:, 0], "y": self.coordinates[:, 1]}
        )
        for name, values in self.labels.items():
            table[name] = numpy.asarray(values)
        return table


def _fix_sign(vector: NDArray) -> NDArray:
    # largest-magnitude entry positive, first one on ties
    pivot = int(numpy.argmax(numpy.abs(vector)))
    return -vector if vector[pivot] < 0 else vector


def _power_iteration(matrix: NDArray, scale: float) -> tuple[float, NDArray]:
    start = int(numpy.argmax(numpy.linalg.norm(matrix, axis=0)))
    vector = matrix[:, start] / numpy.linalg.norm(matrix[:, start])
    value = 0.0
    for _ in range(POWER_MAX_ITERATIONS):
        product = matrix @ vector
        value = float(vector @ product)
        residual = numpy.linalg.norm(product - value * vector)
        if residual <= POWER_TOLERANCE * scale:
            break
        vector = product / numpy.linalg.norm(product)
    else:
        get_logger().warning(
            "Power iteration stopped at the iteration cap; eigenvalues may be clustered."
        )
    return value, vector


def _orthogonal_fallback(found: list[NDArray], dim: int) -> NDArray:
    # the basis vector least aligned with the components found so far
    basis = numpy.eye(dim)
    overlap = [sum(abs(v @ e) for v in found) for e in basis]
    vector = basis[int(numpy.argmin(overlap))]
    for previous in found:
        vector = vector - (vector @ previous) * previous
    return vector / numpy.linalg.norm(vector)


def principal_components(
    vectors: ArrayLike, n_components: int = 2
) -> tuple[NDArray, NDArray, NDArray]:
    """
    Leading eigenvectors of the covariance matrix by deflated power iteration.

    Returns
    -------
    tuple
        (n_components, d) unit components, their explained-variance
        shares and the data mean.
    """
    vectors = numpy.asarray(vectors, dtype=numpy.float64)
    if vectors.ndim != 2:
        raise InvalidDataError("Vectors must form an (n, d) matrix.")
    count, dim = vectors.shape
    if count < 3 or dim < 2:
        raise InvalidArgumentError(
            f"Need at least 3 vectors of dimension >= 2, got {vectors.shape}."
        )
    if not 1 <= n_components <= dim:
        raise InvalidArgumentError(f"n_components={n_components} must lie in [1, {dim}].")
    if not numpy.isfinite(vectors).all():
        raise InvalidDataError("Vectors must be finite.")
    center = vectors.mean(axis=0)
    centered = vectors - center
    covariance = centered.T @ centered / count
    total = float(numpy.trace(covariance))
    scale = max(total, 1.0)
    components: list[NDArray] = []
    shares = []
    residual = covariance.copy()
    for _ in range(n_components):
        if numpy.abs(residual).max() <= POWER_TOLERANCE * scale:
            components.append(_orthogonal_fallback(components, dim))
            shares.append(0.0)
            continue
        value, vector = _power_iteration(residual, scale)
        for previous in components:
            vector = vector - (vector @ previous) * previous
        vector = _fix_sign(vector / numpy.linalg.norm(vector))
        components.append(vector)
        shares.append(max(value, 0.0) / total if total > 0 else 0.0)
        residual = residual - value * numpy.outer(vector, vector)
    return numpy.stack(components), numpy.asarray(shares), center


def pca_2d(vectors: ArrayLike, *, labels: Optional[dict] = None) -> Projection2D:
    """
    Two-dimensional PCA of per-object vectors.

    Parameters
    ----------
    vectors: array-like
        (n, d) vectors, n >= 3 and d >= 2.
    labels: dict, optional
        Label columns carried into the projection.

    Returns
    -------
    :obj:`Projection2D`
    """
    components, shares, center = principal_components(vectors, 2)
    coordinates = (numpy.asarray(vectors, dtype=numpy.float64) - center) @ components.T
    return Projection2D(
        coordinates=coordinates,
        method="pca",
        labels=dict(labels or {}),
        components=components,
        explained_variance=shares,
        center=center,
    )


def conditional_affinities(
    vectors: ArrayLike, perplexity: float = TSNE_PERPLEXITY
) -> NDArray:
    """
    Row-normalized Gaussian affinities p(j|i) whose entropy matches
    ``log(perplexity)``, found by bisection on each point's precision.
    """
    vectors = numpy.asarray(vectors, dtype=numpy.float64)
    squared = cdist(vectors, vectors, "sqeuclidean")
    count = squared.shape[0]
    target = math.log(perplexity)
    affinities = numpy.zeros((count, count))
    unresolved = 0
    for row in range(count):
        distances = numpy.delete(squared[row], row)
        beta, low, high = 1.0, 0.0, numpy.inf
        for _ in range(TSNE_MAX_BISECTIONS):
            weights = numpy.exp(-(distances - distances.min()) * beta)
            total = weights.sum()
            entropy = (
                math.log(total) + beta * float((distances - distances.min()) @ weights) / total
            )
            if abs(entropy - target) < TSNE_ENTROPY_TOLERANCE:
                break
            if entropy > target:
                low = beta
                beta = beta * 2.0 if high == numpy.inf else (beta + high) / 2.0
            else:
                high = beta
                beta = (beta + low) / 2.0
        else:
            unresolved += 1
        affinities[row, numpy.arange(count) != row] = weights / total
    if unresolved:
        get_logger().warning(
            f"Bandwidth search hit the {TSNE_MAX_BISECTIONS}-step cap for "
            f"{unresolved} points (duplicate-heavy input?)."
        )
    return affinities


def tsne_2d(
    vectors: ArrayLike,
    *,
    perplexity: float = TSNE_PERPLEXITY,
    iterations: int = TSNE_ITERATIONS,
    seed: int = 0,
    labels: Optional[dict] = None,
) -> Projection2D:
    """
    Exact t-SNE embedding into two dimensions.

    Early exaggeration (x12) is applied for the first 250 iterations and
    the momentum switches from 0.5 to 0.8 at iteration 250. Steps use a
    learning rate of 200 with per-coordinate adaptive gains.

    Parameters
    ----------
    vectors: array-like
        (n, d) input with n >= 3 * perplexity.
    perplexity: float
    iterations: int
    seed: int
        Seed of the Gaussian initialization (scale 1e-4).
    labels: dict, optional
        Label columns carried into the projection.
    """
    vectors = numpy.asarray(vectors, dtype=numpy.float64)
    count = vectors.shape[0]
    if perplexity <= 0 or count < 3 * perplexity:
        raise InvalidArgumentError(
            f"t-SNE needs at least 3 x perplexity = {3 * perplexity:g} vectors, got {count}."
        )
    conditional = conditional_affinities(vectors, perplexity)
    joint = numpy.maximum((conditional + conditional.T) / (2.0 * count), 1e-12)

    rng = numpy.random.default_rng(seed)
    embedding = rng.standard_normal((count, 2)) * TSNE_INIT_SCALE
    velocity = numpy.zeros_like(embedding)
    gains = numpy.ones_like(embedding)
    for iteration in range(iterations):
        exaggeration = TSNE_EXAGGERATION if iteration < TSNE_EXAGGERATION_ITERATIONS else 1.0
        momentum = TSNE_MOMENTUM[0] if iteration < TSNE_MOMENTUM_SWITCH else TSNE_MOMENTUM[1]
        squared = (embedding**2).sum(axis=1)
        kernel = 1.0 / (
            1.0 + squared[:, None] + squared[None, :] - 2.0 * embedding @ embedding.T
        )
        numpy.fill_diagonal(kernel, 0.0)
        similarity = numpy.maximum(kernel / kernel.sum(), 1e-12)
        weights = (exaggeration * joint - similarity) * kernel
        gradient = 4.0 * (weights.sum(axis=1)[:, None] * embedding - weights @ embedding)
        same_sign = (gradient > 0) == (velocity > 0)
        gains = numpy.maximum(
            numpy.where(same_sign, gains * TSNE_GAIN_DECAY, gains + TSNE_GAIN_STEP), TSNE_MIN_GAIN
        )
        velocity = momentum * velocity - TSNE_LEARNING_RATE * gains * gradient
        embedding = embedding + velocity
        embedding = embedding - embedding.mean(axis=0)
    return Projection2D(coordinates=embedding, method="tsne", labels=dict(labels or {}))


def project_points(
    features: ArrayLike,
    point_labels: ArrayLike,
    *,
    method: Literal["pca", "tsne"] = "pca",
    max_points: Optional[int] = None,
    seed: int = 0,
    perplexity: float = TSNE_PERPLEXITY,
) -> Projection2D:
    """
    Project the raw per-point features of a single object, labeled by part.

    ``max_points`` draws a seeded subset first (exact t-SNE is quadratic).
    """
    features = numpy.asarray(features, dtype=numpy.float64)
    point_labels = numpy.asarray(point_labels)
    if point_labels.shape != (features.shape[0],):
        raise InvalidDataError("One part label per point is required.")
    if max_points is not None and features.shape[0] > max_points:
        keep = numpy.sort(
            numpy.random.default_rng(seed).choice(features.shape[0], max_points, replace=False)
        )
        features, point_labels = features[keep], point_labels[keep]
    labels = {"part": point_labels}
    if method == "pca":
        return pca_2d(features, labels=labels)
    if method == "tsne":
        return tsne_2d(features, perplexity=perplexity, seed=seed, labels=labels)
    raise InvalidArgumentError(f"Unknown projection method: {method}")
