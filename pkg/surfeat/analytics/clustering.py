"""
k-means with farthest-first seeding and silhouette-based cluster-count
selection.
"""
from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy
import pandas
from numpy.typing import ArrayLike, NDArray
from scipy.spatial.distance import cdist
from sklearn.metrics import silhouette_score as _sklearn_silhouette

from surfeat.exceptions import InvalidArgumentError, InvalidDataError
from surfeat.logger import get_logger

MAX_ITERATIONS = 300
DEFAULT_K_RANGE = range(2, 21)


@dataclass(frozen=True)
class ClusterAssignment:
    """
    Parameters
    ----------
    k: int
    labels: numpy.ndarray
        Cluster index per object.
    centroids: numpy.ndarray
        (k, d) cluster centers.
    inertia: float
        Sum of squared distances to the assigned centers.
    silhouette: float
        Mean silhouette, NaN when undefined (a single cluster or k = n).
    inertia_history: list[float]
        Inertia after every assignment step.
    """

    k: int
    labels: NDArray
    centroids: NDArray
    inertia: float
    silhouette: float
    inertia_history: list = field(default_factory=list)


def silhouette_score(points: ArrayLike, labels: ArrayLike) -> float:
    """Mean silhouette coefficient; NaN when fewer than 2 or more than n-1 clusters."""
    points = numpy.asarray(points, dtype=numpy.float64)
    labels = numpy.asarray(labels)
    clusters = numpy.unique(labels).size
    if not 2 <= clusters <= points.shape[0] - 1:
        return float("nan")
    return float(_sklearn_silhouette(points, labels, metric="euclidean"))


def _farthest_first(points: NDArray, k: int, rng: numpy.random.Generator) -> NDArray:
    chosen = [int(rng.integers(points.shape[0]))]
    nearest = cdist(points, points[chosen]).min(axis=1)
    for _ in range(1, k):
        index = int(numpy.argmax(nearest))
        chosen.append(index)
        nearest = numpy.minimum(nearest, cdist(points, points[[index]])[:, 0])
    return points[chosen].copy()


def kmeans(
    points: ArrayLike, k: int, seed: int = 0, *, max_iterations: int = MAX_ITERATIONS
) -> ClusterAssignment:
    """
    Lloyd's algorithm from a seeded farthest-first start.

    Iterates until the assignment stops changing or ``max_iterations``
    is reached. A cluster that loses all members is reseeded at the
    point farthest from its current center.

    Parameters
    ----------
    points: array-like
        (n, d) points, e.g. PCA or t-SNE coordinates.
    k: int
        Cluster count, ``1 <= k <= n``.
    seed: int

    Returns
    -------
    :obj:`ClusterAssignment`
    """
    points = numpy.asarray(points, dtype=numpy.float64)
    if points.ndim != 2 or not numpy.isfinite(points).all():
        raise InvalidDataError("Points must be a finite (n, d) matrix.")
    count = points.shape[0]
    if not 1 <= k <= count:
        raise InvalidArgumentError(f"k={k} must lie in [1, {count}].")
    rng = numpy.random.default_rng(seed)
    centroids = _farthest_first(points, k, rng)
    labels = None
    history = []
    for _ in range(max_iterations):
        distances = cdist(points, centroids, "sqeuclidean")
        new_labels = numpy.argmin(distances, axis=1)
        for cluster in range(k):
            if numpy.any(new_labels == cluster):
                continue
            own = distances[numpy.arange(count), new_labels]
            farthest = int(numpy.argmax(own))
            get_logger().warning(
                f"Cluster {cluster} is empty; reseeding at point {farthest}."
            )
            centroids[cluster] = points[farthest]
            distances = cdist(points, centroids, "sqeuclidean")
            new_labels = numpy.argmin(distances, axis=1)
        history.append(float(distances[numpy.arange(count), new_labels].sum()))
        if labels is not None and numpy.array_equal(labels, new_labels):
            break
        labels = new_labels
        centroids = numpy.stack(
            [
                points[labels == cluster].mean(axis=0)
                if numpy.any(labels == cluster)
                else centroids[cluster]
                for cluster in range(k)
            ]
        )
    inertia = float(((points - centroids[labels]) ** 2).sum())
    return ClusterAssignment(
        k=k,
        labels=labels,
        centroids=centroids,
        inertia=inertia,
        silhouette=silhouette_score(points, labels),
        inertia_history=history,
    )


def select_k(
    points: ArrayLike, k_range: Iterable[int] = DEFAULT_K_RANGE, seed: int = 0
) -> tuple[int, pandas.DataFrame]:
    """
    Pick the cluster count with the highest mean silhouette (lowest k on ties).

    The range is clipped to [2, n - 1].

    Returns
    -------
    tuple[int, pandas.DataFrame]
        The selected k and a table with columns ``k``, ``silhouette``, ``inertia``.
    """
    points = numpy.asarray(points, dtype=numpy.float64)
    candidates = [k for k in k_range if 2 <= k <= points.shape[0] - 1]
    if not candidates:
        raise InvalidArgumentError(
            f"No cluster count within [2, {points.shape[0] - 1}] to evaluate."
        )
    rows = []
    for k in candidates:
        assignment = kmeans(points, k, seed)
        rows.append({"k": k, "silhouette": assignment.silhouette, "inertia": assignment.inertia})
    table = pandas.DataFrame(rows, columns=["k", "silhouette", "inertia"])
    scores = table["silhouette"].to_numpy()
    if numpy.isnan(scores).all():
        return candidates[0], table
    best = int(numpy.nanargmax(scores))
    return int(table["k"].iloc[best]), table
