"""
Deterministic point-set kernels: sampling, neighborhood search and
cloud normalization used by all models.

All kernels compute exact Euclidean distances in double precision and
break ties by lowest index.
"""
from dataclasses import dataclass, field
from typing import Literal, Optional, Union

import numpy
from numpy.typing import ArrayLike, NDArray
from scipy.spatial.distance import cdist

from surfeat.exceptions import InvalidArgumentError, InvalidDataError
from surfeat.logger import get_logger

SAMPLE_SIZES = (512, 1024, 2048)
_NORMAL_TOLERANCE = 1e-4


@dataclass(frozen=True)
class PointCloud:
    """
    A set of 3D points in normalized model units with optional unit normals.

    Parameters
    ----------
    positions: numpy.ndarray
        (N, 3) coordinates.
    normals: numpy.ndarray, optional
        (N, 3) unit normals.
    """

    positions: NDArray
    normals: Optional[NDArray] = None

    def __post_init__(self):
        positions = numpy.asarray(self.positions, dtype=numpy.float64)
        if positions.ndim != 2 or positions.shape[1] != 3:
            raise InvalidDataError(
                f"Positions must have shape (N, 3), got {positions.shape}."
            )
        if not numpy.isfinite(positions).all():
            raise InvalidDataError("Point positions must be finite.")
        object.__setattr__(self, "positions", positions)
        if self.normals is not None:
            normals = numpy.asarray(self.normals, dtype=numpy.float64)
            if normals.shape != positions.shape:
                raise InvalidDataError(
                    f"Normals shape {normals.shape} does not match "
                    f"positions shape {positions.shape}."
                )
            lengths = numpy.linalg.norm(normals, axis=1)
            if not numpy.all(numpy.abs(lengths - 1.0) <= _NORMAL_TOLERANCE):
                raise InvalidDataError("Normals must have unit length.")
            object.__setattr__(self, "normals", normals)

    @property
    def count(self) -> int:
        """Number of points in the cloud."""
        return int(self.positions.shape[0])

    def take(self, indices: ArrayLike) -> "PointCloud":
        """Sub-cloud (or resampled cloud) at the given indices."""
        indices = numpy.asarray(indices, dtype=numpy.int64)
        return PointCloud(
            positions=self.positions[indices],
            normals=None if self.normals is None else self.normals[indices],
        )


@dataclass(frozen=True)
class NeighborhoodIndex:
    """
    Per-center neighbor lists produced by :func:`knn` or :func:`radius_group`.

    Parameters
    ----------
    centers: numpy.ndarray
        Center indices (source-cloud indices for radius groups,
        query positions for k-nearest searches).
    members: tuple[numpy.ndarray, ...]
        Member indices per center, nearest first.
    mode: {"k-nearest", "radius-capped"}
    distances: tuple[numpy.ndarray, ...]
        Member distances per center, aligned with ``members``.
    """

    centers: NDArray
    members: tuple
    mode: Literal["k-nearest", "radius-capped"]
    distances: tuple = field(default=())

    def __len__(self) -> int:
        return len(self.members)

    def padded(self, width: Optional[int] = None) -> NDArray:
        """
        Dense (num_centers, width) member array. Short groups are padded
        by repeating their first (nearest) member, which leaves any
        symmetric max aggregation unchanged.
        """
        if width is None:
            width = max((len(group) for group in self.members), default=0)
        out = numpy.empty((len(self.members), width), dtype=numpy.int64)
        for row, group in enumerate(self.members):
            group = group[:width]
            out[row, : len(group)] = group
            out[row, len(group) :] = group[0]
        return out


@dataclass(frozen=True)
class SampledCloud:
    """Result of :func:`sample_to_fixed`: the cloud plus carried per-point data."""

    cloud: PointCloud
    indices: NDArray
    start: Optional[int]
    features: Optional[NDArray] = None
    labels: Optional[NDArray] = None


def _positions(cloud: Union[PointCloud, ArrayLike]) -> NDArray:
    if isinstance(cloud, PointCloud):
        return cloud.positions
    return PointCloud(positions=cloud).positions


def pairwise_distances(first: ArrayLike, second: ArrayLike) -> NDArray:
    """Exact double precision Euclidean distances between two point sets."""
    return cdist(
        numpy.asarray(first, dtype=numpy.float64).reshape(-1, 3),
        numpy.asarray(second, dtype=numpy.float64).reshape(-1, 3),
    )


def farthest_point_sample(
    cloud: Union[PointCloud, ArrayLike], k: int, start: int = 0
) -> NDArray:
    """
    Greedy farthest point sampling.

    Each new index maximizes the minimum distance to all previously
    selected points; ties go to the lowest index.

    Parameters
    ----------
    cloud: :obj:`PointCloud` or array-like
        The source cloud.
    k: int
        Number of points to select, ``1 <= k <= count``.
    start: int
        Index of the first selected point.

    Returns
    -------
    numpy.ndarray
        ``k`` distinct indices in selection order.
    """
    positions = _positions(cloud)
    count = positions.shape[0]
    if count == 0:
        raise InvalidArgumentError("Cannot sample from an empty cloud.")
    if not 1 <= k <= count:
        raise InvalidArgumentError(f"k={k} must be in [1, {count}].")
    if not 0 <= start < count:
        raise InvalidArgumentError(f"start={start} must be in [0, {count}).")

    selected = numpy.empty(k, dtype=numpy.int64)
    selected[0] = start
    min_dist = numpy.linalg.norm(positions - positions[start], axis=1)
    min_dist[start] = -numpy.inf
    for position in range(1, k):
        # argmax returns the first occurrence, i.e. the lowest index
        index = int(numpy.argmax(min_dist))
        selected[position] = index
        min_dist = numpy.minimum(
            min_dist, numpy.linalg.norm(positions - positions[index], axis=1)
        )
        min_dist[selected[: position + 1]] = -numpy.inf
    return selected


def knn(
    cloud: Union[PointCloud, ArrayLike], queries: ArrayLike, k: int
) -> NeighborhoodIndex:
    """
    The ``k`` nearest cloud points of every query, nearest first.

    Ties in distance are broken by lowest index.
    """
    positions = _positions(cloud)
    count = positions.shape[0]
    if not 1 <= k <= count:
        raise InvalidArgumentError(f"k={k} must be in [1, {count}].")
    distances = pairwise_distances(queries, positions)
    # stable sort keeps equal distances in index order
    order = numpy.argsort(distances, axis=1, kind="stable")[:, :k]
    nearest = numpy.take_along_axis(distances, order, axis=1)
    return NeighborhoodIndex(
        centers=numpy.arange(distances.shape[0], dtype=numpy.int64),
        members=tuple(order),
        mode="k-nearest",
        distances=tuple(nearest),
    )


def knn_indices(positions: NDArray, k: int) -> NDArray:
    """Dense (N, k) k-nearest member array of a cloud against itself."""
    return numpy.stack(knn(positions, positions, k).members)


def radius_group(
    cloud: Union[PointCloud, ArrayLike],
    centers: ArrayLike,
    radius: float,
    cap: int,
) -> NeighborhoodIndex:
    """
    Ball query: up to ``cap`` points within ``radius`` of each center,
    nearest first. The center itself always qualifies.
    """
    if radius <= 0:
        raise InvalidArgumentError(f"radius={radius} must be positive.")
    if cap < 1:
        raise InvalidArgumentError(f"cap={cap} must be at least 1.")
    positions = _positions(cloud)
    centers = numpy.asarray(centers, dtype=numpy.int64)
    distances = pairwise_distances(positions[centers], positions)
    order = numpy.argsort(distances, axis=1, kind="stable")
    members = []
    member_distances = []
    for row, center in enumerate(centers):
        ranked = order[row]
        inside = ranked[distances[row, ranked] <= radius][:cap]
        if inside.size == 0:
            inside = numpy.array([center], dtype=numpy.int64)
        members.append(inside)
        member_distances.append(distances[row, inside])
    return NeighborhoodIndex(
        centers=centers,
        members=tuple(members),
        mode="radius-capped",
        distances=tuple(member_distances),
    )


def sample_to_fixed(
    cloud: PointCloud,
    features: Optional[ArrayLike] = None,
    *,
    n: int,
    seed: int,
    labels: Optional[ArrayLike] = None,
    mode: Literal["fps", "uniform"] = "fps",
    allow_any_size: bool = False,
) -> SampledCloud:
    """
    Resample a cloud to exactly ``n`` points, carrying per-point data.

    Larger clouds are reduced with farthest point sampling from a seeded
    random start (or a seeded uniform draw with ``mode="uniform"``);
    smaller clouds keep every point once and fill up with seeded draws
    with replacement.

    Parameters
    ----------
    cloud: :obj:`PointCloud`
    features: array-like, optional
        (N, D) per-point features.
    n: int
        Target size, one of 512, 1024, 2048 unless ``allow_any_size``.
    seed: int
        Seed of the sampling stream.
    labels: array-like, optional
        (N,) per-point labels.
    mode: {"fps", "uniform"}
    allow_any_size: bool
        Permit target sizes outside the benchmark grid (desk-scale runs).

    Returns
    -------
    :obj:`SampledCloud`
    """
    if cloud.count < 1:
        raise InvalidArgumentError("Cannot sample from an empty cloud.")
    if not allow_any_size and n not in SAMPLE_SIZES:
        raise InvalidArgumentError(f"n={n} must be one of {SAMPLE_SIZES}.")
    if n < 1:
        raise InvalidArgumentError(f"n={n} must be positive.")
    rng = numpy.random.default_rng(seed)
    start: Optional[int] = None
    if cloud.count >= n:
        if mode == "fps":
            start = int(rng.integers(cloud.count))
            indices = farthest_point_sample(cloud, n, start)
        elif mode == "uniform":
            indices = rng.choice(cloud.count, size=n, replace=False)
        else:
            raise InvalidArgumentError(f"Unknown sampling mode: {mode}")
    else:
        get_logger().warning(
            f"Cloud has {cloud.count} points; upsampling to {n} with replacement."
        )
        extra = rng.integers(cloud.count, size=n - cloud.count)
        indices = rng.permutation(
            numpy.concatenate([numpy.arange(cloud.count), extra])
        )
    indices = numpy.asarray(indices, dtype=numpy.int64)
    return SampledCloud(
        cloud=cloud.take(indices),
        indices=indices,
        start=start,
        features=None if features is None else numpy.asarray(features)[indices],
        labels=None if labels is None else numpy.asarray(labels)[indices],
    )


def normalize_cloud(cloud: Union[PointCloud, ArrayLike]) -> PointCloud:
    """
    Center a cloud at the origin and scale it into the unit sphere.

    A single point (or any zero-extent cloud) maps to the origin with
    scale 1. Normals are unaffected by translation and uniform scaling.
    """
    if not isinstance(cloud, PointCloud):
        positions = numpy.asarray(cloud, dtype=numpy.float64)
        if not numpy.isfinite(positions).all():
            raise InvalidDataError("Point positions must be finite.")
        cloud = PointCloud(positions=positions)
    if cloud.count < 1:
        raise InvalidArgumentError("Cannot normalize an empty cloud.")
    centered = cloud.positions - cloud.positions.mean(axis=0)
    scale = numpy.linalg.norm(centered, axis=1).max()
    if scale > 0:
        centered = centered / scale
    return PointCloud(positions=centered, normals=cloud.normals)
