"""
Surface-feature ingestion, voxel-to-point assignment, per-object
statistics and synthetic feature data.
"""
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy
import pandas
from numpy.typing import ArrayLike, NDArray

from surfeat.exceptions import InvalidArgumentError, InvalidDataError
from surfeat.geometry import PointCloud, normalize_cloud
from surfeat.logger import get_logger

GRID_SIDE = 64
STAT_NAMES = ("mean", "std", "min", "max")
_ASSIGN_CHUNK = 512


@dataclass(frozen=True)
class FeatureField:
    """
    Sparse voxel-indexed surface-feature tokens of one object.

    Parameters
    ----------
    coords: numpy.ndarray
        (K, 3) integer voxel coordinates in ``[0, grid_side)``.
    tokens: numpy.ndarray
        (K, D) feature vectors, one per active voxel.
    grid_side: int
        Voxels per grid side.
    """

    coords: NDArray
    tokens: NDArray
    grid_side: int = GRID_SIDE

    def __post_init__(self):
        coords = numpy.asarray(self.coords, dtype=numpy.int64)
        tokens = numpy.asarray(self.tokens, dtype=numpy.float32)
        if coords.ndim != 2 or coords.shape[1] != 3:
            raise InvalidDataError(f"Voxel coords must be (K, 3), got {coords.shape}.")
        if coords.shape[0] == 0:
            raise InvalidDataError("Feature field has no active voxels.")
        if tokens.ndim != 2 or tokens.shape[0] != coords.shape[0]:
            raise InvalidDataError(
                f"Token count {tokens.shape[0] if tokens.ndim else 0} does not "
                f"match active voxel count {coords.shape[0]}."
            )
        if coords.min() < 0 or coords.max() >= self.grid_side:
            raise InvalidDataError(
                f"Voxel coords must lie in [0, {self.grid_side})."
            )
        if numpy.unique(coords, axis=0).shape[0] != coords.shape[0]:
            raise InvalidDataError("Voxel coords must be unique.")
        if not numpy.isfinite(tokens).all():
            raise InvalidDataError("Feature tokens must be finite.")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "tokens", tokens)

    @property
    def active_count(self) -> int:
        """Number of active voxels."""
        return int(self.coords.shape[0])

    @property
    def feature_dim(self) -> int:
        """Dimension of each token."""
        return int(self.tokens.shape[1])


@dataclass(frozen=True)
class ObjectStats:
    """Per-dimension population statistics of one object's point features."""

    mean: NDArray
    std: NDArray
    min: NDArray
    max: NDArray

    def get(self, name: str) -> NDArray:
        """One of the four statistic vectors by name."""
        if name not in STAT_NAMES:
            raise InvalidArgumentError(f"Unknown statistic: {name}")
        return getattr(self, name)


@dataclass(frozen=True)
class LabeledCloud:
    """
    A fixed-size point set with optional per-point features and labels.

    Parameters
    ----------
    cloud: :obj:`surfeat.geometry.PointCloud`
    features: numpy.ndarray, optional
        (N, D) per-point surface features.
    point_labels: numpy.ndarray, optional
        (N,) per-point part labels (0 vessel, 1 aneurysm).
    object_label: int, optional
        Per-object class (0 vessel, 1 aneurysm).
    """

    cloud: PointCloud
    features: Optional[NDArray] = None
    point_labels: Optional[NDArray] = None
    object_label: Optional[int] = None

    def __post_init__(self):
        if self.features is not None:
            features = numpy.asarray(self.features, dtype=numpy.float32)
            if features.ndim != 2 or features.shape[0] != self.cloud.count:
                raise InvalidDataError(
                    f"Features shape {features.shape} does not match "
                    f"{self.cloud.count} points."
                )
            object.__setattr__(self, "features", features)
        if self.point_labels is not None:
            labels = numpy.asarray(self.point_labels, dtype=numpy.uint8)
            if labels.shape != (self.cloud.count,):
                raise InvalidDataError(
                    f"Point labels shape {labels.shape} does not match "
                    f"{self.cloud.count} points."
                )
            object.__setattr__(self, "point_labels", labels)

    @property
    def count(self) -> int:
        """Number of points."""
        return self.cloud.count

    @property
    def feature_dim(self) -> int:
        """Feature dimension, 0 when absent."""
        return 0 if self.features is None else int(self.features.shape[1])


def voxel_centers(field: FeatureField) -> NDArray:
    """Voxel centers in grid units (voxel ``i`` spans ``[i, i + 1)``)."""
    return field.coords.astype(numpy.float64) + 0.5


def to_grid_units(positions: ArrayLike, grid_side: int = GRID_SIDE) -> NDArray:
    """Map normalized ``[-1, 1]`` positions into ``[0, grid_side)`` per axis."""
    return (numpy.asarray(positions, dtype=numpy.float64) + 1.0) / 2.0 * grid_side


def voxel_assignment(field: FeatureField, cloud: PointCloud) -> NDArray:
    """
    Index of the nearest active voxel center for every point.

    Parameters
    ----------
    field: :obj:`FeatureField`
    cloud: :obj:`surfeat.geometry.PointCloud`
        Normalized cloud; mapped into grid units before the search.

    Returns
    -------
    numpy.ndarray
        (N,) voxel indices; ties go to the lowest voxel index.
    """
    if field.active_count == 0:
        raise InvalidDataError("Feature field has no active voxels.")
    grid_points = to_grid_units(cloud.positions, field.grid_side)
    centers = voxel_centers(field)
    assignment = numpy.empty(cloud.count, dtype=numpy.int64)
    for start in range(0, cloud.count, _ASSIGN_CHUNK):
        chunk = grid_points[start : start + _ASSIGN_CHUNK]
        squared = ((chunk[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assignment[start : start + _ASSIGN_CHUNK] = numpy.argmin(squared, axis=1)
    return assignment


def assign_voxel_features(field: FeatureField, cloud: PointCloud) -> NDArray:
    """
    Give every point the token of its nearest active voxel.

    Returns
    -------
    numpy.ndarray
        (N, D) per-point features; tokens may be shared between points.
    """
    return field.tokens[voxel_assignment(field, cloud)]


def aggregate_stats(features: ArrayLike) -> ObjectStats:
    """
    Mean, population standard deviation, minimum and maximum per dimension.

    Parameters
    ----------
    features: array-like
        (N, D) per-point feature vectors, N >= 1.

    Returns
    -------
    :obj:`ObjectStats`
    """
    try:
        features = numpy.asarray(features, dtype=numpy.float64)
    except ValueError as error:
        raise InvalidDataError("Feature vectors have mismatched dimensions.") from error
    if features.ndim != 2:
        raise InvalidDataError(
            f"Features must be an (N, D) array, got shape {features.shape}."
        )
    if features.shape[0] == 0:
        raise InvalidDataError("Cannot aggregate statistics of zero points.")
    minimum = features.min(axis=0)
    maximum = features.max(axis=0)
    # rounding can push the mean of identical values one ulp outside the range
    mean = numpy.clip(features.mean(axis=0), minimum, maximum)
    return ObjectStats(
        mean=mean,
        std=features.std(axis=0),
        min=minimum,
        max=maximum,
    )


def aggregate_stats_by_label(
    features: ArrayLike, point_labels: ArrayLike
) -> dict[int, Optional[ObjectStats]]:
    """
    Statistics of the vessel (0) and aneurysm (1) parts separately.

    A part without points is reported as ``None`` rather than raising.
    """
    features = numpy.asarray(features, dtype=numpy.float64)
    point_labels = numpy.asarray(point_labels)
    if point_labels.shape != (features.shape[0],):
        raise InvalidDataError("Point labels must match the number of feature rows.")
    by_label: dict[int, Optional[ObjectStats]] = {}
    for label in (0, 1):
        members = features[point_labels == label]
        if members.shape[0] == 0:
            get_logger().warning(f"Part {label} has no points; reported missing.")
            by_label[label] = None
        else:
            by_label[label] = aggregate_stats(members)
    return by_label


def synth_features(
    label: Union[int, ArrayLike],
    cloud: PointCloud,
    dim: int,
    signal: float,
    seed: int,
    *,
    origin_shift: float = 0.0,
) -> NDArray:
    """
    Gaussian surface features whose leading dimensions carry a class signal.

    The first ``ceil(signal * dim)`` dimensions are shifted by +1 for
    label 1 and -1 for label 0. ``label`` may be one object class or one
    label per point (part-labeled clouds).

    Parameters
    ----------
    label: int or array-like
        Object class, or (N,) per-point labels.
    cloud: :obj:`surfeat.geometry.PointCloud`
    dim: int
        Feature dimension, at least 4.
    signal: float
        Fraction of signal-bearing dimensions in [0, 1].
    seed: int
    origin_shift: float, optional
        Constant added to every entry; emulates a second dataset origin.

    Returns
    -------
    numpy.ndarray
        (N, dim) float32 features.
    """
    if dim < 4:
        raise InvalidArgumentError(f"dim={dim} must be at least 4.")
    if not 0.0 <= signal <= 1.0:
        raise InvalidArgumentError(f"signal={signal} must lie in [0, 1].")
    rng = numpy.random.default_rng(seed)
    features = rng.standard_normal((cloud.count, dim))
    labels = numpy.broadcast_to(numpy.asarray(label), (cloud.count,))
    if numpy.any((labels != 0) & (labels != 1)):
        raise InvalidArgumentError("Labels must be 0 or 1.")
    signal_dims = math.ceil(signal * dim)
    features[:, :signal_dims] += numpy.where(labels == 1, 1.0, -1.0)[:, None]
    return (features + origin_shift).astype(numpy.float32)


def synth_cloud(
    label: int,
    n_points: int,
    seed: int,
    *,
    bulge_radius: Optional[float] = None,
) -> LabeledCloud:
    """
    A synthetic vessel: an open tube with a spherical bulge (the "aneurysm"
    part). Points carry exact normals and part labels.

    Parameters
    ----------
    label: int
        Object class; class 1 bulges are drawn larger on average.
    n_points: int
    seed: int
    bulge_radius: float, optional
        Fixed bulge radius instead of the class-dependent draw.
    """
    rng = numpy.random.default_rng(seed)
    tube_radius = rng.uniform(0.25, 0.35)
    if bulge_radius is None:
        low, high = (0.2, 0.3) if label == 1 else (0.15, 0.25)
        bulge_radius = rng.uniform(low, high)
    bulge_count = max(1, int(round(0.25 * n_points)))
    tube_count = n_points - bulge_count

    axial = rng.uniform(-1.0, 1.0, tube_count)
    theta = rng.uniform(0.0, 2.0 * math.pi, tube_count)
    tube_normals = numpy.stack(
        [numpy.zeros(tube_count), numpy.cos(theta), numpy.sin(theta)], axis=1
    )
    tube_points = numpy.column_stack([axial, tube_radius * tube_normals[:, 1:]])

    anchor_axial = rng.uniform(-0.5, 0.5)
    anchor_theta = rng.uniform(0.0, 2.0 * math.pi)
    direction = numpy.array([0.0, math.cos(anchor_theta), math.sin(anchor_theta)])
    center = numpy.array([anchor_axial, 0.0, 0.0]) + direction * (
        tube_radius + 0.5 * bulge_radius
    )
    # sphere directions biased away from the tube so the bulge sits outside
    sphere = rng.standard_normal((bulge_count, 3))
    sphere /= numpy.linalg.norm(sphere, axis=1, keepdims=True)
    sphere = numpy.where(
        (sphere @ direction)[:, None] < -0.5, -sphere, sphere
    )
    bulge_points = center + bulge_radius * sphere

    positions = numpy.concatenate([tube_points, bulge_points])
    normals = numpy.concatenate([tube_normals, sphere])
    part_labels = numpy.concatenate(
        [numpy.zeros(tube_count, dtype=numpy.uint8), numpy.ones(bulge_count, dtype=numpy.uint8)]
    )
    return LabeledCloud(
        cloud=normalize_cloud(PointCloud(positions=positions, normals=normals)),
        point_labels=part_labels,
        object_label=int(label),
    )


def _object_seeds(seed: int, count: int) -> list[int]:
    return [
        int(child.generate_state(1)[0])
        for child in numpy.random.SeedSequence(seed).spawn(count)
    ]


def synth_classification_set(
    n_objects: int,
    n_points: int,
    dim: int,
    signal: float,
    seed: int,
    *,
    positive_fraction: float = 0.5,
) -> list[LabeledCloud]:
    """
    Two-class benchmark: synthetic vessels whose features carry the object
    class and whose geometry is only weakly class dependent.
    """
    rng = numpy.random.default_rng(seed)
    positives = int(round(positive_fraction * n_objects))
    labels = rng.permutation(
        numpy.concatenate(
            [numpy.ones(positives, dtype=int), numpy.zeros(n_objects - positives, dtype=int)]
        )
    )
    objects = []
    for label, object_seed in zip(labels, _object_seeds(seed, n_objects)):
        labeled = synth_cloud(int(label), n_points, object_seed)
        features = synth_features(
            int(label), labeled.cloud, dim, signal, object_seed + 1
        )
        objects.append(
            LabeledCloud(
                cloud=labeled.cloud,
                features=features,
                point_labels=labeled.point_labels,
                object_label=int(label),
            )
        )
    return objects


def synth_segmentation_set(
    n_objects: int,
    n_points: int,
    dim: int,
    signal: float,
    seed: int,
) -> list[LabeledCloud]:
    """
    Part-segmentation benchmark: every vessel has a bulge, and the
    per-point features carry the part label.
    """
    objects = []
    for object_seed in _object_seeds(seed, n_objects):
        labeled = synth_cloud(1, n_points, object_seed)
        features = synth_features(
            labeled.point_labels, labeled.cloud, dim, signal, object_seed + 1
        )
        objects.append(
            LabeledCloud(
                cloud=labeled.cloud,
                features=features,
                point_labels=labeled.point_labels,
                object_label=1,
            )
        )
    return objects


def stats_table(
    stats: list[ObjectStats],
    *,
    object_ids: Optional[list[str]] = None,
    labels: Optional[dict[str, ArrayLike]] = None,
) -> pandas.DataFrame:
    """
    Tabulate per-object statistics: one row per object, columns
    ``object_id``, label columns, then ``{stat}_{dimension}``.
    """
    if object_ids is None:
        object_ids = [f"object_{index:05d}" for index in range(len(stats))]
    columns: dict[str, ArrayLike] = {"object_id": list(object_ids)}
    for name, values in (labels or {}).items():
        columns[name] = list(values)
    table = pandas.DataFrame(columns)
    blocks = [table]
    for stat in STAT_NAMES:
        matrix = numpy.stack([record.get(stat) for record in stats])
        blocks.append(
            pandas.DataFrame(
                matrix,
                columns=[f"{stat}_{dim}" for dim in range(matrix.shape[1])],
            )
        )
    return pandas.concat(blocks, axis=1)


def stats_from_table(table: pandas.DataFrame) -> list[ObjectStats]:
    """Inverse of :func:`stats_table` for the statistic columns."""
    records = []
    blocks = {
        stat: table[[c for c in table.columns if c.startswith(f"{stat}_")]].to_numpy(
            dtype=numpy.float64
        )
        for stat in STAT_NAMES
    }
    for row in range(len(table)):
        records.append(ObjectStats(**{stat: blocks[stat][row] for stat in STAT_NAMES}))
    return records
