"""
PointNet++ with single-scale grouping.

The encoder runs three Set Abstraction stages (farthest point sampling,
ball query, shared MLP and max pool). The segmenter adds three Feature
Propagation stages that interpolate coarse features back onto the finer
level with inverse squared distance weights over the 3 nearest coarse
points and concatenate the skip features of that level.
"""
from dataclasses import dataclass
from typing import Optional

import numpy
from numpy.typing import NDArray

from surfeat.cloudmodels.config import (
    FP_WIDTHS,
    POINTNETPP_CLASSIFY_HEAD,
    POINTNETPP_SEGMENT_HEAD,
    SA_STAGES,
    SA_WIDTHS,
    CloudModelConfig,
)
from surfeat.cloudmodels.pointnet import InputArray, prepare_inputs
from surfeat.exceptions import InvalidArgumentError
from surfeat.geometry import farthest_point_sample, knn, radius_group
from surfeat.nncore import autograd
from surfeat.nncore.autograd import Tensor
from surfeat.nncore.layers import Linear, Module, SharedMLP

INTERPOLATION_NEIGHBORS = 3
_COINCIDENT = 1e-12


def interpolation_weights(
    fine: NDArray, coarse: NDArray, k: int = INTERPOLATION_NEIGHBORS
) -> tuple[NDArray, NDArray]:
    """
    Inverse squared distance weights of the nearest coarse points.

    Parameters
    ----------
    fine: numpy.ndarray
        (N, 3) query positions.
    coarse: numpy.ndarray
        (M, 3) positions carrying the features.
    k: int
        Neighbors per query; reduced to M when fewer coarse points exist.

    Returns
    -------
    tuple[numpy.ndarray, numpy.ndarray]
        (N, k) coarse indices and (N, k) weights summing to 1 per row.
        A query that coincides with a coarse point takes that point's
        feature unchanged.
    """
    k = min(k, coarse.shape[0])
    neighborhoods = knn(coarse, fine, k)
    indices = numpy.stack(neighborhoods.members)
    distances = numpy.stack(neighborhoods.distances)
    coincident = distances[:, 0] <= _COINCIDENT
    with numpy.errstate(divide="ignore"):
        inverse = 1.0 / numpy.maximum(distances, _COINCIDENT) ** 2
    weights = inverse / inverse.sum(axis=1, keepdims=True)
    weights[coincident] = 0.0
    weights[coincident, 0] = 1.0
    return indices, weights


@dataclass(frozen=True)
class _Level:
    positions: NDArray  # (B, M, 3)
    centroids: Optional[NDArray]  # (B, M) indices into the finer level
    groups: NDArray  # (B, M, cap) indices into the finer level


def _fps_start(positions: NDArray) -> int:
    # the point farthest from the centroid does not depend on point order
    radii = numpy.linalg.norm(positions - positions.mean(axis=0), axis=1)
    return int(numpy.argmax(radii))


def abstraction_levels(positions: NDArray) -> list[_Level]:
    """Sampling and grouping indices of every Set Abstraction stage."""
    levels = []
    current = numpy.asarray(positions, dtype=numpy.float64)
    total = current.shape[1]
    for divisor, radius, cap in SA_STAGES:
        batch, count = current.shape[:2]
        if divisor is None:
            levels.append(
                _Level(
                    positions=numpy.zeros((batch, 1, 3)),
                    centroids=None,
                    groups=numpy.broadcast_to(numpy.arange(count), (batch, 1, count)).copy(),
                )
            )
            break
        samples = min(count, max(1, total // divisor))
        centroids = numpy.stack(
            [farthest_point_sample(cloud, samples, _fps_start(cloud)) for cloud in current]
        )
        groups = numpy.stack(
            [
                radius_group(cloud, centers, radius, cap).padded(cap)
                for cloud, centers in zip(current, centroids)
            ]
        )
        sampled = numpy.take_along_axis(current, centroids[..., None], axis=1)
        levels.append(_Level(positions=sampled, centroids=centroids, groups=groups))
        current = sampled
    return levels


def _interpolate(coarse_features: Tensor, fine: NDArray, coarse: NDArray) -> Tensor:
    indices, weights = zip(
        *(interpolation_weights(f, c) for f, c in zip(fine, coarse))
    )
    gathered = autograd.gather_points(coarse_features, numpy.stack(indices))
    weights = numpy.stack(weights)[..., None].astype(coarse_features.dtype)
    return autograd.sum(autograd.mul(gathered, weights), axis=-2)


class PointNetPP(Module):
    """
    PointNet++ classifier or segmenter.

    Parameters
    ----------
    config: :obj:`surfeat.cloudmodels.config.CloudModelConfig`
    """

    def __init__(self, config: CloudModelConfig):
        super().__init__()
        self.config = config
        aux = config.aux_channels
        previous = aux
        for index, widths in enumerate(SA_WIDTHS):
            blocks = [("xyz", 3), ("aux" if index == 0 else "feat", previous)]
            setattr(self, f"sa{index}", SharedMLP(blocks, widths))
            previous = widths[-1]
        if config.task == "classify":
            widths = POINTNETPP_CLASSIFY_HEAD
        else:
            skips = [SA_WIDTHS[1][-1], SA_WIDTHS[0][-1]]
            for index, fp_widths in enumerate(FP_WIDTHS):
                if index < 2:
                    blocks = [("coarse", previous), ("skip", skips[index])]
                else:
                    blocks = [("coarse", previous), ("skip_xyz", 3), ("skip_aux", aux)]
                setattr(self, f"fp{index}", SharedMLP(blocks, fp_widths))
                previous = fp_widths[-1]
            widths = POINTNETPP_SEGMENT_HEAD
        for index, width in enumerate(widths):
            setattr(self, f"head{index}", Linear(previous, width))
            previous = width
        self.head_out = Linear(previous, config.num_classes)
        self._head_layers = len(widths)

    def _head(self, hidden: Tensor) -> Tensor:
        for index in range(self._head_layers):
            hidden = autograd.relu(getattr(self, f"head{index}")(hidden))
        return self.head_out(hidden)

    def forward(self, positions: InputArray, aux: InputArray) -> Tensor:
        positions, aux = prepare_inputs(positions, aux, self.config, self.dtype)
        xyz = positions.data.astype(numpy.float64)
        levels = abstraction_levels(xyz)
        level_positions = [xyz] + [level.positions for level in levels]
        features = [aux]
        current = aux
        for index, level in enumerate(levels):
            finer = level_positions[index]
            batch = numpy.arange(finer.shape[0])[:, None, None]
            grouped_xyz = finer[batch, level.groups]
            if level.centroids is not None:
                grouped_xyz = grouped_xyz - level.positions[:, :, None, :]
            grouped = autograd.gather_points(current, level.groups)
            hidden = getattr(self, f"sa{index}")(
                [grouped_xyz.astype(aux.dtype), grouped]
            )
            current = autograd.max(hidden, axis=-2)
            features.append(current)

        if self.config.task == "classify":
            pooled = autograd.reshape(current, (current.shape[0], current.shape[-1]))
            return self._head(pooled)

        # features[3] is the global vector, features[2], features[1] the SA outputs
        hidden = autograd.broadcast_to(
            current, (current.shape[0], features[2].shape[1], current.shape[-1])
        )
        hidden = self.fp0([hidden, features[2]])
        hidden = self.fp1(
            [_interpolate(hidden, level_positions[1], level_positions[2]), features[1]]
        )
        hidden = self.fp2(
            [
                _interpolate(hidden, level_positions[0], level_positions[1]),
                positions,
                aux,
            ]
        )
        return self._head(hidden)


def pointnetpp_classify(model: PointNetPP, positions, aux) -> Tensor:
    """(B, classes) logits of a classifying :class:`PointNetPP`."""
    if model.config.task != "classify":
        raise InvalidArgumentError("Model was configured for segmentation.")
    return model(positions, aux)


def pointnetpp_segment(model: PointNetPP, positions, aux) -> Tensor:
    """(B, N, classes) per-point logits of a segmenting :class:`PointNetPP`."""
    if model.config.task != "segment":
        raise InvalidArgumentError("Model was configured for classification.")
    return model(positions, aux)
