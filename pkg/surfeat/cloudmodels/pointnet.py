"""
Modified PointNet: five message-passing layers without the T-Net.

Each layer concatenates a point's representation with the elementwise
maximum over its k nearest neighbors (static graph on the input
coordinates, the point itself included) and applies a shared two
sub-layer ReLU MLP.
"""
from typing import Optional, Union

import numpy
from numpy.typing import ArrayLike, NDArray

from surfeat.cloudmodels.config import POINTNET_MOD_LAYERS, CloudModelConfig
from surfeat.exceptions import InvalidArgumentError
from surfeat.geometry import knn_indices
from surfeat.nncore import autograd
from surfeat.nncore.autograd import Tensor
from surfeat.nncore.layers import BlockLinear, Linear, Module, SharedMLP

InputArray = Union[Tensor, ArrayLike]


def neighbor_graph(positions: NDArray, k: int) -> NDArray:
    """(B, N, k) nearest-neighbor indices per object, self first."""
    positions = numpy.asarray(positions, dtype=numpy.float64)
    k = min(k, positions.shape[1])
    return numpy.stack([knn_indices(cloud, k) for cloud in positions])


def neighbor_max(values: Tensor, neighbors: NDArray) -> Tensor:
    """Elementwise maximum of each point's neighbor rows."""
    return autograd.max(autograd.gather_points(values, neighbors), axis=-2)


def prepare_inputs(
    positions: InputArray, aux: Optional[InputArray], config: CloudModelConfig, dtype
) -> tuple[Tensor, Tensor]:
    """Validate and wrap (B, N, 3) coordinates and (B, N, a) auxiliary channels."""
    if not isinstance(positions, Tensor):
        positions = Tensor(numpy.asarray(positions, dtype=dtype))
    if positions.ndim != 3 or positions.shape[-1] != 3:
        raise InvalidArgumentError(f"Positions must be (B, N, 3), got {positions.shape}.")
    if aux is None:
        raise InvalidArgumentError(f"Missing the {config.auxiliary} input channel.")
    if not isinstance(aux, Tensor):
        aux = Tensor(numpy.asarray(aux, dtype=dtype))
    if aux.shape[:-1] != positions.shape[:-1] or aux.shape[-1] != config.aux_channels:
        raise InvalidArgumentError(
            f"Expected {config.aux_channels} {config.auxiliary} channels per point, "
            f"got input of shape {aux.shape}."
        )
    return positions, aux


class PointNetMod(Module):
    """
    Modified PointNet classifier or segmenter.

    Parameters
    ----------
    config: :obj:`surfeat.cloudmodels.config.CloudModelConfig`
    """

    def __init__(self, config: CloudModelConfig):
        super().__init__()
        self.config = config
        width = config.hidden_width
        aux = config.aux_channels
        self.layer0 = SharedMLP(
            [("own_xyz", 3), ("own_aux", aux), ("nbr_xyz", 3), ("nbr_aux", aux)],
            (width, width),
        )
        for index in range(1, POINTNET_MOD_LAYERS):
            setattr(
                self, f"layer{index}", SharedMLP([("own", width), ("nbr", width)], (width, width))
            )
        if config.task == "classify":
            self.head = Linear(width, config.num_classes)
        else:
            self.head = BlockLinear([("local", width), ("global", width)], config.num_classes)

    def point_features(self, positions: InputArray, aux: InputArray) -> Tensor:
        """(B, N, w) per-point representation after the last layer."""
        positions, aux = prepare_inputs(positions, aux, self.config, self.dtype)
        neighbors = neighbor_graph(positions.data, self.config.neighbor_k)
        hidden = self.layer0(
            [
                positions,
                aux,
                neighbor_max(positions, neighbors),
                neighbor_max(aux, neighbors),
            ]
        )
        for index in range(1, POINTNET_MOD_LAYERS):
            hidden = getattr(self, f"layer{index}")([hidden, neighbor_max(hidden, neighbors)])
        return hidden

    def global_feature(self, positions: InputArray, aux: InputArray) -> Tensor:
        """(B, w) max-pooled descriptor before the head."""
        return autograd.max_pool_points(self.point_features(positions, aux))

    def forward(self, positions: InputArray, aux: InputArray) -> Tensor:
        local = self.point_features(positions, aux)
        pooled = autograd.max_pool_points(local)
        if self.config.task == "classify":
            return self.head(pooled)
        expanded = autograd.broadcast_to(
            autograd.reshape(pooled, (pooled.shape[0], 1, pooled.shape[1])), local.shape
        )
        return self.head([local, expanded])


def pointnet_mod_classify(model: PointNetMod, positions, aux) -> Tensor:
    """(B, classes) logits of a classifying :class:`PointNetMod`."""
    if model.config.task != "classify":
        raise InvalidArgumentError("Model was configured for segmentation.")
    return model(positions, aux)


def pointnet_mod_segment(model: PointNetMod, positions, aux) -> Tensor:
    """(B, N, classes) per-point logits of a segmenting :class:`PointNetMod`."""
    if model.config.task != "segment":
        raise InvalidArgumentError("Model was configured for classification.")
    return model(positions, aux)


def pointnet_global_feature(model: PointNetMod, positions, aux) -> Tensor:
    """The permutation-invariant pooled vector g = max_i phi(x_i)."""
    return model.global_feature(positions, aux)
