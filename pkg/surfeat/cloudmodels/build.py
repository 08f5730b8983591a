"""
Model construction and closed-form parameter counts.
"""
from collections.abc import Sequence
from typing import Union

from surfeat.cloudmodels.config import (
    FP_WIDTHS,
    MLP_ABLATION_GLOBAL_WIDTHS,
    MLP_ABLATION_POINT_WIDTHS,
    POINTNET_MOD_LAYERS,
    POINTNETPP_CLASSIFY_HEAD,
    POINTNETPP_SEGMENT_HEAD,
    SA_WIDTHS,
    CloudModelConfig,
)
from surfeat.cloudmodels.mlp import MLPAblation
from surfeat.cloudmodels.pointnet import PointNetMod
from surfeat.cloudmodels.pointnetpp import PointNetPP

CloudModel = Union[PointNetMod, PointNetPP, MLPAblation]


def build_cloud_model(config: CloudModelConfig, seed: int = 0) -> CloudModel:
    """Instantiate and initialize the model selected by ``config``."""
    model: CloudModel
    if config.architecture == "pointnet-mod":
        model = PointNetMod(config)
    elif config.architecture == "pointnetpp":
        model = PointNetPP(config)
    else:
        model = MLPAblation(config)
    model.reset_parameters(seed)
    return model


def _mlp(inputs: int, widths: Sequence[int]) -> int:
    count = 0
    for width in widths:
        count += inputs * width + width
        inputs = width
    return count


def expected_parameter_count(config: CloudModelConfig) -> int:
    """
    Trainable scalar count of the configured model.

    Only the first layer depends on the auxiliary channel, so swapping
    normals for features changes the count by ``(D - 3)`` times the
    width of every layer that reads the raw inputs.
    """
    aux = config.aux_channels
    classes = config.num_classes
    if config.architecture == "pointnet-mod":
        width = config.hidden_width
        count = _mlp(2 * (3 + aux), (width, width))
        count += (POINTNET_MOD_LAYERS - 1) * _mlp(2 * width, (width, width))
        head_inputs = width if config.task == "classify" else 2 * width
        return count + _mlp(head_inputs, (classes,))

    if config.architecture == "mlp-ablation":
        count = _mlp(config.feature_dim, MLP_ABLATION_POINT_WIDTHS)
        count += _mlp(MLP_ABLATION_POINT_WIDTHS[-1], MLP_ABLATION_GLOBAL_WIDTHS)
        return count + _mlp(MLP_ABLATION_GLOBAL_WIDTHS[-1], (classes,))

    count = 0
    previous = aux
    for widths in SA_WIDTHS:
        count += _mlp(3 + previous, widths)
        previous = widths[-1]
    if config.task == "classify":
        return count + _mlp(previous, POINTNETPP_CLASSIFY_HEAD + (classes,))
    skips = (SA_WIDTHS[1][-1], SA_WIDTHS[0][-1], 3 + aux)
    for widths, skip in zip(FP_WIDTHS, skips):
        count += _mlp(previous + skip, widths)
        previous = widths[-1]
    return count + _mlp(previous, POINTNETPP_SEGMENT_HEAD + (classes,))
