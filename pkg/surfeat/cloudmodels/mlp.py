"""
Feature-only ablation: a point-wise MLP shared across points, max pooling
and a global MLP. Coordinates are never read.
"""
import numpy

from surfeat.cloudmodels.config import (
    MLP_ABLATION_GLOBAL_WIDTHS,
    MLP_ABLATION_POINT_WIDTHS,
    CloudModelConfig,
)
from surfeat.exceptions import InvalidArgumentError
from surfeat.nncore import autograd
from surfeat.nncore.autograd import Tensor
from surfeat.nncore.layers import Linear, Module, SharedMLP


class MLPAblation(Module):
    """
    Parameters
    ----------
    config: :obj:`surfeat.cloudmodels.config.CloudModelConfig`
        Must select ``architecture="mlp-ablation"`` with surface features.
    """

    def __init__(self, config: CloudModelConfig):
        super().__init__()
        if config.architecture != "mlp-ablation":
            raise InvalidArgumentError("MLPAblation needs architecture='mlp-ablation'.")
        self.config = config
        self.point_mlp = SharedMLP([("features", config.feature_dim)], MLP_ABLATION_POINT_WIDTHS)
        previous = MLP_ABLATION_POINT_WIDTHS[-1]
        for index, width in enumerate(MLP_ABLATION_GLOBAL_WIDTHS):
            setattr(self, f"global{index}", Linear(previous, width))
            previous = width
        self.head = Linear(previous, config.num_classes)

    def forward(self, positions, aux) -> Tensor:  # pylint: disable=unused-argument
        if aux is None:
            raise InvalidArgumentError("The MLP ablation needs surface features.")
        if not isinstance(aux, Tensor):
            aux = Tensor(numpy.asarray(aux, dtype=self.dtype))
        if aux.ndim != 3 or aux.shape[-1] != self.config.feature_dim:
            raise InvalidArgumentError(
                f"Expected (B, N, {self.config.feature_dim}) features, got {aux.shape}."
            )
        hidden = autograd.max_pool_points(self.point_mlp([aux]))
        for index in range(len(MLP_ABLATION_GLOBAL_WIDTHS)):
            hidden = autograd.relu(getattr(self, f"global{index}")(hidden))
        return self.head(hidden)


def mlp_ablation_classify(model: MLPAblation, features) -> Tensor:
    """(B, classes) logits from (B, N, D) surface features alone."""
    return model(None, features)
