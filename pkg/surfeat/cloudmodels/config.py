"""
Configuration and layer templates of the point-cloud models.
"""
from dataclasses import dataclass
from typing import Literal

from surfeat.exceptions import InvalidArgumentError

TASKS = ("classify", "segment")
ARCHITECTURES = ("pointnet-mod", "pointnetpp", "mlp-ablation")
AUXILIARY_CHANNELS = ("normals", "features")

POINTNET_MOD_LAYERS = 5
POINTNET_MOD_WIDTH = {"classify": 64, "segment": 32}

# (centroid divisor, radius, group cap); None means one global group
SA_STAGES = ((4, 0.2, 32), (16, 0.4, 64), (None, None, None))
SA_WIDTHS = ((64, 64, 128), (128, 128, 256), (256, 512, 1024))
FP_WIDTHS = ((256, 256), (256, 128), (128, 128, 128))
POINTNETPP_CLASSIFY_HEAD = (512, 256)
POINTNETPP_SEGMENT_HEAD = (128,)

MLP_ABLATION_POINT_WIDTHS = (128, 128)
MLP_ABLATION_GLOBAL_WIDTHS = (64,)

# epochs per (task, auxiliary channel) and batch size per task
EPOCH_BUDGETS = {
    ("classify", "features"): 20,
    ("classify", "normals"): 100,
    ("segment", "features"): 100,
    ("segment", "normals"): 200,
}
BATCH_SIZES = {"classify": 16, "segment": 8}


@dataclass(frozen=True)
class CloudModelConfig:
    """
    Architecture choice and input wiring of a point-cloud model.

    Parameters
    ----------
    task: {"classify", "segment"}
    architecture: {"pointnet-mod", "pointnetpp", "mlp-ablation"}
    auxiliary: {"normals", "features"}
        Channel paired with the coordinates. Features replace normals;
        the two are never concatenated.
    feature_dim: int
        Surface-feature width when ``auxiliary="features"``.
    neighbor_k: int
        Neighbors exchanged per message-passing layer (pointnet-mod).
    hidden_width: int, optional
        Sub-layer width of pointnet-mod; 64 to classify, 32 to segment.
    num_classes: int
    """

    task: Literal["classify", "segment"] = "classify"
    architecture: Literal["pointnet-mod", "pointnetpp", "mlp-ablation"] = "pointnet-mod"
    auxiliary: Literal["normals", "features"] = "features"
    feature_dim: int = 16
    neighbor_k: int = 16
    hidden_width: int = 0
    num_classes: int = 2

    def __post_init__(self):
        if self.task not in TASKS:
            raise InvalidArgumentError(f"Unknown task: {self.task}")
        if self.architecture not in ARCHITECTURES:
            raise InvalidArgumentError(f"Unknown architecture: {self.architecture}")
        if self.auxiliary not in AUXILIARY_CHANNELS:
            raise InvalidArgumentError(
                f"Auxiliary channel must be one of {AUXILIARY_CHANNELS}, got {self.auxiliary}."
            )
        if self.architecture == "mlp-ablation":
            if self.auxiliary != "features":
                raise InvalidArgumentError("The MLP ablation reads surface features only.")
            if self.task != "classify":
                raise InvalidArgumentError("The MLP ablation is a classifier.")
        if self.auxiliary == "features" and self.feature_dim < 1:
            raise InvalidArgumentError("feature_dim must be positive.")
        if self.neighbor_k < 1 or self.num_classes < 2:
            raise InvalidArgumentError("neighbor_k >= 1 and num_classes >= 2 required.")
        if self.hidden_width == 0:
            object.__setattr__(self, "hidden_width", POINTNET_MOD_WIDTH[self.task])
        elif self.hidden_width < 1:
            raise InvalidArgumentError("hidden_width must be positive.")

    @property
    def aux_channels(self) -> int:
        """Width of the auxiliary input channel."""
        return 3 if self.auxiliary == "normals" else self.feature_dim

    @property
    def in_channels(self) -> int:
        """Coordinates plus auxiliary channel."""
        return 3 + self.aux_channels

    @property
    def epochs(self) -> int:
        """Epoch budget of this task and input variant."""
        return EPOCH_BUDGETS[(self.task, self.auxiliary)]

    @property
    def batch_size(self) -> int:
        """Batch size of this task."""
        return BATCH_SIZES[self.task]
