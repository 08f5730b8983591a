"""
Autoregressive rollout of a field-delta model over a mesh sequence.
"""
from collections.abc import Callable
from dataclasses import dataclass
from typing import Optional, Union

import numpy
import xarray
from numpy.typing import ArrayLike, NDArray

from surfeat.exceptions import InvalidArgumentError, InvalidDataError, RunAbortedError
from surfeat.logger import get_logger
from surfeat.meshsim.graph import MeshGraphSequence
from surfeat.nncore.autograd import Tensor

DeltaModel = Callable[[NDArray, NDArray], Union[Tensor, NDArray]]


@dataclass(frozen=True)
class RolloutRecord:
    """
    Predicted and target fields of one rollout.

    Parameters
    ----------
    predicted: numpy.ndarray
        (T, N, C) predicted fields for steps 1..T.
    target: numpy.ndarray
        (T, N, C) stored fields for the same steps.
    step_rmse: numpy.ndarray
        (T,) RMSE of each step over nodes and channels.
    rmse: float
        All-rollout RMSE pooled over steps, nodes and channels.
    """

    predicted: NDArray
    target: NDArray
    step_rmse: NDArray
    rmse: float

    @classmethod
    def from_fields(cls, predicted: ArrayLike, target: ArrayLike) -> "RolloutRecord":
        """Score predicted against target fields."""
        predicted = numpy.asarray(predicted, dtype=numpy.float64)
        target = numpy.asarray(target, dtype=numpy.float64)
        if predicted.shape != target.shape or predicted.ndim != 3:
            raise InvalidDataError(
                f"Predicted {predicted.shape} and target {target.shape} fields differ."
            )
        squared = (predicted - target) ** 2
        return cls(
            predicted=predicted,
            target=target,
            step_rmse=numpy.sqrt(squared.mean(axis=(1, 2))),
            rmse=float(numpy.sqrt(squared.mean())),
        )

    @property
    def steps(self) -> int:
        return int(self.predicted.shape[0])

    def to_xarray(self) -> xarray.Dataset:
        """Labelled view with a ``step`` coordinate starting at 1."""
        dims = ("step", "node", "channel")
        return xarray.Dataset(
            data_vars={
                "predicted": (dims, self.predicted),
                "target": (dims, self.target),
                "step_rmse": (("step",), self.step_rmse),
            },
            coords={"step": numpy.arange(1, self.steps + 1)},
            attrs={"rmse": self.rmse},
        )


def rollout(
    model: DeltaModel,
    sequence: MeshGraphSequence,
    steps: Optional[int] = None,
    *,
    adjacency: Optional[ArrayLike] = None,
    use_features: bool = True,
) -> RolloutRecord:
    """
    Roll a model forward from the first frame of ``sequence``.

    At every step the model receives ``[fields, positions, features]`` and
    returns per-node field deltas, which are added to the current fields.
    Position and feature channels stay fixed.

    Parameters
    ----------
    model: callable
        ``model(node_inputs, adjacency)`` returning an (N, C) array or Tensor,
        e.g. a :obj:`surfeat.meshsim.surrogate.GraphSurrogate`.
    sequence: :obj:`surfeat.meshsim.graph.MeshGraphSequence`
        Initial state and scoring targets.
    steps: int, optional
        Number of steps T; all stored steps when unset.
    adjacency: array-like, optional
        Attention mask; the base mesh adjacency when unset.
    use_features: bool
        Include the surface-feature channels in the node inputs.

    Returns
    -------
    :obj:`RolloutRecord`
    """
    available = sequence.step_count - 1
    steps = available if steps is None else steps
    if steps < 1:
        raise InvalidArgumentError(f"steps={steps} must be at least 1.")
    if steps > available:
        raise InvalidArgumentError(
            f"steps={steps} exceeds the {available} target steps of the sequence."
        )
    adjacency = sequence.adjacency() if adjacency is None else numpy.asarray(adjacency, dtype=bool)
    fields = sequence.fields[0].copy()
    predicted = numpy.empty((steps,) + fields.shape)
    for step in range(1, steps + 1):
        delta = model(sequence.node_inputs(fields, use_features), adjacency)
        if isinstance(delta, Tensor):
            delta = delta.numpy()
        delta = numpy.asarray(delta, dtype=numpy.float64)
        if delta.shape != fields.shape:
            raise InvalidDataError(
                f"Model returned deltas of shape {delta.shape}, expected {fields.shape}."
            )
        if not numpy.isfinite(delta).all():
            raise RunAbortedError("Non-finite field prediction during rollout", step=step)
        fields = fields + delta
        predicted[step - 1] = fields
    record = RolloutRecord.from_fields(predicted, sequence.fields[1 : steps + 1])
    get_logger().info(f"Rollout over {steps} steps: RMSE {record.rmse:.6g}")
    return record
