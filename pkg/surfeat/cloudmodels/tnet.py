"""
Orthogonality penalty of PointNet's alignment transform. The alignment
network itself is not part of the modified PointNet.
"""
from dataclasses import dataclass
from typing import Union

import numpy
from numpy.typing import ArrayLike, NDArray

from surfeat.exceptions import InvalidArgumentError, InvalidDataError
from surfeat.nncore import autograd
from surfeat.nncore.autograd import Tensor


@dataclass(frozen=True)
class AlignmentMatrix:
    """A learned alignment transform T of the input or feature space."""

    matrix: NDArray

    def __post_init__(self):
        matrix = numpy.asarray(self.matrix, dtype=numpy.float64)
        if not numpy.isfinite(matrix).all():
            raise InvalidDataError("Alignment matrix entries must be finite.")
        object.__setattr__(self, "matrix", matrix)


def tnet_regularizer(transform: Union[AlignmentMatrix, Tensor, ArrayLike]) -> Tensor:
    """
    Squared Frobenius norm of ``I - T T^T``.

    Returns a scalar tensor so the penalty can be added to a loss.
    """
    if isinstance(transform, AlignmentMatrix):
        transform = Tensor(transform.matrix)
    elif not isinstance(transform, Tensor):
        transform = Tensor(numpy.asarray(transform, dtype=numpy.float64))
    if transform.ndim != 2 or transform.shape[0] != transform.shape[1]:
        raise InvalidArgumentError(
            f"Alignment matrix must be square, got {transform.shape}."
        )
    identity = numpy.eye(transform.shape[0], dtype=transform.dtype)
    gram = autograd.matmul(transform, autograd.transpose(transform, (1, 0)))
    return autograd.sum(autograd.square(autograd.add(identity, autograd.neg(gram))))
