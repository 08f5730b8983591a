"""
Central finite-difference checks of reverse-mode gradients.
"""
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Optional

import numpy

from surfeat.exceptions import InvalidArgumentError
from surfeat.nncore import autograd
from surfeat.nncore.autograd import Tensor

STEP = 1e-5
# absolute floor of the relative-error denominator for near-zero gradients
_DENOMINATOR_FLOOR = 1e-3


@dataclass(frozen=True)
class GradientCheckReport:
    """
    Outcome of :func:`gradient_check`.

    Parameters
    ----------
    passed: bool
    max_relative_error: float
    tolerance: float
    per_tensor: dict[str, float]
        Maximum relative error per checked tensor.
    """

    passed: bool
    max_relative_error: float
    tolerance: float
    per_tensor: dict[str, float] = field(default_factory=dict)


def _relative_error(analytic: numpy.ndarray, numeric: numpy.ndarray) -> float:
    if analytic.size == 0:
        return 0.0
    scale = numpy.maximum(
        numpy.maximum(numpy.abs(analytic), numpy.abs(numeric)), _DENOMINATOR_FLOOR
    )
    return float((numpy.abs(analytic - numeric) / scale).max())


def gradient_check(
    loss_fn: Callable[[], Tensor],
    tensors: Sequence[tuple[str, Tensor]],
    *,
    tolerance: float = 1e-4,
    step: float = STEP,
    sample: Optional[int] = None,
    seed: int = 0,
) -> GradientCheckReport:
    """
    Compare analytic gradients of a scalar loss against central differences.

    Parameters
    ----------
    loss_fn: callable
        Recomputes the scalar loss from the current tensor values.
    tensors: sequence of (name, Tensor)
        Float64 tensors with ``requires_grad`` to perturb coordinate-wise.
    tolerance: float
        Maximum accepted relative error.
    step: float
        Finite-difference step ``h``.
    sample: int, optional
        Check only this many seeded random coordinates per tensor.
    seed: int
        Seed of the coordinate sample.

    Returns
    -------
    :obj:`GradientCheckReport`
    """
    for name, tensor in tensors:
        if tensor.dtype != numpy.float64:
            raise InvalidArgumentError(
                f"Gradient checks need float64 tensors; {name} is {tensor.dtype}."
            )
    for _, tensor in tensors:
        tensor.grad = numpy.zeros_like(tensor.data)
    loss_fn().backward()
    rng = numpy.random.default_rng(seed)
    per_tensor = {}
    for name, tensor in tensors:
        flat = numpy.arange(tensor.data.size)
        if sample is not None and sample < flat.size:
            flat = numpy.sort(rng.choice(flat.size, size=sample, replace=False))
        coordinates = [numpy.unravel_index(int(i), tensor.shape) for i in flat]
        analytic = numpy.array([tensor.grad[index] for index in coordinates])
        numeric = numpy.zeros(len(coordinates))
        for position, index in enumerate(coordinates):
            original = tensor.data[index]
            tensor.data[index] = original + step
            upper = loss_fn().item()
            tensor.data[index] = original - step
            lower = loss_fn().item()
            tensor.data[index] = original
            numeric[position] = (upper - lower) / (2.0 * step)
        per_tensor[name] = _relative_error(analytic, numeric)
    worst = max(per_tensor.values(), default=0.0)
    return GradientCheckReport(
        passed=worst < tolerance,
        max_relative_error=worst,
        tolerance=tolerance,
        per_tensor=per_tensor,
    )


def check_module(
    module,
    inputs: Sequence[Tensor],
    *,
    tolerance: float = 1e-4,
    seed: int = 0,
    forward: Optional[Callable[..., Tensor]] = None,
    sample: Optional[int] = None,
) -> GradientCheckReport:
    """
    Gradient-check a float64 module fragment with respect to its parameters
    and any inputs that require grad.

    The output is reduced to a scalar by a fixed random projection so that
    every output coordinate contributes.
    """
    forward = forward or module
    reference = forward(*inputs)
    projection = numpy.random.default_rng(seed).standard_normal(reference.shape)

    def loss_fn() -> Tensor:
        return autograd.sum(autograd.mul(forward(*inputs), projection))

    tensors = list(module.named_parameters()) + [
        (f"input{index}", value)
        for index, value in enumerate(inputs)
        if isinstance(value, Tensor) and value.requires_grad
    ]
    return gradient_check(
        loss_fn, tensors, tolerance=tolerance, sample=sample, seed=seed
    )