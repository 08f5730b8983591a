"""
AdamW with decoupled weight decay and the cosine schedule.
"""
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy
from numpy.typing import NDArray

from surfeat.exceptions import InvalidArgumentError, RunAbortedError
from surfeat.nncore.layers import Parameter

ScheduleMode = Literal["weight-decay", "learning-rate"]
SCHEDULE_MODES = ("weight-decay", "learning-rate")

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8


def cosine_schedule(step: int, total: int, max_value: float, min_value: float) -> float:
    """
    Cosine interpolation from ``max_value`` at step 0 to ``min_value`` at
    step ``total``.
    """
    if total < 0 or not 0 <= step <= total:
        raise InvalidArgumentError(f"step={step} must lie in [0, {total}].")
    if total == 0:
        return float(max_value)
    return float(
        min_value + (max_value - min_value) * 0.5 * (1.0 + math.cos(math.pi * step / total))
    )


@dataclass
class OptimizerState:
    """
    Moment buffers and schedule position of an :class:`AdamW` run.

    Parameters
    ----------
    m, v: dict[str, numpy.ndarray]
        First and second moments keyed by parameter name.
    step: int
        Number of updates applied so far.
    total_steps: int
        Length of the schedule.
    base_lr: float
    wd_max, wd_min: float
        Weight-decay bounds of the cosine schedule.
    schedule_mode: {"weight-decay", "learning-rate"}
        Which coefficient the cosine schedule modulates.
    """

    m: dict[str, NDArray] = field(default_factory=dict)
    v: dict[str, NDArray] = field(default_factory=dict)
    step: int = 0
    total_steps: int = 1
    base_lr: float = 0.001
    wd_max: float = 0.01
    wd_min: float = 0.0
    schedule_mode: ScheduleMode = "weight-decay"

    def coefficients(self) -> tuple[float, float]:
        """Learning rate and weight decay at the current schedule position."""
        position = min(self.step, self.total_steps)
        if self.schedule_mode == "weight-decay":
            return self.base_lr, cosine_schedule(
                position, self.total_steps, self.wd_max, self.wd_min
            )
        return cosine_schedule(position, self.total_steps, self.base_lr, 0.0), self.wd_max


def adamw_step(
    state: OptimizerState, parameters: Sequence[tuple[str, Parameter]]
) -> OptimizerState:
    """
    Apply one AdamW update in place.

    Weight decay is decoupled and multiplicative, ``p <- p * (1 - lr * wd)``,
    followed by the bias-corrected Adam step.
    """
    lr, decay = state.coefficients()
    state.step += 1
    correction1 = 1.0 - BETA1**state.step
    correction2 = 1.0 - BETA2**state.step
    for name, parameter in parameters:
        grad = parameter.grad
        if grad is None:
            grad = numpy.zeros_like(parameter.data)
        if not numpy.isfinite(grad).all():
            raise RunAbortedError(f"Non-finite gradient in {name}.", step=state.step)
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None or v is None:
            m = numpy.zeros_like(parameter.data)
            v = numpy.zeros_like(parameter.data)
        m = BETA1 * m + (1.0 - BETA1) * grad
        v = BETA2 * v + (1.0 - BETA2) * grad * grad
        state.m[name] = m.astype(parameter.dtype)
        state.v[name] = v.astype(parameter.dtype)
        update = (m / correction1) / (numpy.sqrt(v / correction2) + EPSILON)
        values = parameter.data * (1.0 - lr * decay) - lr * update
        parameter.data = values.astype(parameter.dtype)
    return state


class AdamW:
    """
    Stateful wrapper around :func:`adamw_step` for a fixed parameter list.

    Parameters
    ----------
    parameters: sequence of (name, Parameter)
    total_steps: int
        Schedule length, usually epochs times batches per epoch.
    lr: float
    weight_decay: tuple[float, float]
        (max, min) bounds of the decay coefficient.
    schedule_mode: {"weight-decay", "learning-rate"}
    """

    def __init__(
        self,
        parameters: Sequence[tuple[str, Parameter]],
        *,
        total_steps: int,
        lr: float = 0.001,
        weight_decay: tuple[float, float] = (0.01, 0.0),
        schedule_mode: ScheduleMode = "weight-decay",
    ):
        if schedule_mode not in SCHEDULE_MODES:
            raise InvalidArgumentError(f"Unknown schedule mode: {schedule_mode}")
        if total_steps < 1:
            raise InvalidArgumentError("total_steps must be positive.")
        self.parameters = list(parameters)
        self.state = OptimizerState(
            total_steps=total_steps,
            base_lr=lr,
            wd_max=weight_decay[0],
            wd_min=weight_decay[1],
            schedule_mode=schedule_mode,
        )

    def zero_grad(self) -> None:
        """Reset every gradient buffer."""
        for _, parameter in self.parameters:
            parameter.zero_grad()

    def step(self) -> None:
        """Apply one update."""
        adamw_step(self.state, self.parameters)
