"""
Parameters, modules and the shared layers used by every learned model.
"""
import zlib
from collections.abc import Iterator, Sequence
from typing import Literal, Optional

import numpy
from numpy.typing import ArrayLike, NDArray

from surfeat.exceptions import InvalidArgumentError, InvalidDataError
from surfeat.nncore import autograd
from surfeat.nncore.autograd import Tensor, get_default_dtype

InitKind = Literal["glorot", "zeros", "ones"]


class Parameter(Tensor):
    """
    A trainable tensor with a gradient buffer of identical shape.

    Parameters
    ----------
    shape: tuple[int, ...]
    init: {"glorot", "zeros", "ones"}
        How :meth:`Module.reset_parameters` fills the values.
    """

    def __init__(self, shape: tuple[int, ...], init: InitKind = "glorot"):
        super().__init__(numpy.zeros(shape, dtype=get_default_dtype()), requires_grad=True)
        self.init = init
        self.grad = numpy.zeros_like(self.data)

    def zero_grad(self) -> None:
        """Reset the gradient buffer."""
        self.grad = numpy.zeros_like(self.data)

    def initialize(self, rng: numpy.random.Generator) -> None:
        """Fill the values according to :attr:`init`."""
        if self.init == "zeros":
            self.data[...] = 0
        elif self.init == "ones":
            self.data[...] = 1
        else:
            fan_in, fan_out = self.shape[0], self.shape[-1]
            bound = numpy.sqrt(6.0 / (fan_in + fan_out))
            self.data[...] = rng.uniform(-bound, bound, self.shape)
        self.zero_grad()


class Module:
    """
    Base class for layers and models.

    Parameters and sub-modules assigned as attributes are registered in
    assignment order; their dotted names are stable and unique.
    """

    def __init__(self):
        object.__setattr__(self, "_parameters", {})
        object.__setattr__(self, "_modules", {})

    def __setattr__(self, name, value):
        if isinstance(value, Parameter):
            self._parameters[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        """Yield ``(dotted_name, parameter)`` pairs in registration order."""
        for name, parameter in self._parameters.items():
            yield prefix + name, parameter
        for name, module in self._modules.items():
            yield from module.named_parameters(prefix=f"{prefix}{name}.")

    def parameters(self) -> list[Parameter]:
        """All parameters in registration order."""
        return [parameter for _, parameter in self.named_parameters()]

    def parameter_count(self) -> int:
        """Total number of trainable scalars."""
        return int(sum(parameter.data.size for parameter in self.parameters()))

    def zero_grad(self) -> None:
        """Reset every gradient buffer."""
        for parameter in self.parameters():
            parameter.zero_grad()

    def reset_parameters(self, seed: int) -> "Module":
        """
        Initialize every parameter from its own RNG stream keyed by
        ``(seed, crc32(name))``, independent of registration order.
        """
        for name, parameter in self.named_parameters():
            parameter.initialize(
                numpy.random.default_rng([seed, zlib.crc32(name.encode("utf-8"))])
            )
        return self

    @property
    def dtype(self) -> numpy.dtype:
        """Dtype of the parameters."""
        parameters = self.parameters()
        return parameters[0].dtype if parameters else get_default_dtype()

    def state_dict(self) -> dict[str, NDArray]:
        """Copies of the parameter values keyed by dotted name."""
        return {name: parameter.data.copy() for name, parameter in self.named_parameters()}

    def load_state_dict(self, state: dict[str, ArrayLike]) -> None:
        """Load values produced by :meth:`state_dict`."""
        own = dict(self.named_parameters())
        if set(own) != set(state):
            missing = sorted(set(own) - set(state))
            unexpected = sorted(set(state) - set(own))
            raise InvalidDataError(
                f"State does not match model: missing={missing} unexpected={unexpected}."
            )
        for name, parameter in own.items():
            values = numpy.asarray(state[name])
            if values.shape != parameter.shape:
                raise InvalidDataError(
                    f"Parameter {name} has shape {parameter.shape}, state has {values.shape}."
                )
            parameter.data = values.astype(parameter.dtype)
            parameter.zero_grad()

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Linear(Module):
    """Affine layer with an (in, out) weight and optional bias."""

    def __init__(self, in_features: int, out_features: int, bias: bool = True):
        super().__init__()
        if in_features < 1 or out_features < 1:
            raise InvalidArgumentError("Layer widths must be positive.")
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter((in_features, out_features))
        self.bias: Optional[Parameter] = (
            Parameter((out_features,), init="zeros") if bias else None
        )

    def forward(self, value) -> Tensor:
        return autograd.linear(value, self.weight, self.bias)


class BlockLinear(Module):
    """
    Affine layer over several named input blocks, each with its own weight.

    ``forward`` takes one tensor per block in declaration order and
    returns ``sum_b x_b @ W_b + bias``. Equivalent to a :class:`Linear`
    on the concatenated input, but every block weight is initialized
    from its own shape and name.
    """

    def __init__(self, blocks: Sequence[tuple[str, int]], out_features: int):
        super().__init__()
        if not blocks:
            raise InvalidArgumentError("BlockLinear needs at least one input block.")
        self.blocks = tuple(blocks)
        self.out_features = out_features
        for name, width in self.blocks:
            if width < 1:
                raise InvalidArgumentError(f"Input block {name} must have positive width.")
            setattr(self, f"weight_{name}", Parameter((width, out_features)))
        self.bias = Parameter((out_features,), init="zeros")

    @property
    def in_features(self) -> int:
        """Total input width over all blocks."""
        return sum(width for _, width in self.blocks)

    def forward(self, values: Sequence) -> Tensor:
        if len(values) != len(self.blocks):
            raise InvalidArgumentError(
                f"Expected {len(self.blocks)} input blocks, got {len(values)}."
            )
        out = None
        for (name, width), value in zip(self.blocks, values):
            if value.shape[-1] != width:
                raise InvalidArgumentError(
                    f"Input block {name} has {value.shape[-1]} channels, expected {width}."
                )
            part = autograd.linear(value, getattr(self, f"weight_{name}"))
            out = part if out is None else out + part
        return out + self.bias


class SharedMLP(Module):
    """
    Point-wise MLP applied identically to every row: a :class:`BlockLinear`
    input layer followed by :class:`Linear` layers, ReLU after each.
    """

    def __init__(self, blocks: Sequence[tuple[str, int]], widths: Sequence[int]):
        super().__init__()
        if not widths:
            raise InvalidArgumentError("SharedMLP needs at least one layer.")
        self.widths = tuple(widths)
        self.layer0 = BlockLinear(blocks, widths[0])
        for index in range(1, len(widths)):
            setattr(self, f"layer{index}", Linear(widths[index - 1], widths[index]))

    @property
    def out_features(self) -> int:
        """Width of the last layer."""
        return self.widths[-1]

    def forward(self, values: Sequence) -> Tensor:
        hidden = autograd.relu(self.layer0(values))
        for index in range(1, len(self.widths)):
            hidden = autograd.relu(getattr(self, f"layer{index}")(hidden))
        return hidden


class RMSNorm(Module):
    """RMS normalization over the last axis with a learned gain."""

    def __init__(self, features: int, eps: float = 1e-6):
        super().__init__()
        self.eps = eps
        self.gain = Parameter((features,), init="ones")

    def forward(self, value: Tensor) -> Tensor:
        return autograd.rmsnorm(value, self.gain, self.eps)
