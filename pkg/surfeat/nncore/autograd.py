"""
Minimal reverse-mode differentiation over numpy arrays.

Every operation returns a :class:`Tensor` that remembers its parents and
a closure mapping the output gradient to one gradient per parent.
Calling :meth:`Tensor.backward` on a scalar walks the graph in reverse
topological order and accumulates gradients into leaf tensors.
"""
import contextlib
import contextvars
import math
from collections.abc import Iterator, Sequence
from typing import Callable, Optional, Union

import numpy
from numpy.typing import ArrayLike, NDArray
from scipy.special import erf

from surfeat.exceptions import InvalidArgumentError, RunAbortedError

_DEFAULT_DTYPE: contextvars.ContextVar[numpy.dtype] = contextvars.ContextVar(
    "surfeat_default_dtype", default=numpy.dtype(numpy.float32)
)
_SQRT_HALF = math.sqrt(0.5)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

BackwardFn = Callable[[NDArray], Sequence[Optional[NDArray]]]


def get_default_dtype() -> numpy.dtype:
    """The float dtype new tensors and parameters are created with."""
    return _DEFAULT_DTYPE.get()


@contextlib.contextmanager
def default_dtype(dtype) -> Iterator[None]:
    """
    Temporarily switch the default float dtype, e.g. to ``numpy.float64``
    for gradient checking. The switch is local to the current thread or
    task; other threads keep their own default.
    """
    token = _DEFAULT_DTYPE.set(numpy.dtype(dtype))
    try:
        yield
    finally:
        _DEFAULT_DTYPE.reset(token)


class Tensor:
    """
    A numpy buffer that participates in reverse-mode differentiation.

    Parameters
    ----------
    data: array-like
        Values; cast to the default float dtype unless already floating.
    requires_grad: bool
        Whether gradients should flow into this tensor.
    """

    __array_priority__ = 100

    def __init__(self, data: ArrayLike, *, requires_grad: bool = False):
        array = numpy.asarray(data)
        if not numpy.issubdtype(array.dtype, numpy.floating):
            array = array.astype(get_default_dtype())
        self.data: NDArray = array
        self.requires_grad = requires_grad
        self.grad: Optional[NDArray] = None
        self._parents: tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None

    @property
    def shape(self) -> tuple[int, ...]:
        """Shape of the underlying buffer."""
        return self.data.shape

    @property
    def dtype(self) -> numpy.dtype:
        """Dtype of the underlying buffer."""
        return self.data.dtype

    @property
    def ndim(self) -> int:
        """Rank of the underlying buffer."""
        return self.data.ndim

    def numpy(self) -> NDArray:
        """The values as a numpy array (no copy)."""
        return self.data

    def item(self) -> float:
        """The value of a single-element tensor."""
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, neg(as_tensor(other, like=self)))

    def __rsub__(self, other):
        return add(other, neg(self))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self, grad: Optional[ArrayLike] = None) -> None:
        """
        Accumulate d(self)/d(leaf) into every leaf tensor requiring grad.

        Parameters
        ----------
        grad: array-like, optional
            Seed gradient; defaults to 1 for a single-element tensor.
        """
        if grad is None:
            if self.data.size != 1:
                raise InvalidArgumentError("backward() without a seed needs a scalar.")
            grad = numpy.ones_like(self.data)
        grads: dict[int, NDArray] = {
            id(self): numpy.asarray(grad, dtype=self.dtype).reshape(self.shape)
        }
        for node in reversed(_topological_order(self)):
            node_grad = grads.pop(id(node), None)
            if node_grad is None:
                continue
            if node._backward is None:
                if not numpy.isfinite(node_grad).all():
                    raise RunAbortedError("Non-finite gradient reached a parameter.")
                node.grad = node_grad if node.grad is None else node.grad + node_grad
                continue
            for parent, parent_grad in zip(node._parents, node._backward(node_grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = parent_grad if key not in grads else grads[key] + parent_grad


def _topological_order(root: Tensor) -> list[Tensor]:
    """Nodes reachable from ``root`` with every parent before its children."""
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def as_tensor(value: Union[Tensor, ArrayLike], like: Optional[Tensor] = None) -> Tensor:
    """Wrap constants as non-differentiable tensors in the dtype of ``like``."""
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else get_default_dtype()
    return Tensor(numpy.asarray(value, dtype=dtype))


def make_op(
    data: NDArray, parents: Sequence[Tensor], backward: BackwardFn
) -> Tensor:
    """
    Register a differentiable operation.

    ``backward`` receives the output gradient and returns one gradient
    (or ``None``) per parent, in order.
    """
    out = Tensor(data)
    if any(parent.requires_grad for parent in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def unbroadcast(grad: NDArray, shape: tuple[int, ...]) -> NDArray:
    """Sum a broadcast gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(first, second) -> Tensor:
    """Elementwise sum with broadcasting."""
    first = as_tensor(first, like=second if isinstance(second, Tensor) else None)
    second = as_tensor(second, like=first)
    return make_op(
        first.data + second.data,
        (first, second),
        lambda grad: (unbroadcast(grad, first.shape), unbroadcast(grad, second.shape)),
    )


def neg(value: Tensor) -> Tensor:
    """Elementwise negation."""
    return make_op(-value.data, (value,), lambda grad: (-grad,))


def mul(first, second) -> Tensor:
    """Elementwise product with broadcasting."""
    first = as_tensor(first, like=second if isinstance(second, Tensor) else None)
    second = as_tensor(second, like=first)
    return make_op(
        first.data * second.data,
        (first, second),
        lambda grad: (
            unbroadcast(grad * second.data, first.shape),
            unbroadcast(grad * first.data, second.shape),
        ),
    )


def square(value: Tensor) -> Tensor:
    """Elementwise square."""
    return make_op(value.data**2, (value,), lambda grad: (2.0 * value.data * grad,))


def matmul(first, second) -> Tensor:
    """Batched matrix product of the last two axes."""
    first = as_tensor(first, like=second if isinstance(second, Tensor) else None)
    second = as_tensor(second, like=first)
    if first.shape[-1] != second.shape[-2 if second.ndim > 1 else 0]:
        raise InvalidArgumentError(
            f"Inner dimensions differ: {first.shape} @ {second.shape}."
        )

    def backward(grad):
        first_grad = grad @ numpy.swapaxes(second.data, -1, -2)
        second_grad = numpy.swapaxes(first.data, -1, -2) @ grad
        return unbroadcast(first_grad, first.shape), unbroadcast(second_grad, second.shape)

    return make_op(first.data @ second.data, (first, second), backward)


def linear(value, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """
    Affine map ``value @ weight + bias`` over the last axis.

    Parameters
    ----------
    value: Tensor or array-like
        (..., in) input.
    weight: Tensor
        (in, out) weight.
    bias: Tensor, optional
        (out,) bias.
    """
    value = as_tensor(value, like=weight)
    if weight.ndim != 2 or value.shape[-1] != weight.shape[0]:
        raise InvalidArgumentError(
            f"Cannot apply a {weight.shape} weight to input of shape {value.shape}."
        )
    if bias is not None and bias.shape != (weight.shape[1],):
        raise InvalidArgumentError(
            f"Bias shape {bias.shape} does not match weight {weight.shape}."
        )
    out = value.data @ weight.data
    if bias is not None:
        out = out + bias.data

    def backward(grad):
        flat_in = value.data.reshape(-1, weight.shape[0])
        flat_grad = grad.reshape(-1, weight.shape[1])
        grads = [grad @ weight.data.T, flat_in.T @ flat_grad]
        if bias is not None:
            grads.append(flat_grad.sum(axis=0))
        return grads

    parents = (value, weight) if bias is None else (value, weight, bias)
    return make_op(out, parents, backward)


def relu(value: Tensor) -> Tensor:
    """Rectified linear unit."""
    positive = value.data > 0
    return make_op(
        numpy.where(positive, value.data, 0).astype(value.dtype),
        (value,),
        lambda grad: (grad * positive,),
    )


def gelu(value: Tensor) -> Tensor:
    """Exact Gaussian error linear unit ``x * Phi(x)``."""
    cdf = (0.5 * (1.0 + erf(value.data * _SQRT_HALF))).astype(value.dtype)

    def backward(grad):
        pdf = _INV_SQRT_2PI * numpy.exp(-0.5 * value.data**2)
        return (grad * (cdf + value.data * pdf),)

    return make_op(value.data * cdf, (value,), backward)


def exp(value: Tensor) -> Tensor:
    """Elementwise exponential."""
    out = numpy.exp(value.data)
    return make_op(out, (value,), lambda grad: (grad * out,))


def sum(  # pylint: disable=redefined-builtin
    value: Tensor, axis=None, keepdims: bool = False
) -> Tensor:
    """Sum over ``axis`` (all axes by default)."""
    out = value.data.sum(axis=axis, keepdims=keepdims)

    def backward(grad):
        if axis is not None and not keepdims:
            grad = numpy.expand_dims(grad, axis)
        return (numpy.broadcast_to(grad, value.shape).astype(value.dtype),)

    return make_op(numpy.asarray(out), (value,), backward)


def mean(value: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    """Mean over ``axis`` (all axes by default)."""
    count = value.data.size if axis is None else numpy.prod(
        [value.shape[a] for a in numpy.atleast_1d(axis)]
    )
    return mul(sum(value, axis=axis, keepdims=keepdims), 1.0 / float(count))


def reshape(value: Tensor, shape: tuple[int, ...]) -> Tensor:
    """Reshape without copying."""
    return make_op(
        value.data.reshape(shape), (value,), lambda grad: (grad.reshape(value.shape),)
    )


def transpose(value: Tensor, axes: Sequence[int]) -> Tensor:
    """Permute axes."""
    inverse = numpy.argsort(axes)
    return make_op(
        numpy.transpose(value.data, axes),
        (value,),
        lambda grad: (numpy.transpose(grad, inverse),),
    )


def broadcast_to(value: Tensor, shape: tuple[int, ...]) -> Tensor:
    """Broadcast to a larger shape; gradients are summed back."""
    return make_op(
        numpy.broadcast_to(value.data, shape).copy(),
        (value,),
        lambda grad: (unbroadcast(grad, value.shape),),
    )


def concat(values: Sequence, axis: int = -1) -> Tensor:
    """Concatenate tensors along ``axis``."""
    like = next((v for v in values if isinstance(v, Tensor)), None)
    tensors = [as_tensor(v, like=like) for v in values]
    sizes = [t.shape[axis] for t in tensors]
    splits = numpy.cumsum(sizes)[:-1]

    def backward(grad):
        return numpy.split(grad, splits, axis=axis)

    return make_op(
        numpy.concatenate([t.data for t in tensors], axis=axis), tensors, backward
    )


def gather_points(value: Tensor, index: NDArray) -> Tensor:
    """
    Batched row gather.

    Parameters
    ----------
    value: Tensor
        (B, N, C) per-point features.
    index: numpy.ndarray
        (B, ...) integer point indices into N.

    Returns
    -------
    Tensor
        (B, ..., C) gathered rows.
    """
    index = numpy.asarray(index, dtype=numpy.int64)
    batch = numpy.arange(value.shape[0]).reshape((-1,) + (1,) * (index.ndim - 1))

    def backward(grad):
        out = numpy.zeros_like(value.data)
        numpy.add.at(out, (batch, index), grad)
        return (out,)

    return make_op(value.data[batch, index], (value,), backward)


def max(value: Tensor, axis: int) -> Tensor:  # pylint: disable=redefined-builtin
    """
    Maximum over ``axis``; the gradient flows to the lowest-index argmax.
    """
    winner = numpy.expand_dims(numpy.argmax(value.data, axis=axis), axis)
    out = numpy.take_along_axis(value.data, winner, axis=axis)

    def backward(grad):
        routed = numpy.zeros_like(value.data)
        numpy.put_along_axis(routed, winner, numpy.expand_dims(grad, axis), axis=axis)
        return (routed,)

    return make_op(numpy.squeeze(out, axis=axis), (value,), backward)


def max_pool_points(value: Tensor) -> Tensor:
    """Symmetric max aggregation over the point axis of (..., N, d) features."""
    if value.shape[-2] < 1:
        raise InvalidArgumentError("Cannot pool over zero points.")
    return max(value, axis=-2)


def masked_softmax(scores: Tensor, mask: ArrayLike) -> Tensor:
    """
    Row softmax restricted to allowed entries.

    Masked-out entries get exactly zero weight; rows are shifted by their
    maximum allowed score before exponentiation.

    Parameters
    ----------
    scores: Tensor
        (..., N, M) scores.
    mask: array-like
        Boolean mask broadcastable to ``scores``; every row needs a 1.
    """
    allowed = numpy.broadcast_to(numpy.asarray(mask, dtype=bool), scores.shape)
    if not allowed.any(axis=-1).all():
        raise InvalidArgumentError("Every mask row needs at least one allowed entry.")
    shifted = numpy.where(allowed, scores.data, -numpy.inf)
    shifted = shifted - shifted.max(axis=-1, keepdims=True)
    weights = numpy.where(allowed, numpy.exp(numpy.where(allowed, shifted, 0.0)), 0.0)
    probs = (weights / weights.sum(axis=-1, keepdims=True)).astype(scores.dtype)

    def backward(grad):
        return (probs * (grad - (grad * probs).sum(axis=-1, keepdims=True)),)

    return make_op(probs, (scores,), backward)


def rmsnorm(value: Tensor, gain: Tensor, eps: float = 1e-6) -> Tensor:
    """
    Root-mean-square normalization over the last axis, then elementwise gain.
    """
    rms = numpy.sqrt((value.data**2).mean(axis=-1, keepdims=True) + eps)
    normalized = value.data / rms

    def backward(grad):
        scaled = grad * gain.data
        value_grad = (
            scaled - normalized * (scaled * normalized).mean(axis=-1, keepdims=True)
        ) / rms
        gain_grad = (grad * normalized).reshape(-1, value.shape[-1]).sum(axis=0)
        return value_grad, gain_grad.reshape(gain.shape)

    return make_op(normalized * gain.data, (value, gain), backward)


def cross_entropy(logits: Tensor, targets: ArrayLike) -> Tensor:
    """
    Mean negative log-likelihood of integer targets under softmax(logits).

    Parameters
    ----------
    logits: Tensor
        (..., C) unnormalized scores: per object (B, C) or per point (B, N, C).
    targets: array-like
        (...) integer classes in ``[0, C)``.
    """
    targets = numpy.asarray(targets, dtype=numpy.int64)
    classes = logits.shape[-1]
    if targets.shape != logits.shape[:-1]:
        raise InvalidArgumentError(
            f"Targets shape {targets.shape} does not match logits {logits.shape}."
        )
    if targets.size and (targets.min() < 0 or targets.max() >= classes):
        raise InvalidArgumentError(f"Target classes must lie in [0, {classes}).")
    shifted = logits.data - logits.data.max(axis=-1, keepdims=True)
    log_norm = numpy.log(numpy.exp(shifted).sum(axis=-1, keepdims=True))
    log_probs = shifted - log_norm
    picked = numpy.take_along_axis(log_probs, targets[..., None], axis=-1)
    count = targets.size

    def backward(grad):
        probs = numpy.exp(log_probs)
        numpy.put_along_axis(
            probs,
            targets[..., None],
            numpy.take_along_axis(probs, targets[..., None], axis=-1) - 1.0,
            axis=-1,
        )
        return (probs * (grad / count),)

    return make_op(numpy.asarray(-picked.mean(), dtype=logits.dtype), (logits,), backward)


def mse_loss(prediction: Tensor, target: ArrayLike) -> Tensor:
    """Mean squared error against a constant target."""
    return mean(square(prediction - as_tensor(target, like=prediction)))
