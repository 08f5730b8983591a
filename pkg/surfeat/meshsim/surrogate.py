"""
Encode-process-decode graph transformer for mesh field rollout.

Node inputs are encoded row-wise by two linear layers with a GeLU in
between, processed by ``L`` transformer blocks whose attention is
restricted by the (augmented) mesh adjacency, and decoded row-wise into
per-node field deltas.
"""
import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy
from numpy.typing import ArrayLike, NDArray

from surfeat.exceptions import InvalidArgumentError
from surfeat.meshsim.graph import (
    augment_adjacency,
    default_global_nodes,
    default_random_edges,
    validate_adjacency,
)
from surfeat.nncore import autograd
from surfeat.nncore.autograd import Tensor
from surfeat.nncore.layers import Linear, Module, RMSNorm

MaskMode = Literal["additive", "literal"]

SIZE_CLASSES = {"S": (64, 4, 4), "L": (128, 8, 8)}


@dataclass(frozen=True)
class SurrogateConfig:
    """
    Parameters
    ----------
    latent_dim: int
        Width d of the node latents; divisible by ``heads``.
    blocks: int
        Number L of transformer blocks.
    heads: int
    size_class: str
        "S" (64, 4, 4), "L" (128, 8, 8) or "custom".
    mask_mode: {"additive", "literal"}
        "additive" excludes non-adjacent pairs from the softmax;
        "literal" multiplies the scores by the adjacency instead.
    hidden_multiplier: int
        Gated MLP hidden width as a multiple of d.
    hops: int
        k-hop dilation of the mesh adjacency.
    random_edges: int, optional
        Random pairs added per epoch; ceil(N / 20) when unset.
    global_node: bool
        Give the highest-degree node full attention.
    """

    latent_dim: int = 64
    blocks: int = 4
    heads: int = 4
    size_class: str = "S"
    mask_mode: MaskMode = "additive"
    hidden_multiplier: int = 4
    hops: int = 2
    random_edges: Optional[int] = None
    global_node: bool = True

    def __post_init__(self):
        if self.latent_dim < 1 or self.blocks < 1 or self.heads < 1:
            raise InvalidArgumentError("Latent size, block and head counts must be positive.")
        if self.latent_dim % self.heads:
            raise InvalidArgumentError(
                f"latent_dim={self.latent_dim} is not divisible by heads={self.heads}."
            )
        if self.mask_mode not in ("additive", "literal"):
            raise InvalidArgumentError(f"Unknown mask mode: {self.mask_mode}")
        if self.hops < 1:
            raise InvalidArgumentError("hops must be at least 1.")

    @classmethod
    def from_size_class(cls, size_class: str, **kwargs) -> "SurrogateConfig":
        """The S or L preset, with optional overrides."""
        if size_class not in SIZE_CLASSES:
            raise InvalidArgumentError(
                f"Unknown size class {size_class}; choose one of {sorted(SIZE_CLASSES)}."
            )
        latent_dim, blocks, heads = SIZE_CLASSES[size_class]
        return cls(
            latent_dim=latent_dim, blocks=blocks, heads=heads, size_class=size_class, **kwargs
        )

    @property
    def head_dim(self) -> int:
        """Per-head width."""
        return self.latent_dim // self.heads

    def attention_mask(self, adjacency: ArrayLike, seed: int = 0) -> NDArray:
        """Augmented attention mask for one epoch (``seed`` picks the random pairs)."""
        adjacency = validate_adjacency(adjacency)
        node_count = adjacency.shape[0]
        random_edges = (
            default_random_edges(node_count) if self.random_edges is None else self.random_edges
        )
        return augment_adjacency(
            adjacency,
            k=self.hops,
            r=random_edges,
            global_nodes=default_global_nodes(adjacency) if self.global_node else None,
            seed=seed,
        )


class MaskedAttention(Module):
    """Multi-head self-attention restricted to an adjacency mask."""

    def __init__(self, config: SurrogateConfig):
        super().__init__()
        self.config = config
        width = config.latent_dim
        self.query = Linear(width, width)
        self.key = Linear(width, width)
        self.value = Linear(width, width)
        self.output = Linear(width, width)

    def _split(self, value: Tensor) -> Tensor:
        batch, nodes, _ = value.shape
        value = autograd.reshape(
            value, (batch, nodes, self.config.heads, self.config.head_dim)
        )
        return autograd.transpose(value, (0, 2, 1, 3))

    def weights(self, latents: Tensor, adjacency: NDArray) -> Tensor:
        """(B, heads, N, N) attention weights."""
        query = self._split(self.query(latents))
        key = self._split(self.key(latents))
        scores = autograd.mul(
            autograd.matmul(query, autograd.transpose(key, (0, 1, 3, 2))),
            1.0 / math.sqrt(self.config.head_dim),
        )
        if self.config.mask_mode == "additive":
            return autograd.masked_softmax(scores, adjacency)
        literal = autograd.mul(scores, adjacency.astype(scores.dtype))
        return autograd.masked_softmax(literal, numpy.ones(adjacency.shape, dtype=bool))

    def forward(self, latents: Tensor, adjacency: NDArray) -> Tensor:
        batch, nodes, width = latents.shape
        mixed = autograd.matmul(self.weights(latents, adjacency), self._split(self.value(latents)))
        merged = autograd.reshape(autograd.transpose(mixed, (0, 2, 1, 3)), (batch, nodes, width))
        return self.output(merged)


class GatedMLP(Module):
    """Row-wise ``W_f (GeLU(W_l z + b_l) * (W_r z + b_r)) + b_f``."""

    def __init__(self, config: SurrogateConfig):
        super().__init__()
        width = config.latent_dim
        hidden = config.hidden_multiplier * width
        self.left = Linear(width, hidden)
        self.right = Linear(width, hidden)
        self.final = Linear(hidden, width)

    def forward(self, latents: Tensor) -> Tensor:
        gate = autograd.gelu(self.left(latents))
        return self.final(autograd.mul(gate, self.right(latents)))


class TransformerBlock(Module):
    """Attention and gated MLP, each followed by residual add and RMSNorm."""

    def __init__(self, config: SurrogateConfig):
        super().__init__()
        self.attention = MaskedAttention(config)
        self.norm1 = RMSNorm(config.latent_dim)
        self.mlp = GatedMLP(config)
        self.norm2 = RMSNorm(config.latent_dim)

    def forward(self, latents: Tensor, adjacency: NDArray) -> Tensor:
        latents = self.norm1(latents + self.attention(latents, adjacency))
        return self.norm2(latents + self.mlp(latents))


class GraphSurrogate(Module):
    """
    Parameters
    ----------
    config: :obj:`SurrogateConfig`
    in_channels: int
        Node input width p (fields + positions + optional features).
    out_channels: int
        Predicted field channels.
    """

    def __init__(self, config: SurrogateConfig, in_channels: int, out_channels: int):
        super().__init__()
        if in_channels < 1 or out_channels < 1:
            raise InvalidArgumentError("Channel counts must be positive.")
        self.config = config
        self.in_channels = in_channels
        self.out_channels = out_channels
        width = config.latent_dim
        self.encoder0 = Linear(in_channels, width)
        self.encoder1 = Linear(width, width)
        for index in range(config.blocks):
            setattr(self, f"block{index}", TransformerBlock(config))
        self.decoder0 = Linear(width, width)
        self.decoder1 = Linear(width, out_channels)

    def _as_batch(self, value) -> tuple[Tensor, bool]:
        if not isinstance(value, Tensor):
            value = Tensor(numpy.asarray(value, dtype=self.dtype))
        if value.ndim == 2:
            return autograd.reshape(value, (1,) + value.shape), True
        if value.ndim != 3:
            raise InvalidArgumentError(f"Expected (N, p) or (B, N, p) input, got {value.shape}.")
        return value, False

    @staticmethod
    def _restore(value: Tensor, squeeze: bool) -> Tensor:
        return autograd.reshape(value, value.shape[1:]) if squeeze else value

    @staticmethod
    def _mask(adjacency: ArrayLike, nodes: int) -> NDArray:
        adjacency = numpy.asarray(adjacency, dtype=bool)
        if adjacency.ndim == 2:
            validate_adjacency(adjacency)
        elif adjacency.ndim == 3:
            for mask in adjacency:
                validate_adjacency(mask)
            adjacency = adjacency[:, None]
        else:
            raise InvalidArgumentError("Adjacency must be (N, N) or (B, N, N).")
        if adjacency.shape[-1] != nodes:
            raise InvalidArgumentError(
                f"Adjacency covers {adjacency.shape[-1]} nodes, input has {nodes}."
            )
        return adjacency

    def encode(self, node_inputs) -> Tensor:
        """Z0 = W1 GeLU(W0 X + b0) + b1, row by row."""
        node_inputs, squeeze = self._as_batch(node_inputs)
        if node_inputs.shape[-1] != self.in_channels:
            raise InvalidArgumentError(
                f"Expected {self.in_channels} input channels, got {node_inputs.shape[-1]}."
            )
        hidden = self.encoder1(autograd.gelu(self.encoder0(node_inputs)))
        return self._restore(hidden, squeeze)

    def masked_attention_block(self, latents, adjacency, block: int = 0) -> Tensor:
        """Masked multi-head attention sub-layer of one block."""
        latents, squeeze = self._as_batch(latents)
        attention = getattr(self, f"block{block}").attention
        return self._restore(attention(latents, self._mask(adjacency, latents.shape[1])), squeeze)

    def gated_mlp(self, latents, block: int = 0) -> Tensor:
        """Gated GeLU MLP sub-layer of one block."""
        latents, squeeze = self._as_batch(latents)
        return self._restore(getattr(self, f"block{block}").mlp(latents), squeeze)

    def transformer_block(self, latents, adjacency, block: int = 0) -> Tensor:
        """One full block: attention, residual, norm, gated MLP, residual, norm."""
        latents, squeeze = self._as_batch(latents)
        out = getattr(self, f"block{block}")(latents, self._mask(adjacency, latents.shape[1]))
        return self._restore(out, squeeze)

    def decode(self, latents) -> Tensor:
        """Per-node field deltas from the final latents."""
        latents, squeeze = self._as_batch(latents)
        if latents.shape[-1] != self.config.latent_dim:
            raise InvalidArgumentError(
                f"Expected {self.config.latent_dim} latent channels, got {latents.shape[-1]}."
            )
        return self._restore(self.decoder1(autograd.gelu(self.decoder0(latents))), squeeze)

    def forward(self, node_inputs, adjacency) -> Tensor:
        node_inputs, squeeze = self._as_batch(node_inputs)
        mask = self._mask(adjacency, node_inputs.shape[1])
        latents = self.encoder1(autograd.gelu(self.encoder0(node_inputs)))
        for index in range(self.config.blocks):
            latents = getattr(self, f"block{index}")(latents, mask)
        return self._restore(self.decoder1(autograd.gelu(self.decoder0(latents))), squeeze)
