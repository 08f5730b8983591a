"""
Mesh graphs, time-series containers and adjacency augmentation.
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy
import xarray
from numpy.typing import ArrayLike, NDArray

from surfeat.exceptions import InvalidArgumentError, InvalidDataError


def canonical_edges(edges: ArrayLike) -> NDArray:
    """Undirected edge list as sorted unique (i < j) pairs without self-loops."""
    edges = numpy.asarray(edges, dtype=numpy.int64).reshape(-1, 2)
    edges = numpy.sort(edges, axis=1)
    edges = edges[edges[:, 0] != edges[:, 1]]
    if edges.shape[0] == 0:
        return edges
    return numpy.unique(edges, axis=0)


def adjacency_from_edges(node_count: int, edges: ArrayLike) -> NDArray:
    """Symmetric boolean adjacency with the self-loop diagonal set."""
    edges = canonical_edges(edges)
    if edges.size and (edges.min() < 0 or edges.max() >= node_count):
        raise InvalidDataError("Edge index out of range.")
    adjacency = numpy.eye(node_count, dtype=bool)
    adjacency[edges[:, 0], edges[:, 1]] = True
    adjacency[edges[:, 1], edges[:, 0]] = True
    return adjacency


def validate_adjacency(adjacency: ArrayLike) -> NDArray:
    """Check the mask invariants: square, symmetric, self-loops on the diagonal."""
    adjacency = numpy.asarray(adjacency, dtype=bool)
    if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
        raise InvalidDataError(f"Adjacency must be square, got {adjacency.shape}.")
    if not numpy.all(numpy.diagonal(adjacency)):
        isolated = int(numpy.flatnonzero(~numpy.diagonal(adjacency))[0])
        raise InvalidDataError(f"Node {isolated} has no self-loop.")
    if not numpy.array_equal(adjacency, adjacency.T):
        raise InvalidDataError("Adjacency must be symmetric.")
    return adjacency


@dataclass(frozen=True)
class MeshGraph:
    """
    One mesh graph snapshot: node inputs, undirected edges, masked adjacency.

    Parameters
    ----------
    node_features: numpy.ndarray
        (N, p) node input matrix.
    edges: numpy.ndarray
        (E, 2) undirected edges, i < j, no self-loops.
    adjacency: numpy.ndarray
        (N, N) boolean mask with self-loops.
    """

    node_features: NDArray
    edges: NDArray
    adjacency: NDArray

    def __post_init__(self):
        adjacency = validate_adjacency(self.adjacency)
        edges = canonical_edges(self.edges)
        node_features = numpy.asarray(self.node_features)
        if node_features.ndim != 2 or node_features.shape[0] != adjacency.shape[0]:
            raise InvalidDataError("Node feature rows must match the adjacency size.")
        if not numpy.array_equal(adjacency_from_edges(adjacency.shape[0], edges), adjacency):
            raise InvalidDataError("Edge list is inconsistent with the adjacency.")
        object.__setattr__(self, "adjacency", adjacency)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "node_features", node_features)

    @classmethod
    def from_edges(cls, node_features: ArrayLike, edges: ArrayLike) -> "MeshGraph":
        """Build the graph and its adjacency from an edge list."""
        node_features = numpy.asarray(node_features)
        return cls(
            node_features=node_features,
            edges=edges,
            adjacency=adjacency_from_edges(node_features.shape[0], edges),
        )

    @property
    def node_count(self) -> int:
        """Number of nodes."""
        return int(self.adjacency.shape[0])


@dataclass(frozen=True)
class MeshGraphSequence:
    """
    Mesh connectivity plus per-node field values over discrete time steps.

    Parameters
    ----------
    positions: numpy.ndarray
        (N, 3) node positions.
    edges: numpy.ndarray
        (E, 2) undirected edges.
    fields: numpy.ndarray
        (T + 1, N, C) field values; frame 0 is the initial state.
    features: numpy.ndarray, optional
        (N, F) static surface-feature channels.
    """

    positions: NDArray
    edges: NDArray
    fields: NDArray
    features: Optional[NDArray] = None

    def __post_init__(self):
        positions = numpy.asarray(self.positions, dtype=numpy.float64)
        fields = numpy.asarray(self.fields, dtype=numpy.float64)
        if positions.ndim != 2 or positions.shape[1] != 3:
            raise InvalidDataError("Node positions must be (N, 3).")
        if fields.ndim != 3 or fields.shape[1] != positions.shape[0]:
            raise InvalidDataError("Fields must be (steps, N, channels).")
        if not numpy.isfinite(fields).all():
            raise InvalidDataError("Field values must be finite.")
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "fields", fields)
        edges = numpy.asarray(self.edges, dtype=numpy.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= positions.shape[0]):
            raise InvalidDataError("Edge index out of range.")
        object.__setattr__(self, "edges", edges)
        if self.features is not None:
            features = numpy.asarray(self.features, dtype=numpy.float64)
            if features.ndim != 2 or features.shape[0] != positions.shape[0]:
                raise InvalidDataError("Features must be (N, F).")
            object.__setattr__(self, "features", features)

    @property
    def node_count(self) -> int:
        """Number of nodes."""
        return int(self.positions.shape[0])

    @property
    def step_count(self) -> int:
        """Number of stored frames, including the initial state."""
        return int(self.fields.shape[0])

    @property
    def field_channels(self) -> int:
        """Number of predicted field channels."""
        return int(self.fields.shape[2])

    @property
    def feature_channels(self) -> int:
        """Number of static surface-feature channels."""
        return 0 if self.features is None else int(self.features.shape[1])

    def adjacency(self) -> NDArray:
        """Base mesh adjacency with self-loops."""
        return adjacency_from_edges(self.node_count, self.edges)

    def static_inputs(self, use_features: bool = True) -> NDArray:
        """Position (and feature) channels held constant during a rollout."""
        blocks = [self.positions]
        if use_features and self.features is not None:
            blocks.append(self.features)
        return numpy.concatenate(blocks, axis=1)

    def node_inputs(self, fields: NDArray, use_features: bool = True) -> NDArray:
        """Node input matrix X = [fields, positions, features]."""
        return numpy.concatenate([fields, self.static_inputs(use_features)], axis=1)

    def graph(self, step: int = 0, use_features: bool = True) -> MeshGraph:
        """The :obj:`MeshGraph` at a stored frame."""
        return MeshGraph.from_edges(
            self.node_inputs(self.fields[step], use_features), self.edges
        )

    def to_xarray(self) -> xarray.Dataset:
        """Labelled view of the sequence."""
        data_vars = {
            "fields": (("time", "node", "channel"), self.fields),
            "positions": (("node", "xyz"), self.positions),
            "edges": (("edge", "pair"), self.edges),
        }
        if self.features is not None:
            data_vars["features"] = (("node", "feature"), self.features)
        return xarray.Dataset(
            data_vars=data_vars,
            coords={
                "time": numpy.arange(self.step_count),
                "node": numpy.arange(self.node_count),
                "xyz": ["x", "y", "z"],
            },
        )

    @classmethod
    def from_xarray(cls, dataset: xarray.Dataset) -> "MeshGraphSequence":
        """Inverse of :meth:`to_xarray`."""
        return cls(
            positions=dataset["positions"].values,
            edges=dataset["edges"].values,
            fields=dataset["fields"].values,
            features=dataset["features"].values if "features" in dataset else None,
        )


def boolean_matrix_power(adjacency: NDArray, hops: int) -> NDArray:
    """Reachability within ``hops`` steps of a self-looped adjacency."""
    if hops < 1:
        raise InvalidArgumentError(f"hops={hops} must be at least 1.")
    step = adjacency.astype(numpy.int64)
    reach = adjacency.copy()
    for _ in range(hops - 1):
        reach = (reach.astype(numpy.int64) @ step) > 0
    return reach


def default_global_nodes(adjacency: NDArray) -> list[int]:
    """The single highest-degree node (lowest index on ties)."""
    degree = numpy.asarray(adjacency, dtype=bool).sum(axis=1)
    return [int(numpy.argmax(degree))]


def default_random_edges(node_count: int) -> int:
    """Random edge budget used when none is configured: ceil(N / 20)."""
    return math.ceil(node_count / 20)


def augment_adjacency(
    adjacency: ArrayLike,
    k: int = 1,
    r: int = 0,
    global_nodes: Optional[list[int]] = None,
    seed: int = 0,
) -> NDArray:
    """
    Widen the attention mask of a mesh graph.

    The result is the union of k-hop reachability, ``r`` seeded random
    symmetric node pairs, and full rows/columns for every global node.

    Parameters
    ----------
    adjacency: array-like
        (N, N) valid mask (symmetric, self-loops).
    k: int
        Hop count; 1 keeps the mesh neighborhood.
    r: int
        Number of random pairs.
    global_nodes: list[int], optional
        Nodes attending to and attended by every node.
    seed: int
        Seed for the random pairs; resample per epoch for dynamic edges.

    Returns
    -------
    numpy.ndarray
        Symmetric boolean (N, N) mask with a full diagonal.
    """
    adjacency = validate_adjacency(adjacency)
    node_count = adjacency.shape[0]
    augmented = boolean_matrix_power(adjacency, k)
    if r > 0 and node_count > 1:
        rng = numpy.random.default_rng(seed)
        for _ in range(r):
            first, second = rng.choice(node_count, size=2, replace=False)
            augmented[first, second] = True
            augmented[second, first] = True
    for node in global_nodes or ():
        if not 0 <= node < node_count:
            raise InvalidArgumentError(f"Global node {node} out of range.")
        augmented[node, :] = True
        augmented[:, node] = True
    numpy.fill_diagonal(augmented, True)
    return augmented
