"""
Synthetic diffusion sequences on random planar triangulations.
"""
import numpy
from numpy.typing import NDArray
from scipy.spatial import Delaunay

from surfeat.exceptions import InvalidArgumentError
from surfeat.meshsim.graph import MeshGraphSequence, adjacency_from_edges, canonical_edges

BUMPS = 3
BUMP_WIDTH = 0.15
FEATURE_NOISE = 0.05


def _triangulation_edges(points: NDArray) -> NDArray:
    triangles = Delaunay(points).simplices
    edges = numpy.concatenate(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [0, 2]]], axis=0
    )
    return canonical_edges(edges)


def graph_laplacian(node_count: int, edges: NDArray) -> NDArray:
    """Combinatorial Laplacian D - A of an undirected edge list."""
    adjacency = adjacency_from_edges(node_count, edges).astype(numpy.float64)
    numpy.fill_diagonal(adjacency, 0.0)
    return numpy.diag(adjacency.sum(axis=1)) - adjacency


def synth_mesh_sequence(
    n_nodes: int = 100,
    steps: int = 10,
    diffusivity: float = 0.5,
    seed: int = 0,
    *,
    with_features: bool = True,
) -> MeshGraphSequence:
    """
    Scalar field diffused over a random planar mesh.

    Nodes are uniform in the unit square and connected by their Delaunay
    triangulation. The field starts as a sum of Gaussian bumps and evolves
    by ``u <- u - (diffusivity / max_degree) L u``, which conserves the
    total field.

    The optional feature channels are noisy versions of the normalized
    node degree, of ``-L u0`` and of the neighbor mean of ``u0``, so they
    carry signal about the first steps of the evolution.

    Parameters
    ----------
    n_nodes: int
        At least 4.
    steps: int
        Number of steps after the initial frame.
    diffusivity: float
        In [0, 1]; 0 yields a constant sequence.
    seed: int
    with_features: bool

    Returns
    -------
    :obj:`surfeat.meshsim.graph.MeshGraphSequence`
    """
    if n_nodes < 4:
        raise InvalidArgumentError(f"n_nodes={n_nodes} must be at least 4.")
    if steps < 1:
        raise InvalidArgumentError(f"steps={steps} must be at least 1.")
    if not 0.0 <= diffusivity <= 1.0:
        raise InvalidArgumentError(f"diffusivity={diffusivity} must lie in [0, 1].")
    rng = numpy.random.default_rng(seed)
    planar = rng.uniform(size=(n_nodes, 2))
    edges = _triangulation_edges(planar)
    positions = numpy.column_stack([planar, numpy.zeros(n_nodes)])

    centers = rng.uniform(size=(BUMPS, 2))
    amplitudes = rng.uniform(0.5, 1.5, size=BUMPS)
    squared = ((planar[:, None, :] - centers[None]) ** 2).sum(axis=2)
    initial = (amplitudes * numpy.exp(-squared / (2 * BUMP_WIDTH**2))).sum(axis=1)

    laplacian = graph_laplacian(n_nodes, edges)
    degree = numpy.diag(laplacian)
    rate = diffusivity / degree.max()
    fields = numpy.empty((steps + 1, n_nodes, 1))
    fields[0, :, 0] = initial
    for step in range(1, steps + 1):
        current = fields[step - 1, :, 0]
        fields[step, :, 0] = current - rate * (laplacian @ current)

    features = None
    if with_features:
        noise = numpy.random.default_rng([seed, 1]).normal(
            scale=FEATURE_NOISE, size=(n_nodes, 3)
        )
        neighbor_mean = (degree * initial - laplacian @ initial) / degree
        features = numpy.column_stack(
            [degree / degree.max(), -(laplacian @ initial), neighbor_mean]
        ) + noise
    return MeshGraphSequence(positions=positions, edges=edges, fields=fields, features=features)
