"""
Conversion of external files into surfeat containers.

* Meshes (any format trimesh loads) become normalized point clouds with
  vertex normals.
* ``.npz`` token files with ``coords`` (K, 3) and ``feats`` (K, D) arrays
  become voxel feature fields.
"""
import os
from pathlib import Path
from typing import Optional, Union

import numpy
import trimesh

from surfeat.exceptions import InvalidArgumentError, InvalidDataError
from surfeat.featurestore import GRID_SIDE, FeatureField, LabeledCloud, assign_voxel_features
from surfeat.geometry import PointCloud, normalize_cloud
from surfeat.io.containers import write_cloud, write_feature_field
from surfeat.logger import get_logger

PathLike = Union[str, os.PathLike]

MESH_SUFFIXES = (".obj", ".ply", ".stl", ".off", ".glb", ".gltf")
TOKEN_SUFFIX = ".npz"


def load_mesh_cloud(
    path: PathLike,
    *,
    labels_path: Optional[PathLike] = None,
    object_label: Optional[int] = None,
) -> LabeledCloud:
    """
    Vertices and vertex normals of a mesh as a normalized cloud.

    Vertices without a defined normal (not used by any face) are dropped.

    Parameters
    ----------
    path: str or path-like
        Mesh file.
    labels_path: str or path-like, optional
        ``.npy`` array with one part label per mesh vertex.
    object_label: int, optional
    """
    try:
        mesh = trimesh.load(path, force="mesh", process=False)
    except (ValueError, OSError) as error:
        raise InvalidDataError(f"Unable to load mesh {path}: {error}") from None
    if not isinstance(mesh, trimesh.Trimesh) or len(mesh.faces) == 0:
        raise InvalidDataError(f"{path} does not contain a triangle mesh.")
    positions = numpy.asarray(mesh.vertices, dtype=numpy.float64)
    normals = numpy.asarray(mesh.vertex_normals, dtype=numpy.float64)
    lengths = numpy.linalg.norm(normals, axis=1)
    keep = lengths > 0
    if not keep.all():
        get_logger().warning(
            f"{path}: dropping {int((~keep).sum())} vertices without a normal."
        )
    point_labels = None
    if labels_path is not None:
        point_labels = numpy.load(labels_path)
        if point_labels.shape != (positions.shape[0],):
            raise InvalidDataError(
                f"{labels_path} holds {point_labels.shape} labels for "
                f"{positions.shape[0]} vertices."
            )
        point_labels = point_labels[keep]
    cloud = normalize_cloud(
        PointCloud(positions=positions[keep], normals=normals[keep] / lengths[keep, None])
    )
    return LabeledCloud(cloud=cloud, point_labels=point_labels, object_label=object_label)


def load_feature_tokens(path: PathLike, grid_side: int = GRID_SIDE) -> FeatureField:
    """Voxel feature field from an ``.npz`` file with ``coords`` and ``feats``."""
    try:
        with numpy.load(path) as archive:
            coords = archive["coords"]
            tokens = archive["feats"]
    except KeyError as error:
        raise InvalidDataError(f"{path} lacks the {error} array.") from None
    except (ValueError, OSError) as error:
        raise InvalidDataError(f"Unable to read {path}: {error}") from None
    return FeatureField(coords=coords, tokens=tokens, grid_side=grid_side)


def attach_features(labeled: LabeledCloud, field: FeatureField) -> LabeledCloud:
    """Give every point of a cloud the token of its nearest active voxel."""
    return LabeledCloud(
        cloud=labeled.cloud,
        features=assign_voxel_features(field, labeled.cloud),
        point_labels=labeled.point_labels,
        object_label=labeled.object_label,
    )


def ingest_file(
    path: PathLike,
    out_dir: PathLike,
    *,
    features_path: Optional[PathLike] = None,
    labels_path: Optional[PathLike] = None,
    object_label: Optional[int] = None,
) -> Path:
    """
    Convert one input file and write the container next to its stem in
    ``out_dir``: ``.sfpc`` for meshes, ``.sfvx`` for token files.

    Returns
    -------
    pathlib.Path
        The written container.
    """
    path = Path(path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    suffix = path.suffix.lower()
    if suffix == TOKEN_SUFFIX:
        if features_path is not None or labels_path is not None:
            raise InvalidArgumentError("Token files take no extra feature or label input.")
        target = out_dir / f"{path.stem}.sfvx"
        write_feature_field(target, load_feature_tokens(path))
    elif suffix in MESH_SUFFIXES:
        labeled = load_mesh_cloud(path, labels_path=labels_path, object_label=object_label)
        if features_path is not None:
            labeled = attach_features(labeled, load_feature_tokens(features_path))
        target = out_dir / f"{path.stem}.sfpc"
        write_cloud(target, labeled)
    else:
        raise InvalidArgumentError(f"Unsupported input file type: {path.suffix}")
    get_logger().info(f"Ingested {path} -> {target}")
    return target
