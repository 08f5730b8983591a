"""
Readers and writers for the SFPC (point cloud), SFVX (voxel feature field)
and SFMS (mesh time series) binary containers. SFCK checkpoints live in
:mod:`surfeat.nncore.checkpoint` and are re-exported here.

All containers are little-endian, one object per file.
"""
import os
from typing import Union

import numpy

from surfeat.exceptions import ContainerFormatError
from surfeat.featurestore import FeatureField, LabeledCloud
from surfeat.geometry import PointCloud
from surfeat.io.binary import F32, U8, U16, U32, ByteReader, pack
from surfeat.meshsim.graph import MeshGraphSequence
from surfeat.nncore.checkpoint import (  # noqa: F401
    checkpoint_digest,
    read_checkpoint,
    write_checkpoint,
)

CLOUD_MAGIC = b"SFPC0001"
FIELD_MAGIC = b"SFVX0001"
SEQUENCE_MAGIC = b"SFMS0001"

_FLAG_NORMALS = 0b001
_FLAG_POINT_LABELS = 0b010
_FLAG_OBJECT_LABEL = 0b100

PathLike = Union[str, os.PathLike]


def _write(path: PathLike, payload: bytes) -> None:
    with open(path, "wb") as outfile:
        outfile.write(payload)


def _read(path: PathLike) -> bytes:
    with open(path, "rb") as infile:
        return infile.read()


def encode_cloud(labeled: LabeledCloud) -> bytes:
    """Serialize a :obj:`LabeledCloud` into SFPC bytes."""
    cloud = labeled.cloud
    flags = 0
    if cloud.normals is not None:
        flags |= _FLAG_NORMALS
    if labeled.point_labels is not None:
        flags |= _FLAG_POINT_LABELS
    if labeled.object_label is not None:
        flags |= _FLAG_OBJECT_LABEL
    parts = [
        CLOUD_MAGIC,
        pack([cloud.count, labeled.feature_dim], U32),
        bytes([flags, 0, 0, 0]),
        pack(cloud.positions, F32),
    ]
    if cloud.normals is not None:
        parts.append(pack(cloud.normals, F32))
    if labeled.features is not None:
        parts.append(pack(labeled.features, F32))
    if labeled.point_labels is not None:
        parts.append(pack(labeled.point_labels, U8))
    if labeled.object_label is not None:
        parts.append(pack([labeled.object_label], U8))
    return b"".join(parts)


def decode_cloud(data: bytes) -> LabeledCloud:
    """Parse SFPC bytes into a :obj:`LabeledCloud`."""
    reader = ByteReader(data, kind="SFPC")
    reader.magic(CLOUD_MAGIC)
    count = reader.scalar(U32)
    dim = reader.scalar(U32)
    flags = reader.scalar(U8)
    if reader.raw(3) != b"\x00\x00\x00":
        raise ContainerFormatError("SFPC padding bytes must be zero.")
    positions = reader.array(F32, count * 3).reshape(count, 3)
    normals = None
    if flags & _FLAG_NORMALS:
        normals = reader.array(F32, count * 3).reshape(count, 3)
    features = None
    if dim > 0:
        features = reader.array(F32, count * dim).reshape(count, dim)
    point_labels = None
    if flags & _FLAG_POINT_LABELS:
        point_labels = reader.array(U8, count)
    object_label = None
    if flags & _FLAG_OBJECT_LABEL:
        object_label = reader.scalar(U8)
    reader.finish()
    return LabeledCloud(
        cloud=PointCloud(
            positions=positions.astype(numpy.float64),
            normals=None if normals is None else normals.astype(numpy.float64),
        ),
        features=features,
        point_labels=point_labels,
        object_label=object_label,
    )


def write_cloud(path: PathLike, labeled: LabeledCloud) -> None:
    """Write one :obj:`LabeledCloud` to an SFPC file."""
    _write(path, encode_cloud(labeled))


def read_cloud(path: PathLike) -> LabeledCloud:
    """Read one :obj:`LabeledCloud` from an SFPC file."""
    return decode_cloud(_read(path))


def encode_feature_field(field: FeatureField) -> bytes:
    """Serialize a :obj:`FeatureField` into SFVX bytes."""
    return b"".join(
        [
            FIELD_MAGIC,
            pack([field.grid_side, field.active_count, field.feature_dim], U32),
            pack(field.coords, U16),
            pack(field.tokens, F32),
        ]
    )


def decode_feature_field(data: bytes) -> FeatureField:
    """Parse SFVX bytes into a :obj:`FeatureField`."""
    reader = ByteReader(data, kind="SFVX")
    reader.magic(FIELD_MAGIC)
    grid_side = reader.scalar(U32)
    active = reader.scalar(U32)
    dim = reader.scalar(U32)
    coords = reader.array(U16, active * 3).reshape(active, 3)
    tokens = reader.array(F32, active * dim).reshape(active, dim)
    reader.finish()
    return FeatureField(coords=coords, tokens=tokens, grid_side=grid_side)


def write_feature_field(path: PathLike, field: FeatureField) -> None:
    """Write one :obj:`FeatureField` to an SFVX file."""
    _write(path, encode_feature_field(field))


def read_feature_field(path: PathLike) -> FeatureField:
    """Read one :obj:`FeatureField` from an SFVX file."""
    return decode_feature_field(_read(path))


def encode_mesh_sequence(sequence: MeshGraphSequence) -> bytes:
    """Serialize a :obj:`MeshGraphSequence` into SFMS bytes."""
    parts = [
        SEQUENCE_MAGIC,
        pack(
            [
                sequence.node_count,
                sequence.edges.shape[0],
                sequence.field_channels,
                sequence.feature_channels,
                sequence.step_count,
            ],
            U32,
        ),
        pack(sequence.positions, F32),
        pack(sequence.edges, U32),
    ]
    if sequence.features is not None:
        parts.append(pack(sequence.features, F32))
    parts.append(pack(sequence.fields, F32))
    return b"".join(parts)


def decode_mesh_sequence(data: bytes) -> MeshGraphSequence:
    """Parse SFMS bytes into a :obj:`MeshGraphSequence`."""
    reader = ByteReader(data, kind="SFMS")
    reader.magic(SEQUENCE_MAGIC)
    nodes, edges, channels, feature_channels, steps = (
        reader.scalar(U32) for _ in range(5)
    )
    positions = reader.array(F32, nodes * 3).reshape(nodes, 3)
    edge_pairs = reader.array(U32, edges * 2).reshape(edges, 2)
    features = None
    if feature_channels > 0:
        features = reader.array(F32, nodes * feature_channels).reshape(
            nodes, feature_channels
        )
    fields = reader.array(F32, steps * nodes * channels).reshape(steps, nodes, channels)
    reader.finish()
    return MeshGraphSequence(
        positions=positions.astype(numpy.float64),
        edges=edge_pairs.astype(numpy.int64),
        fields=fields.astype(numpy.float64),
        features=None if features is None else features.astype(numpy.float64),
    )


def write_mesh_sequence(path: PathLike, sequence: MeshGraphSequence) -> None:
    """Write one :obj:`MeshGraphSequence` to an SFMS file."""
    _write(path, encode_mesh_sequence(sequence))


def read_mesh_sequence(path: PathLike) -> MeshGraphSequence:
    """Read one :obj:`MeshGraphSequence` from an SFMS file."""
    return decode_mesh_sequence(_read(path))
