import numpy
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from surfeat.exceptions import ContainerFormatError
from surfeat.featurestore import FeatureField, synth_classification_set
from surfeat.io.containers import (
    CLOUD_MAGIC,
    decode_cloud,
    decode_feature_field,
    decode_mesh_sequence,
    encode_cloud,
    encode_feature_field,
    encode_mesh_sequence,
    read_cloud,
    read_mesh_sequence,
    write_cloud,
    write_mesh_sequence,
)
from surfeat.meshsim.synthetic import synth_mesh_sequence


@pytest.fixture
def labeled():
    return synth_classification_set(2, 40, 6, 0.5, seed=3)[0]


def test_cloud__write_read_write_is_byte_identical(labeled, tmp_path):
    path = tmp_path / "object.sfpc"
    write_cloud(path, labeled)
    restored = read_cloud(path)
    assert encode_cloud(restored) == path.read_bytes()
    assert restored.object_label == labeled.object_label
    assert_array_equal(restored.point_labels, labeled.point_labels)
    assert_allclose(restored.cloud.positions, labeled.cloud.positions, atol=1e-6)
    assert_array_equal(restored.features, labeled.features)


def test_cloud__layout(labeled):
    data = encode_cloud(labeled)
    assert data[:8] == CLOUD_MAGIC
    assert numpy.frombuffer(data[8:16], dtype="<u4").tolist() == [40, 6]
    assert data[16] == 0b111
    # header, positions, normals, features, point labels, object label
    assert len(data) == 20 + 40 * 12 * 2 + 40 * 6 * 4 + 40 + 1


def test_cloud__bad_magic(labeled):
    data = b"XXXX0001" + encode_cloud(labeled)[8:]
    with pytest.raises(ContainerFormatError, match="magic"):
        decode_cloud(data)


def test_cloud__truncated(labeled):
    with pytest.raises(ContainerFormatError, match="Truncated"):
        decode_cloud(encode_cloud(labeled)[:-5])


def test_cloud__trailing_bytes(labeled):
    with pytest.raises(ContainerFormatError, match="Trailing"):
        decode_cloud(encode_cloud(labeled) + b"\x00")


def test_feature_field__round_trip():
    field = FeatureField(
        coords=[[0, 1, 2], [63, 0, 5]], tokens=[[0.5, -1.0], [2.0, 3.0]], grid_side=64
    )
    restored = decode_feature_field(encode_feature_field(field))
    assert restored.grid_side == 64
    assert_array_equal(restored.coords, field.coords)
    assert_array_equal(restored.tokens, field.tokens)


def test_mesh_sequence__features_block_optional(tmp_path):
    with_features = synth_mesh_sequence(12, 3, seed=1)
    without = synth_mesh_sequence(12, 3, seed=1, with_features=False)
    extra = len(encode_mesh_sequence(with_features)) - len(encode_mesh_sequence(without))
    assert extra == 12 * with_features.feature_channels * 4
    path = tmp_path / "sequence.sfms"
    write_mesh_sequence(path, with_features)
    restored = read_mesh_sequence(path)
    assert restored.step_count == 4
    assert_array_equal(restored.edges, with_features.edges)
    assert encode_mesh_sequence(restored) == path.read_bytes()
    assert decode_mesh_sequence(encode_mesh_sequence(without)).features is None
