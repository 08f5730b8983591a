import numpy
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from surfeat.exceptions import InvalidArgumentError, InvalidDataError
from surfeat.featurestore import (
    FeatureField,
    LabeledCloud,
    aggregate_stats,
    aggregate_stats_by_label,
    assign_voxel_features,
    stats_from_table,
    stats_table,
    synth_classification_set,
    synth_cloud,
    synth_features,
    synth_segmentation_set,
)
from surfeat.geometry import PointCloud


def test_feature_field__rejects_duplicate_coords():
    with pytest.raises(InvalidDataError, match="unique"):
        FeatureField(coords=[[1, 1, 1], [1, 1, 1]], tokens=numpy.zeros((2, 2)), grid_side=4)


def test_feature_field__rejects_out_of_grid():
    with pytest.raises(InvalidDataError):
        FeatureField(coords=[[4, 0, 0]], tokens=numpy.zeros((1, 2)), grid_side=4)


def test_assign_voxel_features__nearest_center():
    field = FeatureField(
        coords=[[0, 0, 0], [3, 3, 3]], tokens=[[1.0, 0.0], [0.0, 1.0]], grid_side=4
    )
    cloud = PointCloud(positions=[[-0.7, -0.7, -0.7], [0.8, 0.6, 0.9], [-0.1, -0.2, -0.3]])
    assert_array_equal(assign_voxel_features(field, cloud), [[1, 0], [0, 1], [1, 0]])


def test_assign_voxel_features__tie_goes_to_lowest_index():
    field = FeatureField(
        coords=[[2, 2, 2], [1, 1, 1]], tokens=[[5.0], [7.0]], grid_side=4
    )
    # grid position 2.0 is equidistant from centers 1.5 and 2.5
    cloud = PointCloud(positions=[[0.0, 0.0, 0.0]])
    assert_array_equal(assign_voxel_features(field, cloud), [[5.0]])


def test_aggregate_stats():
    stats = aggregate_stats([[1.0, 2.0], [3.0, 2.0], [5.0, 2.0]])
    assert_allclose(stats.mean, [3.0, 2.0])
    assert_allclose(stats.std, [numpy.sqrt(8.0 / 3.0), 0.0])
    assert_allclose(stats.min, [1.0, 2.0])
    assert_allclose(stats.max, [5.0, 2.0])
    assert_allclose(stats.get("max"), stats.max)


def test_aggregate_stats__single_point():
    stats = aggregate_stats([[0.1, 0.2, 0.3]])
    assert_allclose(stats.std, 0.0)
    assert_allclose(stats.mean, stats.min)


def test_aggregate_stats__empty():
    with pytest.raises(InvalidDataError):
        aggregate_stats(numpy.zeros((0, 4)))


def test_object_stats__unknown_name():
    with pytest.raises(InvalidArgumentError):
        aggregate_stats([[1.0]]).get("median")


def test_aggregate_stats_by_label__missing_part():
    by_label = aggregate_stats_by_label([[1.0], [3.0]], [0, 0])
    assert by_label[1] is None
    assert_allclose(by_label[0].mean, [2.0])


def test_synth_features__signal_dimensions():
    cloud = PointCloud(positions=numpy.zeros((4000, 3)))
    positive = synth_features(1, cloud, 8, 0.25, seed=0)
    negative = synth_features(0, cloud, 8, 0.25, seed=0)
    assert positive.dtype == numpy.float32
    assert_allclose(positive[:, :2] - negative[:, :2], 2.0, atol=1e-5)
    assert_allclose(positive[:, 2:], negative[:, 2:])


def test_synth_features__origin_shift():
    cloud = PointCloud(positions=numpy.zeros((10, 3)))
    base = synth_features(0, cloud, 4, 0.5, seed=1)
    shifted = synth_features(0, cloud, 4, 0.5, seed=1, origin_shift=3.0)
    assert_allclose(shifted - base, 3.0, atol=1e-5)


def test_synth_features__small_dim():
    with pytest.raises(InvalidArgumentError):
        synth_features(0, PointCloud(positions=numpy.zeros((2, 3))), 3, 0.5, seed=0)


def test_synth_cloud__labels_and_normals():
    labeled = synth_cloud(1, 200, seed=4)
    assert labeled.count == 200
    assert labeled.point_labels.sum() == 50
    assert_allclose(numpy.linalg.norm(labeled.cloud.normals, axis=1), 1.0)
    assert numpy.linalg.norm(labeled.cloud.positions, axis=1).max() == pytest.approx(1.0)


def test_synth_classification_set__balanced_and_deterministic():
    first = synth_classification_set(10, 64, 4, 0.5, seed=9)
    second = synth_classification_set(10, 64, 4, 0.5, seed=9)
    assert sorted(item.object_label for item in first) == [0] * 5 + [1] * 5
    for one, other in zip(first, second):
        assert_array_equal(one.features, other.features)
        assert_array_equal(one.cloud.positions, other.cloud.positions)


def test_synth_segmentation_set__part_features():
    objects = synth_segmentation_set(3, 80, 4, 1.0, seed=2)
    for labeled in objects:
        aneurysm = labeled.features[labeled.point_labels == 1].mean()
        vessel = labeled.features[labeled.point_labels == 0].mean()
        assert aneurysm > vessel


def test_labeled_cloud__shape_mismatch():
    with pytest.raises(InvalidDataError):
        LabeledCloud(cloud=PointCloud(positions=numpy.zeros((3, 3))), point_labels=[0, 1])


def test_stats_table__columns_and_inverse():
    stats = [aggregate_stats([[1.0, 2.0], [3.0, 4.0]]), aggregate_stats([[0.0, 0.0]])]
    table = stats_table(stats, labels={"label": [0, 1]})
    assert list(table.columns[:2]) == ["object_id", "label"]
    assert "max_1" in table.columns
    assert table["object_id"].tolist() == ["object_00000", "object_00001"]
    restored = stats_from_table(table)
    assert_allclose(restored[0].mean, [2.0, 3.0])
    assert_allclose(restored[1].max, [0.0, 0.0])
