import math

import numpy
import pytest
from numpy.testing import assert_array_equal

from surfeat.config import TrainingConfig
from surfeat.exceptions import InvalidArgumentError, InvalidDataError, RunAbortedError
from surfeat.featurestore import synth_classification_set, synth_segmentation_set
from surfeat.geometry import sample_to_fixed
from surfeat.harness.protocols import synth_rollout_dataset
from surfeat.harness.training import (
    CloudArrays,
    derived_seed,
    evaluate_cloud_model,
    evaluate_stat_baseline,
    evaluate_surrogate,
    fit_stat_baseline,
    predict_cloud_model,
    prepare_clouds,
    train_cloud_model,
    train_surrogate,
)
from surfeat.nncore.checkpoint import checkpoint_digest


def _config(**changes):
    values = dict(
        architecture="mlp-ablation",
        feature_dim=4,
        n_points=32,
        allow_any_size=True,
        epochs=2,
        batch_size=4,
    )
    values.update(changes)
    return TrainingConfig(**values)


@pytest.fixture(scope="module")
def arrays():
    objects = synth_classification_set(8, 40, 4, 1.0, seed=0)
    return prepare_clouds(objects, _config(), seed=0)


def test_derived_seed():
    assert derived_seed(1, 2) == derived_seed(1, 2)
    assert derived_seed(1, 2) != derived_seed(2, 1)
    assert 0 <= derived_seed(5) < 2**32


def test_prepare_clouds__shapes(arrays):
    assert len(arrays) == 8
    assert arrays.positions.shape == (8, 32, 3)
    assert arrays.aux.shape == (8, 32, 4)
    assert arrays.point_labels.shape == (8, 32)
    assert set(arrays.object_labels.tolist()) == {0, 1}


def test_prepare_clouds__normals_channel():
    objects = synth_segmentation_set(3, 40, 4, 1.0, seed=1)
    config = _config(task="segment", architecture="pointnet-mod", auxiliary="normals")
    prepared = prepare_clouds(objects, config)
    norms = numpy.linalg.norm(prepared.aux, axis=-1)
    assert numpy.abs(norms - 1).max() < 1e-4


def test_prepare_clouds__missing_features():
    objects = synth_classification_set(2, 40, 4, 1.0, seed=0)
    stripped = [type(item)(cloud=item.cloud, object_label=item.object_label) for item in objects]
    with pytest.raises(InvalidDataError, match="no surface features"):
        prepare_clouds(stripped, _config())
    with pytest.raises(InvalidDataError, match="per-point labels"):
        prepare_clouds(
            stripped, _config(task="segment", architecture="pointnet-mod", auxiliary="normals")
        )


def test_train_cloud_model__deterministic(arrays):
    indices = numpy.arange(6)
    first = train_cloud_model(arrays, indices, _config(), seed=3)
    second = train_cloud_model(arrays, indices, _config(), seed=3)
    assert len(first.losses) == 2
    assert all(math.isfinite(loss) for loss in first.losses)
    assert checkpoint_digest(first.checkpoint()) == checkpoint_digest(second.checkpoint())
    assert first.optimizer.state.step == 4


def test_train_cloud_model__loss_decreases(arrays):
    trained = train_cloud_model(arrays, numpy.arange(8), _config(epochs=20), seed=0)
    assert trained.losses[-1] < trained.losses[0]


def test_train_cloud_model__aborts_on_non_finite(arrays):
    poisoned = CloudArrays(
        positions=arrays.positions,
        aux=numpy.full_like(arrays.aux, numpy.nan),
        object_labels=arrays.object_labels,
    )
    with pytest.raises(RunAbortedError, match="Non-finite"):
        train_cloud_model(poisoned, numpy.arange(4), _config(), seed=0)


def test_evaluate_cloud_model__thread_independent(arrays):
    trained = train_cloud_model(arrays, numpy.arange(6), _config(), seed=1)
    serial = predict_cloud_model(trained.model, arrays, numpy.arange(8), batch_size=2)
    pooled = predict_cloud_model(trained.model, arrays, numpy.arange(8), batch_size=2, threads=3)
    assert_array_equal(serial, pooled)
    metrics = evaluate_cloud_model(trained.model, arrays, numpy.arange(8), _config(), threads=2)
    assert set(metrics) == {"V", "A", "F1"}
    assert 0.0 <= metrics["F1"] <= 1.0


def test_train_and_evaluate_surrogate():
    config = TrainingConfig(
        task="rollout", n_nodes=16, time_steps=4, train_sequences=2, train_steps=4
    )
    sequences = synth_rollout_dataset(config, seed=0)
    assert len(sequences) == 3
    trained = train_surrogate(sequences[:2], config, seed=0)
    assert len(trained.losses) == 2
    metrics, records = evaluate_surrogate(trained.model, sequences[2:], config, seed=0)
    assert len(records) == 1
    assert math.isfinite(metrics["RMSE"]) and metrics["RMSE"] >= 0
    again, _ = evaluate_surrogate(trained.model, sequences[2:], config, seed=0, threads=2)
    assert again == metrics


def test_prepare_clouds__records_fps_starts(arrays):
    objects = synth_classification_set(8, 40, 4, 1.0, seed=0)
    expected = [
        sample_to_fixed(
            item.cloud, item.features, n=32, seed=derived_seed(0, index), allow_any_size=True
        ).start
        for index, item in enumerate(objects)
    ]
    assert arrays.starts.tolist() == expected


@pytest.mark.parametrize("changes", [{"sampling_mode": "uniform"}, {"n_points": 64}])
def test_prepare_clouds__no_fps_start(changes):
    objects = synth_classification_set(3, 40, 4, 1.0, seed=0)
    assert prepare_clouds(objects, _config(**changes)).starts.tolist() == [-1, -1, -1]


@pytest.mark.parametrize("architecture", ["pca-logistic", "pca-mlp"])
def test_fit_stat_baseline__deterministic(arrays, architecture):
    config = _config(architecture=architecture, stat_variant="all")
    indices = numpy.arange(8)
    first = evaluate_stat_baseline(fit_stat_baseline(arrays, indices, config, 2), arrays, indices)
    second = evaluate_stat_baseline(fit_stat_baseline(arrays, indices, config, 2), arrays, indices)
    assert set(first) == {"V", "A", "F1"}
    assert first == second
    assert all(0.0 <= value <= 1.0 for value in first.values())


def test_fit_stat_baseline__errors(arrays):
    with pytest.raises(InvalidArgumentError, match="not a PCA-statistic"):
        fit_stat_baseline(arrays, numpy.arange(8), _config(), 0)
    with pytest.raises(InvalidArgumentError, match="Empty training set"):
        fit_stat_baseline(arrays, [], _config(architecture="pca-logistic"), 0)
