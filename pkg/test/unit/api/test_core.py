import json

import numpy
import pandas
import pytest

from surfeat.api.core import (
    analyze,
    evaluate,
    load_clouds,
    load_dataset,
    load_sequences,
    read_report,
    read_stats,
    report,
    synthesize,
    train,
    tsne_notes,
)
from surfeat.config import TrainingConfig, parse_config
from surfeat.exceptions import InvalidArgumentError, InvalidDataError
from surfeat.harness.manifest import RunManifest


def _cloud_config(**changes):
    values = dict(
        architecture="mlp-ablation",
        feature_dim=4,
        n_objects=10,
        n_points=32,
        allow_any_size=True,
        epochs=1,
        batch_size=4,
        seeds=(0, 1),
    )
    values.update(changes)
    return TrainingConfig(**values)


@pytest.fixture(scope="module")
def classify_dir(tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("classify")
    synthesize("classify", out_dir, n_objects=8, n_points=32, feature_dim=4, signal=1.0, seed=2)
    return out_dir


def test_synthesize__classify(classify_dir):
    assert len(sorted(classify_dir.glob("*.sfpc"))) == 8
    objects = load_clouds(classify_dir)
    assert objects[0].features.shape == (32, 4)
    stats = read_stats(classify_dir)
    assert stats["object_id"].tolist()[0] == "object_00000"
    assert sorted(set(stats["label"])) == [0, 1]
    means = [column for column in stats.columns if column.startswith("mean_")]
    assert means == [f"mean_{dim}" for dim in range(4)]


def test_read_stats__computes_without_table(classify_dir, tmp_path):
    for path in classify_dir.glob("*.sfpc"):
        (tmp_path / path.name).write_bytes(path.read_bytes())
    computed = read_stats(tmp_path)
    stored = read_stats(classify_dir / "stats.csv")
    numpy.testing.assert_allclose(
        computed.filter(like="std_").to_numpy(), stored.filter(like="std_").to_numpy(), rtol=1e-9
    )


def test_synthesize__rollout(tmp_path):
    paths = synthesize("rollout", tmp_path, n_objects=2, n_nodes=12, steps=3, seed=1)
    assert [path.name for path in paths] == ["sequence_00000.sfms", "sequence_00001.sfms"]
    sequences = load_sequences(tmp_path)
    assert sequences[0].fields.shape[0] == 4


def test_synthesize__unknown_kind(tmp_path):
    with pytest.raises(InvalidArgumentError):
        synthesize("detect", tmp_path)


def test_load_clouds__empty_directory(tmp_path):
    with pytest.raises(InvalidDataError):
        load_clouds(tmp_path)
    with pytest.raises(InvalidDataError):
        load_sequences(tmp_path)


def test_load_dataset__synthetic_is_seeded_by_first_seed():
    config = _cloud_config(n_objects=4, seeds=(5, 6))
    first = load_dataset(config)
    second = load_dataset(config.replace(seeds=(5,)))
    assert len(first) == 4
    numpy.testing.assert_array_equal(first[0].features, second[0].features)
    assert load_dataset(TrainingConfig(task="rollout")) is None


def test_train_then_evaluate(tmp_path):
    config = _cloud_config()
    result = train(config, tmp_path)
    assert parse_config((tmp_path / "config.txt").read_text()) == config
    assert (tmp_path / "metrics.csv").read_text() == result.report.to_csv()
    assert read_report(tmp_path).digest() == result.report.digest()
    manifest_path = tmp_path / "runs" / "classify-seed1.json"
    assert (tmp_path / "runs" / "classify-seed1.sfck").exists()
    manifest = RunManifest.read(manifest_path)
    assert evaluate(manifest_path) == manifest.metrics


def test_train__single_protocol(tmp_path):
    result = train(_cloud_config(protocol="single", seeds=(3, 4)), tmp_path)
    assert result.report.run_ids == ["classify-seed3"]


def test_train_then_evaluate__rollout(tmp_path):
    config = TrainingConfig(
        task="rollout", n_nodes=12, time_steps=3, train_sequences=1, train_steps=2, seeds=(0,)
    )
    result = train(config, tmp_path)
    manifest_path = tmp_path / "runs" / "rollout-seed0.json"
    metrics = evaluate(manifest_path)
    assert metrics["RMSE"] == pytest.approx(result.report.runs["RMSE"][0])


@pytest.mark.parametrize(
    "architecture, name", [("pca-logistic", "Logistic on PCA"), ("pca-mlp", "MLP on PCA")]
)
def test_train_then_evaluate__stat_baseline(architecture, name, tmp_path):
    config = _cloud_config(architecture=architecture, stat_variant="mean+std", n_objects=20)
    result = train(config, tmp_path)
    assert result.report.name == f"{name} / mean+std"
    manifest_path = tmp_path / "runs" / "classify-seed0.json"
    manifest = RunManifest.read(manifest_path)
    assert manifest.checkpoint_digest is None
    assert not manifest_path.with_suffix(".sfck").exists()
    assert evaluate(manifest_path) == pytest.approx(manifest.metrics, nan_ok=True)


def test_evaluate__aborted_run(tmp_path):
    config = _cloud_config()
    train(config, tmp_path)
    manifest_path = tmp_path / "runs" / "classify-seed0.json"
    manifest = RunManifest.read(manifest_path)
    manifest.abort("diverged")
    manifest.write(manifest_path)
    with pytest.raises(InvalidDataError, match="did not complete"):
        evaluate(manifest_path)


def test_analyze__pca(classify_dir, tmp_path):
    paths = analyze("pca", classify_dir, tmp_path)
    assert sorted(path.name for path in paths) == [
        "pca.txt",
        "projection_pca.csv",
        "projection_pca.svg",
    ]
    frame = pandas.read_csv(tmp_path / "projection_pca.csv")
    assert frame.columns.tolist() == ["object_id", "x", "y", "label"]
    assert (tmp_path / "pca.txt").read_text() == "# statistic=mean\n"


def test_analyze__tsne_records_hyperparameters(classify_dir, tmp_path):
    analyze("tsne", classify_dir, tmp_path, perplexity=2.0, seed=1)
    notes = (tmp_path / "tsne.txt").read_text()
    assert tsne_notes(2.0)[0] in notes
    assert "learning_rate=200" in notes
    assert "gains=+0.2/x0.8>=0.01" in notes


def test_analyze__cluster(classify_dir, tmp_path):
    analyze("cluster", classify_dir, tmp_path, k_range=range(2, 5))
    silhouettes = pandas.read_csv(tmp_path / "silhouette.csv")
    assert silhouettes["k"].tolist() == [2, 3, 4]
    clusters = pandas.read_csv(tmp_path / "clusters.csv")
    assert clusters.columns.tolist() == ["object_id", "x", "y", "cluster"]
    assert "selected_k=" in (tmp_path / "cluster.txt").read_text()


def test_analyze__correlate(classify_dir, tmp_path):
    stats = read_stats(classify_dir)
    metrics = pandas.DataFrame(
        {
            "object_id": stats["object_id"][::-1],
            "TAWSS": numpy.linspace(0.5, 2.0, len(stats)),
        }
    )
    metrics_path = tmp_path / "hemodynamics.csv"
    metrics.to_csv(metrics_path, index=False)
    analyze("correlate", classify_dir, tmp_path, metrics_path=metrics_path, stat="max")
    table = pandas.read_csv(tmp_path / "correlation.csv", index_col=0)
    assert table.index.tolist() == ["PC1", "PC2", "PC3"]
    assert table.columns.tolist() == ["TAWSS"]
    assert table["TAWSS"].abs().max() <= 1.0


def test_analyze__errors(classify_dir, tmp_path):
    with pytest.raises(InvalidArgumentError):
        analyze("correlate", classify_dir, tmp_path)
    with pytest.raises(InvalidArgumentError):
        analyze("pca", classify_dir, tmp_path, stat="median")
    with pytest.raises(InvalidArgumentError):
        analyze("umap", classify_dir, tmp_path)
    orphan = tmp_path / "orphan.csv"
    pandas.DataFrame({"object_id": ["object_99999"] * 3, "TAWSS": [1.0, 2.0, 3.0]}).to_csv(
        orphan, index=False
    )
    with pytest.raises(InvalidDataError):
        analyze("correlate", classify_dir, tmp_path, metrics_path=orphan)


def test_report(tmp_path):
    train(_cloud_config(), tmp_path / "run")
    rendered = report([tmp_path / "run"], tmp_path / "report", references=True)
    assert "classify" in rendered.tables
    assert (tmp_path / "report" / "report.txt").exists()
    assert json.loads((tmp_path / "run" / "report.json").read_text())["task"] == "classify"
    with pytest.raises(InvalidDataError):
        report([tmp_path], tmp_path / "other")
