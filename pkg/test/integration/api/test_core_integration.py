import json

import numpy
import pandas
import pytest

from surfeat.api.core import analyze, evaluate, report, synthesize, train
from surfeat.config import TrainingConfig
from surfeat.harness.protocols import synth_rollout_dataset
from surfeat.harness.training import build_surrogate, evaluate_surrogate

SMALL = {
    "n_objects": 12,
    "n_points": 48,
    "feature_dim": 4,
    "allow_any_size": True,
    "epochs": 2,
    "batch_size": 4,
    "seeds": (0, 1),
    "hidden_width": 8,
}


def _balanced_accuracy(result):
    summary = result.report.summary()
    return 0.5 * (summary.loc["V", "mean"] + summary.loc["A", "mean"])


@pytest.mark.parametrize("architecture", ["pointnet-mod", "pointnetpp"])
@pytest.mark.parametrize("task", ["classify", "segment"])
def test_train__small_runs_complete(architecture, task, tmp_path):
    config = TrainingConfig(task=task, architecture=architecture, **SMALL)
    result = train(config, tmp_path)
    assert not result.report.partial
    assert len(result.report.runs) == 2
    stored = json.loads((tmp_path / "report.json").read_text())
    assert stored["run_ids"] == [f"{task}-seed0", f"{task}-seed1"]
    for run_id in stored["run_ids"]:
        rescored = evaluate(tmp_path / "runs" / f"{run_id}.json")
        expected = result.report.runs.iloc[stored["run_ids"].index(run_id)].to_dict()
        assert rescored == pytest.approx(expected, nan_ok=True)


def test_synthesize_analyze_report__round_trip(tmp_path):
    data_dir = tmp_path / "data"
    synthesize("classify", data_dir, n_objects=10, n_points=32, feature_dim=4, signal=1.0)
    config = TrainingConfig(architecture="mlp-ablation", **{**SMALL, "n_objects": 10})
    train(config, tmp_path / "train", data_dir=data_dir, name="mlp")
    for kind in ("pca", "cluster"):
        assert analyze(kind, data_dir, tmp_path / "analysis", k_range=range(2, 5))
    rendered = report([tmp_path / "train"], tmp_path / "report")
    assert "[classification]" in rendered.text
    assert "mlp" in rendered.text
    table = pandas.read_csv(tmp_path / "report" / "classification.csv")
    assert table["model"].tolist() == ["mlp"]


def test_stat_baselines__report_rows(tmp_path):
    common = {**SMALL, "n_objects": 20, "signal": 1.0, "stat_variant": "mean+std"}
    run_dirs = []
    for architecture in ("pca-logistic", "pca-mlp"):
        run_dir = tmp_path / architecture
        result = train(TrainingConfig(architecture=architecture, **common), run_dir)
        assert not result.report.partial
        assert list(result.report.columns) == ["V", "A", "F1"]
        assert len(result.report.runs) == 2
        for run_id in result.report.run_ids:
            rescored = evaluate(run_dir / "runs" / f"{run_id}.json")
            expected = result.report.runs.iloc[result.report.run_ids.index(run_id)].to_dict()
            assert rescored == pytest.approx(expected, nan_ok=True)
        run_dirs.append(run_dir)
    rendered = report(run_dirs, tmp_path / "report")
    table = pandas.read_csv(tmp_path / "report" / "classification.csv")
    assert table["model"].tolist() == ["Logistic on PCA / mean+std", "MLP on PCA / mean+std"]
    assert "MLP on PCA / mean+std" in rendered.text


@pytest.mark.slow
def test_classification_benchmark__features_beat_normals(tmp_path):
    common = {
        "architecture": "pointnet-mod",
        "n_objects": 200,
        "n_points": 128,
        "feature_dim": 16,
        "signal": 0.8,
        "allow_any_size": True,
        "epochs": 20,
        "seeds": (0, 1, 2, 3, 4),
    }
    features = train(TrainingConfig(auxiliary="features", **common), tmp_path / "features")
    normals = train(TrainingConfig(auxiliary="normals", **common), tmp_path / "normals")
    assert _balanced_accuracy(features) >= 0.95
    assert _balanced_accuracy(features) >= _balanced_accuracy(normals) + 0.05


@pytest.mark.slow
@pytest.mark.parametrize("architecture", ["pointnet-mod", "pointnetpp"])
def test_segmentation_benchmark__features_beat_normals(architecture, tmp_path):
    common = {
        "task": "segment",
        "architecture": architecture,
        "n_objects": 40,
        "n_points": 128,
        "feature_dim": 16,
        "signal": 0.8,
        "allow_any_size": True,
        "epochs": 20,
        "seeds": (0, 1, 2),
    }
    features = train(TrainingConfig(auxiliary="features", **common), tmp_path / "features")
    normals = train(TrainingConfig(auxiliary="normals", **common), tmp_path / "normals")
    features_iou = features.report.summary().loc["IoU_A", "mean"]
    assert features_iou >= 0.9
    assert features_iou > normals.report.summary().loc["IoU_A", "mean"]


@pytest.mark.slow
def test_rollout_benchmark__training_and_features_reduce_error(tmp_path):
    seeds = (0, 1, 2, 3, 4)
    config = TrainingConfig(task="rollout", n_nodes=100, time_steps=10, seeds=seeds)
    trained = train(config, tmp_path / "features")
    untrained = []
    for seed in seeds:
        sequences = synth_rollout_dataset(config, seed)
        model = build_surrogate(sequences[0], config, seed)
        metrics, _ = evaluate_surrogate(model, sequences[-1:], config, seed)
        untrained.append(metrics["RMSE"])
    trained_rmse = trained.report.runs["RMSE"].to_numpy()
    assert (trained_rmse <= 0.5 * numpy.array(untrained)).all()

    plain = train(config.replace(use_features=False), tmp_path / "plain")
    assert trained_rmse.mean() <= plain.report.runs["RMSE"].mean()
