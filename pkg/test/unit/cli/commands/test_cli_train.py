from unittest.mock import patch

import pytest
from click.testing import CliRunner

from surfeat.cli.surfeat import surfeat
from surfeat.harness.metrics import MetricReport
from surfeat.harness.protocols import ProtocolResult
from test.conftest import SMALL_CONFIG_TEXT


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(SMALL_CONFIG_TEXT)
    return path


def _result(failed=()):
    report = MetricReport.from_runs(
        "mlp-ablation / features / 32",
        "classify",
        [{"V": 0.9, "A": 0.8, "F1": 0.85}],
        run_ids=["classify-seed0"],
        failed=list(failed),
    )
    return ProtocolResult(report=report)


@patch("surfeat.cli.commands.train.core.train")
def test_train__options_override_config(train_mock, config_path, tmp_path):
    train_mock.return_value = _result()
    result = CliRunner().invoke(
        surfeat,
        [
            "--config",
            str(config_path),
            "--out",
            str(tmp_path / "out"),
            "--seed",
            "5",
            "--threads",
            "2",
            "train",
            "--n-points",
            "64",
            "--protocol",
            "kfold",
            "--name",
            "ablation",
        ],
    )
    assert result.exit_code == 0, result.output
    config = train_mock.call_args.args[0]
    assert config.seeds == (5, 6)
    assert config.n_points == 64
    assert config.protocol == "kfold"
    assert config.architecture == "mlp-ablation"
    assert train_mock.call_args.kwargs == {
        "data_dir": None,
        "threads": 2,
        "name": "ablation",
    }
    assert "V: 0.9000 ± 0.0000" in result.output


@patch("surfeat.cli.commands.train.core.train")
def test_train__partial_report_exits_3(train_mock, config_path, tmp_path):
    train_mock.return_value = _result(failed=["classify-seed1"])
    result = CliRunner().invoke(
        surfeat, ["--config", str(config_path), "--out", str(tmp_path), "train"]
    )
    assert result.exit_code == 3
    assert "1 run(s) aborted: classify-seed1" in result.output


def test_train__writes_outputs(config_path, tmp_path):
    out_dir = tmp_path / "out"
    result = CliRunner().invoke(
        surfeat, ["--config", str(config_path), "--out", str(out_dir), "train"]
    )
    assert result.exit_code == 0, result.output
    assert "(2 runs)" in result.output
    for name in ("config.txt", "metrics.csv", "report.json"):
        assert (out_dir / name).exists()
    assert sorted(path.name for path in (out_dir / "runs").glob("*.json")) == [
        "classify-seed0.json",
        "classify-seed1.json",
    ]
    assert len(list((out_dir / "runs").glob("*.sfck"))) == 2


@patch("surfeat.cli.commands.train.core.train")
def test_train__stat_baseline_options(train_mock, config_path, tmp_path):
    train_mock.return_value = _result()
    result = CliRunner().invoke(
        surfeat,
        [
            "--config",
            str(config_path),
            "--out",
            str(tmp_path),
            "train",
            "--architecture",
            "pca-mlp",
            "--stat-variant",
            "mean+std",
        ],
    )
    assert result.exit_code == 0, result.output
    config = train_mock.call_args.args[0]
    assert config.architecture == "pca-mlp"
    assert config.stat_variant == "mean+std"
    assert config.is_stat_baseline


def test_train__stat_baseline_writes_manifests_without_checkpoints(config_path, tmp_path):
    out_dir = tmp_path / "out"
    result = CliRunner().invoke(
        surfeat,
        [
            "--config",
            str(config_path),
            "--out",
            str(out_dir),
            "train",
            "--architecture",
            "pca-logistic",
        ],
    )
    assert result.exit_code == 0, result.output
    assert "Logistic on PCA / mean (2 runs)" in result.output
    assert len(list((out_dir / "runs").glob("*.json"))) == 2
    assert not list((out_dir / "runs").glob("*.sfck"))


def test_train__stat_baseline_rejects_segmentation(config_path, tmp_path):
    result = CliRunner().invoke(
        surfeat,
        [
            "--config",
            str(config_path),
            "--out",
            str(tmp_path),
            "train",
            "--task",
            "segment",
            "--architecture",
            "pca-logistic",
        ],
    )
    assert result.exit_code == 2
    assert "surface features only" in result.output
