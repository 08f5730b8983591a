from unittest.mock import patch

import pandas
import pytest
from click.testing import CliRunner

from surfeat.cli.surfeat import surfeat


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("clouds")
    result = CliRunner().invoke(
        surfeat,
        ["--out", str(path), "synth", "classify"]
        + ["-n", "8", "-p", "32", "-d", "4", "--signal", "1"],
    )
    assert result.exit_code == 0, result.output
    return path


@patch("surfeat.cli.commands.analyze.core.analyze", return_value=[])
def test_analyze__params(analyze_mock, data_dir, tmp_path):
    result = CliRunner().invoke(
        surfeat,
        [
            "--out",
            str(tmp_path),
            "analyze",
            "cluster",
            str(data_dir),
            "--stat",
            "max",
            "--on",
            "tsne",
            "--k-range",
            "2",
            "4",
            "--perplexity",
            "5",
        ],
    )
    assert result.exit_code == 0, result.output
    analyze_mock.assert_called_with(
        "cluster",
        str(data_dir),
        str(tmp_path),
        stat="max",
        metrics_path=None,
        on="tsne",
        k_range=range(2, 5),
        perplexity=5.0,
        seed=0,
    )


def test_analyze__pca_lists_written_files(data_dir, tmp_path):
    result = CliRunner().invoke(surfeat, ["--out", str(tmp_path), "analyze", "pca", str(data_dir)])
    assert result.exit_code == 0, result.output
    written = result.output.split()
    assert str(tmp_path / "projection_pca.csv") in written
    assert str(tmp_path / "projection_pca.svg") in written
    assert str(tmp_path / "pca.txt") in written
    frame = pandas.read_csv(tmp_path / "projection_pca.csv")
    assert len(frame) == 8


def test_analyze__correlate_needs_metrics(data_dir, tmp_path):
    result = CliRunner().invoke(
        surfeat, ["--out", str(tmp_path), "analyze", "correlate", str(data_dir)]
    )
    assert result.exit_code == 2
    assert "metrics CSV" in result.output


def test_analyze__k_range_lower_bound(data_dir, tmp_path):
    result = CliRunner().invoke(
        surfeat, ["--out", str(tmp_path), "analyze", "cluster", str(data_dir), "-k", "1", "3"]
    )
    assert result.exit_code == 2
