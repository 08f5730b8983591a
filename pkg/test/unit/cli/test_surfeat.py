from unittest.mock import MagicMock, patch

import click
from click.testing import CliRunner

from surfeat.cli.surfeat import check_version, cli_show_version, surfeat


@patch("surfeat.cli.surfeat.importlib.metadata.version", return_value="1.1")
def test_check_version(version_patch, capsys):
    context = MagicMock(click.Context)
    context.resilient_parsing = False
    check_version(context, "str", "str")

    stdout = capsys.readouterr()[0]
    assert stdout.strip() == "surfeat v1.1"
    version_patch.assert_called_once_with("surfeat")
    context.exit.assert_called_once_with()


def test_cli_show_versions(capsys):
    context = MagicMock(click.Context)
    context.resilient_parsing = False
    cli_show_version(context, "str", "str")

    stdout = capsys.readouterr()[0]
    assert "surfeat v" in stdout
    assert "Numeric deps" in stdout
    assert "Python deps" in stdout
    assert "System" in stdout


def test_help_lists_subcommands():
    result = CliRunner().invoke(surfeat, ["--help"])
    assert result.exit_code == 0
    for name in ("ingest", "synth", "train", "eval", "analyze", "report"):
        assert name in result.output


def test_invalid_config_exits_2(tmp_path):
    config = tmp_path / "bad.cfg"
    config.write_text("task = classify\n")
    result = CliRunner().invoke(
        surfeat, ["--config", str(config), "--out", str(tmp_path / "out"), "train"]
    )
    assert result.exit_code == 2
    assert "version = 1" in result.output


def test_usage_error_exits_2(tmp_path):
    result = CliRunner().invoke(surfeat, ["--out", str(tmp_path), "synth", "spheres"])
    assert result.exit_code == 2


def test_unreadable_manifest_exits_2(tmp_path):
    manifest = tmp_path / "run.json"
    manifest.write_text("{not json")
    result = CliRunner().invoke(surfeat, ["--out", str(tmp_path), "eval", str(manifest)])
    assert result.exit_code == 2


def test_output_dir_from_environment(tmp_path):
    out_dir = tmp_path / "from-env"
    result = CliRunner().invoke(
        surfeat,
        ["synth", "classify", "--n-objects", "4", "--n-points", "32", "--feature-dim", "4"],
        env={"SURFEAT_OUTPUT_DIR": str(out_dir)},
    )
    assert result.exit_code == 0, result.output
    assert len(list(out_dir.glob("*.sfpc"))) == 4
    assert (out_dir / "stats.csv").exists()
