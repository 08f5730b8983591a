from pathlib import Path

import appdirs
import pytest

from surfeat.config import (
    OUTPUT_DIR_ENV,
    TrainingConfig,
    config_digest,
    default_output_dir,
    dump_config,
    load_config,
    parse_config,
)
from surfeat.exceptions import InvalidArgumentError

CONFIG_TEXT = """
# segmentation with surface features
version = 1
task = segment
architecture = pointnetpp
n_points = 1024
learning_rate = 0.002
seeds = 3,4
allow_any_size = true
"""


def test_parse_config():
    config = parse_config(CONFIG_TEXT)
    assert config.task == "segment"
    assert config.architecture == "pointnetpp"
    assert config.n_points == 1024
    assert config.learning_rate == 0.002
    assert config.seeds == (3, 4)
    assert config.allow_any_size is True
    assert config.epoch_budget == 100
    assert config.batch == 8


def test_parse_config__overrides_skip_none():
    config = parse_config(CONFIG_TEXT, n_points=512, architecture=None)
    assert config.n_points == 512
    assert config.architecture == "pointnetpp"


def test_dump_config__round_trip():
    config = TrainingConfig(task="rollout", size_class="L", seeds=(7,), diffusivity=0.25)
    text = dump_config(config)
    assert text.startswith("version = 1\n")
    assert "seeds = 7,\n" in text
    assert parse_config(text) == config


def test_config_digest__ignores_layout():
    reordered = (
        "version = 1\nseeds = 3,4\n  task=segment  # trailing\n\n"
        "allow_any_size = true\nlearning_rate = 0.002\nn_points = 1024\narchitecture = pointnetpp\n"
    )
    assert config_digest(reordered) == config_digest(CONFIG_TEXT)
    assert config_digest(CONFIG_TEXT) != config_digest(CONFIG_TEXT.replace("1024", "2048"))
    config = parse_config(CONFIG_TEXT)
    assert config_digest(config) == config_digest(dump_config(config))


@pytest.mark.parametrize(
    "text, message",
    [
        ("task = classify\nversion = 1\n", "first configuration entry"),
        ("version = 2\n", "Unsupported configuration version"),
        ("version = 1\nlayers = 3\n", "Unknown configuration key"),
        ("version = 1\nn_points = many\n", "expects int"),
        ("version = 1\ntask\n", "expected 'key = value'"),
        ("version = 1\ntask = classify\ntask = segment\n", "duplicate key"),
        ("version = 1\ntask = detect\n", "Unknown task"),
        ("version = 1\narchitecture = mlp-ablation\nauxiliary = normals\n", "features only"),
    ],
)
def test_parse_config__errors(text, message):
    with pytest.raises(InvalidArgumentError, match=message):
        parse_config(text)


def test_training_config__budgets():
    assert TrainingConfig(task="rollout", train_steps=20).epoch_budget == 20
    assert TrainingConfig(task="rollout", time_steps=6).batch == 6
    assert TrainingConfig(auxiliary="normals").epoch_budget == 100
    assert TrainingConfig(epochs=3, batch_size=2).epoch_budget == 3
    assert TrainingConfig(epochs=3, batch_size=2).batch == 2


def test_training_config__surrogate_config():
    surrogate = TrainingConfig(task="rollout", size_class="L", random_edges=0).surrogate_config()
    assert surrogate.latent_dim == 128
    assert surrogate.random_edges == 0


def test_load_config(tmp_path):
    assert load_config(None, task="segment").task == "segment"
    path = tmp_path / "run.cfg"
    path.write_text(CONFIG_TEXT)
    assert load_config(path, seeds=(9,)).seeds == (9,)


def test_default_output_dir(monkeypatch, tmp_path):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))
    assert default_output_dir() == tmp_path
    monkeypatch.delenv(OUTPUT_DIR_ENV)
    assert default_output_dir() == Path(appdirs.user_data_dir("surfeat")) / "runs"


def test_training_config__stat_baselines():
    config = parse_config(
        "version = 1\narchitecture = pca-mlp\nstat_variant = mean+std\nn_points = 64\n"
    )
    assert config.is_stat_baseline
    assert config.stat_variant == "mean+std"
    assert config.epoch_budget == 0
    assert config.batch == 0
    assert not TrainingConfig().is_stat_baseline
    assert "stat_variant = mean+std" in dump_config(config)


@pytest.mark.parametrize(
    "changes",
    [
        {"task": "segment"},
        {"auxiliary": "normals"},
        {"stat_variant": "median"},
    ],
)
def test_training_config__stat_baseline_errors(changes):
    with pytest.raises(InvalidArgumentError):
        TrainingConfig(architecture="pca-logistic", **changes)
