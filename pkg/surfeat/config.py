"""
Versioned ``key = value`` run configuration files.

Example::

    version = 1
    # classification with surface features
    task = classify
    architecture = pointnet-mod
    auxiliary = features
    seeds = 0,1,2,3,4

The first non-comment line must be ``version = 1``. Values are read as
int, float, bool (``true``/``false``), comma-separated int tuples or
strings, then checked against the :class:`TrainingConfig` field types.
"""
import dataclasses
import hashlib
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Union

import appdirs

from surfeat.cloudmodels.config import CloudModelConfig
from surfeat.cloudmodels.pca_classifier import STAT_ARCHITECTURES, VARIANTS
from surfeat.exceptions import InvalidArgumentError
from surfeat.meshsim.surrogate import SIZE_CLASSES, SurrogateConfig

CONFIG_VERSION = 1
OUTPUT_DIR_ENV = "SURFEAT_OUTPUT_DIR"
TASKS = ("classify", "segment", "rollout")
PROTOCOLS = ("single", "repeated", "kfold")

PathLike = Union[str, os.PathLike]


@dataclass(frozen=True)
class TrainingConfig:
    """
    Every setting of a training/evaluation run.

    ``epochs = 0`` and ``batch_size = 0`` select the budgets of the task
    and input variant; ``random_edges = -1`` selects ceil(N / 20).
    The ``pca-logistic`` and ``pca-mlp`` architectures fit on whole
    training sets and have no epoch or batch budget.
    """

    task: str = "classify"
    architecture: str = "pointnet-mod"
    auxiliary: str = "features"
    # synthetic benchmark
    n_objects: int = 40
    n_points: int = 512
    feature_dim: int = 16
    signal: float = 0.5
    # point-cloud models
    neighbor_k: int = 16
    hidden_width: int = 0
    sampling_mode: str = "fps"
    allow_any_size: bool = False
    # PCA-statistic baselines
    stat_variant: str = "mean"
    # optimizer
    epochs: int = 0
    batch_size: int = 0
    learning_rate: float = 0.001
    weight_decay_max: float = 0.01
    weight_decay_min: float = 0.0
    schedule_mode: str = "weight-decay"
    # mesh surrogate
    size_class: str = "S"
    mask_mode: str = "additive"
    hops: int = 2
    random_edges: int = -1
    global_node: bool = True
    use_features: bool = True
    n_nodes: int = 100
    time_steps: int = 10
    diffusivity: float = 0.5
    train_sequences: int = 4
    train_steps: int = 500
    # protocol
    average: str = "micro"
    protocol: str = "repeated"
    seeds: tuple = (0, 1, 2, 3, 4)
    folds: int = 5
    test_fraction: float = 0.2

    def __post_init__(self):
        if self.task not in TASKS:
            raise InvalidArgumentError(f"Unknown task: {self.task}")
        if self.protocol not in PROTOCOLS:
            raise InvalidArgumentError(f"Unknown protocol: {self.protocol}")
        if self.average not in ("micro", "macro"):
            raise InvalidArgumentError(f"Unknown averaging mode: {self.average}")
        if self.sampling_mode not in ("fps", "uniform"):
            raise InvalidArgumentError(f"Unknown sampling mode: {self.sampling_mode}")
        if self.size_class not in SIZE_CLASSES:
            raise InvalidArgumentError(f"Unknown size class: {self.size_class}")
        if not self.seeds:
            raise InvalidArgumentError("At least one seed is required.")
        object.__setattr__(self, "seeds", tuple(int(seed) for seed in self.seeds))
        if self.epochs < 0 or self.batch_size < 0:
            raise InvalidArgumentError("epochs and batch_size must not be negative.")
        if self.train_steps < 1 or self.train_sequences < 1:
            raise InvalidArgumentError("train_steps and train_sequences must be positive.")
        if self.stat_variant not in VARIANTS:
            raise InvalidArgumentError(f"Unknown statistic variant: {self.stat_variant}")
        if self.is_stat_baseline:
            if self.task != "classify" or self.auxiliary != "features":
                raise InvalidArgumentError(
                    f"{self.architecture} classifies objects from surface features only."
                )
        elif self.task != "rollout":
            self.model_config()

    @property
    def is_stat_baseline(self) -> bool:
        """Whether the run fits a classifier on PCA summaries of per-object statistics."""
        return self.architecture in STAT_ARCHITECTURES

    def model_config(self) -> CloudModelConfig:
        """Point-cloud model configuration of a classify/segment run."""
        return CloudModelConfig(
            task=self.task,
            architecture=self.architecture,
            auxiliary=self.auxiliary,
            feature_dim=self.feature_dim,
            neighbor_k=self.neighbor_k,
            hidden_width=self.hidden_width,
        )

    def surrogate_config(self) -> SurrogateConfig:
        """Mesh surrogate configuration of a rollout run."""
        return SurrogateConfig.from_size_class(
            self.size_class,
            mask_mode=self.mask_mode,
            hops=self.hops,
            random_edges=None if self.random_edges < 0 else self.random_edges,
            global_node=self.global_node,
        )

    @property
    def epoch_budget(self) -> int:
        """Configured epochs or the task budget; optimizer steps for rollout runs."""
        if self.task == "rollout":
            return self.train_steps
        if self.is_stat_baseline:
            return 0
        if self.epochs:
            return self.epochs
        return self.model_config().epochs

    @property
    def batch(self) -> int:
        """Configured batch size, or the task default."""
        if self.batch_size:
            return self.batch_size
        if self.task == "rollout":
            return self.time_steps
        if self.is_stat_baseline:
            return 0
        return self.model_config().batch_size

    def replace(self, **changes: Any) -> "TrainingConfig":
        """Copy with some fields changed."""
        return dataclasses.replace(self, **changes)


_FIELDS = {item.name: item for item in dataclasses.fields(TrainingConfig)}


def _parse_value(text: str) -> Any:
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    if "," in text:
        try:
            return tuple(int(part) for part in text.split(",") if part.strip())
        except ValueError:
            return text
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    return text


def _coerce(name: str, value: Any) -> Any:
    expected = type(_FIELDS[name].default)
    if expected is tuple and isinstance(value, int) and not isinstance(value, bool):
        return (value,)
    if expected is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, expected) or (expected is int and isinstance(value, bool)):
        raise InvalidArgumentError(
            f"Configuration key {name!r} expects {expected.__name__}, got {value!r}."
        )
    return value


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(item) for item in value) + ("," if len(value) == 1 else "")
    return repr(value) if isinstance(value, float) else str(value)


def _entries(text: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgumentError(f"Line {number}: expected 'key = value', got {raw!r}.")
        key, value = (part.strip() for part in line.split("=", 1))
        if not entries and key != "version":
            raise InvalidArgumentError("The first configuration entry must be 'version = 1'.")
        if key in entries:
            raise InvalidArgumentError(f"Line {number}: duplicate key {key!r}.")
        entries[key] = value
    if entries.get("version") != str(CONFIG_VERSION):
        raise InvalidArgumentError(
            f"Unsupported configuration version {entries.get('version')!r}; "
            f"expected {CONFIG_VERSION}."
        )
    return entries


def parse_config(text: str, **overrides: Any) -> TrainingConfig:
    """Parse configuration text, then apply keyword overrides."""
    values: dict[str, Any] = {}
    for key, raw in _entries(text).items():
        if key == "version":
            continue
        if key not in _FIELDS:
            raise InvalidArgumentError(f"Unknown configuration key: {key}")
        values[key] = _coerce(key, _parse_value(raw))
    values.update({key: value for key, value in overrides.items() if value is not None})
    return TrainingConfig(**values)


def load_config(path: Optional[PathLike] = None, **overrides: Any) -> TrainingConfig:
    """
    Load a configuration file; defaults when ``path`` is None.

    Parameters
    ----------
    path: str or path-like, optional
    **overrides:
        Field values taking precedence over the file (None is ignored).
    """
    if path is None:
        return TrainingConfig(
            **{key: value for key, value in overrides.items() if value is not None}
        )
    return parse_config(Path(path).read_text(encoding="utf-8"), **overrides)


def dump_config(config: TrainingConfig) -> str:
    """Normalized text of a configuration: version line, then sorted keys."""
    lines = [f"version = {CONFIG_VERSION}"]
    for name in sorted(_FIELDS):
        lines.append(f"{name} = {_format_value(getattr(config, name))}")
    return "\n".join(lines) + "\n"


def config_digest(text: Union[str, TrainingConfig]) -> str:
    """
    SHA-256 of normalized configuration text.

    Comments, blank lines, surrounding whitespace and key order do not
    change the digest.
    """
    if isinstance(text, TrainingConfig):
        text = dump_config(text)
    entries = _entries(text)
    normalized = "\n".join(f"{key} = {entries[key]}" for key in sorted(entries)) + "\n"
    return hashlib.sha256(normalized.encode("utf-8")).hexdigest()


def default_output_dir() -> Path:
    """``$SURFEAT_OUTPUT_DIR``, or the per-user data directory."""
    configured = os.environ.get(OUTPUT_DIR_ENV)
    if configured:
        return Path(configured)
    return Path(appdirs.user_data_dir("surfeat")) / "runs"
