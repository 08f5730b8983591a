"""
surfeat client core functionality: the operations behind the CLI.
"""
import json
import os
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Literal, Optional, Union

import numpy
import pandas

from surfeat.analytics.clustering import DEFAULT_K_RANGE, kmeans, select_k
from surfeat.analytics.correlation import correlation_table
from surfeat.analytics.plotting import plot_heatmap, plot_projection, plot_silhouette
from surfeat.analytics.projection import (
    TSNE_EXAGGERATION,
    TSNE_EXAGGERATION_ITERATIONS,
    TSNE_GAIN_DECAY,
    TSNE_GAIN_STEP,
    TSNE_ITERATIONS,
    TSNE_LEARNING_RATE,
    TSNE_MIN_GAIN,
    TSNE_MOMENTUM,
    TSNE_MOMENTUM_SWITCH,
    Projection2D,
    pca_2d,
    principal_components,
    tsne_2d,
)
from surfeat.cloudmodels.build import build_cloud_model
from surfeat.config import TrainingConfig, dump_config
from surfeat.exceptions import InvalidArgumentError, InvalidDataError
from surfeat.featurestore import (
    STAT_NAMES,
    LabeledCloud,
    aggregate_stats,
    stats_from_table,
    stats_table,
    synth_classification_set,
    synth_segmentation_set,
)
from surfeat.harness.manifest import RunManifest
from surfeat.harness.metrics import MetricReport
from surfeat.harness.protocols import (
    ProtocolResult,
    run_kfold,
    run_repeated,
    synth_rollout_dataset,
)
from surfeat.harness.report import RenderedReport, report_render
from surfeat.harness.training import (
    build_surrogate,
    evaluate_cloud_model,
    evaluate_stat_baseline,
    evaluate_surrogate,
    fit_stat_baseline,
    prepare_clouds,
)
from surfeat.io.containers import (
    read_checkpoint,
    read_cloud,
    read_mesh_sequence,
    write_cloud,
    write_mesh_sequence,
)
from surfeat.logger import get_logger
from surfeat.meshsim.graph import MeshGraphSequence
from surfeat.meshsim.synthetic import synth_mesh_sequence

PathLike = Union[str, os.PathLike]
AnalysisKind = Literal["pca", "tsne", "cluster", "correlate"]

REPORT_FILE = "report.json"
METRICS_FILE = "metrics.csv"
CONFIG_FILE = "config.txt"
RUNS_DIR = "runs"
STATS_FILE = "stats.csv"


def _object_ids(count: int) -> list[str]:
    return [f"object_{index:05d}" for index in range(count)]


def objects_stats_table(objects: Sequence[LabeledCloud]) -> pandas.DataFrame:
    """Per-object feature statistics; unlabeled objects get label -1."""
    if any(labeled.features is None for labeled in objects):
        raise InvalidDataError("Every object needs surface features to aggregate.")
    return stats_table(
        [aggregate_stats(labeled.features) for labeled in objects],
        object_ids=_object_ids(len(objects)),
        labels={
            "label": [-1 if item.object_label is None else item.object_label for item in objects]
        },
    )


def write_stats_table(objects: Sequence[LabeledCloud], path: PathLike) -> pandas.DataFrame:
    """Per-object feature statistics of a set of clouds as CSV."""
    table = objects_stats_table(objects)
    table.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
    return table


def synthesize(
    kind: Literal["classify", "segment", "rollout"],
    out_dir: PathLike,
    *,
    n_objects: int = 40,
    n_points: int = 512,
    feature_dim: int = 16,
    signal: float = 0.5,
    n_nodes: int = 100,
    steps: int = 10,
    diffusivity: float = 0.5,
    with_features: bool = True,
    seed: int = 0,
) -> list[Path]:
    """
    Generate a synthetic benchmark and write it as containers.

    Cloud benchmarks are written as ``object_*.sfpc`` plus ``stats.csv``;
    mesh benchmarks as ``sequence_*.sfms``.

    Returns
    -------
    list[pathlib.Path]
        Written files.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    if kind == "rollout":
        for index in range(n_objects):
            sequence = synth_mesh_sequence(
                n_nodes, steps, diffusivity, seed + index, with_features=with_features
            )
            path = out_dir / f"sequence_{index:05d}.sfms"
            write_mesh_sequence(path, sequence)
            paths.append(path)
        return paths
    if kind == "classify":
        objects = synth_classification_set(n_objects, n_points, feature_dim, signal, seed)
    elif kind == "segment":
        objects = synth_segmentation_set(n_objects, n_points, feature_dim, signal, seed)
    else:
        raise InvalidArgumentError(f"Unknown benchmark kind: {kind}")
    for object_id, labeled in zip(_object_ids(len(objects)), objects):
        path = out_dir / f"{object_id}.sfpc"
        write_cloud(path, labeled)
        paths.append(path)
    write_stats_table(objects, out_dir / STATS_FILE)
    paths.append(out_dir / STATS_FILE)
    get_logger().info(f"Wrote {len(objects)} synthetic {kind} objects to {out_dir}")
    return paths


def load_clouds(data_dir: PathLike) -> list[LabeledCloud]:
    """Every ``.sfpc`` file of a directory, in file name order."""
    paths = sorted(Path(data_dir).glob("*.sfpc"))
    if not paths:
        raise InvalidDataError(f"No .sfpc files in {data_dir}.")
    return [read_cloud(path) for path in paths]


def load_sequences(data_dir: PathLike) -> list[MeshGraphSequence]:
    """Every ``.sfms`` file of a directory, in file name order."""
    paths = sorted(Path(data_dir).glob("*.sfms"))
    if not paths:
        raise InvalidDataError(f"No .sfms files in {data_dir}.")
    return [read_mesh_sequence(path) for path in paths]


def load_dataset(config: TrainingConfig, data_dir: Optional[PathLike] = None):
    """
    Dataset of a run: the containers in ``data_dir``, or the synthetic
    benchmark described by the configuration (seeded by its first seed).
    Rollout runs without a directory return None (sequences are drawn
    per seed).
    """
    if config.task == "rollout":
        return None if data_dir is None else load_sequences(data_dir)
    if data_dir is not None:
        return load_clouds(data_dir)
    synth = synth_classification_set if config.task == "classify" else synth_segmentation_set
    return synth(
        config.n_objects, config.n_points, config.feature_dim, config.signal, config.seeds[0]
    )


def write_protocol_result(result: ProtocolResult, out_dir: PathLike) -> None:
    """``metrics.csv`` (per-run metrics) and ``report.json`` of a protocol."""
    out_dir = Path(out_dir)
    (out_dir / METRICS_FILE).write_text(result.report.to_csv(), encoding="utf-8")
    (out_dir / REPORT_FILE).write_text(
        json.dumps(result.report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def train(
    config: TrainingConfig,
    out_dir: PathLike,
    *,
    data_dir: Optional[PathLike] = None,
    threads: int = 1,
    name: Optional[str] = None,
) -> ProtocolResult:
    """
    Run the configured protocol and write its outputs.

    ``out_dir`` receives ``config.txt``, ``metrics.csv``, ``report.json``
    and, under ``runs/``, one manifest and checkpoint per run.

    Parameters
    ----------
    config: :obj:`surfeat.config.TrainingConfig`
    out_dir: str or path-like
    data_dir: str or path-like, optional
        Container directory; synthetic data when unset.
    threads: int
        Concurrent runs and evaluation workers.
    name: str, optional
        Report row label.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / CONFIG_FILE).write_text(dump_config(config), encoding="utf-8")
    dataset = load_dataset(config, data_dir)
    kwargs = {"threads": threads, "out_dir": out_dir / RUNS_DIR, "name": name}
    if config.protocol == "kfold":
        result = run_kfold(config, dataset, **kwargs)
    elif config.protocol == "single":
        result = run_repeated(config, dataset, seeds=config.seeds[:1], **kwargs)
    else:
        result = run_repeated(config, dataset, **kwargs)
    write_protocol_result(result, out_dir)
    return result


def evaluate(
    manifest_path: PathLike,
    *,
    checkpoint_path: Optional[PathLike] = None,
    data_dir: Optional[PathLike] = None,
    threads: int = 1,
) -> dict[str, float]:
    """
    Re-score a stored run on its test objects.

    Parameters
    ----------
    manifest_path: str or path-like
        Run manifest written by :func:`train`.
    checkpoint_path: str or path-like, optional
        Defaults to the ``.sfck`` file next to the manifest.
        PCA-statistic runs store no checkpoint; their classifier is refit
        on the recorded training objects.
    data_dir: str or path-like, optional
        Must match the data of the original run; synthetic otherwise.
    threads: int
    """
    manifest_path = Path(manifest_path)
    manifest = RunManifest.read(manifest_path)
    if manifest.status != "completed":
        raise InvalidDataError(f"Run {manifest.run_id} did not complete.")
    config = manifest.config()
    dataset = load_dataset(config, data_dir)
    test = manifest.split.get("test")
    if config.is_stat_baseline:
        return _refit_stat_baseline(manifest, config, dataset)
    if checkpoint_path is None:
        checkpoint_path = manifest_path.with_suffix(".sfck")
    checkpoint = read_checkpoint(checkpoint_path)
    if config.task == "rollout":
        if dataset is None:
            sequences = synth_rollout_dataset(config, manifest.seed)
            dataset, test = sequences, [len(sequences) - 1]
        if test is None:
            test = range(len(dataset))
        evaluation = [dataset[int(index)] for index in test]
        model = build_surrogate(evaluation[0], config, manifest.seed)
        model.load_state_dict(checkpoint.parameters)
        metrics, _ = evaluate_surrogate(model, evaluation, config, manifest.seed, threads=threads)
        return metrics
    arrays = prepare_clouds(dataset, config, seed=config.seeds[0])
    model = build_cloud_model(config.model_config(), manifest.seed)
    model.load_state_dict(checkpoint.parameters)
    indices = numpy.arange(len(arrays)) if test is None else numpy.asarray(test)
    return evaluate_cloud_model(model, arrays, indices, config, threads=threads)


def _refit_stat_baseline(
    manifest: RunManifest, config: TrainingConfig, dataset
) -> dict[str, float]:
    train_indices = manifest.split.get("train")
    test = manifest.split.get("test")
    if train_indices is None or test is None:
        raise InvalidDataError(f"Run {manifest.run_id} does not record its split.")
    arrays = prepare_clouds(dataset, config, seed=config.seeds[0])
    fitted = fit_stat_baseline(arrays, train_indices, config, manifest.seed)
    return evaluate_stat_baseline(fitted, arrays, test)


def read_stats(source: PathLike) -> pandas.DataFrame:
    """A statistics table from a CSV file or from a directory of ``.sfpc`` files."""
    source = Path(source)
    if source.is_dir():
        csv_path = source / STATS_FILE
        if csv_path.exists():
            return pandas.read_csv(csv_path)
        return objects_stats_table(load_clouds(source))
    return pandas.read_csv(source)


def _label_columns(table: pandas.DataFrame) -> dict:
    stat_prefixes = tuple(f"{stat}_" for stat in STAT_NAMES)
    return {
        name: table[name].to_numpy()
        for name in table.columns
        if name != "object_id" and not str(name).startswith(stat_prefixes)
    }


def _project(
    vectors: numpy.ndarray, labels: dict, method: str, *, perplexity: float, seed: int
) -> Projection2D:
    if method == "pca":
        return pca_2d(vectors, labels=labels)
    if method == "tsne":
        return tsne_2d(vectors, perplexity=perplexity, seed=seed, labels=labels)
    raise InvalidArgumentError(f"Unknown projection method: {method}")


def tsne_notes(perplexity: float) -> list[str]:
    """Fixed t-SNE hyperparameters, for report headers."""
    return [
        f"t-SNE perplexity={perplexity:g} iterations={TSNE_ITERATIONS} "
        f"learning_rate={TSNE_LEARNING_RATE:g} "
        f"exaggeration={TSNE_EXAGGERATION:g}x{TSNE_EXAGGERATION_ITERATIONS} "
        f"momentum={TSNE_MOMENTUM[0]:g}->{TSNE_MOMENTUM[1]:g}@{TSNE_MOMENTUM_SWITCH} "
        f"gains=+{TSNE_GAIN_STEP:g}/x{TSNE_GAIN_DECAY:g}>={TSNE_MIN_GAIN:g}"
    ]


def analyze(
    kind: AnalysisKind,
    source: PathLike,
    out_dir: PathLike,
    *,
    stat: str = "mean",
    metrics_path: Optional[PathLike] = None,
    on: Literal["pca", "tsne"] = "pca",
    k_range: Iterable[int] = DEFAULT_K_RANGE,
    perplexity: float = 30.0,
    seed: int = 0,
) -> list[Path]:
    """
    Feature-space analysis of per-object statistics.

    Parameters
    ----------
    kind: {"pca", "tsne", "cluster", "correlate"}
    source: str or path-like
        Statistics CSV, or a directory of clouds with surface features.
    out_dir: str or path-like
    stat: str
        Statistic family analyzed ("mean", "std", "min" or "max").
    metrics_path: str or path-like, optional
        CSV with ``object_id`` and scalar metric columns (``correlate``).
    on: {"pca", "tsne"}
        Coordinates the clustering runs on.
    k_range: iterable of int
        Candidate cluster counts.
    perplexity: float
    seed: int

    Returns
    -------
    list[pathlib.Path]
        Written CSV, SVG and text files.
    """
    if stat not in STAT_NAMES:
        raise InvalidArgumentError(f"Unknown statistic: {stat}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = read_stats(source)
    vectors = numpy.stack([record.get(stat) for record in stats_from_table(table)])
    labels = _label_columns(table)
    paths = []

    def write_table(frame: pandas.DataFrame, stem: str, index: bool = False) -> None:
        path = out_dir / f"{stem}.csv"
        frame.to_csv(path, index=index, float_format="%.10g", lineterminator="\n")
        paths.append(path)

    notes = [f"statistic={stat}"]
    if kind in ("pca", "tsne"):
        projection = _project(vectors, labels, kind, perplexity=perplexity, seed=seed)
        frame = projection.to_frame()
        if "object_id" in table:
            frame.insert(0, "object_id", table["object_id"].to_numpy())
        write_table(frame, f"projection_{kind}")
        plot_projection(projection, out_dir / f"projection_{kind}.svg")
        paths.append(out_dir / f"projection_{kind}.svg")
        if kind == "tsne":
            notes += tsne_notes(perplexity)
    elif kind == "cluster":
        projection = _project(vectors, labels, on, perplexity=perplexity, seed=seed)
        best, silhouettes = select_k(projection.coordinates, k_range, seed)
        write_table(silhouettes, "silhouette")
        plot_silhouette(silhouettes, out_dir / "silhouette.svg")
        paths.append(out_dir / "silhouette.svg")
        assignment = kmeans(projection.coordinates, best, seed)
        clustered = Projection2D(
            coordinates=projection.coordinates,
            method=projection.method,
            labels={"cluster": assignment.labels},
            components=projection.components,
            explained_variance=projection.explained_variance,
            center=projection.center,
        )
        frame = clustered.to_frame()
        if "object_id" in table:
            frame.insert(0, "object_id", table["object_id"].to_numpy())
        write_table(frame, "clusters")
        plot_projection(clustered, out_dir / "clusters.svg", title=f"k-means (k={best}) on {on}")
        paths.append(out_dir / "clusters.svg")
        notes.append(f"clustering on={on} selected_k={best}")
        if on == "tsne":
            notes += tsne_notes(perplexity)
    elif kind == "correlate":
        if metrics_path is None:
            raise InvalidArgumentError("Correlation needs a metrics CSV.")
        metrics = pandas.read_csv(metrics_path)
        if "object_id" in metrics and "object_id" in table:
            order = pandas.Index(table["object_id"]).get_indexer(metrics["object_id"])
            if (order < 0).any():
                raise InvalidDataError("Metrics name objects missing from the statistics.")
            vectors = vectors[order]
            metrics = metrics.drop(columns="object_id")
        components, _, center = principal_components(vectors, min(3, vectors.shape[1]))
        scores = (vectors - center) @ components.T
        features = {f"PC{index + 1}": scores[:, index] for index in range(scores.shape[1])}
        correlations = correlation_table(features, metrics)
        write_table(correlations, "correlation", index=True)
        plot_heatmap(correlations, out_dir / "correlation.svg")
        paths.append(out_dir / "correlation.svg")
    else:
        raise InvalidArgumentError(f"Unknown analysis: {kind}")
    notes_path = out_dir / f"{kind}.txt"
    notes_path.write_text("\n".join(f"# {note}" for note in notes) + "\n", encoding="utf-8")
    paths.append(notes_path)
    return paths


def read_report(run_dir: PathLike) -> MetricReport:
    """The :obj:`MetricReport` written by :func:`train`."""
    path = Path(run_dir) / REPORT_FILE
    if not path.exists():
        raise InvalidDataError(f"{run_dir} holds no {REPORT_FILE}.")
    return MetricReport.from_dict(json.loads(path.read_text(encoding="utf-8")))


def report(
    run_dirs: Sequence[PathLike], out_dir: PathLike, *, references: bool = False
) -> RenderedReport:
    """Render the reports of several training output directories together."""
    return report_render(
        [read_report(run_dir) for run_dir in run_dirs], out_dir, references=references
    )
