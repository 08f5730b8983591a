"""
Repeated-seed and k-fold protocols.

Runs are independent: each owns its model and random streams. They may
execute on a thread pool; results are joined in submission order, so the
report does not depend on the thread count.
"""
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy
from numpy.typing import NDArray

from surfeat.config import TrainingConfig, config_digest, dump_config
from surfeat.exceptions import InvalidArgumentError, RunAbortedError
from surfeat.featurestore import LabeledCloud
from surfeat.harness.manifest import RunManifest
from surfeat.harness.metrics import MetricReport
from surfeat.harness.splits import Split, stratified_folds, stratified_split
from surfeat.harness.training import (
    CloudArrays,
    derived_seed,
    evaluate_cloud_model,
    evaluate_stat_baseline,
    evaluate_surrogate,
    fit_stat_baseline,
    prepare_clouds,
    train_cloud_model,
    train_surrogate,
)
from surfeat.logger import get_logger
from surfeat.meshsim.graph import MeshGraphSequence
from surfeat.meshsim.synthetic import synth_mesh_sequence
from surfeat.nncore.checkpoint import ModelCheckpoint, checkpoint_digest, write_checkpoint

Dataset = Union[CloudArrays, Sequence[LabeledCloud], Sequence[MeshGraphSequence], None]
RunResult = tuple[dict, Optional[ModelCheckpoint]]
Runner = Callable[[TrainingConfig, Dataset, Optional[Split], int], RunResult]


@dataclass
class ProtocolResult:
    """Aggregated report plus one manifest per planned run."""

    report: MetricReport
    manifests: list = field(default_factory=list)


def cloud_runner(
    config: TrainingConfig, dataset: CloudArrays, split: Split, seed: int, threads: int = 1
) -> RunResult:
    """Train on ``split.train`` and score on ``split.test``."""
    trained = train_cloud_model(dataset, split.train, config, seed)
    metrics = evaluate_cloud_model(trained.model, dataset, split.test, config, threads=threads)
    return metrics, trained.checkpoint()


def stat_runner(
    config: TrainingConfig, dataset: CloudArrays, split: Split, seed: int, threads: int = 1
) -> RunResult:
    """
    Fit a PCA-statistic classifier on ``split.train`` and score it on
    ``split.test``. Nothing is checkpointed.
    """
    fitted = fit_stat_baseline(dataset, split.train, config, seed)
    return evaluate_stat_baseline(fitted, dataset, split.test), None


def synth_rollout_dataset(config: TrainingConfig, seed: int) -> list[MeshGraphSequence]:
    """``train_sequences + 1`` synthetic diffusion sequences; the last one is held out."""
    return [
        synth_mesh_sequence(
            config.n_nodes,
            config.time_steps,
            config.diffusivity,
            derived_seed(seed, 4, index),
            with_features=config.use_features,
        )
        for index in range(config.train_sequences + 1)
    ]


def surrogate_runner(
    config: TrainingConfig,
    dataset: Optional[Sequence[MeshGraphSequence]],
    split: Optional[Split],
    seed: int,
    threads: int = 1,
) -> RunResult:
    """
    Train the surrogate and report the all-rollout RMSE of the test
    sequences. Without a dataset, fresh synthetic sequences are drawn per
    seed and the last one is held out.
    """
    if dataset is None:
        sequences = synth_rollout_dataset(config, seed)
        train, test = sequences[:-1], sequences[-1:]
    else:
        if split is None:
            raise InvalidArgumentError("A split is required for a given sequence set.")
        train = [dataset[int(index)] for index in split.train]
        test = [dataset[int(index)] for index in split.test]
    trained = train_surrogate(train, config, seed)
    metrics, _ = evaluate_surrogate(trained.model, test, config, seed, threads=threads)
    return metrics, trained.checkpoint()


def _default_runner(config: TrainingConfig, threads: int) -> Runner:
    if config.task == "rollout":
        return lambda cfg, data, split, seed: surrogate_runner(cfg, data, split, seed, threads)
    if config.is_stat_baseline:
        return lambda cfg, data, split, seed: stat_runner(cfg, data, split, seed, threads)
    return lambda cfg, data, split, seed: cloud_runner(cfg, data, split, seed, threads)


def _prepare(config: TrainingConfig, dataset: Dataset) -> Dataset:
    if config.task == "rollout" or isinstance(dataset, CloudArrays):
        return dataset
    if dataset is None:
        raise InvalidArgumentError(f"The {config.task} task needs a dataset.")
    return prepare_clouds(list(dataset), config, seed=config.seeds[0])


def _stratification_labels(config: TrainingConfig, dataset: Dataset) -> NDArray:
    if isinstance(dataset, CloudArrays):
        return dataset.object_labels
    if dataset is None:
        raise InvalidArgumentError("Splitting needs a dataset.")
    return numpy.zeros(len(dataset), dtype=numpy.int64)


def report_name(config: TrainingConfig) -> str:
    """Default row label of a configuration."""
    if config.task == "rollout":
        return f"{config.size_class}" + (" + feats" if config.use_features else "")
    if config.is_stat_baseline:
        classifier = "Logistic" if config.architecture == "pca-logistic" else "MLP"
        return f"{classifier} on PCA / {config.stat_variant}"
    return f"{config.architecture} / {config.auxiliary} / {config.n_points}"


def _sampling_description(dataset: Dataset) -> dict:
    if not isinstance(dataset, CloudArrays) or dataset.starts is None:
        return {}
    return {"fps_starts": [int(start) for start in dataset.starts]}


def _execute(
    config: TrainingConfig,
    dataset: Dataset,
    plan: list[tuple[str, int, Optional[Split], dict]],
    *,
    protocol: str,
    runner: Optional[Runner],
    threads: int,
    out_dir: Optional[Path],
    name: Optional[str],
) -> ProtocolResult:
    runner = runner or _default_runner(config, threads)
    text = dump_config(config)
    digest = config_digest(text)
    logger = get_logger()
    sampling = _sampling_description(dataset)

    def timed(run: tuple[str, int, Optional[Split], dict]) -> tuple[RunResult, float]:
        _, seed, split, _ = run
        started = time.perf_counter()
        result = runner(config, dataset, split, seed)
        return result, time.perf_counter() - started

    manifests, metrics, run_ids, failed = [], [], [], []
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        futures = [executor.submit(timed, run) for run in plan]
        for run, future in zip(plan, futures):
            run_id, seed, split, description = run
            manifest = RunManifest(
                run_id=run_id,
                seed=seed,
                config_text=text,
                config_digest=digest,
                split={
                    "protocol": protocol,
                    **description,
                    **(split.describe() if split is not None else {}),
                    **sampling,
                },
                epochs=config.epoch_budget,
                schedule_mode=config.schedule_mode,
            )
            try:
                (run_metrics, checkpoint), seconds = future.result()
            except RunAbortedError as error:
                logger.warning(f"Run {run_id} aborted: {error}")
                manifest.abort(str(error))
                failed.append(run_id)
            else:
                manifest.timings["train_and_evaluate_seconds"] = round(seconds, 3)
                ckpt_digest = None
                if checkpoint is not None:
                    if out_dir is not None:
                        ckpt_digest = write_checkpoint(out_dir / f"{run_id}.sfck", checkpoint)
                    else:
                        ckpt_digest = checkpoint_digest(checkpoint)
                manifest.complete(run_metrics, ckpt_digest)
                metrics.append(run_metrics)
                run_ids.append(run_id)
            if out_dir is not None:
                manifest.write(out_dir / f"{run_id}.json")
            manifests.append(manifest)
    if failed:
        logger.warning(
            f"Partial report: {len(failed)} of {len(plan)} runs aborted ({', '.join(failed)})."
        )
    report = MetricReport.from_runs(
        name or report_name(config),
        config.task,
        metrics,
        run_ids=run_ids,
        failed=failed,
        protocol=protocol,
    )
    return ProtocolResult(report=report, manifests=manifests)


def _output_dir(out_dir) -> Optional[Path]:
    if out_dir is None:
        return None
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def run_repeated(
    config: TrainingConfig,
    dataset: Dataset = None,
    *,
    seeds: Optional[Sequence[int]] = None,
    fixed_split: bool = False,
    runner: Optional[Runner] = None,
    threads: int = 1,
    out_dir=None,
    name: Optional[str] = None,
) -> ProtocolResult:
    """
    Independent trainings over several seeds.

    Each seed draws a fresh stratified split (``config.test_fraction``
    held out) unless ``fixed_split`` reuses the split of the first seed.
    Rollout runs without a dataset draw fresh synthetic sequences per seed.

    Parameters
    ----------
    config: :obj:`surfeat.config.TrainingConfig`
    dataset: CloudArrays, list of LabeledCloud or MeshGraphSequence, optional
    seeds: sequence of int, optional
        Defaults to ``config.seeds``.
    fixed_split: bool
    runner: callable, optional
        ``runner(config, dataset, split, seed) -> (metrics, checkpoint)``;
        defaults to training and evaluating the configured model.
    threads: int
        Concurrent runs.
    out_dir: path-like, optional
        Where manifests and checkpoints are written.
    name: str, optional
        Report row label.

    Returns
    -------
    :obj:`ProtocolResult`
        Marked partial when any run aborted.
    """
    seeds = tuple(config.seeds if seeds is None else seeds)
    if not seeds:
        raise InvalidArgumentError("At least one seed is required.")
    dataset = _prepare(config, dataset)
    synthetic = config.task == "rollout" and dataset is None
    plan = []
    for seed in seeds:
        split = None
        if not synthetic:
            split = stratified_split(
                _stratification_labels(config, dataset),
                config.test_fraction,
                seeds[0] if fixed_split else seed,
            )
        description = {"seed": seed, "resplit_per_seed": not fixed_split and not synthetic}
        plan.append((f"{config.task}-seed{seed}", seed, split, description))
    return _execute(
        config,
        dataset,
        plan,
        protocol="repeated",
        runner=runner,
        threads=threads,
        out_dir=_output_dir(out_dir),
        name=name,
    )


def run_kfold(
    config: TrainingConfig,
    dataset: Dataset,
    *,
    folds: Optional[int] = None,
    seed: Optional[int] = None,
    runner: Optional[Runner] = None,
    threads: int = 1,
    out_dir=None,
    name: Optional[str] = None,
) -> ProtocolResult:
    """
    Stratified k-fold cross-validation: every object is tested exactly once.

    Parameters are as in :func:`run_repeated`; ``folds`` defaults to
    ``config.folds`` and ``seed`` (fold assignment and training) to the
    first configured seed.
    """
    folds = config.folds if folds is None else folds
    seed = config.seeds[0] if seed is None else seed
    dataset = _prepare(config, dataset)
    splits = stratified_folds(_stratification_labels(config, dataset), folds, seed)
    plan = [
        (f"{config.task}-fold{index}", seed, split, {"fold": index, "folds": folds})
        for index, split in enumerate(splits)
    ]
    return _execute(
        config,
        dataset,
        plan,
        protocol="kfold",
        runner=runner,
        threads=threads,
        out_dir=_output_dir(out_dir),
        name=name,
    )
