"""
Training and evaluation loops of the point-cloud models and the mesh
surrogate.
"""
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy
from numpy.typing import ArrayLike, NDArray

from surfeat.cloudmodels.build import CloudModel, build_cloud_model
from surfeat.cloudmodels.pca_classifier import (
    STAT_ARCHITECTURES,
    PCAStatClassifier,
    pca_stat_classifier_fit,
    pca_stat_classifier_predict,
)
from surfeat.config import TrainingConfig
from surfeat.exceptions import InvalidArgumentError, InvalidDataError, RunAbortedError
from surfeat.featurestore import LabeledCloud, ObjectStats, aggregate_stats
from surfeat.geometry import sample_to_fixed
from surfeat.harness.metrics import metrics_classification, metrics_segmentation
from surfeat.logger import get_logger
from surfeat.meshsim.graph import MeshGraphSequence
from surfeat.meshsim.rollout import RolloutRecord, rollout
from surfeat.meshsim.surrogate import GraphSurrogate
from surfeat.nncore import autograd
from surfeat.nncore.checkpoint import ModelCheckpoint
from surfeat.nncore.optim import AdamW


def derived_seed(*keys: int) -> int:
    """A 32-bit seed derived from a tuple of integers."""
    return int(numpy.random.SeedSequence([int(key) for key in keys]).generate_state(1)[0])


@dataclass(frozen=True)
class CloudArrays:
    """
    Fixed-size clouds stacked for batching.

    Parameters
    ----------
    positions: numpy.ndarray
        (M, n, 3) coordinates.
    aux: numpy.ndarray
        (M, n, a) normals or surface features.
    object_labels: numpy.ndarray
        (M,) object classes (-1 when unknown).
    point_labels: numpy.ndarray, optional
        (M, n) part labels.
    starts: numpy.ndarray, optional
        (M,) farthest point sampling start index of every object in its
        source cloud, -1 where the object was not sampled by FPS.
    """

    positions: NDArray
    aux: NDArray
    object_labels: NDArray
    point_labels: Optional[NDArray] = None
    starts: Optional[NDArray] = None

    def __len__(self) -> int:
        return int(self.positions.shape[0])


def prepare_clouds(
    objects: Sequence[LabeledCloud], config: TrainingConfig, seed: int = 0
) -> CloudArrays:
    """
    Sample every object to ``config.n_points`` points and stack the model
    inputs. Object ``i`` is sampled with a seed derived from ``(seed, i)``.
    """
    if not objects:
        raise InvalidArgumentError("No objects to prepare.")
    positions, aux, object_labels, point_labels, starts = [], [], [], [], []
    for index, labeled in enumerate(objects):
        if config.auxiliary == "features" and labeled.features is None:
            raise InvalidDataError(f"Object {index} has no surface features.")
        if config.auxiliary == "normals" and labeled.cloud.normals is None:
            raise InvalidDataError(f"Object {index} has no normals.")
        sampled = sample_to_fixed(
            labeled.cloud,
            labeled.features,
            n=config.n_points,
            seed=derived_seed(seed, index),
            labels=labeled.point_labels,
            mode=config.sampling_mode,
            allow_any_size=config.allow_any_size,
        )
        positions.append(sampled.cloud.positions)
        aux.append(sampled.features if config.auxiliary == "features" else sampled.cloud.normals)
        object_labels.append(-1 if labeled.object_label is None else labeled.object_label)
        point_labels.append(sampled.labels)
        starts.append(-1 if sampled.start is None else sampled.start)
    has_parts = all(labels is not None for labels in point_labels)
    if config.task == "segment" and not has_parts:
        raise InvalidDataError("Segmentation needs per-point labels on every object.")
    return CloudArrays(
        positions=numpy.stack(positions),
        aux=numpy.stack(aux).astype(numpy.float64),
        object_labels=numpy.asarray(object_labels, dtype=numpy.int64),
        point_labels=numpy.stack(point_labels).astype(numpy.int64) if has_parts else None,
        starts=numpy.asarray(starts, dtype=numpy.int64),
    )


def _targets(arrays: CloudArrays, indices: NDArray, task: str) -> NDArray:
    if task == "segment":
        return arrays.point_labels[indices]
    targets = arrays.object_labels[indices]
    if targets.min() < 0:
        raise InvalidDataError("Classification needs an object label on every object.")
    return targets


@dataclass
class TrainedModel:
    """A trained model with its optimizer and per-epoch mean losses."""

    model: object
    optimizer: AdamW
    losses: list = field(default_factory=list)

    def checkpoint(self, metadata: Optional[dict] = None) -> ModelCheckpoint:
        """Snapshot of parameters and optimizer state."""
        return ModelCheckpoint.from_model(self.model, self.optimizer.state, metadata)


def train_cloud_model(
    arrays: CloudArrays,
    train_indices: ArrayLike,
    config: TrainingConfig,
    seed: int = 0,
) -> TrainedModel:
    """
    Train a classifier or segmenter with AdamW and a cosine schedule.

    Batches are drawn from a per-epoch permutation of ``train_indices``
    seeded by ``seed``; the last batch of an epoch may be smaller.

    Raises
    ------
    RunAbortedError
        When the loss or a gradient stops being finite.
    """
    train_indices = numpy.asarray(train_indices, dtype=numpy.int64)
    if train_indices.size == 0:
        raise InvalidArgumentError("Empty training set.")
    model: CloudModel = build_cloud_model(config.model_config(), seed)
    batch = config.batch
    epochs = config.epoch_budget
    batches_per_epoch = math.ceil(train_indices.size / batch)
    optimizer = AdamW(
        model.named_parameters(),
        total_steps=epochs * batches_per_epoch,
        lr=config.learning_rate,
        weight_decay=(config.weight_decay_max, config.weight_decay_min),
        schedule_mode=config.schedule_mode,
    )
    rng = numpy.random.default_rng(derived_seed(seed, 1))
    trained = TrainedModel(model=model, optimizer=optimizer)
    logger = get_logger()
    for epoch in range(epochs):
        order = rng.permutation(train_indices)
        total = 0.0
        for start in range(0, order.size, batch):
            indices = order[start : start + batch]
            optimizer.zero_grad()
            logits = model(arrays.positions[indices], arrays.aux[indices])
            loss = autograd.cross_entropy(logits, _targets(arrays, indices, config.task))
            if not numpy.isfinite(loss.item()):
                raise RunAbortedError("Non-finite training loss", step=optimizer.state.step)
            loss.backward()
            optimizer.step()
            total += loss.item() * indices.size
        trained.losses.append(total / order.size)
        logger.info(f"Epoch {epoch + 1}/{epochs}: loss {trained.losses[-1]:.6f}")
    return trained


def _batches(indices: NDArray, size: int) -> list[NDArray]:
    return [indices[start : start + size] for start in range(0, indices.size, size)]


def predict_cloud_model(
    model: CloudModel,
    arrays: CloudArrays,
    indices: ArrayLike,
    *,
    batch_size: int = 16,
    threads: int = 1,
) -> NDArray:
    """
    Predicted classes: (M,) per object or (M, n) per point.

    Batches are evaluated on up to ``threads`` workers and joined in
    order, so the result does not depend on the thread count.
    """
    indices = numpy.asarray(indices, dtype=numpy.int64)

    def predict(batch: NDArray) -> NDArray:
        logits = model(arrays.positions[batch], arrays.aux[batch]).numpy()
        return numpy.argmax(logits, axis=-1)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        parts = list(executor.map(predict, _batches(indices, batch_size)))
    return numpy.concatenate(parts) if parts else numpy.empty(0, dtype=numpy.int64)


def evaluate_cloud_model(
    model: CloudModel,
    arrays: CloudArrays,
    indices: ArrayLike,
    config: TrainingConfig,
    *,
    threads: int = 1,
) -> dict[str, float]:
    """Classification (V, A, F1) or segmentation (IoU, DSC) metrics on ``indices``."""
    indices = numpy.asarray(indices, dtype=numpy.int64)
    if indices.size == 0:
        raise InvalidArgumentError("Empty evaluation set.")
    predictions = predict_cloud_model(
        model, arrays, indices, batch_size=config.batch, threads=threads
    )
    targets = _targets(arrays, indices, config.task)
    if config.task == "classify":
        return metrics_classification(predictions, targets)
    return metrics_segmentation(list(predictions), list(targets), average=config.average)


def _object_stats(arrays: CloudArrays, indices: NDArray) -> list[ObjectStats]:
    return [aggregate_stats(arrays.aux[index]) for index in indices]


def fit_stat_baseline(
    arrays: CloudArrays,
    train_indices: ArrayLike,
    config: TrainingConfig,
    seed: int = 0,
) -> PCAStatClassifier:
    """
    Fit the PCA-statistic classifier named by ``config.architecture`` on
    the feature statistics of the sampled training objects.
    """
    train_indices = numpy.asarray(train_indices, dtype=numpy.int64)
    if train_indices.size == 0:
        raise InvalidArgumentError("Empty training set.")
    if config.architecture not in STAT_ARCHITECTURES:
        raise InvalidArgumentError(f"{config.architecture} is not a PCA-statistic classifier.")
    return pca_stat_classifier_fit(
        _object_stats(arrays, train_indices),
        _targets(arrays, train_indices, "classify"),
        variant=config.stat_variant,
        model=STAT_ARCHITECTURES[config.architecture],
        seed=seed,
    )


def evaluate_stat_baseline(
    fitted: PCAStatClassifier, arrays: CloudArrays, indices: ArrayLike
) -> dict[str, float]:
    """Classification metrics (V, A, F1) of a fitted PCA-statistic classifier."""
    indices = numpy.asarray(indices, dtype=numpy.int64)
    if indices.size == 0:
        raise InvalidArgumentError("Empty evaluation set.")
    predictions = pca_stat_classifier_predict(fitted, _object_stats(arrays, indices))
    return metrics_classification(predictions, _targets(arrays, indices, "classify"))


def _one_step_pairs(
    sequence: MeshGraphSequence, use_features: bool
) -> tuple[NDArray, NDArray]:
    inputs = numpy.stack(
        [sequence.node_inputs(fields, use_features) for fields in sequence.fields[:-1]]
    )
    return inputs, numpy.diff(sequence.fields, axis=0)


def surrogate_input_channels(sequence: MeshGraphSequence, use_features: bool) -> int:
    """Node input width of a sequence: fields, positions and optional features."""
    features = sequence.feature_channels if use_features else 0
    return sequence.field_channels + 3 + features


def build_surrogate(
    sequence: MeshGraphSequence, config: TrainingConfig, seed: int = 0
) -> GraphSurrogate:
    """Initialized surrogate sized for ``sequence``."""
    model = GraphSurrogate(
        config.surrogate_config(),
        surrogate_input_channels(sequence, config.use_features),
        sequence.field_channels,
    )
    model.reset_parameters(seed)
    return model


def train_surrogate(
    sequences: Sequence[MeshGraphSequence],
    config: TrainingConfig,
    seed: int = 0,
    model: Optional[GraphSurrogate] = None,
) -> TrainedModel:
    """
    Fit the surrogate to one-step field deltas.

    Every optimizer step takes all time steps of one training sequence as
    a batch. An epoch visits each sequence once; the random attention
    edges are resampled at the start of every epoch.

    Parameters
    ----------
    sequences: sequence of :obj:`surfeat.meshsim.graph.MeshGraphSequence`
    config: :obj:`surfeat.config.TrainingConfig`
        ``train_steps`` optimizer steps; surrogate and augmentation settings.
    seed: int
    model: :obj:`GraphSurrogate`, optional
        Continue training this model instead of a fresh one.
    """
    if not sequences:
        raise InvalidArgumentError("No training sequences.")
    widths = {surrogate_input_channels(item, config.use_features) for item in sequences}
    if len(widths) != 1:
        raise InvalidDataError("Training sequences have different channel layouts.")
    surrogate_config = config.surrogate_config()
    if model is None:
        model = build_surrogate(sequences[0], config, seed)
    pairs = [_one_step_pairs(item, config.use_features) for item in sequences]
    optimizer = AdamW(
        model.named_parameters(),
        total_steps=config.train_steps,
        lr=config.learning_rate,
        weight_decay=(config.weight_decay_max, config.weight_decay_min),
        schedule_mode=config.schedule_mode,
    )
    rng = numpy.random.default_rng(derived_seed(seed, 2))
    trained = TrainedModel(model=model, optimizer=optimizer)
    logger = get_logger()
    order = numpy.arange(len(sequences))
    masks: list[NDArray] = []
    epoch_loss = 0.0
    for step in range(config.train_steps):
        epoch, position = divmod(step, len(sequences))
        if position == 0:
            order = rng.permutation(len(sequences))
            masks = [
                surrogate_config.attention_mask(item.adjacency(), seed=derived_seed(seed, epoch, i))
                for i, item in enumerate(sequences)
            ]
            epoch_loss = 0.0
        index = int(order[position])
        inputs, targets = pairs[index]
        optimizer.zero_grad()
        loss = autograd.mse_loss(model(inputs, masks[index]), targets)
        if not numpy.isfinite(loss.item()):
            raise RunAbortedError("Non-finite surrogate loss", step=step)
        loss.backward()
        optimizer.step()
        epoch_loss += loss.item()
        if position == len(sequences) - 1 or step == config.train_steps - 1:
            trained.losses.append(epoch_loss / (position + 1))
            logger.info(f"Step {step + 1}/{config.train_steps}: loss {trained.losses[-1]:.6g}")
    return trained


def evaluate_surrogate(
    model: GraphSurrogate,
    sequences: Sequence[MeshGraphSequence],
    config: TrainingConfig,
    seed: int = 0,
    *,
    threads: int = 1,
) -> tuple[dict[str, float], list[RolloutRecord]]:
    """
    Roll out every sequence from its first frame.

    The attention mask of each sequence uses fixed random edges derived
    from ``seed``. The returned RMSE pools all steps, nodes and channels
    of all sequences.
    """
    if not sequences:
        raise InvalidArgumentError("No evaluation sequences.")
    surrogate_config = config.surrogate_config()

    def run(item: tuple[int, MeshGraphSequence]) -> RolloutRecord:
        index, sequence = item
        mask = surrogate_config.attention_mask(
            sequence.adjacency(), seed=derived_seed(seed, 3, index)
        )
        return rollout(model, sequence, adjacency=mask, use_features=config.use_features)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        records = list(executor.map(run, enumerate(sequences)))
    squared = sum(float(((r.predicted - r.target) ** 2).sum()) for r in records)
    count = sum(r.predicted.size for r in records)
    return {"RMSE": math.sqrt(squared / count)}, records
