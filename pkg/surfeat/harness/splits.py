"""
Stratified train/test splits and cross-validation folds.
"""
from dataclasses import dataclass

import numpy
from numpy.typing import ArrayLike, NDArray

from surfeat.exceptions import InvalidArgumentError


@dataclass(frozen=True)
class Split:
    """Sorted train and test object indices."""

    train: NDArray
    test: NDArray

    def describe(self) -> dict:
        """JSON-ready description for a run manifest."""
        return {"train": self.train.tolist(), "test": self.test.tolist()}


def _class_members(labels: NDArray, rng: numpy.random.Generator) -> list[NDArray]:
    return [rng.permutation(numpy.flatnonzero(labels == label)) for label in numpy.unique(labels)]


def _labels(labels: ArrayLike) -> NDArray:
    labels = numpy.asarray(labels)
    if labels.ndim != 1:
        raise InvalidArgumentError("Labels must be one-dimensional.")
    return labels


def stratified_split(labels: ArrayLike, test_fraction: float = 0.2, seed: int = 0) -> Split:
    """
    Hold out ``round(test_fraction * n_c)`` objects of every class ``c``.

    Each class keeps its proportion on both sides within one object.
    """
    labels = _labels(labels)
    if not 0.0 < test_fraction < 1.0:
        raise InvalidArgumentError(f"test_fraction={test_fraction} must lie in (0, 1).")
    if labels.size < 2:
        raise InvalidArgumentError("At least 2 objects are needed to split.")
    rng = numpy.random.default_rng(seed)
    train, test = [], []
    for members in _class_members(labels, rng):
        held_out = int(round(test_fraction * members.size))
        test.append(members[:held_out])
        train.append(members[held_out:])
    return Split(
        train=numpy.sort(numpy.concatenate(train)), test=numpy.sort(numpy.concatenate(test))
    )


def stratified_folds(labels: ArrayLike, folds: int = 5, seed: int = 0) -> list[Split]:
    """
    Partition objects into ``folds`` stratified test folds.

    Shuffled members of each class are dealt round-robin, continuing the
    rotation across classes, so per-class counts differ by at most one
    between folds and every object is tested exactly once.
    """
    labels = _labels(labels)
    if folds < 2:
        raise InvalidArgumentError(f"folds={folds} must be at least 2.")
    if labels.size < folds:
        raise InvalidArgumentError(f"{labels.size} objects cannot fill {folds} folds.")
    rng = numpy.random.default_rng(seed)
    order = numpy.concatenate(_class_members(labels, rng))
    assignment = numpy.empty(labels.size, dtype=numpy.int64)
    assignment[order] = numpy.arange(order.size) % folds
    everything = numpy.arange(labels.size)
    return [
        Split(train=everything[assignment != fold], test=everything[assignment == fold])
        for fold in range(folds)
    ]
