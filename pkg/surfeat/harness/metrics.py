"""
Classification, segmentation and rollout metrics, and their aggregation
over repeated runs or folds.

Class 0 is the vessel (V.) class and class 1 the aneurysm (A.) class;
F1 treats the aneurysm class as positive. ``numpy.nan`` marks a metric
that is undefined for the given data.
"""
import hashlib
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Literal, Union

import numpy
import pandas
from numpy.typing import ArrayLike, NDArray

from surfeat.exceptions import InvalidArgumentError, InvalidDataError

Averaging = Literal["micro", "macro"]
LabelArrays = Union[ArrayLike, Sequence[ArrayLike]]

CLASSIFICATION_COLUMNS = ("V", "A", "F1")
SEGMENTATION_COLUMNS = ("IoU_V", "IoU_A", "DSC_V", "DSC_A")
ROLLOUT_COLUMNS = ("RMSE",)
TASK_COLUMNS = {
    "classify": CLASSIFICATION_COLUMNS,
    "segment": SEGMENTATION_COLUMNS,
    "rollout": ROLLOUT_COLUMNS,
}
# fractions shown as percent in rendered tables
PERCENT_COLUMNS = ("V", "A") + SEGMENTATION_COLUMNS


def _binary_pair(predictions: ArrayLike, targets: ArrayLike) -> tuple[NDArray, NDArray]:
    predictions = numpy.asarray(predictions).ravel()
    targets = numpy.asarray(targets).ravel()
    if predictions.shape != targets.shape:
        raise InvalidArgumentError(
            f"{predictions.size} predictions for {targets.size} targets."
        )
    for values in (predictions, targets):
        if numpy.any((values != 0) & (values != 1)):
            raise InvalidDataError("Labels must be binary (0 vessel, 1 aneurysm).")
    return predictions.astype(numpy.int64), targets.astype(numpy.int64)


def _ratio(numerator: float, denominator: float) -> float:
    return float(numerator / denominator) if denominator > 0 else float("nan")


def metrics_classification(predictions: ArrayLike, targets: ArrayLike) -> dict[str, float]:
    """
    Per-class accuracy and aneurysm F1 of object predictions.

    Returns
    -------
    dict
        ``V`` and ``A`` (accuracy within each true class, NaN for an empty
        class) and ``F1`` (0 when precision + recall is 0).
    """
    predictions, targets = _binary_pair(predictions, targets)
    true_positive = int(numpy.sum((predictions == 1) & (targets == 1)))
    false_positive = int(numpy.sum((predictions == 1) & (targets == 0)))
    false_negative = int(numpy.sum((predictions == 0) & (targets == 1)))
    true_negative = int(numpy.sum((predictions == 0) & (targets == 0)))
    precision = _ratio(true_positive, true_positive + false_positive)
    recall = _ratio(true_positive, true_positive + false_negative)
    precision = 0.0 if numpy.isnan(precision) else precision
    recall = 0.0 if numpy.isnan(recall) else recall
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return {
        "V": _ratio(true_negative, true_negative + false_positive),
        "A": _ratio(true_positive, true_positive + false_negative),
        "F1": float(f1),
    }


def _overlaps(predictions: NDArray, targets: NDArray) -> NDArray:
    """(2, 3) array of |P_c ∩ T_c|, |P_c|, |T_c| per class."""
    return numpy.array(
        [
            [
                numpy.sum((predictions == label) & (targets == label)),
                numpy.sum(predictions == label),
                numpy.sum(targets == label),
            ]
            for label in (0, 1)
        ],
        dtype=numpy.float64,
    )


def _segmentation_scores(counts: NDArray) -> dict[str, float]:
    scores = {}
    for label, suffix in enumerate(("V", "A")):
        intersection, predicted, target = counts[label]
        scores[f"IoU_{suffix}"] = _ratio(intersection, predicted + target - intersection)
        scores[f"DSC_{suffix}"] = _ratio(2 * intersection, predicted + target)
    return {name: scores[name] for name in SEGMENTATION_COLUMNS}


def metrics_segmentation(
    predictions: LabelArrays,
    targets: LabelArrays,
    *,
    average: Averaging = "micro",
) -> dict[str, float]:
    """
    IoU and DSC of each part class.

    Parameters
    ----------
    predictions, targets: array-like or sequence of array-like
        Per-point labels; a sequence holds one array per object.
    average: {"micro", "macro"}
        "micro" pools every point of the evaluation set; "macro" scores
        each object and averages the defined values.

    Returns
    -------
    dict
        ``IoU_V``, ``IoU_A``, ``DSC_V``, ``DSC_A``; NaN for a class absent
        from both predictions and targets.
    """
    if average not in ("micro", "macro"):
        raise InvalidArgumentError(f"Unknown averaging mode: {average}")
    is_grouped = isinstance(predictions, (list, tuple))
    if is_grouped != isinstance(targets, (list, tuple)):
        raise InvalidArgumentError("Predictions and targets must both be grouped per object.")
    if not is_grouped:
        predictions, targets = [predictions], [targets]
    if len(predictions) != len(targets):
        raise InvalidArgumentError(f"{len(predictions)} predicted objects, {len(targets)} targets.")
    counts = [_overlaps(*_binary_pair(pred, target)) for pred, target in zip(predictions, targets)]
    if average == "micro":
        return _segmentation_scores(numpy.sum(counts, axis=0))
    per_object = pandas.DataFrame([_segmentation_scores(count) for count in counts])
    return {
        name: float(per_object[name].mean()) if per_object[name].notna().any() else float("nan")
        for name in SEGMENTATION_COLUMNS
    }


@dataclass
class MetricReport:
    """
    Metrics of a set of runs (seeds or folds) of one configuration.

    Parameters
    ----------
    name: str
        Row label, e.g. "pointnet-mod / features / 512".
    task: {"classify", "segment", "rollout"}
    runs: pandas.DataFrame
        One row per completed run, one column per metric (fractions).
    run_ids: list[str]
        Identifier of each completed run, in row order.
    failed: list[str]
        Identifiers of runs that aborted.
    protocol: str
        "repeated" or "kfold".
    """

    name: str
    task: str
    runs: pandas.DataFrame
    run_ids: list = field(default_factory=list)
    failed: list = field(default_factory=list)
    protocol: str = "repeated"

    def __post_init__(self):
        if self.task not in TASK_COLUMNS:
            raise InvalidArgumentError(f"Unknown task: {self.task}")
        missing = set(TASK_COLUMNS[self.task]) - set(self.runs.columns)
        if missing:
            raise InvalidDataError(f"Missing metric columns: {sorted(missing)}")
        self.runs = self.runs[list(TASK_COLUMNS[self.task])].reset_index(drop=True)

    @classmethod
    def from_runs(
        cls, name: str, task: str, metrics: Sequence[dict], **kwargs
    ) -> "MetricReport":
        """Build from one metrics dict per completed run."""
        runs = pandas.DataFrame(list(metrics), columns=list(TASK_COLUMNS[task]), dtype=float)
        return cls(name=name, task=task, runs=runs, **kwargs)

    @property
    def partial(self) -> bool:
        """Whether any run aborted."""
        return bool(self.failed)

    @property
    def columns(self) -> tuple[str, ...]:
        return TASK_COLUMNS[self.task]

    def summary(self) -> pandas.DataFrame:
        """
        Mean and population standard deviation (ddof=0) of each metric over
        the completed runs, indexed by metric name.
        """
        return pandas.DataFrame(
            {
                "mean": [self._stat(name, numpy.nanmean) for name in self.columns],
                "std": [self._stat(name, numpy.nanstd) for name in self.columns],
            },
            index=pandas.Index(self.columns, name="metric"),
        )

    def _stat(self, name: str, reducer) -> float:
        values = self.runs[name].to_numpy(dtype=numpy.float64)
        if not numpy.isfinite(values).any():
            return float("nan")
        return float(reducer(values))

    def mean(self, name: str) -> float:
        return self._stat(name, numpy.nanmean)

    def std(self, name: str) -> float:
        return self._stat(name, numpy.nanstd)

    def to_csv(self) -> str:
        """Per-run metric table as CSV text with fixed float formatting."""
        table = self.runs.copy()
        table.insert(0, "run_id", self.run_ids or [str(i) for i in range(len(table))])
        return table.to_csv(index=False, float_format="%.10g", lineterminator="\n")

    def digest(self) -> str:
        """SHA-256 of :meth:`to_csv`."""
        return hashlib.sha256(self.to_csv().encode("utf-8")).hexdigest()

    def to_dict(self) -> dict:
        """JSON-ready form; undefined metrics become None."""
        return {
            "name": self.name,
            "task": self.task,
            "protocol": self.protocol,
            "run_ids": list(self.run_ids),
            "failed": list(self.failed),
            "runs": {
                name: [None if numpy.isnan(value) else float(value) for value in self.runs[name]]
                for name in self.columns
            },
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MetricReport":
        """Inverse of :meth:`to_dict`."""
        try:
            runs = pandas.DataFrame(
                {
                    name: pandas.Series(values, dtype=float)
                    for name, values in payload["runs"].items()
                }
            )
            return cls(
                name=payload["name"],
                task=payload["task"],
                runs=runs,
                run_ids=list(payload.get("run_ids", [])),
                failed=list(payload.get("failed", [])),
                protocol=payload.get("protocol", "repeated"),
            )
        except (KeyError, TypeError) as error:
            raise InvalidDataError(f"Malformed metric report: {error}") from None
