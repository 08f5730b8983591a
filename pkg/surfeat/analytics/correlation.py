"""
Pearson correlation between feature summaries and external per-object
scalars (e.g. hemodynamic metrics such as TAWSS).
"""
from typing import Union

import numpy
import pandas
from numpy.typing import ArrayLike

from surfeat.exceptions import InvalidArgumentError, InvalidDataError

Columns = Union[pandas.DataFrame, dict]


def pearson(first: ArrayLike, second: ArrayLike) -> float:
    """Pearson r of two equal-length columns; NaN if either is constant."""
    first = numpy.asarray(first, dtype=numpy.float64)
    second = numpy.asarray(second, dtype=numpy.float64)
    first = first - first.mean()
    second = second - second.mean()
    denominator = numpy.sqrt((first @ first) * (second @ second))
    if denominator == 0:
        return float("nan")
    return float(numpy.clip((first @ second) / denominator, -1.0, 1.0))


def correlation_table(features: Columns, metrics: Columns) -> pandas.DataFrame:
    """
    Pearson r for every (feature column, metric column) pair.

    Parameters
    ----------
    features: pandas.DataFrame or dict
        Feature columns, e.g. the first three principal components.
    metrics: pandas.DataFrame or dict
        Named scalar columns, one value per object.

    Returns
    -------
    pandas.DataFrame
        Rows indexed by feature name, one column per metric; NaN marks an
        undefined correlation (constant column).
    """
    features = pandas.DataFrame(features)
    metrics = pandas.DataFrame(metrics)
    if len(features) != len(metrics):
        raise InvalidDataError(
            f"Feature rows ({len(features)}) and metric rows ({len(metrics)}) differ."
        )
    if len(features) < 3:
        raise InvalidArgumentError("Correlations need at least 3 objects.")
    table = pandas.DataFrame(
        [
            [pearson(features[name], metrics[metric]) for metric in metrics.columns]
            for name in features.columns
        ],
        index=pandas.Index([str(name) for name in features.columns], name="feature"),
        columns=[str(metric) for metric in metrics.columns],
    )
    return table
