"""
Standalone SVG figures: labeled scatter plots of projections, correlation
heatmaps and silhouette curves.

Figures are built with :class:`matplotlib.figure.Figure` (no pyplot
state) and saved without a date stamp and with a fixed id salt, so the
same input always yields the same bytes.
"""
import os
from typing import Optional, Union

import matplotlib
import numpy
import pandas
from matplotlib.figure import Figure

from surfeat.analytics.projection import Projection2D
from surfeat.exceptions import InvalidArgumentError

PathLike = Union[str, os.PathLike]

_SVG_RC = {"svg.hashsalt": "surfeat", "svg.fonttype": "none"}


def save_svg(figure: Figure, path: PathLike) -> None:
    """Write a figure as reproducible SVG."""
    with matplotlib.rc_context(_SVG_RC):
        figure.savefig(path, format="svg", metadata={"Date": None})


def plot_projection(
    projection: Projection2D,
    path: PathLike,
    *,
    color_by: Optional[str] = None,
    title: Optional[str] = None,
) -> None:
    """
    Scatter plot of a projection, one color per value of a label column.

    Parameters
    ----------
    projection: :obj:`surfeat.analytics.projection.Projection2D`
    path: str or path-like
        Output SVG file.
    color_by: str, optional
        Label column for the legend; defaults to the first one.
    title: str, optional
    """
    if color_by is None and projection.labels:
        color_by = next(iter(projection.labels))
    if color_by is not None and color_by not in projection.labels:
        raise InvalidArgumentError(f"Unknown label column: {color_by}")
    figure = Figure(figsize=(6, 5))
    axes = figure.add_subplot()
    coordinates = projection.coordinates
    if color_by is None:
        axes.scatter(coordinates[:, 0], coordinates[:, 1], s=12)
    else:
        values = numpy.asarray(projection.labels[color_by])
        for value in numpy.unique(values):
            mask = values == value
            axes.scatter(
                coordinates[mask, 0], coordinates[mask, 1], s=12, label=f"{color_by}={value}"
            )
        axes.legend(loc="best", fontsize="small")
    prefix = "PC" if projection.method == "pca" else "t-SNE "
    xlabel, ylabel = f"{prefix}1", f"{prefix}2"
    if projection.explained_variance is not None:
        xlabel += f" ({100 * projection.explained_variance[0]:.1f}%)"
        ylabel += f" ({100 * projection.explained_variance[1]:.1f}%)"
    axes.set_xlabel(xlabel)
    axes.set_ylabel(ylabel)
    axes.set_title(title or f"{projection.method.upper()} projection")
    save_svg(figure, path)


def plot_heatmap(table: pandas.DataFrame, path: PathLike, *, title: str = "Correlation") -> None:
    """Annotated heatmap of a correlation table (NaN cells left blank)."""
    figure = Figure(figsize=(1.2 * max(len(table.columns), 3) + 2, 0.6 * max(len(table), 3) + 1.5))
    axes = figure.add_subplot()
    values = table.to_numpy(dtype=numpy.float64)
    image = axes.imshow(
        numpy.ma.masked_invalid(values), cmap="coolwarm", vmin=-1.0, vmax=1.0, aspect="auto"
    )
    axes.set_xticks(range(len(table.columns)), labels=[str(c) for c in table.columns])
    axes.set_yticks(range(len(table.index)), labels=[str(i) for i in table.index])
    for row in range(values.shape[0]):
        for column in range(values.shape[1]):
            if numpy.isfinite(values[row, column]):
                axes.text(
                    column, row, f"{values[row, column]:.2f}", ha="center", va="center", fontsize=8
                )
    figure.colorbar(image, ax=axes, label="Pearson r")
    axes.set_title(title)
    save_svg(figure, path)


def plot_silhouette(table: pandas.DataFrame, path: PathLike) -> None:
    """Mean silhouette against cluster count."""
    figure = Figure(figsize=(6, 4))
    axes = figure.add_subplot()
    axes.plot(table["k"], table["silhouette"], marker="o")
    axes.set_xlabel("Number of clusters")
    axes.set_ylabel("Mean silhouette")
    axes.set_title("Silhouette score by cluster count")
    save_svg(figure, path)
