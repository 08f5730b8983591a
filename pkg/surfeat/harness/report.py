"""
Rendering of metric reports: one CSV, one SVG and one block of the text
report per task (classification, segmentation, simulation).

Published values can be shown next to the toolkit's own results; such
rows are labelled ``reference, not reproduced``.
"""
import os
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy
import pandas
from matplotlib.figure import Figure

from surfeat.analytics.plotting import save_svg
from surfeat.harness.metrics import PERCENT_COLUMNS, TASK_COLUMNS, MetricReport

PathLike = Union[str, os.PathLike]

REFERENCE_SOURCE = "reference, not reproduced"
TOOLKIT_SOURCE = "surfeat"
TASK_FILES = {"classify": "classification", "segment": "segmentation", "rollout": "simulation"}
COLUMN_TITLES = {
    "V": "V. (%)",
    "A": "A. (%)",
    "F1": "F1",
    "IoU_V": "IoU V. (%)",
    "IoU_A": "IoU A. (%)",
    "DSC_V": "DSC V. (%)",
    "DSC_A": "DSC A. (%)",
    "RMSE": "All-Rollout RMSE",
}

_NAN = float("nan")

# (model, {metric: (mean, std)}) with percentages as published
REFERENCE_ROWS: dict[str, list[tuple[str, dict[str, tuple[float, float]]]]] = {
    "classify": [
        (
            "MLP / features / 512",
            {"V": (88.80, 24.55), "A": (97.84, 1.55), "F1": (0.9127, 0.1827)},
        ),
        (
            "MLP / features / 1024",
            {"V": (99.94, 0.13), "A": (98.52, 2.05), "F1": (0.9970, 0.0033)},
        ),
        (
            "MLP / features / 2048",
            {"V": (99.82, 0.16), "A": (97.87, 1.82), "F1": (0.9950, 0.0039)},
        ),
        (
            "PointNet / normals / 512",
            {"V": (91.79, 3.26), "A": (52.09, 8.59), "F1": (0.8209, 0.0280)},
        ),
        (
            "PointNet / normals / 1024",
            {"V": (92.48, 2.06), "A": (52.33, 4.52), "F1": (0.8274, 0.0059)},
        ),
        (
            "PointNet / normals / 2048",
            {"V": (91.70, 1.90), "A": (45.17, 5.93), "F1": (0.8019, 0.0165)},
        ),
        (
            "PointNet / features / 512",
            {"V": (99.94, 1.29), "A": (99.40, 0.82), "F1": (0.9985, 0.0014)},
        ),
        (
            "PointNet / features / 1024",
            {"V": (99.82, 0.27), "A": (98.15, 0.78), "F1": (0.9956, 0.0021)},
        ),
        (
            "PointNet / features / 2048",
            {"V": (99.83, 0.38), "A": (99.14, 1.29), "F1": (0.9971, 0.0032)},
        ),
        (
            "PointNet++ / normals / 512",
            {"V": (90.30, 2.04), "A": (52.59, 2.61), "F1": (0.8130, 0.0124)},
        ),
        (
            "PointNet++ / normals / 1024",
            {"V": (89.69, 2.23), "A": (53.01, 2.36), "F1": (0.8106, 0.0123)},
        ),
        (
            "PointNet++ / normals / 2048",
            {"V": (90.57, 2.28), "A": (51.29, 4.49), "F1": (0.8105, 0.0155)},
        ),
        (
            "PointNet++ / features / 512",
            {"V": (99.88, 0.16), "A": (100.0, 0.00), "F1": (0.9990, 0.0014)},
        ),
        (
            "PointNet++ / features / 1024",
            {"V": (99.76, 0.32), "A": (98.79, 1.28), "F1": (0.9961, 0.0028)},
        ),
        (
            "PointNet++ / features / 2048",
            {"V": (99.46, 0.25), "A": (97.96, 2.16), "F1": (0.9921, 0.0033)},
        ),
        (
            "MLP on PCA / mean",
            {"V": (94.21, 2.79), "A": (75.20, 9.27), "F1": (0.9117, 0.0066)},
        ),
        (
            "MLP on PCA / mean+std",
            {"V": (97.93, 1.55), "A": (54.17, 17.75), "F1": (0.8962, 0.0302)},
        ),
        (
            "MLP on PCA / all",
            {"V": (96.87, 1.37), "A": (80.98, 3.93), "F1": (0.9424, 0.0131)},
        ),
        (
            "Logistic on PCA / mean",
            {"V": (95.75, 0.668), "A": (65.57, 4.35), "F1": (0.9054, 0.0414)},
        ),
        (
            "Logistic on PCA / mean+std",
            {"V": (95.98, 0.82), "A": (68.58, 3.37), "F1": (0.9130, 0.0059)},
        ),
        (
            "Logistic on PCA / all",
            {"V": (97.18, 1.16), "A": (78.26, 4.36), "F1": (0.9398, 0.0116)},
        ),
    ],
    "segment": [
        (
            "PointNet / normals / 512",
            {
                "IoU_V": (88.08, 1.74),
                "IoU_A": (66.38, 3.84),
                "DSC_V": (93.65, 0.99),
                "DSC_A": (79.75, 2.54),
            },
        ),
        (
            "PointNet / normals / 2048",
            {
                "IoU_V": (81.16, 2.04),
                "IoU_A": (50.95, 7.97),
                "DSC_V": (89.59, 1.26),
                "DSC_A": (67.19, 7.45),
            },
        ),
        (
            "PointNet / features / 512",
            {
                "IoU_V": (95.84, 0.37),
                "IoU_A": (86.53, 2.40),
                "DSC_V": (97.87, 0.16),
                "DSC_A": (92.77, 1.29),
            },
        ),
        (
            "PointNet / features / 2048",
            {
                "IoU_V": (96.57, 0.28),
                "IoU_A": (88.67, 1.82),
                "DSC_V": (98.26, 0.15),
                "DSC_A": (93.99, 1.03),
            },
        ),
        (
            "PointNet++ / normals / 2048",
            {
                "IoU_V": (89.33, 1.21),
                "IoU_A": (67.98, 3.69),
                "DSC_V": (94.30, 0.68),
                "DSC_A": (80.89, 2.60),
            },
        ),
        (
            "PointNet++ / features / 2048",
            {
                "IoU_V": (96.46, 0.40),
                "IoU_A": (88.31, 2.51),
                "DSC_V": (98.20, 0.21),
                "DSC_A": (93.78, 1.43),
            },
        ),
    ],
    "rollout": [
        ("S/1", {"RMSE": (7.57, 1.103)}),
        ("S/1 + feats", {"RMSE": (6.09, 0.637)}),
        ("L/1", {"RMSE": (4.03, 0.330)}),
        ("L/1 + feats", {"RMSE": (3.55, 0.170)}),
    ],
}


@dataclass
class RenderedReport:
    """Tables per task and the files written."""

    tables: dict = field(default_factory=dict)
    paths: list = field(default_factory=list)
    text: str = ""


def _scale(column: str) -> float:
    return 100.0 if column in PERCENT_COLUMNS else 1.0


def report_table(
    task: str,
    reports: Sequence[MetricReport],
    references: Optional[Sequence[tuple[str, dict]]] = None,
) -> pandas.DataFrame:
    """
    One row per report (and reference row) with ``{metric}_mean`` and
    ``{metric}_std`` columns, percentages for accuracies, IoU and DSC.
    """
    columns = TASK_COLUMNS[task]
    rows = []
    for report in reports:
        summary = report.summary()
        row = {
            "model": report.name,
            "source": TOOLKIT_SOURCE,
            "protocol": report.protocol,
            "runs": len(report.runs),
            "partial": report.partial,
        }
        for name in columns:
            row[f"{name}_mean"] = summary.loc[name, "mean"] * _scale(name)
            row[f"{name}_std"] = summary.loc[name, "std"] * _scale(name)
        rows.append(row)
    for model, values in references or ():
        row = {
            "model": model,
            "source": REFERENCE_SOURCE,
            "protocol": "",
            "runs": 0,
            "partial": False,
        }
        for name in columns:
            mean, std = values.get(name, (_NAN, _NAN))
            row[f"{name}_mean"] = mean
            row[f"{name}_std"] = std
        rows.append(row)
    header = ["model", "source", "protocol", "runs", "partial"]
    header += [f"{name}_{stat}" for name in columns for stat in ("mean", "std")]
    return pandas.DataFrame(rows, columns=header)


def _format_cell(mean: float, std: float, column: str) -> str:
    if numpy.isnan(mean):
        return "-"
    digits = 4 if column == "F1" else (3 if column == "RMSE" else 2)
    text = f"{mean:.{digits}f}"
    return text if numpy.isnan(std) else f"{text} ± {std:.{digits}f}"


def render_text(task: str, table: pandas.DataFrame) -> str:
    """Fixed-width text rendering of a report table."""
    columns = TASK_COLUMNS[task]
    titles = ["Model"] + [COLUMN_TITLES[name] for name in columns] + ["Source"]
    body = []
    for _, row in table.iterrows():
        model = str(row["model"]) + (" (partial)" if row["partial"] else "")
        cells = [_format_cell(row[f"{n}_mean"], row[f"{n}_std"], n) for n in columns]
        body.append([model] + cells + [str(row["source"])])
    widths = [max(len(line[i]) for line in [titles] + body) for i in range(len(titles))]
    lines = ["  ".join(cell.ljust(width) for cell, width in zip(titles, widths)).rstrip()]
    lines.append("  ".join("-" * width for width in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(line, widths)).rstrip() for line in body]
    return f"[{TASK_FILES[task]}]\n" + "\n".join(lines) + "\n"


def plot_report(task: str, table: pandas.DataFrame, path: PathLike) -> None:
    """Grouped bars (mean with std error bars) of every row and metric."""
    columns = TASK_COLUMNS[task]
    figure = Figure(figsize=(max(6.0, 0.6 * len(table) * len(columns)), 4.5))
    axes = figure.add_subplot()
    positions = numpy.arange(len(columns), dtype=numpy.float64)
    width = 0.8 / max(len(table), 1)
    for offset, (_, row) in enumerate(table.iterrows()):
        means = [row[f"{name}_mean"] for name in columns]
        stds = numpy.nan_to_num([row[f"{name}_std"] for name in columns])
        reference = row["source"] == REFERENCE_SOURCE
        axes.bar(
            positions + offset * width,
            means,
            width,
            yerr=stds,
            hatch="//" if reference else None,
            label=f"{row['model']}{' (ref.)' if reference else ''}",
        )
    axes.set_xticks(
        positions + 0.4 - width / 2, labels=[COLUMN_TITLES[name] for name in columns]
    )
    axes.set_title(f"{TASK_FILES[task].capitalize()} results")
    if len(table):
        axes.legend(loc="best", fontsize="x-small")
    save_svg(figure, path)


def report_render(
    reports: Sequence[MetricReport],
    out_dir: PathLike,
    *,
    references: Union[bool, dict] = False,
    notes: Sequence[str] = (),
) -> RenderedReport:
    """
    Write ``{classification,segmentation,simulation}.{csv,svg}`` for every
    task present, plus ``report.txt``.

    Parameters
    ----------
    reports: sequence of :obj:`surfeat.harness.metrics.MetricReport`
    out_dir: str or path-like
    references: bool or dict
        ``True`` adds :data:`REFERENCE_ROWS`; a dict maps task to rows.
    notes: sequence of str
        Header lines of the text report (e.g. fixed hyperparameters).

    Returns
    -------
    :obj:`RenderedReport`
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if references is True:
        references = REFERENCE_ROWS
    elif references is False:
        references = {}
    rendered = RenderedReport()
    blocks = [f"# {note}" for note in notes]
    for task, stem in TASK_FILES.items():
        selected = [report for report in reports if report.task == task]
        if not selected and task not in references:
            continue
        table = report_table(task, selected, references.get(task))
        csv_path = out_dir / f"{stem}.csv"
        table.to_csv(csv_path, index=False, float_format="%.6f", lineterminator="\n")
        svg_path = out_dir / f"{stem}.svg"
        plot_report(task, table, svg_path)
        rendered.tables[task] = table
        rendered.paths += [csv_path, svg_path]
        blocks.append(render_text(task, table))
    rendered.text = "\n".join(blocks)
    text_path = out_dir / "report.txt"
    text_path.write_text(rendered.text, encoding="utf-8")
    rendered.paths.append(text_path)
    return rendered
