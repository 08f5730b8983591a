"""
The CLI interface to the feature-space analytics
"""
import click

from surfeat.api import core
from surfeat.featurestore import STAT_NAMES


@click.command(name="analyze")
@click.argument("kind", type=click.Choice(["pca", "tsne", "cluster", "correlate"]))
@click.argument("source", type=click.Path(exists=True))
@click.option(
    "-s",
    "--stat",
    type=click.Choice(STAT_NAMES),
    default="mean",
    show_default=True,
    help="Statistic family of the per-object vectors.",
)
@click.option(
    "-m",
    "--metrics",
    type=click.Path(exists=True, dir_okay=False),
    help="CSV with object_id and metric columns (correlate).",
    required=False,
)
@click.option(
    "--on",
    type=click.Choice(["pca", "tsne"]),
    default="pca",
    show_default=True,
    help="Coordinates the clustering runs on.",
)
@click.option(
    "-k",
    "--k-range",
    nargs=2,
    type=click.IntRange(min=2),
    default=(2, 20),
    show_default=True,
    help="Smallest and largest cluster count tried.",
)
@click.option(
    "--perplexity",
    type=click.FloatRange(min=0.0, min_open=True),
    default=30.0,
    show_default=True,
    help="t-SNE perplexity.",
)
@click.pass_obj
def analyze(options, kind, source, stat, metrics, on, k_range, perplexity):
    """
    Project, cluster or correlate per-object feature statistics.

    SOURCE is a statistics CSV or a directory of .sfpc containers.
    """
    paths = core.analyze(
        kind,
        source,
        options["out"],
        stat=stat,
        metrics_path=metrics,
        on=on,
        k_range=range(k_range[0], k_range[1] + 1),
        perplexity=perplexity,
        seed=options["seed"] or 0,
    )
    for path in paths:
        click.echo(str(path))
