"""
The CLI interface to model training
"""
import click

from surfeat.api import core
from surfeat.cloudmodels.config import ARCHITECTURES
from surfeat.cloudmodels.pca_classifier import STAT_ARCHITECTURES, VARIANTS
from surfeat.config import PROTOCOLS, TASKS, TrainingConfig, load_config
from surfeat.exceptions import RunAbortedError


def run_config(options: dict, **overrides) -> TrainingConfig:
    """Configuration file of the CLI group, with command-line overrides applied."""
    config = load_config(options["config"], **overrides)
    if options["seed"] is not None:
        config = config.replace(
            seeds=tuple(options["seed"] + offset for offset in range(len(config.seeds)))
        )
    return config


@click.command(name="train")
@click.option("-t", "--task", type=click.Choice(TASKS), help="Task to train.", required=False)
@click.option(
    "-a",
    "--architecture",
    type=click.Choice(ARCHITECTURES + tuple(STAT_ARCHITECTURES)),
    help="Point-cloud model, or a classifier on PCA summaries of feature statistics.",
    required=False,
)
@click.option(
    "-x",
    "--auxiliary",
    type=click.Choice(["normals", "features"]),
    help="Per-point channels beside the positions.",
    required=False,
)
@click.option(
    "--stat-variant",
    type=click.Choice(tuple(VARIANTS)),
    help="Statistics fed to the pca-logistic and pca-mlp classifiers.",
    required=False,
)
@click.option(
    "-n",
    "--n-points",
    type=click.IntRange(min=1),
    help="Points sampled per object.",
    required=False,
)
@click.option(
    "-p", "--protocol", type=click.Choice(PROTOCOLS), help="Evaluation protocol.", required=False
)
@click.option(
    "-z",
    "--size-class",
    type=click.Choice(["S", "L"]),
    help="Mesh surrogate size class.",
    required=False,
)
@click.option(
    "--use-features/--no-features",
    default=None,
    help="Feed static node features to the mesh surrogate.",
)
@click.option(
    "-d",
    "--data-dir",
    type=click.Path(exists=True, file_okay=False),
    help="Directory of .sfpc or .sfms containers. Synthetic data when omitted.",
    required=False,
)
@click.option("--name", help="Row label of the report.", required=False)
@click.pass_obj
def train(
    options,
    task,
    architecture,
    auxiliary,
    stat_variant,
    n_points,
    protocol,
    size_class,
    use_features,
    data_dir,
    name,
):
    """
    Train and evaluate a model under a repeated-seed or k-fold protocol.

    Writes config.txt, metrics.csv, report.json and per-run manifests and
    checkpoints under runs/.
    """
    config = run_config(
        options,
        task=task,
        architecture=architecture,
        auxiliary=auxiliary,
        stat_variant=stat_variant,
        n_points=n_points,
        protocol=protocol,
        size_class=size_class,
        use_features=use_features,
    )
    result = core.train(
        config, options["out"], data_dir=data_dir, threads=options["threads"], name=name
    )
    summary = result.report.summary()
    click.echo(f"{result.report.name} ({len(result.report.runs)} runs)")
    for metric, row in summary.iterrows():
        click.echo(f"  {metric}: {row['mean']:.4f} ± {row['std']:.4f}")
    if result.report.partial:
        raise RunAbortedError(
            f"{len(result.report.failed)} run(s) aborted: {', '.join(result.report.failed)}"
        )
