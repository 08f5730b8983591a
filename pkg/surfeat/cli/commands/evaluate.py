"""
The CLI interface to re-scoring stored runs
"""
from pathlib import Path

import click
import pandas

from surfeat.api import core


@click.command(name="eval")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "-k",
    "--checkpoint",
    type=click.Path(exists=True, dir_okay=False),
    help="Checkpoint file. Defaults to the .sfck next to the manifest.",
    required=False,
)
@click.option(
    "-d",
    "--data-dir",
    type=click.Path(exists=True, file_okay=False),
    help="Data directory of the original run. Synthetic data when omitted.",
    required=False,
)
@click.pass_obj
def evaluate(options, manifest, checkpoint, data_dir):
    """
    Score the checkpoint of a run on its held-out objects. PCA-statistic
    runs have no checkpoint and are refit on their training objects.
    """
    metrics = core.evaluate(
        manifest, checkpoint_path=checkpoint, data_dir=data_dir, threads=options["threads"]
    )
    out_dir = Path(options["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / f"{Path(manifest).stem}-eval.csv"
    pandas.DataFrame([metrics]).to_csv(
        target, index=False, float_format="%.10g", lineterminator="\n"
    )
    for name, value in metrics.items():
        click.echo(f"{name}: {value:.6g}")
