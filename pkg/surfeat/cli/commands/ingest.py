"""
The CLI interface to mesh and feature-token ingestion
"""
from pathlib import Path

import click

from surfeat.io.ingest import ingest_file


@click.command(name="ingest")
@click.argument("input_file", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "-f",
    "--features",
    type=click.Path(exists=True, dir_okay=False),
    help="Token file (.npz with 'coords' and 'feats') assigned to the mesh points.",
    required=False,
)
@click.option(
    "-l",
    "--labels",
    type=click.Path(exists=True, dir_okay=False),
    help="Per-vertex part labels (.npy).",
    required=False,
)
@click.option(
    "-y",
    "--object-label",
    type=click.IntRange(0, 1),
    help="Object class: 0 vessel, 1 aneurysm.",
    required=False,
)
@click.pass_obj
def ingest(options, input_file, features, labels, object_label):
    """
    Convert a mesh into a point-cloud container (.sfpc) or a token file
    into a feature-field container (.sfvx).
    """
    target = ingest_file(
        input_file,
        Path(options["out"]),
        features_path=features,
        labels_path=labels,
        object_label=object_label,
    )
    click.echo(str(target))
