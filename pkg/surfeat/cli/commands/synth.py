"""
The CLI interface to the synthetic benchmark generators
"""
import click

from surfeat.api import core


@click.command(name="synth")
@click.argument("kind", type=click.Choice(["classify", "segment", "rollout"]))
@click.option(
    "-n",
    "--n-objects",
    type=click.IntRange(min=1),
    default=40,
    show_default=True,
    help="Number of objects (clouds or mesh sequences).",
)
@click.option(
    "-p",
    "--n-points",
    type=click.IntRange(min=1),
    default=512,
    show_default=True,
    help="Points per cloud.",
)
@click.option(
    "-d",
    "--feature-dim",
    type=click.IntRange(min=4),
    default=16,
    show_default=True,
    help="Surface feature channels.",
)
@click.option(
    "--signal",
    type=float,
    default=0.5,
    show_default=True,
    help="Class separation of the synthetic features.",
)
@click.option(
    "--n-nodes",
    type=click.IntRange(min=4),
    default=100,
    show_default=True,
    help="Mesh nodes per sequence.",
)
@click.option(
    "--steps",
    type=click.IntRange(min=1),
    default=10,
    show_default=True,
    help="Time steps per sequence.",
)
@click.option(
    "--diffusivity",
    type=click.FloatRange(0.0, 1.0),
    default=0.5,
    show_default=True,
    help="Diffusion rate of the mesh fields.",
)
@click.option(
    "--no-features",
    is_flag=True,
    help="Write mesh sequences without static node features.",
)
@click.pass_obj
def synth(
    options,
    kind,
    n_objects,
    n_points,
    feature_dim,
    signal,
    n_nodes,
    steps,
    diffusivity,
    no_features,
):
    """Write a synthetic classification, segmentation or rollout benchmark."""
    paths = core.synthesize(
        kind,
        options["out"],
        n_objects=n_objects,
        n_points=n_points,
        feature_dim=feature_dim,
        signal=signal,
        n_nodes=n_nodes,
        steps=steps,
        diffusivity=diffusivity,
        with_features=not no_features,
        seed=options["seed"] or 0,
    )
    click.echo(f"Wrote {len(paths)} files to {options['out']}")
