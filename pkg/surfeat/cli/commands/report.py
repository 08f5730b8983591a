"""
The CLI interface to report rendering
"""
import click

from surfeat.api import core


@click.command(name="report")
@click.argument("run_dirs", nargs=-1, required=True, type=click.Path(exists=True, file_okay=False))
@click.option(
    "-r",
    "--references",
    is_flag=True,
    help="Add the published reference rows, marked as not reproduced.",
)
@click.pass_obj
def report(options, run_dirs, references):
    """Render the tables and plots of one or more training output directories."""
    rendered = core.report(run_dirs, options["out"], references=references)
    click.echo(rendered.text)
