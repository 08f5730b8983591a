"""
Main CLI endpoint for surfeat
"""
import importlib.metadata

import click

import surfeat.cli.commands as cmd_modules
from surfeat import show_versions
from surfeat.config import OUTPUT_DIR_ENV, default_output_dir
from surfeat.exceptions import InvalidArgumentError, InvalidDataError, RunAbortedError
from surfeat.logger import log_to_console

CONTEXT_SETTINGS = {
    "help_option_names": ["-h", "--help"],
    "token_normalize_func": lambda x: x.replace("-", "_"),
}

EXIT_INVALID_INPUT = 2
EXIT_ABORTED = 3


class InvalidInputError(click.ClickException):
    """Bad arguments or unreadable data."""

    exit_code = EXIT_INVALID_INPUT


class AbortedRunError(click.ClickException):
    """A training or rollout diverged."""

    exit_code = EXIT_ABORTED


class SurfeatGroup(click.Group):
    """Maps surfeat exceptions onto the CLI exit codes."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (InvalidArgumentError, InvalidDataError) as error:
            raise InvalidInputError(str(error)) from None
        except RunAbortedError as error:
            raise AbortedRunError(str(error)) from None


def check_version(ctx, _, value):
    """
    Print current version.

    Called via 'surfeat --version'

    :param ctx: Application context object (click.Context)
    :param value: Passed in by Click
    :return None
    """
    if not value or ctx.resilient_parsing:
        return

    click.echo(f"surfeat v{importlib.metadata.version('surfeat')}")

    ctx.exit()


def cli_show_version(ctx, _, value):
    """
    Print debugging version information.

    :param ctx: Application context object (click.Context)
    :param value: Passed in by Click
    :return None
    """
    if not value or ctx.resilient_parsing:
        return

    show_versions()

    ctx.exit()


@click.group(cls=SurfeatGroup, context_settings=CONTEXT_SETTINGS)
@click.option(
    "-v",
    "--version",
    is_flag=True,
    is_eager=True,
    expose_value=False,
    callback=check_version,
    help="Show the current version",
)
@click.option(
    "--show-versions",
    is_flag=True,
    is_eager=True,
    expose_value=False,
    callback=cli_show_version,
    help="Show debugging version information",
)
@click.option(
    "-s",
    "--seed",
    type=int,
    help="Base seed. Training runs use consecutive seeds starting here.",
    required=False,
)
@click.option(
    "-c",
    "--config",
    type=click.Path(exists=True, dir_okay=False),
    help="Training configuration file (key = value, starting with 'version = 1').",
    required=False,
)
@click.option(
    "-o",
    "--out",
    type=click.Path(file_okay=False),
    help=f"Output directory. Defaults to ${OUTPUT_DIR_ENV} or the user data directory.",
    required=False,
)
@click.option(
    "-j",
    "--threads",
    type=click.IntRange(min=1),
    default=1,
    show_default=True,
    help="Worker threads for independent runs and evaluation.",
)
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default="WARNING",
    show_default=True,
    help="Console log level.",
)
@click.pass_context
def surfeat(ctx, seed, config, out, threads, log_level):
    """Top-level command and entry point into the surfeat CLI"""
    log_to_console(status=False)
    log_to_console(level=log_level.upper())
    ctx.obj = {
        "seed": seed,
        "config": config,
        "out": out if out is not None else default_output_dir(),
        "threads": threads,
    }


def _add_subcommands():
    """
    Individual commands (and sub-commands) are encapsulated in separate files
    under /commands. Collect these command groups, and add them underneath the
    top-level command (surfeat).
    """
    surfeat.add_command(cmd_modules.ingest.ingest)
    surfeat.add_command(cmd_modules.synth.synth)
    surfeat.add_command(cmd_modules.train.train)
    surfeat.add_command(cmd_modules.evaluate.evaluate)
    surfeat.add_command(cmd_modules.analyze.analyze)
    surfeat.add_command(cmd_modules.report.report)


_add_subcommands()
