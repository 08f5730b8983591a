"""
Command modules of the surfeat CLI
"""
from surfeat.cli.commands import analyze, evaluate, ingest, report, synth, train  # noqa
