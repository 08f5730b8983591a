"""Top-level package for surfeat."""

__author__ = """surfeat Contributors"""

import importlib.metadata

from surfeat._show_versions import show_versions  # noqa

__version__ = importlib.metadata.version(__package__)
