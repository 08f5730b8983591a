"""
This contains exceptions for surfeat.
"""
from typing import Optional


class SurfeatError(RuntimeError):
    """Base surfeat exception class."""


class InvalidArgumentError(SurfeatError, ValueError):
    """This is for arguments that violate an operation's preconditions."""


class InvalidDataError(SurfeatError):
    """This is for errors in the data passed into surfeat."""


class ContainerFormatError(InvalidDataError):
    """This is for malformed or truncated binary container files."""


class RunAbortedError(SurfeatError):
    """A training or rollout run was aborted (e.g. non-finite values)."""

    def __init__(self, message: str, *, step: Optional[int] = None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step
