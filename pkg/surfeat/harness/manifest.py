"""
Run manifests: what was run, on which split, and what it produced.
"""
import json
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Union

from surfeat.config import config_digest, parse_config
from surfeat.exceptions import InvalidDataError

PathLike = Union[str, os.PathLike]
MANIFEST_VERSION = 1


def utc_timestamp() -> str:
    """Current UTC time in ISO 8601."""
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    """
    Parameters
    ----------
    run_id: str
    seed: int
    config_text: str
        Normalized configuration (see :func:`surfeat.config.dump_config`).
    config_digest: str
        SHA-256 of ``config_text``.
    split: dict
        Protocol, fold or seed, and the train/test object indices.
    epochs: int
        Epoch (or optimizer step) budget.
    schedule_mode: str
        Whether the cosine schedule drives weight decay or learning rate.
    metrics: dict, optional
        Final metrics; set by :meth:`complete` only.
    checkpoint_digest: str, optional
    status: str
        "running", "completed" or "aborted".
    timings: dict
        Wall-clock seconds per phase. Not part of any digest.
    started: str
    finished: str, optional
    """

    run_id: str
    seed: int
    config_text: str
    config_digest: str
    split: dict
    epochs: int
    schedule_mode: str
    metrics: Optional[dict] = None
    checkpoint_digest: Optional[str] = None
    status: str = "running"
    timings: dict = field(default_factory=dict)
    started: str = field(default_factory=utc_timestamp)
    finished: Optional[str] = None

    def complete(self, metrics: dict, checkpoint_digest: Optional[str] = None) -> "RunManifest":
        """Record final metrics."""
        self.metrics = {name: float(value) for name, value in metrics.items()}
        self.checkpoint_digest = checkpoint_digest
        self.status = "completed"
        self.finished = utc_timestamp()
        return self

    def abort(self, reason: str) -> "RunManifest":
        """Mark the run aborted; no metrics are recorded."""
        self.metrics = None
        self.status = "aborted"
        self.split = {**self.split, "abort_reason": reason}
        self.finished = utc_timestamp()
        return self

    def verify(self) -> None:
        """Check the stored digest against the stored configuration."""
        if config_digest(self.config_text) != self.config_digest:
            raise InvalidDataError(f"Configuration digest mismatch in run {self.run_id}.")
        if (self.metrics is not None) != (self.status == "completed"):
            raise InvalidDataError(f"Run {self.run_id} has metrics without completing.")

    def config(self):
        """The stored :class:`surfeat.config.TrainingConfig`."""
        return parse_config(self.config_text)

    def to_json(self) -> str:
        return json.dumps(
            {"manifest_version": MANIFEST_VERSION, **asdict(self)}, indent=2, sort_keys=True
        )

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as error:
            raise InvalidDataError(f"Malformed run manifest: {error}") from None
        if payload.pop("manifest_version", None) != MANIFEST_VERSION:
            raise InvalidDataError("Unsupported run manifest version.")
        manifest = cls(**payload)
        manifest.verify()
        return manifest

    def write(self, path: PathLike) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def read(cls, path: PathLike) -> "RunManifest":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))
