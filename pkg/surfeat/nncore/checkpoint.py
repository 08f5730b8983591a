"""
Model checkpoints: named parameter tensors plus optimizer state, stored in
the SFCK record container.

Layout (little-endian): magic ``SFCK0001``, u32 record count, then per
record u16 name length, UTF-8 name, u8 rank, rank x u32 dims and the
32-bit float payload. Optimizer moments use the reserved ``__optim__.m.``
and ``__optim__.v.`` prefixes, the scalar optimizer state is one
``__optim__.state`` record and free-form metadata uses ``__meta__.``.
"""
import hashlib
import os
from collections.abc import Iterable
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy
from numpy.typing import ArrayLike, NDArray

from surfeat.exceptions import ContainerFormatError, InvalidArgumentError
from surfeat.io.binary import F32, U8, U16, U32, ByteReader, pack
from surfeat.nncore.optim import SCHEDULE_MODES, OptimizerState

CHECKPOINT_MAGIC = b"SFCK0001"
OPTIM_M_PREFIX = "__optim__.m."
OPTIM_V_PREFIX = "__optim__.v."
OPTIM_STATE = "__optim__.state"
META_PREFIX = "__meta__."
SCHEDULE_RECORD = META_PREFIX + "schedule_mode"

PathLike = Union[str, os.PathLike]


@dataclass
class ModelCheckpoint:
    """
    Parameters
    ----------
    parameters: dict[str, numpy.ndarray]
        Parameter values keyed by dotted name, in model order.
    optimizer: :obj:`surfeat.nncore.optim.OptimizerState`, optional
    metadata: dict[str, numpy.ndarray]
        Extra float records (without the ``__meta__.`` prefix).
    """

    parameters: dict[str, NDArray]
    optimizer: Optional[OptimizerState] = None
    metadata: dict[str, NDArray] = field(default_factory=dict)

    @classmethod
    def from_model(
        cls,
        model,
        optimizer: Optional[OptimizerState] = None,
        metadata: Optional[dict[str, ArrayLike]] = None,
    ) -> "ModelCheckpoint":
        """Snapshot a :class:`surfeat.nncore.layers.Module`."""
        return cls(
            parameters=model.state_dict(),
            optimizer=optimizer,
            metadata={
                key: numpy.atleast_1d(numpy.asarray(value, dtype=numpy.float64))
                for key, value in (metadata or {}).items()
            },
        )

    def records(self) -> list[tuple[str, NDArray]]:
        """Flattened (name, array) records in file order."""
        for name in self.parameters:
            if name.startswith(("__optim__.", META_PREFIX)):
                raise InvalidArgumentError(f"Parameter name {name!r} uses a reserved prefix.")
        records = [(name, numpy.asarray(value)) for name, value in self.parameters.items()]
        if self.optimizer is not None:
            state = self.optimizer
            for name in self.parameters:
                if name in state.m:
                    records.append((OPTIM_M_PREFIX + name, state.m[name]))
                    records.append((OPTIM_V_PREFIX + name, state.v[name]))
            records.append(
                (
                    OPTIM_STATE,
                    numpy.array(
                        [state.step, state.total_steps, state.base_lr, state.wd_max, state.wd_min]
                    ),
                )
            )
            records.append(
                (SCHEDULE_RECORD, numpy.array([SCHEDULE_MODES.index(state.schedule_mode)]))
            )
        for key, value in self.metadata.items():
            records.append((META_PREFIX + key, numpy.asarray(value)))
        return records


def _encode_records(records: Iterable[tuple[str, NDArray]]) -> bytes:
    records = list(records)
    parts = [CHECKPOINT_MAGIC, pack([len(records)], U32)]
    for name, values in records:
        encoded = name.encode("utf-8")
        if len(encoded) > numpy.iinfo(numpy.uint16).max:
            raise InvalidArgumentError(f"Record name too long: {name[:32]}...")
        values = numpy.asarray(values)
        if values.ndim > numpy.iinfo(numpy.uint8).max:
            raise InvalidArgumentError(f"Record {name} has too many dimensions.")
        parts.extend(
            [
                pack([len(encoded)], U16),
                encoded,
                pack([values.ndim], U8),
                pack(values.shape, U32),
                pack(values, F32),
            ]
        )
    return b"".join(parts)


def encode_checkpoint(checkpoint: ModelCheckpoint) -> bytes:
    """Serialize a :obj:`ModelCheckpoint` into SFCK bytes."""
    return _encode_records(checkpoint.records())


def decode_checkpoint(data: bytes) -> ModelCheckpoint:
    """Parse SFCK bytes into a :obj:`ModelCheckpoint`."""
    reader = ByteReader(data, kind="SFCK")
    reader.magic(CHECKPOINT_MAGIC)
    records = {}
    for _ in range(reader.scalar(U32)):
        try:
            name = reader.raw(reader.scalar(U16)).decode("utf-8")
        except UnicodeDecodeError as error:
            raise ContainerFormatError("SFCK record name is not valid UTF-8.") from error
        if name in records:
            raise ContainerFormatError(f"Duplicate SFCK record {name!r}.")
        rank = reader.scalar(U8)
        shape = tuple(int(dim) for dim in reader.array(U32, rank))
        size = int(numpy.prod(shape)) if shape else 1
        records[name] = reader.array(F32, size).reshape(shape)
    reader.finish()

    parameters = {}
    metadata = {}
    moments: dict[str, dict[str, NDArray]] = {"m": {}, "v": {}}
    state_record = None
    schedule_mode = SCHEDULE_MODES[0]
    for name, values in records.items():
        if name.startswith(OPTIM_M_PREFIX):
            moments["m"][name[len(OPTIM_M_PREFIX) :]] = values
        elif name.startswith(OPTIM_V_PREFIX):
            moments["v"][name[len(OPTIM_V_PREFIX) :]] = values
        elif name == OPTIM_STATE:
            state_record = values
        elif name == SCHEDULE_RECORD:
            index = int(values.reshape(-1)[0])
            if not 0 <= index < len(SCHEDULE_MODES):
                raise ContainerFormatError(f"Unknown schedule mode index {index}.")
            schedule_mode = SCHEDULE_MODES[index]
        elif name.startswith(META_PREFIX):
            metadata[name[len(META_PREFIX) :]] = values
        else:
            parameters[name] = values

    optimizer = None
    if state_record is not None:
        if state_record.shape != (5,):
            raise ContainerFormatError("Malformed optimizer state record.")
        if set(moments["m"]) != set(moments["v"]):
            raise ContainerFormatError("Optimizer moment records are unpaired.")
        step, total_steps, base_lr, wd_max, wd_min = state_record.tolist()
        optimizer = OptimizerState(
            m=moments["m"],
            v=moments["v"],
            step=int(step),
            total_steps=int(total_steps),
            base_lr=base_lr,
            wd_max=wd_max,
            wd_min=wd_min,
            schedule_mode=schedule_mode,
        )
    return ModelCheckpoint(parameters=parameters, optimizer=optimizer, metadata=metadata)


def write_checkpoint(path: PathLike, checkpoint: ModelCheckpoint) -> str:
    """Write a checkpoint and return its SHA-256 digest."""
    payload = encode_checkpoint(checkpoint)
    with open(path, "wb") as outfile:
        outfile.write(payload)
    return hashlib.sha256(payload).hexdigest()


def read_checkpoint(path: PathLike) -> ModelCheckpoint:
    """Read a checkpoint written by :func:`write_checkpoint`."""
    with open(path, "rb") as infile:
        return decode_checkpoint(infile.read())


def checkpoint_digest(source: Union[bytes, PathLike, ModelCheckpoint]) -> str:
    """SHA-256 hex digest of the checkpoint bytes."""
    if isinstance(source, ModelCheckpoint):
        source = encode_checkpoint(source)
    elif not isinstance(source, (bytes, bytearray)):
        with open(source, "rb") as infile:
            source = infile.read()
    return hashlib.sha256(source).hexdigest()
