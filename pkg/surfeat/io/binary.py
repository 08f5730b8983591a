"""
Little-endian primitives shared by the binary container formats.
"""
from typing import Union

import numpy
from numpy.typing import ArrayLike, NDArray

from surfeat.exceptions import ContainerFormatError

U8 = numpy.dtype("u1")
U16 = numpy.dtype("<u2")
U32 = numpy.dtype("<u4")
F32 = numpy.dtype("<f4")


def pack(values: ArrayLike, dtype: numpy.dtype) -> bytes:
    """Serialize values in the given little-endian dtype."""
    return numpy.ascontiguousarray(values, dtype=dtype).tobytes()


class ByteReader:
    """Sequential reader over a bytes buffer with truncation checks."""

    def __init__(self, data: Union[bytes, bytearray, memoryview], *, kind: str):
        self._data = bytes(data)
        self._offset = 0
        self._kind = kind

    def magic(self, expected: bytes) -> None:
        """Consume and check the file magic."""
        found = self.raw(len(expected))
        if found != expected:
            raise ContainerFormatError(
                f"Not a {self._kind} file: magic {found!r}, expected {expected!r}."
            )

    def raw(self, size: int) -> bytes:
        """Consume ``size`` raw bytes."""
        end = self._offset + size
        if end > len(self._data):
            raise ContainerFormatError(
                f"Truncated {self._kind} file: needed {size} bytes at "
                f"offset {self._offset}, {len(self._data) - self._offset} left."
            )
        chunk = self._data[self._offset : end]
        self._offset = end
        return chunk

    def array(self, dtype: numpy.dtype, count: int) -> NDArray:
        """Consume ``count`` values of ``dtype``."""
        return numpy.frombuffer(self.raw(count * dtype.itemsize), dtype=dtype).copy()

    def scalar(self, dtype: numpy.dtype) -> int:
        """Consume one unsigned integer."""
        return int(self.array(dtype, 1)[0])

    def finish(self) -> None:
        """Ensure the whole buffer was consumed."""
        if self._offset != len(self._data):
            raise ContainerFormatError(
                f"Trailing {len(self._data) - self._offset} bytes in {self._kind} file."
            )
