"""Dense rank-4 tensors in batch/channel/height/width layout.

Values are always held as float64; the precision tag records which
floating point format a tensor is meant to emulate.  Rounding to that
format happens in :mod:`logavgexp.precision`, never here.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np


class PrecisionTag(str, enum.Enum):
    HALF = "half"
    SINGLE = "single"
    DOUBLE = "double"


class Shape(NamedTuple):
    batch: int
    channels: int
    height: int
    width: int

    @property
    def volume(self) -> int:
        return self.batch * self.channels * self.height * self.width

    @property
    def window(self) -> int:
        """Number of elements pooled per channel (height * width)."""
        return self.height * self.width


def _check_shape(shape: Shape) -> Shape:
    shape = Shape(*(int(d) for d in shape))
    if any(d < 1 for d in shape):
        raise ValueError(f"all tensor dimensions must be >= 1, got {tuple(shape)}")
    return shape


@dataclass(frozen=True)
class Tensor:
    shape: Shape
    data: np.ndarray
    precision: PrecisionTag = PrecisionTag.DOUBLE

    def __post_init__(self):
        shape = _check_shape(self.shape)
        data = np.asarray(self.data, dtype=np.float64)
        if data.size != shape.volume:
            raise ValueError(
                f"expected {shape.volume} values for shape {tuple(shape)}, got {data.size}"
            )
        # private read-only copy, so callers cannot mutate through an alias
        data = data.reshape(shape).copy()
        data.flags.writeable = False
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "precision", PrecisionTag(self.precision))

    @classmethod
    def from_array(cls, array, precision=PrecisionTag.DOUBLE) -> "Tensor":
        array = np.asarray(array, dtype=np.float64)
        if array.ndim != 4:
            raise ValueError(f"expected a rank-4 array, got rank {array.ndim}")
        return cls(Shape(*array.shape), array, precision)

    def numpy(self) -> np.ndarray:
        """The (read-only) underlying (B, C, H, W) array."""
        return self.data

    def flat(self) -> np.ndarray:
        return self.data.reshape(-1)

    def __len__(self):
        return self.shape.volume

    def __repr__(self):
        return f"Tensor(shape={tuple(self.shape)}, precision={self.precision.value})"


def tensor_from(shape, values: Iterable[float], precision=PrecisionTag.DOUBLE) -> Tensor:
    """Build a tensor from values listed in row-major B->C->H->W order."""
    values = np.asarray(list(values) if not isinstance(values, np.ndarray) else values,
                        dtype=np.float64).reshape(-1)
    return Tensor(Shape(*shape), values, precision)


def spatial_slice(t: Tensor, b: int, c: int) -> np.ndarray:
    """Return the H*W values of channel ``c`` of sample ``b`` in row-major order."""
    if not 0 <= b < t.shape.batch:
        raise IndexError(f"batch index {b} out of range for batch size {t.shape.batch}")
    if not 0 <= c < t.shape.channels:
        raise IndexError(f"channel index {c} out of range for {t.shape.channels} channels")
    return t.data[b, c].reshape(-1).copy()
