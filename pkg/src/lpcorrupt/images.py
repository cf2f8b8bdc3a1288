"""Image tensor value type: a flat float32 vector plus (C, H, W) shape metadata.

Image data lives in [0, 1]. Storage is 32-bit; all sampling and distance
arithmetic upcasts to 64-bit.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["ImageTensor"]


class ImageTensor:
    __slots__ = ("data", "shape")

    def __init__(self, data, shape, *, check_range: bool = False):
        arr = np.ascontiguousarray(np.asarray(data, dtype=np.float32).ravel())
        shp = tuple(int(s) for s in shape)
        if len(shp) != 3 or any(s < 1 for s in shp):
            raise ValueError(f"shape must be (channels, height, width), got {shape!r}")
        if arr.size != math.prod(shp):
            raise ValueError(f"data length {arr.size} does not match shape {shp}")
        if check_range and arr.size and (float(arr.min()) < 0.0 or float(arr.max()) > 1.0):
            raise ValueError("image values must lie in [0, 1]")
        self.data = arr
        self.shape = shp

    @classmethod
    def from_array(cls, array: np.ndarray, *, check_range: bool = True) -> "ImageTensor":
        arr = np.asarray(array)
        if arr.ndim != 3:
            raise ValueError(f"expected a (C, H, W) array, got ndim={arr.ndim}")
        return cls(arr, arr.shape, check_range=check_range)

    @property
    def size(self) -> int:
        return self.data.size

    def as_array(self) -> np.ndarray:
        return self.data.reshape(self.shape)

    def copy(self) -> "ImageTensor":
        return ImageTensor(self.data.copy(), self.shape)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ImageTensor):
            return NotImplemented
        return self.shape == other.shape and self.data.tobytes() == other.data.tobytes()

    def __hash__(self):
        return hash((self.shape, self.data.tobytes()))

    def __repr__(self) -> str:
        return f"ImageTensor(shape={self.shape})"
