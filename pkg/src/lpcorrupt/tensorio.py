"""Dataset storage: the raw float tensor archive and portable 8-bit image trees.

Archive format, one record per image, concatenated:

    magic b"LPT1" | uint32 LE rank | uint32 LE dims[rank] | float32 LE data

A text index file maps image_id to byte offset and record length
(``<id>\\t<offset>\\t<length>`` per line, archive order). 8-bit export
quantizes with round-half-to-even and is provided for interoperability with
classifier tooling; it can shrink but never grow a p-norm distance beyond the
documented per-component quantum of 1/510.
"""

from __future__ import annotations

import os
import re
import struct
import tempfile
from pathlib import Path
from typing import Iterable

import numpy as np

from .images import ImageTensor

__all__ = [
    "ARCHIVE_NAME",
    "INDEX_NAME",
    "MAGIC",
    "encode_record",
    "decode_record",
    "write_archive_dir",
    "read_archive_dir",
    "write_image_dir",
    "read_image_dir",
    "quantize_u8",
    "dequantize_u8",
    "write_bytes_atomic",
    "write_text_atomic",
    "validate_image_id",
]

MAGIC = b"LPT1"
ARCHIVE_NAME = "images.lpt"
INDEX_NAME = "images.idx"

_ID_PATTERN = re.compile(r"^[A-Za-z0-9._-]+$")


def validate_image_id(image_id: str) -> str:
    if not _ID_PATTERN.match(image_id):
        raise ValueError(f"image id {image_id!r} must match [A-Za-z0-9._-]+")
    return image_id


def encode_record(tensor: ImageTensor) -> bytes:
    shape = tensor.shape
    head = struct.pack("<4sI", MAGIC, len(shape)) + struct.pack(f"<{len(shape)}I", *shape)
    return head + tensor.data.astype("<f4").tobytes()


def decode_record(buf: bytes, offset: int = 0) -> tuple[ImageTensor, int]:
    magic, rank = struct.unpack_from("<4sI", buf, offset)
    if magic != MAGIC:
        raise ValueError(f"bad record magic {magic!r} at offset {offset}")
    pos = offset + 8
    dims = struct.unpack_from(f"<{rank}I", buf, pos)
    pos += 4 * rank
    count = int(np.prod(dims)) if rank else 0
    data = np.frombuffer(buf, dtype="<f4", count=count, offset=pos)
    pos += 4 * count
    if rank != 3:
        raise ValueError(f"expected rank-3 image records, got rank {rank}")
    return ImageTensor(data, dims), pos


def write_bytes_atomic(path: Path, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_text_atomic(path: Path, text: str) -> None:
    write_bytes_atomic(path, text.encode())


def write_archive_dir(path: Path, items: Iterable[tuple[str, ImageTensor]]) -> None:
    """Write images.lpt plus images.idx under ``path`` (both atomically)."""
    path = Path(path)
    blob = bytearray()
    index_lines = []
    for image_id, tensor in items:
        validate_image_id(image_id)
        record = encode_record(tensor)
        index_lines.append(f"{image_id}\t{len(blob)}\t{len(record)}")
        blob.extend(record)
    write_bytes_atomic(path / ARCHIVE_NAME, bytes(blob))
    write_text_atomic(path / INDEX_NAME, "\n".join(index_lines) + ("\n" if index_lines else ""))


def read_archive_dir(path: Path) -> list[tuple[str, ImageTensor]]:
    path = Path(path)
    buf = (path / ARCHIVE_NAME).read_bytes()
    items: list[tuple[str, ImageTensor]] = []
    for lineno, line in enumerate((path / INDEX_NAME).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"{INDEX_NAME} line {lineno}: expected id<TAB>offset<TAB>length")
        image_id, offset, _length = parts
        tensor, _ = decode_record(buf, int(offset))
        items.append((image_id, tensor))
    return items


def quantize_u8(tensor: ImageTensor) -> np.ndarray:
    """Round-half-to-even 8-bit quantization of a [0,1] image."""
    arr = tensor.as_array()
    if float(arr.min()) < 0.0 or float(arr.max()) > 1.0:
        raise ValueError("8-bit export requires values in [0, 1]; corrupt with clamping on")
    return np.rint(arr.astype(np.float64) * 255.0).astype(np.uint8)


def dequantize_u8(arr: np.ndarray) -> ImageTensor:
    return ImageTensor(arr.astype(np.float32) / np.float32(255.0), arr.shape)


def write_image_dir(path: Path, items: Iterable[tuple[str, ImageTensor]]) -> None:
    """Write one lossless 8-bit PNG per image: <id>.png."""
    from PIL import Image

    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for image_id, tensor in items:
        validate_image_id(image_id)
        u8 = quantize_u8(tensor)
        channels = u8.shape[0]
        if channels == 1:
            img = Image.fromarray(u8[0], mode="L")
        elif channels == 3:
            img = Image.fromarray(np.moveaxis(u8, 0, 2), mode="RGB")
        else:
            raise ValueError(f"8-bit export supports 1 or 3 channels, got {channels}")
        target = path / f"{image_id}.png"
        fd, tmp = tempfile.mkstemp(dir=path, prefix=f".{image_id}.", suffix=".png")
        os.close(fd)
        try:
            img.save(tmp, format="PNG")
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def read_image_dir(path: Path) -> list[tuple[str, ImageTensor]]:
    from PIL import Image

    path = Path(path)
    items: list[tuple[str, ImageTensor]] = []
    for file in sorted(path.glob("*.png")):
        with Image.open(file) as img:
            arr = np.asarray(img)
        if arr.ndim == 2:
            arr = arr[None, :, :]
        elif arr.ndim == 3:
            arr = np.moveaxis(arr, 2, 0)
        else:
            raise ValueError(f"{file.name}: unsupported image layout {arr.shape}")
        if arr.dtype != np.uint8:
            raise ValueError(f"{file.name}: expected 8-bit image data, got {arr.dtype}")
        items.append((file.stem, dequantize_u8(arr)))
    if not items:
        raise ValueError(f"no .png images found under {path}")
    return items
