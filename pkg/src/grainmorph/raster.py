"""Grey-level images: loading, saving and histograms.

Pixel ``(i, j)`` (column ``i``, row ``j``) covers the unit square
``[i, i+1) x [j, j+1)`` with its centre at ``(i + 0.5, j + 0.5)``; ``y`` grows
downwards.  All geometry in the package uses this frame.
"""
from __future__ import annotations

import io
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class RasterError(ValueError):
    """Raised for unreadable, unsupported or empty images."""


@dataclass(frozen=True, eq=False)
class GreyImage:
    """Immutable 8-bit grey image stored as a ``(height, width)`` uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise RasterError(f"image must be a non-empty 2-D grid, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise RasterError("grey levels must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        arr = np.array(arr, dtype=np.uint8, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __getitem__(self, ij):
        i, j = ij
        return int(self.pixels[j, i])

    def __eq__(self, other):
        if not isinstance(other, GreyImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Histogram:
    bins: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, Histogram):
            return NotImplemented
        return np.array_equal(self.bins, other.bins)

    __hash__ = None

    def to_csv(self) -> str:
        lines = ["grey,count"]
        lines += [f"{g},{int(c)}" for g, c in enumerate(self.bins)]
        return "\n".join(lines) + "\n"


def grey_histogram(img: GreyImage) -> Histogram:
    return Histogram(np.bincount(img.pixels.ravel(), minlength=256).astype(np.int64))


def _rescale(arr: np.ndarray, maxval: int) -> np.ndarray:
    if maxval == 255:
        return arr.astype(np.uint8)
    scaled = np.rint(arr.astype(np.float64) * (255.0 / maxval))
    return np.clip(scaled, 0, 255).astype(np.uint8)


_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _parse_pgm(data: bytes) -> np.ndarray:
    magic = data[:2]
    pos = 2
    header = []
    while len(header) < 3:
        m = _TOKEN.match(data, pos)
        if m is None:
            raise RasterError("truncated PGM header")
        header.append(int(m.group(1)))
        pos = m.end()
    width, height, maxval = header
    if width < 1 or height < 1:
        raise RasterError("zero-dimension image")
    if not 0 < maxval < 65536:
        raise RasterError(f"invalid PGM maxval {maxval}")
    if magic == b"P5":
        pos += 1  # single whitespace byte after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        nbytes = width * height * dtype.itemsize
        raw = data[pos:pos + nbytes]
        if len(raw) < nbytes:
            raise RasterError("truncated PGM raster")
        arr = np.frombuffer(raw, dtype=dtype).reshape(height, width)
    else:
        tokens = re.sub(rb"#[^\n]*", b"", data[pos:]).split()
        if len(tokens) < width * height:
            raise RasterError("truncated PGM raster")
        arr = np.array([int(t) for t in tokens[:width * height]],
                       dtype=np.int64).reshape(height, width)
    if arr.max(initial=0) > maxval:
        raise RasterError("sample exceeds maxval")
    return _rescale(arr, maxval)


def _decode_with_pillow(data: bytes) -> np.ndarray:
    from PIL import Image, UnidentifiedImageError

    try:
        im = Image.open(io.BytesIO(data))
        im.load()
    except (UnidentifiedImageError, OSError) as exc:
        raise RasterError(f"unsupported image format: {exc}") from exc
    if im.mode in ("I;16", "I;16B", "I;16L", "I"):
        arr = np.asarray(im, dtype=np.int64)
        maxval = 65535 if im.mode.startswith("I;16") else max(int(arr.max()), 1)
        return _rescale(arr, maxval)
    if im.mode == "L":
        return np.asarray(im, dtype=np.uint8)
    if im.mode in ("1", "P"):
        im = im.convert("RGB") if im.mode == "P" else im.convert("L")
    arr = np.asarray(im, dtype=np.float64)
    if arr.ndim == 3:
        channels = arr[..., :3] if arr.shape[2] >= 3 else arr[..., :1]
        arr = channels.mean(axis=2)  # unweighted average of colour channels
    return np.clip(np.rint(arr), 0, 255).astype(np.uint8)


def decode_image(data: bytes) -> GreyImage:
    if data[:2] in (b"P2", b"P5"):
        return GreyImage(_parse_pgm(data))
    arr = _decode_with_pillow(data)
    if arr.size == 0:
        raise RasterError("zero-dimension image")
    return GreyImage(arr)


def load_greyscale(path) -> GreyImage:
    """Read a PGM (P2/P5) or any Pillow-readable raster as a ``GreyImage``.

    Samples deeper than 8 bits are rescaled linearly to ``[0, 255]`` and colour
    images are reduced by an unweighted channel average.
    """
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise RasterError(f"cannot read {path}: {exc}") from exc
    if not data:
        raise RasterError(f"{path} is empty")
    return decode_image(data)


def encode_pgm(img: GreyImage, binary: bool = True) -> bytes:
    h, w = img.pixels.shape
    if binary:
        return f"P5\n{w} {h}\n255\n".encode("ascii") + img.pixels.tobytes()
    rows = [" ".join(str(v) for v in row) for row in img.pixels.tolist()]
    return (f"P2\n{w} {h}\n255\n" + "\n".join(rows) + "\n").encode("ascii")


def save_pgm(img: GreyImage, path, binary: bool = True) -> None:
    Path(path).write_bytes(encode_pgm(img, binary=binary))
