"""Raster types, binary PPM/PGM I/O and pixel-grid helpers.

Images are immutable: the pixel array is copied on construction and marked
read-only, so an image can be shared freely between workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BBox",
    "BoundsError",
    "GrayImage",
    "PPMError",
    "RasterImage",
    "crop",
    "read_pgm",
    "read_ppm",
    "resize_nearest",
    "write_pgm",
    "write_ppm",
]


class PPMError(ValueError):
    """Malformed or unsupported Netpbm data. ``offset`` is the failing byte."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class BoundsError(ValueError):
    pass


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.uint8, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RasterImage:
    """8-bit RGB image; ``pixels`` has shape (height, width, 3), row-major."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"RGB pixels must have shape (h, w, 3), got {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image dimensions must be positive")
        if px.dtype != np.uint8:
            if np.any(px < 0) or np.any(px > 255):
                raise ValueError("channel values must lie in [0, 255]")
        object.__setattr__(self, "pixels", _frozen(px))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, RasterImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit single-channel image; ``pixels`` has shape (height, width)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError(f"gray pixels must have shape (h, w), got {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image dimensions must be positive")
        if px.dtype != np.uint8:
            if np.any(px < 0) or np.any(px > 255):
                raise ValueError("pixel values must lie in [0, 255]")
        object.__setattr__(self, "pixels", _frozen(px))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))


@dataclass(frozen=True)
class BBox:
    """Pixel box covering columns [x1, x2) and rows [y1, y2)."""

    x1: int
    y1: int
    x2: int
    y2: int

    def __post_init__(self):
        if min(self.x1, self.y1) < 0:
            raise ValueError(f"negative box coordinate in {self}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"degenerate box {self}")

    @property
    def width(self) -> int:
        return self.x2 - self.x1

    @property
    def height(self) -> int:
        return self.y2 - self.y1

    @property
    def area(self) -> int:
        return self.width * self.height

    def as_list(self) -> list[int]:
        return [self.x1, self.y1, self.x2, self.y2]


# -- Netpbm -----------------------------------------------------------------

_WHITESPACE = b" \t\n\r\v\f"


def _parse_header(data: bytes, magic: bytes):
    """Return (width, height, raster_offset) for a P5/P6 header."""
    if len(data) < 2:
        raise PPMError("truncated header", len(data))
    if data[:2] != magic:
        raise PPMError(f"unsupported magic {data[:2]!r}, expected {magic!r}", 0)
    pos = 2
    fields = []
    while len(fields) < 3:
        # whitespace and comments between fields
        start = pos
        while pos < len(data):
            c = data[pos : pos + 1]
            if c in _WHITESPACE and c:
                pos += 1
            elif c == b"#":
                nl = data.find(b"\n", pos)
                pos = len(data) if nl < 0 else nl + 1
            else:
                break
        if pos == start:
            raise PPMError("expected whitespace in header", pos)
        if pos >= len(data):
            raise PPMError("truncated header", pos)
        tok_start = pos
        while pos < len(data) and data[pos : pos + 1] not in _WHITESPACE and data[pos : pos + 1] != b"#":
            pos += 1
        token = data[tok_start:pos]
        if not token.isdigit():
            raise PPMError(f"expected decimal integer, found {token[:16]!r}", tok_start)
        fields.append((int(token), tok_start))
    (width, w_off), (height, h_off), (maxval, m_off) = fields
    if width < 1:
        raise PPMError("width must be positive", w_off)
    if height < 1:
        raise PPMError("height must be positive", h_off)
    if maxval != 255:
        raise PPMError(f"unsupported maxval {maxval}, only 255 is accepted", m_off)
    if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE:
        raise PPMError("missing single whitespace before raster", pos)
    return width, height, pos + 1


def _read_netpbm(data: bytes, magic: bytes, channels: int) -> np.ndarray:
    data = bytes(data)
    width, height, off = _parse_header(data, magic)
    need = width * height * channels
    have = len(data) - off
    if have < need:
        raise PPMError(f"truncated pixel data: need {need} bytes, have {have}", len(data))
    raster = np.frombuffer(data, dtype=np.uint8, count=need, offset=off)
    shape = (height, width, channels) if channels == 3 else (height, width)
    return raster.reshape(shape)


def read_ppm(data: bytes) -> RasterImage:
    """Decode a binary PPM (P6, maxval 255)."""
    return RasterImage(_read_netpbm(data, b"P6", 3))


def write_ppm(img: RasterImage) -> bytes:
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


def read_pgm(data: bytes) -> GrayImage:
    """Decode a binary PGM (P5, maxval 255)."""
    return GrayImage(_read_netpbm(data, b"P5", 1))


def write_pgm(img: GrayImage) -> bytes:
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


# -- pixel grid helpers ------------------------------------------------------


def crop(img, box: BBox):
    """Sub-image of ``img`` covered by ``box``. Works for RGB and gray images."""
    if box.x2 > img.width or box.y2 > img.height:
        raise BoundsError(f"box {box.as_list()} exceeds image {img.width}x{img.height}")
    return type(img)(img.pixels[box.y1 : box.y2, box.x1 : box.x2])


def resize_nearest(pixels: np.ndarray, width: int, height: int) -> np.ndarray:
    """Nearest-neighbour resample of an (h, w[, c]) array to (height, width[, c])."""
    if width < 1 or height < 1:
        raise ValueError("target size must be positive")
    h, w = pixels.shape[:2]
    rows = np.minimum((np.arange(height) * h) // height, h - 1)
    cols = np.minimum((np.arange(width) * w) // width, w - 1)
    return pixels[rows][:, cols]
