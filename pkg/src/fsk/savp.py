"""Spoof-aware descriptor image: LBP, gray and HOG planes stacked as channels.

Every plane is 8-bit and has the input resolution, so the composite can be
fed to the same patch encoder as the RGB image.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .fileio import atomic_write_bytes
from .imagecore import GrayImage, RasterImage, read_pgm, write_pgm

__all__ = [
    "DescriptorImage",
    "HogConfig",
    "SizeError",
    "compose_savp",
    "hog_plane",
    "lbp_plane",
    "read_descriptor",
    "to_gray",
    "write_descriptor",
]

CHANNELS = ("lbp", "gray", "hog")

# keeps all-zero blocks at zero instead of dividing by zero
_L2HYS_EPS = 1e-6


class SizeError(ValueError):
    pass


@dataclass(frozen=True)
class HogConfig:
    cell_size: int = 8
    bins: int = 9
    block_size: int = 2
    block_stride: int = 1
    norm_clip: float = 0.2

    def __post_init__(self):
        if self.cell_size < 2:
            raise ValueError("cell_size must be >= 2")
        if self.bins < 2:
            raise ValueError("bins must be >= 2")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if self.block_stride < 1:
            raise ValueError("block_stride must be >= 1")
        if not self.norm_clip > 0:
            raise ValueError("norm_clip must be positive")


@dataclass(frozen=True, eq=False)
class DescriptorImage:
    lbp: np.ndarray
    gray: np.ndarray
    hog: np.ndarray

    def __post_init__(self):
        planes = []
        for name in CHANNELS:
            p = np.array(getattr(self, name), dtype=np.uint8, copy=True)
            if p.ndim != 2:
                raise ValueError(f"{name} plane must be 2-D")
            p.setflags(write=False)
            object.__setattr__(self, name, p)
            planes.append(p)
        if len({p.shape for p in planes}) != 1:
            raise ValueError("descriptor planes must share one shape")

    @property
    def width(self) -> int:
        return self.gray.shape[1]

    @property
    def height(self) -> int:
        return self.gray.shape[0]

    def as_array(self) -> np.ndarray:
        """(h, w, 3) uint8 array in channel order lbp, gray, hog."""
        return np.stack([self.lbp, self.gray, self.hog], axis=-1)

    def __eq__(self, other):
        if not isinstance(other, DescriptorImage):
            return NotImplemented
        return all(np.array_equal(getattr(self, n), getattr(other, n)) for n in CHANNELS)


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5)


def to_gray(img: RasterImage) -> GrayImage:
    # integer weights in thousandths: exact round-half-up, no float ties
    px = img.pixels.astype(np.int64)
    acc = 299 * px[..., 0] + 587 * px[..., 1] + 114 * px[..., 2]
    return GrayImage(np.clip((acc + 500) // 1000, 0, 255).astype(np.uint8))


def lbp_plane(gray: GrayImage) -> np.ndarray:
    """8-neighbour, radius-1 LBP codes; border pixels are 0."""
    if gray.width < 3 or gray.height < 3:
        raise SizeError(f"LBP needs at least 3x3 pixels, got {gray.width}x{gray.height}")
    return kernels.lbp_plane(gray.pixels)


def _block_starts(n_cells: int, block: int, stride: int) -> list[int]:
    starts = list(range(0, n_cells - block + 1, stride))
    if starts[-1] != n_cells - block:
        starts.append(n_cells - block)
    return starts


def _l2hys(v: np.ndarray, clip: float) -> np.ndarray:
    v = v / np.sqrt(np.sum(v * v) + _L2HYS_EPS**2)
    v = np.minimum(v, clip)
    return v / np.sqrt(np.sum(v * v) + _L2HYS_EPS**2)


def hog_cell_energy(gray: GrayImage, cfg: HogConfig) -> np.ndarray:
    """Per-cell sum of block-normalised bins, averaged over covering blocks."""
    if gray.width < cfg.cell_size or gray.height < cfg.cell_size:
        raise SizeError(
            f"HOG cell size {cfg.cell_size} exceeds image {gray.width}x{gray.height}"
        )
    hist = kernels.hog_cell_histograms(gray.pixels, cfg.cell_size, cfg.bins)
    ncy, ncx, _ = hist.shape
    by = min(cfg.block_size, ncy)
    bx = min(cfg.block_size, ncx)
    total = np.zeros((ncy, ncx))
    count = np.zeros((ncy, ncx))
    for y0 in _block_starts(ncy, by, cfg.block_stride):
        for x0 in _block_starts(ncx, bx, cfg.block_stride):
            block = hist[y0 : y0 + by, x0 : x0 + bx]
            normed = _l2hys(block.ravel(), cfg.norm_clip).reshape(block.shape)
            total[y0 : y0 + by, x0 : x0 + bx] += normed.sum(axis=-1)
            count[y0 : y0 + by, x0 : x0 + bx] += 1
    return total / count


def hog_plane(gray: GrayImage, cfg: HogConfig = HogConfig()) -> np.ndarray:
    """Render HOG cell energy as an 8-bit plane scaled to the global maximum.

    Pixels past the last whole cell take the value of the nearest cell.
    """
    energy = hog_cell_energy(gray, cfg)
    peak = energy.max()
    if peak <= 0.0:
        cells = np.zeros(energy.shape, dtype=np.uint8)
    else:
        cells = _round_half_up(255.0 * (energy / peak)).clip(0, 255).astype(np.uint8)
    cs = cfg.cell_size
    rows = np.minimum(np.arange(gray.height) // cs, energy.shape[0] - 1)
    cols = np.minimum(np.arange(gray.width) // cs, energy.shape[1] - 1)
    return cells[rows][:, cols]


def compose_savp(img: RasterImage, cfg: HogConfig = HogConfig()) -> DescriptorImage:
    gray = to_gray(img)
    return DescriptorImage(lbp=lbp_plane(gray), gray=gray.pixels, hog=hog_plane(gray, cfg))


def descriptor_paths(out_dir, stem: str) -> dict[str, Path]:
    out_dir = Path(out_dir)
    return {name: out_dir / f"{stem}.{name}.pgm" for name in CHANNELS}


def write_descriptor(desc: DescriptorImage, out_dir, stem: str) -> dict[str, Path]:
    """Write the three planes as ``<stem>.lbp.pgm``, ``.gray.pgm``, ``.hog.pgm``."""
    paths = descriptor_paths(out_dir, stem)
    for name, path in paths.items():
        atomic_write_bytes(path, write_pgm(GrayImage(getattr(desc, name))))
    return paths


def read_descriptor(out_dir, stem: str) -> DescriptorImage:
    paths = descriptor_paths(out_dir, stem)
    planes = {name: read_pgm(path.read_bytes()).pixels for name, path in paths.items()}
    return DescriptorImage(**planes)
