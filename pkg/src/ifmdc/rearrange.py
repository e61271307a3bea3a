"""Tiling and quilting of a feature map into one 8-bit grayscale image.

These produce the frames for the HEVC-on-rearranged-features baselines; the
video encoder itself is external. Values go through the key quantizer with
``k = 256`` after clipping.

Layouts for a ``rows x cols`` grid over a (C, H, W) map:

* tile:  channel ``c`` fills the H x W block at block-row ``c // cols``,
  block-column ``c % cols``.
* quilt: image pixel ``(i, j)`` holds channel ``(i % rows) * cols + (j % cols)``
  at spatial position ``(i // rows, j // cols)``, so horizontally and
  vertically adjacent pixels come from different channels.

Grid cells beyond channel C-1 are zero.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import codec_math as cm
from .codec_math import QuantSpec
from .errors import FormatError
from .tensor import FeatureMap, Shape


@dataclass(frozen=True, eq=False)
class GrayImage:
    pixels: np.ndarray  # (height, width) uint8

    def __post_init__(self):
        px = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        if px.ndim != 2:
            raise ValueError("gray image must be 2-D")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class GridSpec:
    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid dimensions must be positive")

    @classmethod
    def square(cls, channels: int) -> "GridSpec":
        side = math.isqrt(channels - 1) + 1 if channels > 1 else 1
        return cls(side, side)

    @property
    def cells(self) -> int:
        return self.rows * self.cols


def _check_spec(spec: QuantSpec) -> None:
    if spec.k != 256:
        raise ValueError("rearrangement uses 8-bit pixels; spec.k must be 256")


def _cells(fmap: FeatureMap, grid: GridSpec | None, spec: QuantSpec) -> tuple[np.ndarray, GridSpec]:
    """Quantized channels padded to the grid: shape (rows, cols, H, W)."""
    _check_spec(spec)
    c, h, w = fmap.shape
    grid = grid or GridSpec.square(c)
    if grid.cells < c:
        raise ValueError(f"grid {grid.rows}x{grid.cols} cannot hold {c} channels")
    symbols = cm.quantize_key_array(cm.clip_array(fmap.data, spec.clip), spec)
    padded = np.zeros((grid.cells, h, w), dtype=np.uint8)
    padded[:c] = symbols.reshape(c, h, w)
    return padded.reshape(grid.rows, grid.cols, h, w), grid


def _uncells(cells: np.ndarray, shape: Shape, spec: QuantSpec) -> FeatureMap:
    c, h, w = shape
    symbols = cells.reshape(-1, h, w)[:c]
    return FeatureMap(cm.dequantize_key_array(symbols, spec).astype(np.float32))


def _check_image(img: GrayImage, grid: GridSpec, shape: Shape) -> None:
    c, h, w = shape
    if grid.cells < c:
        raise ValueError(f"grid {grid.rows}x{grid.cols} cannot hold {c} channels")
    if img.pixels.shape != (grid.rows * h, grid.cols * w):
        raise ValueError(
            f"image is {img.height}x{img.width}, expected {grid.rows * h}x{grid.cols * w}"
        )


def tile(fmap: FeatureMap, grid: GridSpec | None = None, spec: QuantSpec | None = None) -> GrayImage:
    spec = spec or QuantSpec(k=256)
    cells, grid = _cells(fmap, grid, spec)
    rows, cols, h, w = cells.shape
    return GrayImage(cells.transpose(0, 2, 1, 3).reshape(rows * h, cols * w))


def untile(img: GrayImage, grid: GridSpec, shape: Shape, spec: QuantSpec | None = None) -> FeatureMap:
    spec = spec or QuantSpec(k=256)
    _check_spec(spec)
    _check_image(img, grid, shape)
    _, h, w = shape
    cells = img.pixels.reshape(grid.rows, h, grid.cols, w).transpose(0, 2, 1, 3)
    return _uncells(cells, shape, spec)


def quilt(fmap: FeatureMap, grid: GridSpec | None = None, spec: QuantSpec | None = None) -> GrayImage:
    spec = spec or QuantSpec(k=256)
    cells, grid = _cells(fmap, grid, spec)
    rows, cols, h, w = cells.shape
    return GrayImage(cells.transpose(2, 0, 3, 1).reshape(h * rows, w * cols))


def unquilt(img: GrayImage, grid: GridSpec, shape: Shape, spec: QuantSpec | None = None) -> FeatureMap:
    spec = spec or QuantSpec(k=256)
    _check_spec(spec)
    _check_image(img, grid, shape)
    _, h, w = shape
    cells = img.pixels.reshape(h, grid.rows, w, grid.cols).transpose(1, 3, 0, 2)
    return _uncells(cells, shape, spec)


def pgm_header(width: int, height: int) -> bytes:
    return f"P5\n{width} {height}\n255\n".encode("ascii")


def export_pgm(img: GrayImage, path) -> int:
    """Write a binary (P5) PGM with maxval 255; returns the file size."""
    data = pgm_header(img.width, img.height) + img.pixels.tobytes()
    with open(path, "wb") as fh:
        fh.write(data)
    return len(data)


_PGM_HEADER = re.compile(rb"P5\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s")


def read_pgm(path) -> GrayImage:
    data = Path(path).read_bytes()
    match = _PGM_HEADER.match(data)
    if not match:
        raise FormatError("not a binary PGM (P5) file")
    width, height, maxval = (int(g) for g in match.groups())
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval}")
    body = data[match.end():]
    if len(body) != width * height:
        raise FormatError(f"expected {width * height} pixel bytes, found {len(body)}")
    return GrayImage(np.frombuffer(body, dtype=np.uint8).reshape(height, width))


def frame_filename(n: int, prefix: str = "frame") -> str:
    return f"{prefix}_{n:05d}.pgm"
