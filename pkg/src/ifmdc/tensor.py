"""Feature-map data model, the FMAP container file and a synthetic sequence generator.

FMAP layout (little-endian)::

    offset  size  field
    0       4     magic b"FMAP"
    4       1     version (1)
    5       1     dtype code (1 = float32)
    6       16    C, H, W, F as uint32
    22      ...   F*C*H*W float32 values, frame-major, then channel, row, column

Element ``p`` of a frame is at ``c*H*W + y*W + x``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import FormatError

FMAP_MAGIC = b"FMAP"
FMAP_VERSION = 1
DTYPE_F32 = 1
_FMAP_HEADER = struct.Struct("<4sBB4I")
FMAP_HEADER_SIZE = _FMAP_HEADER.size

Shape = tuple[int, int, int]


def _check_shape(shape: Sequence[int]) -> Shape:
    if len(shape) != 3:
        raise ValueError(f"shape must be (C, H, W), got {tuple(shape)}")
    c, h, w = (int(v) for v in shape)
    if c <= 0 or h <= 0 or w <= 0:
        raise ValueError(f"shape dimensions must be positive, got {(c, h, w)}")
    return c, h, w


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """One frame of a feature-map video: a C x H x W array plus its frame index.

    ``data`` is stored read-only. Ingested maps are float32; residual maps
    produced by :func:`ifmdc.codec_math.residual_map` carry float64 so the
    subtraction is exact.
    """

    data: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise ValueError(f"feature map must be 3-D (C, H, W), got ndim={data.ndim}")
        _check_shape(data.shape)
        if data.dtype not in (np.float32, np.float64):
            data = data.astype(np.float32)
        if data.flags.writeable or not data.flags.c_contiguous:
            data = np.array(data, copy=True, order="C")
            data.flags.writeable = False
        if self.frame_index < 0:
            raise ValueError("frame_index must be nonnegative")
        object.__setattr__(self, "data", data)

    @classmethod
    def from_array(cls, array, frame_index: int = 0) -> "FeatureMap":
        """Ingest an external array as float32, rejecting NaN/Inf."""
        data = np.asarray(array, dtype=np.float32)
        if not np.all(np.isfinite(data)):
            raise ValueError("feature map contains non-finite values")
        return cls(data, frame_index)

    @property
    def shape(self) -> Shape:
        return self.data.shape  # type: ignore[return-value]

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def size(self) -> int:
        return self.data.size

    def flat(self) -> np.ndarray:
        return self.data.reshape(-1)

    def with_index(self, frame_index: int) -> "FeatureMap":
        return FeatureMap(self.data, frame_index)

    def __eq__(self, other):
        if not isinstance(other, FeatureMap):
            return NotImplemented
        return (
            self.frame_index == other.frame_index
            and self.data.dtype == other.data.dtype
            and self.data.shape == other.data.shape
            and self.data.tobytes() == other.data.tobytes()
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class FeatureSequence:
    shape: Shape
    frames: tuple[FeatureMap, ...]

    def __post_init__(self):
        object.__setattr__(self, "shape", _check_shape(self.shape))
        frames = tuple(self.frames)
        for i, frame in enumerate(frames):
            if frame.shape != self.shape:
                raise ValueError(f"frame {i} has shape {frame.shape}, expected {self.shape}")
            if frame.frame_index != i:
                raise ValueError(f"frame indices must be consecutive from 0; frame {i} has index {frame.frame_index}")
        object.__setattr__(self, "frames", frames)

    @classmethod
    def from_array(cls, array) -> "FeatureSequence":
        """Build a sequence from an (F, C, H, W) array."""
        array = np.asarray(array, dtype=np.float32)
        if array.ndim != 4:
            raise ValueError("expected an (F, C, H, W) array")
        frames = tuple(FeatureMap.from_array(a, i) for i, a in enumerate(array))
        return cls(array.shape[1:], frames)

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self) -> Iterator[FeatureMap]:
        return iter(self.frames)

    def __getitem__(self, i: int) -> FeatureMap:
        return self.frames[i]

    def to_array(self) -> np.ndarray:
        return np.stack([f.data for f in self.frames])


def save_sequence(seq: FeatureSequence, path) -> int:
    """Write ``seq`` as an FMAP file and return the number of bytes written."""
    if len(seq) == 0:
        raise ValueError("empty sequence")
    c, h, w = seq.shape
    header = _FMAP_HEADER.pack(FMAP_MAGIC, FMAP_VERSION, DTYPE_F32, c, h, w, len(seq))
    written = 0
    with open(path, "wb") as fh:
        written += fh.write(header)
        for frame in seq:
            written += fh.write(frame.data.astype("<f4", copy=False).tobytes())
    return written


def load_sequence(path) -> FeatureSequence:
    raw = Path(path).read_bytes()
    if len(raw) < FMAP_HEADER_SIZE:
        raise FormatError("truncated header")
    magic, version, dtype, c, h, w, f = _FMAP_HEADER.unpack_from(raw)
    if magic != FMAP_MAGIC:
        raise FormatError("bad magic")
    if version != FMAP_VERSION:
        raise FormatError(f"unsupported version {version}")
    if dtype != DTYPE_F32:
        raise FormatError(f"unsupported dtype code {dtype}")
    if c == 0 or h == 0 or w == 0:
        raise FormatError("zero-sized shape")
    if f == 0:
        raise FormatError("empty sequence")
    payload = memoryview(raw)[FMAP_HEADER_SIZE:]
    expected = 4 * c * h * w * f
    if len(payload) < expected:
        raise FormatError("truncated payload")
    if len(payload) > expected:
        raise FormatError("trailing bytes after payload")
    values = np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(f, c, h, w)
    values.flags.writeable = False
    if not np.all(np.isfinite(values)):
        raise FormatError("non-finite values in payload")
    frames = tuple(FeatureMap(values[i], i) for i in range(f))
    return FeatureSequence((c, h, w), frames)


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a fixed-camera style synthetic feature-map video.

    Each channel is a smooth static background field (peak ``background_scale``)
    plus one Gaussian blob that drifts ``blob_speed`` pixels per frame on a torus,
    plus i.i.d. Gaussian noise of standard deviation ``noise_scale``.
    """

    shape: Shape = (8, 32, 32)
    frame_count: int = 16
    seed: int = 0
    blob_speed: float = 0.5
    background_scale: float = 2.0
    noise_scale: float = 0.0
    blob_amplitude: float = 3.0
    blob_sigma: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "shape", _check_shape(self.shape))
        if self.frame_count < 1:
            raise ValueError("frame_count must be >= 1")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        for name in ("blob_speed", "background_scale", "noise_scale", "blob_amplitude"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


def _background(rng: np.random.Generator, shape: Shape, scale: float) -> np.ndarray:
    c, h, w = shape
    yy = np.arange(h)[:, None] / h
    xx = np.arange(w)[None, :] / w
    field = np.zeros(shape)
    for _ in range(3):
        fy = rng.integers(0, 3, size=c)
        fx = rng.integers(0, 3, size=c)
        phase = rng.uniform(0.0, 2 * np.pi, size=(c, 2))
        field += (
            np.cos(2 * np.pi * fy[:, None, None] * yy + phase[:, 0, None, None])
            * np.cos(2 * np.pi * fx[:, None, None] * xx + phase[:, 1, None, None])
        )
    lo = field.min(axis=(1, 2), keepdims=True)
    hi = field.max(axis=(1, 2), keepdims=True)
    span = np.where(hi > lo, hi - lo, 1.0)
    return scale * (field - lo) / span


def generate_synthetic(spec: SyntheticSpec) -> FeatureSequence:
    """Deterministically render ``spec`` (Philox counter-based PRNG keyed by the seed)."""
    c, h, w = spec.shape
    rng = np.random.Generator(np.random.Philox(spec.seed))
    background = _background(rng, spec.shape, spec.background_scale)
    gains = rng.uniform(0.5, 1.5, size=c)[:, None, None] * spec.blob_amplitude
    y0, x0 = rng.uniform(0, h), rng.uniform(0, w)
    angle = rng.uniform(0, 2 * np.pi)
    dy, dx = math.sin(angle), math.cos(angle)
    sigma = spec.blob_sigma if spec.blob_sigma is not None else max(1.0, min(h, w) / 6)
    noise_rng = np.random.Generator(np.random.Philox(spec.seed ^ 0x9E3779B97F4A7C15))

    ys = np.arange(h)[:, None]
    xs = np.arange(w)[None, :]
    frames = []
    for t in range(spec.frame_count):
        cy = y0 + t * spec.blob_speed * dy
        cx = x0 + t * spec.blob_speed * dx
        # toroidal distance keeps the blob in view for any sequence length
        ddy = (ys - cy + h / 2) % h - h / 2
        ddx = (xs - cx + w / 2) % w - w / 2
        blob = np.exp(-(ddy**2 + ddx**2) / (2 * sigma**2))
        frame = background + gains * blob
        if spec.noise_scale > 0:
            frame = frame + spec.noise_scale * noise_rng.standard_normal(spec.shape)
        frames.append(FeatureMap(frame.astype(np.float32), t))
    return FeatureSequence(spec.shape, tuple(frames))
