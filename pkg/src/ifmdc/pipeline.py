"""Closed-loop encoder and decoder state machines.

Frame ``n`` is a key frame when ``n % T == 0`` and is coded on its own
(clip, key quantizer, run-length coder). Every other frame is clipped and coded
as the quantized difference from the *reconstructed* previous frame, which both
sides compute with the same function so their references never diverge.
With ``T = 1`` every frame is a key frame (plain clip + quantize + entropy code).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import codec_math as cm
from .codec_math import ClipRange, QuantSpec
from .container import FrameKind, FramePacket, StreamHeader
from .errors import CodecError, StreamViolation
from .rle import RleBlob, choose_optimal, rle_decode, rle_encode
from .tensor import FeatureMap, FeatureSequence, Shape

DEFAULT_GOP = 15


@dataclass(frozen=True)
class CodecConfig:
    quant: QuantSpec = field(default_factory=QuantSpec)
    gop_t: int = DEFAULT_GOP

    def __post_init__(self):
        if not 1 <= int(self.gop_t) <= 0xFFFF:
            raise ValueError("gop_t must be in 1..=65535")

    @classmethod
    def make(cls, clip=(0.0, 6.0), k: int = 7, gop_t: int = DEFAULT_GOP) -> "CodecConfig":
        return cls(QuantSpec(ClipRange(*clip), k), gop_t)

    @classmethod
    def from_header(cls, header: StreamHeader) -> "CodecConfig":
        return cls(header.quant, header.gop_t)

    @property
    def clip(self) -> ClipRange:
        return self.quant.clip

    @property
    def k(self) -> int:
        return self.quant.k

    def header(self, shape: Shape, frame_count: int = 0) -> StreamHeader:
        return StreamHeader(
            tuple(int(d) for d in shape), self.clip.clip_min, self.clip.clip_max,
            self.k, self.gop_t, frame_count,
        )

    def is_key(self, n: int) -> bool:
        return n % self.gop_t == 0


def _reconstruct_key(symbols: np.ndarray, quant: QuantSpec) -> np.ndarray:
    return np.take(cm.key_levels(quant).astype(np.float32), symbols)


def _reconstruct_residual(prev: np.ndarray, symbols: np.ndarray, quant: QuantSpec) -> np.ndarray:
    recon = np.take(cm.residual_levels(quant), symbols)
    recon += prev
    out = recon.astype(np.float32)
    # re-clip keeps the next residual inside [-A, A]; bounds are float32-exact,
    # so clipping after the cast equals clipping before it
    np.clip(out, np.float32(quant.clip.clip_min), np.float32(quant.clip.clip_max), out=out)
    return out


class Encoder:
    """Encoder half of the loop. Feed frames in order; one instance per stream."""

    def __init__(self, config: CodecConfig, shape: Shape):
        self.config = config
        self.shape = tuple(int(d) for d in shape)
        self.next_n = 0
        self.prev_recon: np.ndarray | None = None

    def encode_frame(self, fmap: FeatureMap) -> FramePacket:
        if fmap.shape != self.shape:
            raise ValueError(f"shape mismatch: frame {fmap.shape}, stream {self.shape}")
        n = self.next_n
        if fmap.frame_index != n:
            raise StreamViolation(f"frame-index discontinuity: expected {n}, got {fmap.frame_index}")
        quant = self.config.quant
        clipped = cm.clip_array(fmap.data.reshape(-1), quant.clip)
        if self.config.is_key(n):
            kind = FrameKind.KEY
            symbols = cm.quantize_key_array(clipped, quant)
            recon = _reconstruct_key(symbols, quant)
        else:
            kind = FrameKind.RESIDUAL
            residual = np.subtract(clipped, self.prev_recon, dtype=np.float64)
            symbols = cm.quantize_residual_array(residual, quant)
            recon = _reconstruct_residual(self.prev_recon, symbols, quant)
        dominant = choose_optimal(symbols)
        blob = rle_encode(symbols, dominant)
        self.prev_recon = recon
        self.next_n = n + 1
        return FramePacket(n, kind, dominant, blob.data)


class Decoder:
    """Decoder half of the loop; mirrors :class:`Encoder` exactly."""

    def __init__(self, config: CodecConfig, shape: Shape):
        self.config = config
        self.shape = tuple(int(d) for d in shape)
        self.next_n = 0
        self.prev_recon: np.ndarray | None = None

    @classmethod
    def from_header(cls, header: StreamHeader) -> "Decoder":
        return cls(CodecConfig.from_header(header), header.shape)

    def decode_frame(self, packet: FramePacket) -> FeatureMap:
        n = self.next_n
        if packet.kind == FrameKind.END:
            raise StreamViolation("end marker is not a frame")
        if packet.frame_index != n:
            raise StreamViolation(f"frame-index discontinuity: expected {n}, got {packet.frame_index}")
        if packet.kind == FrameKind.RESIDUAL and self.prev_recon is None:
            raise StreamViolation("missing reference")
        if (packet.kind == FrameKind.KEY) != self.config.is_key(n):
            raise StreamViolation(f"stream violates GOP: frame {n} is {packet.kind.name.lower()}")
        c, h, w = self.shape
        quant = self.config.quant
        symbols = rle_decode(RleBlob(packet.dominant, c * h * w, packet.payload))
        if int(symbols.max()) >= quant.k:
            raise CodecError(f"symbol {int(symbols.max())} >= k={quant.k}")
        if packet.kind == FrameKind.KEY:
            recon = _reconstruct_key(symbols, quant)
        else:
            recon = _reconstruct_residual(self.prev_recon, symbols, quant)
        self.prev_recon = recon
        self.next_n = n + 1
        # shares memory with prev_recon; FeatureMap locks it read-only
        view = recon.reshape(self.shape)
        view.flags.writeable = False
        return FeatureMap(view, n)


def encode_sequence(config: CodecConfig, seq: FeatureSequence) -> tuple[StreamHeader, list[FramePacket]]:
    if len(seq) == 0:
        raise ValueError("empty sequence")
    encoder = Encoder(config, seq.shape)
    packets = [encoder.encode_frame(f) for f in seq]
    return config.header(seq.shape, len(packets)), packets


def decode_sequence(header: StreamHeader, packets) -> FeatureSequence:
    packets = list(packets)
    if not packets:
        raise ValueError("empty sequence")
    decoder = Decoder.from_header(header)
    frames = tuple(decoder.decode_frame(p) for p in packets)
    return FeatureSequence(header.shape, frames)
