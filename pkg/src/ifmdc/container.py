"""The ``.ifmd`` bitstream: a stream header followed by self-delimiting frame packets.

All integers little-endian, floats IEEE-754 binary32.

Stream header (33 bytes)::

    0   4  magic b"IFMD"
    4   1  version (1)
    5   4  C          uint32
    9   4  H          uint32
    13  4  W          uint32
    17  4  clip_min   float32
    21  4  clip_max   float32
    25  2  k          uint16
    27  2  gop_t (T)  uint16
    29  4  frame_count uint32, 0 = live / unknown length

Frame packet (14 + payload_len bytes)::

    0   4  frame_index n  uint32
    4   1  kind           0 = key, 1 = residual, 255 = end-of-stream (wire only)
    5   1  dominant N     uint8
    6   4  payload_len    uint32
    10  .  payload        N-run-length coded symbols
    .   4  crc32          IEEE CRC-32 of bytes 0 .. end of payload
"""

from __future__ import annotations

import enum
import struct
import zlib
from dataclasses import dataclass
from typing import BinaryIO, Iterator

from .codec_math import K_MAX, K_MIN, ClipRange, QuantSpec
from .errors import CorruptPacket, FormatError
from .tensor import Shape

STREAM_MAGIC = b"IFMD"
STREAM_VERSION = 1
_HEADER = struct.Struct("<4sB3I2f2HI")
HEADER_SIZE = _HEADER.size
_PACKET_HEAD = struct.Struct("<IBBI")
_CRC = struct.Struct("<I")
PACKET_OVERHEAD = _PACKET_HEAD.size + _CRC.size


class FrameKind(enum.IntEnum):
    KEY = 0
    RESIDUAL = 1
    END = 255


@dataclass(frozen=True)
class StreamHeader:
    shape: Shape
    clip_min: float
    clip_max: float
    k: int
    gop_t: int
    frame_count: int = 0
    version: int = STREAM_VERSION

    def validate(self) -> None:
        if len(self.shape) != 3 or any(int(d) <= 0 or int(d) >= 2**32 for d in self.shape):
            raise FormatError(f"invalid shape {self.shape}")
        if not K_MIN <= self.k <= K_MAX:
            raise FormatError(f"k must be in {K_MIN}..={K_MAX}")
        if not self.clip_min < self.clip_max:
            raise FormatError("clip_min must be < clip_max")
        if not 1 <= self.gop_t <= 0xFFFF:
            raise FormatError("gop_t must be in 1..=65535")
        if not 0 <= self.frame_count < 2**32:
            raise FormatError("frame_count out of range")

    @property
    def quant(self) -> QuantSpec:
        return QuantSpec(ClipRange(self.clip_min, self.clip_max), self.k)

    @property
    def symbol_count(self) -> int:
        c, h, w = self.shape
        return c * h * w


def write_header(h: StreamHeader) -> bytes:
    if h.version != STREAM_VERSION:
        raise FormatError(f"unsupported version {h.version}")
    h.validate()
    c, hh, w = h.shape
    return _HEADER.pack(STREAM_MAGIC, h.version, c, hh, w, h.clip_min, h.clip_max, h.k, h.gop_t, h.frame_count)


def read_header(data: bytes) -> StreamHeader:
    if len(data) < HEADER_SIZE:
        raise FormatError("truncated header")
    magic, version, c, hh, w, lo, hi, k, gop_t, frames = _HEADER.unpack_from(data)
    if magic != STREAM_MAGIC:
        raise FormatError("bad magic")
    if version != STREAM_VERSION:
        raise FormatError(f"unsupported version {version}")
    header = StreamHeader((c, hh, w), lo, hi, k, gop_t, frames, version)
    header.validate()
    return header


@dataclass(frozen=True)
class FramePacket:
    frame_index: int
    kind: FrameKind
    dominant: int
    payload: bytes

    def __post_init__(self):
        object.__setattr__(self, "kind", FrameKind(self.kind))
        if not 0 <= self.frame_index < 2**32:
            raise ValueError("frame_index out of uint32 range")
        if not 0 <= self.dominant <= 255:
            raise ValueError("dominant symbol must be a byte")

    @property
    def is_key(self) -> bool:
        return self.kind == FrameKind.KEY

    @property
    def crc32(self) -> int:
        head = _PACKET_HEAD.pack(self.frame_index, self.kind, self.dominant, len(self.payload))
        return zlib.crc32(self.payload, zlib.crc32(head))


def end_marker(frame_index: int) -> FramePacket:
    """Zero-length trailer that closes a live stream."""
    return FramePacket(frame_index, FrameKind.END, 0, b"")


def packet_size_bytes(p: FramePacket) -> int:
    return PACKET_OVERHEAD + len(p.payload)


def write_packet(p: FramePacket) -> bytes:
    head = _PACKET_HEAD.pack(p.frame_index, p.kind, p.dominant, len(p.payload))
    crc = zlib.crc32(p.payload, zlib.crc32(head))
    return b"".join((head, p.payload, _CRC.pack(crc)))


def _make_packet(head: bytes, payload: bytes, crc_bytes: bytes) -> FramePacket:
    n, kind, dominant, _ = _PACKET_HEAD.unpack(head)
    (crc,) = _CRC.unpack(crc_bytes)
    if zlib.crc32(payload, zlib.crc32(head)) != crc:
        raise CorruptPacket()
    try:
        kind = FrameKind(kind)
    except ValueError:
        raise FormatError(f"unknown packet kind {kind}") from None
    if kind == FrameKind.END and payload:
        raise FormatError("end marker with a payload")
    return FramePacket(n, kind, dominant, bytes(payload))


def parse_packet(data, offset: int = 0) -> tuple[FramePacket, int]:
    """Parse one packet at ``offset``; return it with the offset just past it."""
    view = memoryview(data)
    if len(view) - offset < _PACKET_HEAD.size:
        raise FormatError("truncated packet header")
    head = view[offset:offset + _PACKET_HEAD.size]
    payload_len = _PACKET_HEAD.unpack(head)[3]
    start = offset + _PACKET_HEAD.size
    stop = start + payload_len
    if stop + _CRC.size > len(view):
        raise FormatError("truncated")
    packet = _make_packet(bytes(head), view[start:stop], view[stop:stop + _CRC.size])
    return packet, stop + _CRC.size


def read_packet(data) -> FramePacket:
    packet, end = parse_packet(data)
    if end != len(data):
        raise FormatError(f"{len(data) - end} trailing bytes after packet")
    return packet


def iter_packets(data, offset: int = 0) -> Iterator[FramePacket]:
    while offset < len(data):
        packet, offset = parse_packet(data, offset)
        yield packet


def _read_exact(fh: BinaryIO, n: int, what: str) -> bytes:
    chunk = fh.read(n)
    if chunk is None or len(chunk) != n:
        raise FormatError(f"truncated {what}")
    return chunk


def read_packet_from(fh: BinaryIO) -> FramePacket | None:
    """Read one packet from a buffered binary stream; ``None`` on a clean EOF."""
    head = fh.read(_PACKET_HEAD.size)
    if not head:
        return None
    if len(head) != _PACKET_HEAD.size:
        raise FormatError("truncated packet header")
    payload_len = _PACKET_HEAD.unpack(head)[3]
    payload = _read_exact(fh, payload_len, "payload") if payload_len else b""
    crc = _read_exact(fh, _CRC.size, "crc")
    return _make_packet(head, payload, crc)


def write_stream(path, header: StreamHeader, packets) -> int:
    written = 0
    with open(path, "wb") as fh:
        written += fh.write(write_header(header))
        for p in packets:
            written += fh.write(write_packet(p))
    return written


def read_stream(path) -> tuple[StreamHeader, list[FramePacket]]:
    with open(path, "rb") as fh:
        data = fh.read()
    header = read_header(data)
    packets = [p for p in iter_packets(data, HEADER_SIZE)]
    if packets and packets[-1].kind == FrameKind.END:
        packets.pop()
    if any(p.kind == FrameKind.END for p in packets):
        raise FormatError("end marker before the last packet")
    if header.frame_count and len(packets) != header.frame_count:
        raise FormatError(f"header declares {header.frame_count} frames, found {len(packets)}")
    return header, packets
