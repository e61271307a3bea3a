"""Rate and accuracy bookkeeping.

* compression ratio = (coded bytes) / (raw float32 bytes), over counted frames
* bits per pixel    = 8 * coded bytes / (counted frames * input image pixels)
* AP loss rate [dB] = 10 * log10((AP_before - AP_after) / AP_before)

By default only non-key frames are counted. BPP is normalized by the pixel
count of the network *input* image (416 x 416 unless told otherwise), so
feature codecs and codecs on the input video share one axis.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

from .container import FrameKind, FramePacket, packet_size_bytes
from .errors import CodecError
from .tensor import Shape

DEFAULT_INPUT_PIXELS = 416 * 416
REPORT_COLUMNS = ("label", "k", "T", "frames_counted", "bytes", "compression_ratio", "bpp", "ap_loss_db")


@dataclass(frozen=True)
class FrameRecord:
    n: int
    kind: FrameKind
    bytes: int


@dataclass(frozen=True)
class RateAccounting:
    frames: tuple[FrameRecord, ...]
    raw_bytes_per_frame: int
    input_pixels_per_frame: int = DEFAULT_INPUT_PIXELS
    exclude_key: bool = True

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if any(f.bytes <= 0 for f in self.frames):
            raise ValueError("every packet must have a positive byte count")
        if self.raw_bytes_per_frame <= 0 or self.input_pixels_per_frame <= 0:
            raise ValueError("per-frame normalizers must be positive")

    @classmethod
    def from_packets(
        cls,
        packets: Iterable[FramePacket],
        shape: Shape,
        input_pixels_per_frame: int = DEFAULT_INPUT_PIXELS,
        exclude_key: bool = True,
    ) -> "RateAccounting":
        c, h, w = shape
        records = tuple(FrameRecord(p.frame_index, p.kind, packet_size_bytes(p)) for p in packets)
        return cls(records, 4 * c * h * w, input_pixels_per_frame, exclude_key)

    @property
    def counted(self) -> tuple[FrameRecord, ...]:
        if self.exclude_key:
            return tuple(f for f in self.frames if f.kind != FrameKind.KEY)
        return self.frames

    @property
    def counted_bytes(self) -> int:
        return sum(f.bytes for f in self.counted)

    def _require_counted(self) -> int:
        n = len(self.counted)
        if n == 0:
            raise CodecError("nothing counted: no frames left after key-frame exclusion")
        return n


@dataclass(frozen=True)
class AccuracyPair:
    ap_before: float
    ap_after: float

    def __post_init__(self):
        if not 0 < self.ap_before <= 1 or not 0 <= self.ap_after <= 1:
            raise ValueError("AP values must be fractions with ap_before > 0")


def compression_ratio(acct: RateAccounting) -> float:
    n = acct._require_counted()
    return acct.counted_bytes / (n * acct.raw_bytes_per_frame)


def bpp(acct: RateAccounting) -> float:
    n = acct._require_counted()
    return 8 * acct.counted_bytes / (n * acct.input_pixels_per_frame)


def ap_loss_rate(pair: AccuracyPair) -> float:
    loss = pair.ap_before - pair.ap_after
    if loss <= 0:
        raise CodecError("non-positive loss: AP loss rate is undefined when ap_after >= ap_before")
    return 10 * math.log10(loss / pair.ap_before)


@dataclass(frozen=True)
class RunRecord:
    """One benchmarked configuration: its label, rate controls and accounting."""

    label: str
    k: int
    gop_t: int
    accounting: RateAccounting
    accuracy: AccuracyPair | None = None


def emit_report(runs: Sequence[RunRecord]) -> list[dict]:
    """One row per run, in input order, with the columns of :data:`REPORT_COLUMNS`."""
    rows = []
    for run in runs:
        acct = run.accounting
        rows.append({
            "label": run.label,
            "k": run.k,
            "T": run.gop_t,
            "frames_counted": len(acct.counted),
            "bytes": acct.counted_bytes,
            "compression_ratio": compression_ratio(acct),
            "bpp": bpp(acct),
            "ap_loss_db": "" if run.accuracy is None else ap_loss_rate(run.accuracy),
        })
    return rows


def write_report_csv(rows: Sequence[dict], out: TextIO) -> None:
    writer = csv.DictWriter(out, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def report_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    write_report_csv(rows, buf)
    return buf.getvalue()
