import math
import random

import pytest
from hypothesis import given, strategies as st

from ifmdc.container import FrameKind, FramePacket
from ifmdc.errors import CodecError
from ifmdc.metrics import (
    REPORT_COLUMNS, AccuracyPair, FrameRecord, RateAccounting, RunRecord,
    ap_loss_rate, bpp, compression_ratio, emit_report, report_csv,
)
from ifmdc.pipeline import CodecConfig, encode_sequence
from ifmdc.tensor import SyntheticSpec, generate_synthetic


def acct(sizes, raw=1000, pixels=416 * 416, exclude_key=False, kinds=None):
    kinds = kinds or [FrameKind.RESIDUAL] * len(sizes)
    return RateAccounting(
        tuple(FrameRecord(n, k, b) for n, (k, b) in enumerate(zip(kinds, sizes))), raw, pixels, exclude_key
    )


def test_ap_loss_examples():
    assert ap_loss_rate(AccuracyPair(0.5, 0.45)) == pytest.approx(-10.0, abs=1e-9)
    assert ap_loss_rate(AccuracyPair(0.5, 0.4)) == pytest.approx(-6.9897, abs=1e-4)
    with pytest.raises(CodecError, match="non-positive loss"):
        ap_loss_rate(AccuracyPair(0.5, 0.5))
    with pytest.raises(ValueError):
        AccuracyPair(0.0, 0.0)


@given(st.floats(0.05, 1.0), st.floats(0.001, 0.5), st.floats(0.001, 0.5))
def test_ap_loss_increasing(before, d1, d2):
    lo, hi = sorted((d1, d2))
    if hi >= before or lo == hi:
        return
    assert ap_loss_rate(AccuracyPair(before, before - lo)) < ap_loss_rate(AccuracyPair(before, before - hi))


def test_bpp_examples():
    assert bpp(acct([21632])) == pytest.approx(1.0, abs=1e-12)
    assert bpp(acct([43264])) == pytest.approx(2 * bpp(acct([21632])))
    assert 12979.2 * 8 / (416 * 416) == pytest.approx(0.6)


def test_compression_ratio_examples():
    assert compression_ratio(acct([250], raw=1000)) == 0.25
    assert compression_ratio(acct([1000], raw=1000)) == 1.0


def test_key_frames_excluded_with_t16():
    seq = generate_synthetic(SyntheticSpec(shape=(4, 8, 8), frame_count=16))
    _, packets = encode_sequence(CodecConfig.make(gop_t=16), seq)
    a = RateAccounting.from_packets(packets, seq.shape)
    assert len(a.counted) == 15
    assert a.counted_bytes == sum(14 + len(p.payload) for p in packets[1:])
    assert compression_ratio(a) == a.counted_bytes / (15 * 4 * 4 * 8 * 8)


def test_nothing_counted():
    with pytest.raises(CodecError, match="nothing counted"):
        bpp(acct([10, 10], exclude_key=True, kinds=[FrameKind.KEY] * 2))


@given(st.lists(st.tuples(st.booleans(), st.integers(14, 10**6)), min_size=2, max_size=30), st.randoms())
def test_permutation_invariant(frames, rnd):
    kinds = [FrameKind.KEY if k else FrameKind.RESIDUAL for k, _ in frames]
    if all(kinds[i] == FrameKind.KEY for i in range(len(kinds))):
        kinds[0] = FrameKind.RESIDUAL
    sizes = [b for _, b in frames]
    order = list(range(len(sizes)))
    rnd.shuffle(order)
    a = acct(sizes, kinds=kinds, exclude_key=True)
    b = acct([sizes[i] for i in order], kinds=[kinds[i] for i in order], exclude_key=True)
    assert compression_ratio(a) == pytest.approx(compression_ratio(b), rel=1e-15)
    assert bpp(a) == pytest.approx(bpp(b), rel=1e-15)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_excluding_keys_never_increases_ratio_on_low_motion(seed):
    seq = generate_synthetic(SyntheticSpec(shape=(8, 16, 16), frame_count=31, seed=seed, blob_speed=0.25))
    _, packets = encode_sequence(CodecConfig.make(), seq)
    with_keys = RateAccounting.from_packets(packets, seq.shape, exclude_key=False)
    without = RateAccounting.from_packets(packets, seq.shape, exclude_key=True)
    assert compression_ratio(without) <= compression_ratio(with_keys)


def test_report_rows_and_csv():
    a1, a2 = acct([100, 200], raw=800), acct([21632])
    rows = emit_report([
        RunRecord("k7", 7, 15, a1, AccuracyPair(0.5, 0.45)),
        RunRecord("k17", 17, 15, a2),
    ])
    assert [r["label"] for r in rows] == ["k7", "k17"]
    assert rows[0]["bytes"] == 300 and rows[0]["frames_counted"] == 2
    assert rows[0]["compression_ratio"] == 300 / 1600
    assert rows[0]["bpp"] == 8 * 300 / (2 * 416 * 416)
    assert math.isclose(rows[0]["ap_loss_db"], -10.0)
    assert rows[1]["bpp"] == 1.0 and rows[1]["ap_loss_db"] == ""
    text = report_csv(rows)
    lines = text.split("\n")
    assert lines[0] == ",".join(REPORT_COLUMNS)
    assert lines[2] == "k17,17,15,1,21632,21.632,1.0,"
    assert text.endswith("\n") and "\r" not in text


def test_empty_report_is_header_only():
    assert report_csv(emit_report([])) == ",".join(REPORT_COLUMNS) + "\n"


def test_report_deterministic():
    runs = [RunRecord(f"r{i}", 7, 15, acct([random.Random(i).randint(20, 900)])) for i in range(5)]
    assert report_csv(emit_report(runs)) == report_csv(emit_report(runs))
