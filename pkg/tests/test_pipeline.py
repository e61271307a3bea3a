import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from ifmdc.container import FrameKind, FramePacket, packet_size_bytes
from ifmdc.errors import CodecError, StreamViolation
from ifmdc.pipeline import CodecConfig, Decoder, Encoder, decode_sequence, encode_sequence
from ifmdc.rle import RleBlob, rle_decode
from ifmdc.tensor import FeatureMap, FeatureSequence, SyntheticSpec, generate_synthetic


def synth(shape=(4, 16, 16), frames=30, **kw):
    return generate_synthetic(SyntheticSpec(shape=shape, frame_count=frames, **kw))


def clipped(seq, config):
    return np.clip(seq.to_array(), config.clip.clip_min, config.clip.clip_max)


def total_bytes(packets):
    return sum(packet_size_bytes(p) for p in packets)


@pytest.mark.parametrize("t", [1, 2, 4, 15])
def test_gop_structure(t):
    _, packets = encode_sequence(CodecConfig.make(gop_t=t), synth(frames=31))
    assert [p.kind == FrameKind.KEY for p in packets] == [n % t == 0 for n in range(31)]
    assert [p.frame_index for p in packets] == list(range(31))


def test_constant_sequence():
    config = CodecConfig.make(k=7)
    frame = synth(frames=1, noise_scale=0.5).to_array()[0]
    seq = FeatureSequence.from_array(np.repeat(frame[None], 10, axis=0))
    header, packets = encode_sequence(config, seq)
    c, h, w = seq.shape
    for p in packets[1:]:
        syms = rle_decode(RleBlob(p.dominant, c * h * w, p.payload))
        assert np.all(syms == 3) and p.dominant == 3
        assert len(p.payload) <= 1 + 5
    out = decode_sequence(header, packets).to_array()
    assert np.abs(out - clipped(seq, config)).max() <= 6 / (2 * 6)


def test_missing_reference():
    dec = Decoder(CodecConfig.make(), (1, 2, 2))
    with pytest.raises(StreamViolation, match="missing reference"):
        dec.decode_frame(FramePacket(0, FrameKind.RESIDUAL, 3, bytes([3, 4])))


def test_decoder_checks():
    config = CodecConfig.make(gop_t=4)
    _, packets = encode_sequence(config, synth(shape=(1, 4, 4), frames=6))
    dec = Decoder(config, (1, 4, 4))
    with pytest.raises(StreamViolation, match="discontinuity"):
        dec.decode_frame(packets[1])
    dec.decode_frame(packets[0])
    with pytest.raises(StreamViolation, match="GOP"):
        dec.decode_frame(FramePacket(1, FrameKind.KEY, packets[0].dominant, packets[0].payload))
    with pytest.raises(StreamViolation, match="end marker"):
        dec.decode_frame(FramePacket(1, FrameKind.END, 0, b""))
    with pytest.raises(CodecError, match=">= k"):
        dec.decode_frame(FramePacket(1, FrameKind.RESIDUAL, 0, bytes([9]) * 16))


def test_encoder_checks():
    enc = Encoder(CodecConfig.make(), (1, 2, 2))
    with pytest.raises(ValueError, match="shape"):
        enc.encode_frame(FeatureMap.from_array(np.zeros((1, 2, 3), np.float32)))
    with pytest.raises(StreamViolation):
        enc.encode_frame(FeatureMap.from_array(np.zeros((1, 2, 2), np.float32), 1))


def test_empty_sequence_rejected():
    with pytest.raises(ValueError):
        decode_sequence(CodecConfig.make().header((1, 1, 1)), [])


def test_intra_only_mode():
    _, packets = encode_sequence(CodecConfig.make(gop_t=1), synth(frames=8))
    assert all(p.kind == FrameKind.KEY for p in packets)


@pytest.mark.parametrize("k,t", [(7, 15), (17, 15), (3, 4), (7, 1)])
def test_hundred_frames_bounded_no_drift(k, t):
    config = CodecConfig.make(k=k, gop_t=t)
    seq = synth(shape=(3, 12, 12), frames=100, blob_speed=0.8, noise_scale=0.4, seed=k)
    enc, dec = Encoder(config, seq.shape), Decoder(config, seq.shape)
    bound = config.clip.span / (k - 1)
    for fmap in seq:
        out = dec.decode_frame(enc.encode_frame(fmap))
        assert enc.prev_recon.tobytes() == dec.prev_recon.tobytes()
        ref = np.clip(fmap.data, 0, 6)
        assert np.abs(out.data.astype(np.float64) - ref).max() <= bound


@given(
    st.integers(2, 30), st.integers(1, 6), st.integers(0, 2**16),
    # dyadic clip bounds keep A = clip_max - clip_min exact
    st.integers(-256, 64).map(lambda i: i / 64), st.integers(8, 128).map(lambda i: i / 16),
)
def test_matches_elementwise_reference(k, t, seed, lo, span):
    hi = float(np.float32(lo + span))
    lo = float(np.float32(lo))
    rng = np.random.default_rng(seed)
    arr = np.cumsum(rng.normal(0, span / 4, (8, 1, 2, 3)), axis=0).astype(np.float32) + np.float32(lo + span / 2)
    config = CodecConfig.make(clip=(lo, hi), k=k, gop_t=t)
    header, packets = encode_sequence(config, FeatureSequence.from_array(arr))
    out = decode_sequence(header, packets).to_array()
    ref_syms, ref_recon = oracles.reference_codec([f.ravel().tolist() for f in arr], lo, hi, k, t)
    for n, p in enumerate(packets):
        syms = rle_decode(RleBlob(p.dominant, 6, p.payload))
        assert syms.tolist() == ref_syms[n]
        # prev + level is summed in float64 before rounding to float32; near zero
        # the float64 cancellation error shows up, bounded by a few float64 ulps
        ref = np.array([float(r) for r in ref_recon[n]], dtype=np.float32)
        tol = np.spacing(np.abs(ref)) + 4 * np.finfo(np.float64).eps * (abs(lo) + abs(hi))
        assert np.all(np.abs(out[n].ravel().astype(np.float64) - ref) <= tol)


def test_temporal_coding_saves_bytes():
    seq = synth(shape=(8, 32, 32), frames=30, blob_speed=0.5)
    _, p15 = encode_sequence(CodecConfig.make(k=7, gop_t=15), seq)
    _, p1 = encode_sequence(CodecConfig.make(k=7, gop_t=1), seq)
    pick = [n for n in range(30) if n % 15]
    assert sum(packet_size_bytes(p15[n]) for n in pick) < sum(packet_size_bytes(p1[n]) for n in pick)


@pytest.mark.parametrize("seed,speed,noise", [(0, 0.5, 0.0), (1, 1.0, 0.0), (2, 0.25, 0.2), (3, 0.5, 0.5)])
def test_rate_monotone_in_k(seed, speed, noise):
    seq = synth(shape=(8, 24, 24), frames=20, seed=seed, blob_speed=speed, noise_scale=noise)
    sizes = [total_bytes(encode_sequence(CodecConfig.make(k=k), seq)[1]) for k in (3, 7, 17, 65)]
    assert sizes == sorted(sizes), sizes


def test_decoded_frames_are_read_only_and_float32():
    header, packets = encode_sequence(CodecConfig.make(), synth(frames=3))
    out = decode_sequence(header, packets)
    assert out[1].data.dtype == np.float32
    with pytest.raises(ValueError):
        out[1].data[0, 0, 0] = 1.0
