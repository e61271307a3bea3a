
import numpy as np
import pytest
from hypothesis import given, strategies as st

from ifmdc import codec_math as cm
from ifmdc.codec_math import QuantSpec
from ifmdc.errors import FormatError
from ifmdc.rearrange import (
    GrayImage, GridSpec, export_pgm, frame_filename, pgm_header, quilt, read_pgm,
    tile, unquilt, untile,
)
from ifmdc.tensor import FeatureMap

Q256 = QuantSpec(k=256)


def lattice_map(shape, seed=0):
    """A map whose values lie on the k=256 key lattice over [0, 6]."""
    syms = np.random.default_rng(seed).integers(0, 256, shape)
    return FeatureMap(cm.dequantize_key_array(syms, Q256).astype(np.float32)), syms.astype(np.uint8)


def test_256_channel_map_tiles_to_832():
    fmap, _ = lattice_map((256, 52, 52))
    img = tile(fmap)
    assert (img.height, img.width) == (832, 832)
    assert (quilt(fmap).height, quilt(fmap).width) == (832, 832)


def test_single_channel_identity():
    fmap, syms = lattice_map((1, 2, 2))
    grid = GridSpec(1, 1)
    assert np.array_equal(tile(fmap, grid).pixels, syms[0])
    assert tile(fmap, grid) == quilt(fmap, grid)


def test_padding_tile_is_zero():
    fmap, syms = lattice_map((3, 2, 2), seed=1)
    px = tile(fmap, GridSpec(2, 2)).pixels
    assert np.array_equal(px[:2, :2], syms[0])
    assert np.array_equal(px[:2, 2:], syms[1])
    assert np.array_equal(px[2:, :2], syms[2])
    assert np.all(px[2:, 2:] == 0)


def test_quilt_hand_enumerated():
    # channel c at (y, x) gets value 10*c + 2*y + x, which is a valid symbol
    syms = np.array([[[10 * c + 2 * y + x for x in range(2)] for y in range(2)] for c in range(4)])
    fmap = FeatureMap(cm.dequantize_key_array(syms, Q256).astype(np.float32))
    px = quilt(fmap, GridSpec(2, 2)).pixels
    # pixel (i, j) <- channel (i%2)*2 + j%2 at (i//2, j//2)
    expected = [
        [0, 10, 1, 11],
        [20, 30, 21, 31],
        [2, 12, 3, 13],
        [22, 32, 23, 33],
    ]
    assert px.tolist() == expected
    assert px[0, 0] == syms[0, 0, 0] and px[0, 1] == syms[1, 0, 0] and px[2, 0] == syms[0, 1, 0]


def test_untile_zero_image_is_clip_min():
    out = untile(GrayImage(np.zeros((4, 4), np.uint8)), GridSpec(2, 2), (4, 2, 2))
    assert np.all(out.data == 0.0)


def test_shape_errors():
    fmap, _ = lattice_map((5, 2, 2))
    with pytest.raises(ValueError):
        tile(fmap, GridSpec(2, 2))
    with pytest.raises(ValueError, match="expected"):
        untile(GrayImage(np.zeros((4, 5), np.uint8)), GridSpec(2, 2), (4, 2, 2))
    with pytest.raises(ValueError, match="expected"):
        unquilt(GrayImage(np.zeros((3, 4), np.uint8)), GridSpec(2, 2), (4, 2, 2))
    with pytest.raises(ValueError, match="k must be 256"):
        tile(fmap, spec=QuantSpec(k=7))


def test_random_map_matches_quantization_roundtrip():
    x = np.random.default_rng(2).uniform(-1, 7, (8, 4, 4)).astype(np.float32)
    fmap = FeatureMap(x)
    expected = cm.dequantize_key_array(cm.quantize_key_array(np.clip(x, 0, 6), Q256), Q256)
    out = untile(tile(fmap), GridSpec.square(8), fmap.shape)
    assert np.array_equal(out.data, expected.astype(np.float32))


shapes = st.tuples(st.integers(1, 64), st.integers(1, 9), st.integers(1, 9))


@given(shapes, st.integers(0, 1000), st.booleans())
def test_inverses_on_lattice(shape, seed, square):
    fmap, _ = lattice_map(shape, seed)
    c = shape[0]
    grid = GridSpec.square(c) if square else GridSpec(1, c)
    assert untile(tile(fmap, grid), grid, shape) == fmap
    assert unquilt(quilt(fmap, grid), grid, shape) == fmap


@given(shapes, st.integers(0, 1000))
def test_tile_and_quilt_are_permutations(shape, seed):
    fmap, _ = lattice_map(shape, seed)
    a, b = tile(fmap).pixels, quilt(fmap).pixels
    assert a.shape == b.shape
    assert np.array_equal(np.sort(a, axis=None), np.sort(b, axis=None))


def test_pgm_export(tmp_path):
    fmap, _ = lattice_map((256, 52, 52))
    img = tile(fmap)
    n = export_pgm(img, tmp_path / "f.pgm")
    raw = (tmp_path / "f.pgm").read_bytes()
    assert raw.startswith(b"P5\n832 832\n255\n")
    assert n == len(raw) == 692224 + len(pgm_header(832, 832))
    assert read_pgm(tmp_path / "f.pgm") == img


def test_pgm_tiny_and_errors(tmp_path):
    img = GrayImage(np.array([[200]], np.uint8))
    export_pgm(img, tmp_path / "one.pgm")
    assert read_pgm(tmp_path / "one.pgm") == img
    with pytest.raises(OSError):
        export_pgm(img, tmp_path / "missing" / "x.pgm")
    (tmp_path / "bad.pgm").write_bytes(b"P2\n1 1\n255\n0")
    with pytest.raises(FormatError):
        read_pgm(tmp_path / "bad.pgm")
    (tmp_path / "short.pgm").write_bytes(b"P5\n2 2\n255\n\x00")
    with pytest.raises(FormatError):
        read_pgm(tmp_path / "short.pgm")


def test_frame_filename():
    assert frame_filename(7) == "frame_00007.pgm"
    assert sorted(frame_filename(n) for n in (10, 2, 100)) == [frame_filename(n) for n in (2, 10, 100)]
