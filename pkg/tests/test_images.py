import numpy as np
import pytest

from advkit import images
from advkit.errors import FormatError, ShapeError


def test_all_black_pgm(tmp_path):
    path = tmp_path / "black.pgm"
    path.write_bytes(b"P5\n2 2\n255\n" + bytes(4))
    t = images.load_image(path)
    assert t.shape == (1, 2, 2)
    assert np.all(t == 0.0)


def test_full_white_exact():
    assert images.quantize(np.ones((1, 2, 2), dtype=np.float32)).max() == 1.0


def test_pixel_255_maps_to_one(tmp_path):
    path = tmp_path / "w.pgm"
    path.write_bytes(b"P5\n1 1\n255\n\xff")
    assert images.load_image(path)[0, 0, 0] == 1.0


def test_half_rounds_to_128(tmp_path):
    # 255 * 0.5 = 127.5 -> round-half-even -> 128
    path = tmp_path / "gray.pgm"
    images.save_image(np.full((1, 2, 2), 0.5, dtype=np.float32), path)
    raw = path.read_bytes()
    assert raw.endswith(bytes([128] * 4))


@pytest.mark.parametrize("ext", ["png", "pgm"])
def test_round_trip_equals_quantize(tmp_path, rng, ext):
    t = rng.uniform(0, 1, size=(1, 12, 12)).astype(np.float32)
    path = tmp_path / f"t.{ext}"
    images.save_image(t, path)
    assert np.array_equal(images.load_image(path), images.quantize(t))


@pytest.mark.parametrize("ext", ["png", "ppm"])
def test_save_load_idempotent_on_quantized(tmp_path, rng, ext):
    t = images.quantize(rng.uniform(0, 1, size=(3, 9, 9)))
    p1 = tmp_path / f"a.{ext}"
    p2 = tmp_path / f"b.{ext}"
    images.save_image(t, p1)
    loaded = images.load_image(p1)
    assert np.array_equal(loaded, t)
    images.save_image(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_rgb_ppm_round_trip(tmp_path, rng):
    t = images.quantize(rng.uniform(0, 1, size=(3, 5, 7)))
    path = tmp_path / "c.ppm"
    images.save_image(t, path)
    assert np.array_equal(images.load_image(path), t)


def test_16bit_pnm_rejected(tmp_path):
    path = tmp_path / "deep.pgm"
    path.write_bytes(b"P5\n1 1\n65535\n\x00\x00")
    with pytest.raises(FormatError):
        images.load_image(path)


def test_ascii_pnm_rejected(tmp_path):
    path = tmp_path / "ascii.pgm"
    path.write_bytes(b"P2\n1 1\n255\n0\n")
    with pytest.raises(FormatError):
        images.load_image(path)


def test_truncated_raster_rejected(tmp_path):
    path = tmp_path / "short.pgm"
    path.write_bytes(b"P5\n2 2\n255\n\x00\x00")
    with pytest.raises(FormatError):
        images.load_image(path)


def test_unknown_extension_rejected(tmp_path):
    with pytest.raises(FormatError):
        images.load_image(tmp_path / "x.jpeg")


def test_bad_channel_count_rejected(tmp_path):
    with pytest.raises(ShapeError):
        images.save_image(np.zeros((2, 4, 4), dtype=np.float32), tmp_path / "x.png")


def test_pnm_comment_header(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# a comment\n1 1\n255\n\x80")
    t = images.load_image(path)
    assert t.shape == (1, 1, 1)
