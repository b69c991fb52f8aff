import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from grainmorph.raster import (GreyImage, RasterError, decode_image, encode_pgm, grey_histogram,
                               load_greyscale, save_pgm)


def test_binary_pgm_decodes_row_major(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 100, 200, 255]))
    img = load_greyscale(p)
    assert (img.width, img.height) == (2, 2)
    assert img.pixels.tolist() == [[0, 100], [200, 255]]


def test_ascii_pgm_matches_binary(tmp_path):
    a = tmp_path / "a.pgm"
    b = tmp_path / "b.pgm"
    a.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 100, 200, 255]))
    b.write_text("P2\n# comment\n2 2\n255\n0 100\n200 255\n")
    assert load_greyscale(a) == load_greyscale(b)


def test_sixteen_bit_is_rescaled(tmp_path):
    p = tmp_path / "d.pgm"
    p.write_bytes(b"P5 1 1 65535\n" + (65535).to_bytes(2, "big"))
    assert load_greyscale(p).pixels.tolist() == [[255]]
    assert decode_image(b"P2 2 1 65535 0 32768").pixels.tolist() == [[0, 128]]


def test_colour_png_is_channel_mean(tmp_path):
    from PIL import Image

    rgb = np.array([[[30, 60, 90], [255, 255, 255]]], dtype=np.uint8)
    p = tmp_path / "c.png"
    Image.fromarray(rgb).save(p)
    assert load_greyscale(p).pixels.tolist() == [[60, 255]]


def test_grey_png(tmp_path):
    from PIL import Image

    arr = np.arange(12, dtype=np.uint8).reshape(3, 4) * 20
    p = tmp_path / "g.png"
    Image.fromarray(arr).save(p)
    assert np.array_equal(load_greyscale(p).pixels, arr)


@pytest.mark.parametrize("data", [b"", b"P5\n0 2\n255\n", b"P5\n2 2\n255\n\x00", b"GIF89a-not"])
def test_bad_inputs_raise(tmp_path, data):
    p = tmp_path / "bad.pgm"
    p.write_bytes(data)
    with pytest.raises(RasterError):
        load_greyscale(p)


def test_missing_file(tmp_path):
    with pytest.raises(RasterError):
        load_greyscale(tmp_path / "nope.pgm")


def test_pixels_out_of_range_rejected():
    with pytest.raises((ValueError, RasterError)):
        GreyImage(np.array([[0, 256]]))
    with pytest.raises((ValueError, RasterError)):
        GreyImage(np.zeros((0, 3)))


def test_histogram_examples():
    h = grey_histogram(GreyImage(np.zeros((4, 4), dtype=np.uint8)))
    assert h.bins[0] == 16 and h.bins[1:].sum() == 0
    h = grey_histogram(GreyImage(np.array([[0, 100], [200, 255]], dtype=np.uint8)))
    assert [h.bins[g] for g in (0, 100, 200, 255)] == [1, 1, 1, 1]
    assert h.bins.sum() == 4
    assert h.to_csv().splitlines()[0] == "grey,count"
    assert h.to_csv().splitlines()[101] == "100,1"


images = arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12)))


@settings(max_examples=60, deadline=None)
@given(images)
def test_histogram_mass(arr):
    img = GreyImage(arr)
    h = grey_histogram(img)
    assert len(h.bins) == 256
    assert h.bins.sum() == img.width * img.height
    assert np.array_equal(h.bins, np.bincount(arr.ravel(), minlength=256))


@settings(max_examples=40, deadline=None)
@given(images, st.booleans())
def test_pgm_round_trip(arr, binary):
    img = GreyImage(arr)
    assert decode_image(encode_pgm(img, binary=binary)) == img


def test_save_and_load(tmp_path):
    img = GreyImage(np.arange(30, dtype=np.uint8).reshape(5, 6))
    save_pgm(img, tmp_path / "x.pgm")
    assert load_greyscale(tmp_path / "x.pgm") == img


def test_image_is_immutable():
    img = GreyImage(np.zeros((2, 2), dtype=np.uint8))
    with pytest.raises(ValueError):
        img.pixels[0, 0] = 1
