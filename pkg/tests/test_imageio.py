import numpy as np
import pytest
from PIL import Image

from ssfusion.imageio import ImageFormatError, load_image, quantize, save_image


def test_png_round_trip_is_byte_stable(tmp_path):
    rng = np.random.default_rng(0)
    raw = rng.integers(0, 256, size=(17, 23), dtype=np.uint8)
    src = tmp_path / "a.png"
    Image.fromarray(raw).save(src)
    img = load_image(src)
    assert img.shape == (1, 1, 17, 23) and img.dtype == np.float32
    save_image(tmp_path / "b.png", img)
    assert np.array_equal(np.asarray(Image.open(tmp_path / "b.png")), raw)


def test_black_and_white(tmp_path):
    img = np.zeros((1, 1, 4, 6), dtype=np.float32)
    img[..., 3:] = 1.0
    save_image(tmp_path / "bw.png", img)
    back = load_image(tmp_path / "bw.png")
    np.testing.assert_array_equal(back, img)


def test_random_float_round_trip_error(tmp_path):
    rng = np.random.default_rng(1)
    img = rng.random((1, 3, 12, 9)).astype(np.float32)
    save_image(tmp_path / "c.png", img)
    back = load_image(tmp_path / "c.png")
    assert back.shape == img.shape
    assert np.abs(back - img).max() <= 1 / 510 + 1e-7


def test_sixteen_bit(tmp_path):
    raw = np.array([[0, 1, 65535], [32768, 1000, 40000]], dtype=np.uint16)
    Image.fromarray(raw).save(tmp_path / "d.png")
    img = load_image(tmp_path / "d.png")
    np.testing.assert_allclose(img[0, 0], raw / 65535.0, atol=1e-7)
    save_image(tmp_path / "e.png", img, bits=16)
    assert np.array_equal(np.asarray(Image.open(tmp_path / "e.png")), raw)


def test_jpeg_loads_close(tmp_path):
    yy, xx = np.mgrid[0:32, 0:32]
    img = ((xx + yy) / 62.0)[None, None].astype(np.float32)
    save_image(tmp_path / "f.jpg", img)
    back = load_image(tmp_path / "f.jpg")
    assert np.abs(back - img).mean() < 0.02


def test_channel_conversion(tmp_path):
    rgb = np.zeros((1, 3, 2, 2), dtype=np.float32)
    rgb[:, 1] = 1.0
    save_image(tmp_path / "g.png", rgb)
    gray = load_image(tmp_path / "g.png", channels=1)
    np.testing.assert_allclose(gray, 0.587, atol=1 / 255)
    three = load_image(tmp_path / "g.png", channels=3)
    assert three.shape == (1, 3, 2, 2)
    save_image(tmp_path / "h.png", gray)
    assert load_image(tmp_path / "h.png", channels=3).shape == (1, 3, 2, 2)


def test_quantize_rounds_half_up():
    assert quantize(np.array([0.5 / 255, 1.5 / 255, 2.0]), 8).tolist() == [1, 2, 255]


def test_unsupported_format(tmp_path):
    (tmp_path / "x.gif").write_bytes(b"GIF89a")
    with pytest.raises(ImageFormatError):
        load_image(tmp_path / "x.gif")
    with pytest.raises(ImageFormatError):
        save_image(tmp_path / "x.webp", np.zeros((2, 2)))
    with pytest.raises(ImageFormatError):
        save_image(tmp_path / "x.png", np.zeros((3, 2, 2)), bits=16)
