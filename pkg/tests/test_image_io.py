import numpy as np
import pytest

from skinfree.errors import DataError
from skinfree.raster import AttributeImage, Silhouette
from skinfree.utils import ImageIO


def test_pfm_keeps_row_order(tmp_path):
    pixels = np.zeros((4, 5, 3), dtype=np.float32)
    pixels[0, 0] = [1.0, 0.5, 0.25]
    path = str(tmp_path / "image.pfm")
    ImageIO.write_pfm(path, pixels)
    loaded = ImageIO.read_pfm(path)
    assert loaded.dtype == np.float32
    assert loaded.shape == (4, 5, 3)
    np.testing.assert_array_equal(loaded, pixels)
    with open(path, "rb") as f:
        assert f.readline() == b"PF\n"
        assert f.readline() == b"5 4\n"


def test_pfm_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        ImageIO.read_pfm(str(tmp_path / "absent.pfm"))
    with pytest.raises(ValueError):
        ImageIO.write_pfm(str(tmp_path / "gray.pfm"), np.zeros((4, 4)))

    not_pfm = tmp_path / "bad.pfm"
    not_pfm.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
    with pytest.raises(DataError):
        ImageIO.read_pfm(str(not_pfm))

    short = tmp_path / "short.pfm"
    short.write_bytes(b"PF\n2 2\n-1.0\n" + np.zeros(5, dtype="<f4").tobytes())
    with pytest.raises(DataError):
        ImageIO.read_pfm(str(short))


def test_big_endian_pfm(tmp_path):
    path = tmp_path / "be.pfm"
    data = np.arange(6, dtype=">f4")
    path.write_bytes(b"PF\n1 2\n1.0\n" + data.tobytes())
    loaded = ImageIO.read_pfm(str(path))
    # The file stores the bottom row first.
    np.testing.assert_array_equal(loaded[:, 0], [[3, 4, 5], [0, 1, 2]])


def test_silhouette_round_trip(tmp_path):
    mask = np.zeros((6, 6), dtype=bool)
    mask[1:4, 2:5] = True
    path = str(tmp_path / "masks" / "silhouette_front.pgm")
    ImageIO.write_silhouette(path, Silhouette(mask, "front"))
    with open(path, "rb") as f:
        assert f.read(2) == b"P5"
    loaded = ImageIO.read_silhouette(path, "front")
    np.testing.assert_array_equal(loaded.mask, mask)
    assert loaded.view == "front"


def test_attribute_image_with_mismatched_mask(tmp_path):
    image = AttributeImage(np.full((4, 4, 3), 0.5), np.ones((4, 4), dtype=bool), "back", "normal")
    path = str(tmp_path / "normal_back.pfm")
    ImageIO.save_attribute_image(path, image)
    with pytest.raises(DataError):
        ImageIO.load_attribute_image(path, np.ones((5, 5), dtype=bool), "back", "normal", "garment")
    loaded = ImageIO.load_attribute_image(path, Silhouette(image.mask, "back"),
                                          "back", "normal", "garment")
    np.testing.assert_allclose(loaded.pixels, 0.5)


def test_preview_is_ppm(tmp_path):
    image = AttributeImage(np.full((4, 4, 3), 0.5), np.ones((4, 4), dtype=bool), "front")
    path = tmp_path / "preview.ppm"
    ImageIO.write_preview(str(path), image)
    assert path.read_bytes()[:2] == b"P6"
