import numpy as np
import pytest

from curvedgabor import io as cgio
from curvedgabor.frequency import RidgeFrequencyMap
from curvedgabor.image import GrayImage
from curvedgabor.orientation import OrientationField


class TestPgm:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        img = GrayImage(rng.integers(0, 256, (12, 17)).astype(float))
        path = tmp_path / "a.pgm"
        cgio.write_pgm(img, path)
        back = cgio.read_pgm(path)
        np.testing.assert_array_equal(back.pixels, img.pixels)

    def test_header_comments(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5\n# a comment\n3 2\n# another\n255\n" + bytes(range(6)))
        img = cgio.read_pgm(path)
        assert img.width == 3 and img.height == 2
        np.testing.assert_array_equal(img.pixels, np.arange(6.0).reshape(2, 3))

    def test_rejects_16_bit(self, tmp_path):
        path = tmp_path / "d.pgm"
        path.write_bytes(b"P5\n1 1\n65535\n\x00\x00")
        with pytest.raises(ValueError):
            cgio.read_pgm(path)

    def test_rejects_truncated(self, tmp_path):
        path = tmp_path / "e.pgm"
        path.write_bytes(b"P5\n4 4\n255\n\x00\x00")
        with pytest.raises(ValueError):
            cgio.read_pgm(path)

    def test_mask_round_trip(self, tmp_path):
        mask = np.random.default_rng(2).uniform(size=(9, 9)) > 0.5
        path = tmp_path / "m.pgm"
        cgio.write_mask_pgm(mask, path)
        np.testing.assert_array_equal(cgio.read_mask_pgm(path), mask)


class TestPng:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        img = GrayImage(rng.integers(0, 256, (8, 5)).astype(float))
        path = tmp_path / "a.png"
        cgio.write_png(img, path)
        back = cgio.read_png(path)
        np.testing.assert_array_equal(back.pixels, img.pixels)

    def test_load_dispatch(self, tmp_path):
        img = GrayImage(np.zeros((4, 4)))
        cgio.save_image(img, tmp_path / "x.png")
        cgio.save_image(img, tmp_path / "x.pgm")
        assert cgio.load_image(tmp_path / "x.png").width == 4
        assert cgio.load_image(tmp_path / "x.pgm").width == 4
        with pytest.raises(ValueError):
            cgio.load_image(tmp_path / "x.tiff")


class TestRasterText:
    def test_orientation_round_trip_stable(self, tmp_path):
        rng = np.random.default_rng(4)
        theta = rng.uniform(0, np.pi, (6, 9))
        valid = rng.uniform(size=(6, 9)) > 0.3
        of = OrientationField(np.where(valid, theta, 0.0), valid)
        p1 = tmp_path / "a.of.txt"
        p2 = tmp_path / "b.of.txt"
        cgio.write_orientation_text(of, p1)
        back = cgio.read_orientation_text(p1)
        np.testing.assert_array_equal(back.valid, of.valid)
        np.testing.assert_allclose(back.theta[valid], of.theta[valid], atol=5e-7)
        # a second serialization is byte-identical (format is stable)
        cgio.write_orientation_text(back, p2)
        assert p1.read_text() == p2.read_text()

    def test_header_checked(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("RF 2 2\n0.1 0.1\n0.1 0.1\n")
        with pytest.raises(ValueError):
            cgio.read_orientation_text(path)
        rf = cgio.read_rf_text(path)
        assert rf.valid.all()

    def test_rf_round_trip(self, tmp_path):
        freq = np.full((3, 4), 0.1)
        valid = np.ones((3, 4), bool)
        valid[0, 0] = False
        rf = RidgeFrequencyMap(np.where(valid, freq, 0.0), valid)
        path = tmp_path / "r.rf.txt"
        cgio.write_rf_text(rf, path)
        back = cgio.read_rf_text(path)
        np.testing.assert_array_equal(back.valid, valid)
        np.testing.assert_allclose(back.freq[valid], 0.1)
        assert path.read_text().split("\n")[1].split()[0] == "*"

    def test_curvature_round_trip(self, tmp_path):
        curv = np.array([[0.1, np.nan], [3.0, 0.0]])
        path = tmp_path / "c.txt"
        cgio.write_curvature_text(curv, path)
        back = cgio.read_curvature_text(path)
        assert np.isnan(back[0, 1])
        np.testing.assert_allclose(back[np.isfinite(back)], [0.1, 3.0, 0.0], atol=5e-7)


class TestVisualExports:
    def test_curvature_png_quantization(self, tmp_path):
        curv = np.array([[0.0, np.pi / 2], [np.pi, np.nan]])
        path = tmp_path / "c.png"
        cgio.write_curvature_png(curv, path)
        from PIL import Image

        data = np.asarray(Image.open(path))
        assert data[0, 0] == 0
        assert data[0, 1] == 128  # round(127.5) half away from zero
        assert data[1, 0] == 255
        assert data[1, 1] == 0

    def test_overlay_and_quiver_smoke(self, tmp_path):
        from curvedgabor.synthetic import gen_parallel

        pat = gen_parallel(48, 48, 10.0, 0.0)
        curv = np.zeros((48, 48))
        p1 = tmp_path / "o.png"
        cgio.write_curvature_overlay_png(pat.image, curv, p1)
        assert p1.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
        p2 = tmp_path / "q.png"
        cgio.write_orientation_quiver_png(pat.true_of, p2, img=pat.image)
        assert p2.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_falsecolor_smoke(self, tmp_path):
        from curvedgabor.synthetic import gen_parallel

        pat = gen_parallel(32, 32, 10.0, 0.0)
        path = tmp_path / "f.png"
        cgio.write_rf_falsecolor_png(pat.true_rf, path)
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
