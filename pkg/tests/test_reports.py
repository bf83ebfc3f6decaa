import numpy as np
import pytest

from particul_ood.errors import ArchiveFormatError
from particul_ood.ppm import read_ppm, write_ppm
from particul_ood.reports import svg_line_plot, write_csv, write_json


class TestPpm:
    def test_roundtrip_quantized(self, tmp_path):
        rng = np.random.default_rng(0)
        img = np.rint(rng.uniform(size=(7, 5, 3)) * 255.0) / 255.0
        path = tmp_path / "x.ppm"
        write_ppm(path, img)
        assert np.array_equal(read_ppm(path), img)

    def test_grayscale_replicated(self, tmp_path):
        img = np.full((4, 4, 1), 128.0 / 255.0)
        path = tmp_path / "g.ppm"
        write_ppm(path, img)
        out = read_ppm(path)
        assert out.shape == (4, 4, 3)
        assert np.array_equal(out[:, :, 0], out[:, :, 1])

    def test_header(self, tmp_path):
        path = tmp_path / "h.ppm"
        write_ppm(path, np.zeros((3, 9, 3)))
        assert path.read_bytes().startswith(b"P6\n9 3\n255\n")

    def test_deterministic_bytes(self, tmp_path):
        rng = np.random.default_rng(1)
        img = rng.uniform(size=(6, 6, 3))
        p1, p2 = tmp_path / "a.ppm", tmp_path / "b.ppm"
        write_ppm(p1, img)
        write_ppm(p2, img)
        assert p1.read_bytes() == p2.read_bytes()

    def test_truncated_rejected(self, tmp_path):
        path = tmp_path / "t.ppm"
        write_ppm(path, np.zeros((4, 4, 3)))
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(ArchiveFormatError):
            read_ppm(path)


class TestCsvJson:
    def test_csv_layout(self, tmp_path):
        path = tmp_path / "r.csv"
        write_csv(path, ["a", "b", "c"], [["x", 1.5, None], ["y", 2, 0.25]])
        assert path.read_text() == "a,b,c\nx,1.5,\ny,2,0.25\n"

    def test_float_repr_roundtrip(self, tmp_path):
        path = tmp_path / "f.csv"
        v = 1.0 / 3.0
        write_csv(path, ["v"], [[v]])
        assert float(path.read_text().splitlines()[1]) == v

    def test_json_sorted_deterministic(self, tmp_path):
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        write_json(p1, {"b": 1, "a": [1.5, None]})
        write_json(p2, {"a": [1.5, None], "b": 1})
        assert p1.read_bytes() == p2.read_bytes()


class TestSvg:
    def test_deterministic_and_well_formed(self, tmp_path):
        p1, p2 = tmp_path / "a.svg", tmp_path / "b.svg"
        series = {"vP": [0.9, 0.7, 0.4], "MCP": [0.8, 0.8, 0.6]}
        for p in (p1, p2):
            svg_line_plot(p, ["0", "1", "2"], series, title="t",
                          x_title="magnitude", y_title="confidence")
        text = p1.read_text()
        assert text.startswith("<svg ")
        assert text.count("<polyline") == 2
        assert p1.read_bytes() == p2.read_bytes()

    def test_series_clamped_to_range(self, tmp_path):
        path = tmp_path / "c.svg"
        svg_line_plot(path, ["0", "1"], {"s": [2.0, -1.0]}, y_range=(0.0, 1.0))
        assert "<polyline" in path.read_text()
