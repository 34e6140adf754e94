import re

import numpy as np
import pytest

from wlda.plotting import emit_accuracy_curves, emit_bars, emit_heatmap


def annotations(svg_text):
    return re.findall(r">\s*(-?\d+\.\d\d)\s*<", svg_text)


class TestHeatmap:
    def test_identity_annotations(self, tmp_path):
        path = emit_heatmap(np.eye(2), ["a", "b"], tmp_path / "eye.svg", kind="correlation")
        text = path.read_text()
        assert text.lstrip().startswith("<?xml")
        found = annotations(text)
        for value in ("1.00", "0.00"):
            assert found.count(value) >= 2

    def test_no_negative_zero(self, tmp_path):
        text = emit_heatmap(np.array([[-1e-9, 1.0]]), ["a", "b"], tmp_path / "z.svg").read_text()
        assert "-0.00" not in text

    def test_byte_identical(self, tmp_path):
        M = np.array([[0.3, -0.2], [0.1, 0.9]])
        a = emit_heatmap(M, ["x", "y"], tmp_path / "a.svg", title="t").read_bytes()
        b = emit_heatmap(M, ["x", "y"], tmp_path / "b.svg", title="t").read_bytes()
        assert a == b

    def test_nan_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="finite"):
            emit_heatmap(np.array([[np.nan]]), ["a"], tmp_path / "n.svg")
        assert not (tmp_path / "n.svg").exists()

    def test_unknown_kind(self, tmp_path):
        with pytest.raises(ValueError):
            emit_heatmap(np.eye(2), ["a", "b"], tmp_path / "k.svg", kind="rainbow")


class TestOtherFigures:
    def test_bars(self, tmp_path):
        path = emit_bars([[1.0, 2.0], [0.5, 0.1]], ["f1", "f2"], tmp_path / "b.svg", series=["c1", "c2"])
        assert "f1" in path.read_text()

    def test_bars_reject_inf(self, tmp_path):
        with pytest.raises(ValueError):
            emit_bars([np.inf], ["f"], tmp_path / "b.svg")

    def test_curves_skip_missing_points(self, tmp_path):
        path = emit_accuracy_curves([0.1, 0.2], {"WLDA": ([0.9, np.nan], [0.01, np.nan])}, tmp_path / "c.svg")
        assert "WLDA" in path.read_text()
