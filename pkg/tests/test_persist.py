import json

import numpy as np
import pytest

from gpival.kriging import GpiModel, ValuedSample
from gpival.persist import (FormatError, RunManifest, atomic_write, model_from_json,
                            model_to_json, sample_from_csv, sample_to_csv, sha256)
from gpival.pipeline import fit_gpi_model
from gpival.sampling import lhs_unit
from gpival.space import box_space
from gpival.variogram import AnisotropyMap, VariogramModel


class TestSampleCsv:
    def test_roundtrip_exact(self, rng):
        pts, z = rng.random((7, 3)), rng.normal(size=7)
        table = sample_from_csv(sample_to_csv(("a", "b", "c"), pts, z))
        np.testing.assert_array_equal(table.points, pts)
        np.testing.assert_array_equal(table.values, z)
        assert table.names == ("a", "b", "c") and table.ids[0] == "c0000"

    def test_request_has_empty_values(self, rng):
        table = sample_from_csv(sample_to_csv(("a",), rng.random((3, 1))))
        assert not table.measured
        with pytest.raises(FormatError, match="missing"):
            table.valued()

    @pytest.mark.parametrize("text,match", [
        ("", "header"),
        ("id,a,deviation_dB\n1,0,0\n", "header"),
        ("config_id,a,deviation_dB\n1,0\n", "line 2"),
        ("config_id,a,deviation_dB\n1,x,0\n", "line 2"),
        ("config_id,a,deviation_dB\n1,0,0\n1,1,0\n", "duplicate"),
    ])
    def test_malformed(self, text, match):
        with pytest.raises(FormatError, match=match):
            sample_from_csv(text)

    def test_dimension_names_checked(self):
        with pytest.raises(FormatError, match="do not match"):
            sample_from_csv("config_id,a,deviation_dB\n1,0,0\n", names=("b",))

    def test_blank_lines_skipped(self):
        assert len(sample_from_csv("config_id,a,deviation_dB\n1,0,0\n\n2,1,1\n").ids) == 2


class TestModelJson:
    def test_roundtrip_predicts_identically(self, rng):
        x = lhs_unit(40, 2, 0)
        z = np.sin(4 * x[:, 0]) + x[:, 1]
        model = fit_gpi_model(ValuedSample(x, z), box_space([(0, 1), (0, 1)])).model
        again = model_from_json(model_to_json(model))
        q = rng.random((25, 2))
        a, b = model.predict(q), again.predict(q)
        np.testing.assert_array_equal(a.mean, b.mean)
        np.testing.assert_array_equal(a.inflated_std, b.inflated_std)
        assert again.variogram == model.variogram
        assert again.space.names == model.space.names
        assert again.outliers == model.outliers

    def test_without_space(self):
        s = ValuedSample([[0.0], [1.0], [2.0]], [1.0, 2.0, 0.5])
        m = GpiModel(s, AnisotropyMap.identity(1), VariogramModel("exponential", 0, 1, 1), 0.1)
        again = model_from_json(model_to_json(m))
        assert again.space is None and again.fit_nrmse == 0.1

    @pytest.mark.parametrize("doc,match", [({"format": "other"}, "not a"),
                                           ({"format": "gpival.model", "version": 9},
                                            "version"),
                                           ({"format": "gpival.model", "version": 1},
                                            "malformed")])
    def test_rejects(self, doc, match):
        with pytest.raises(FormatError, match=match):
            model_from_json(json.dumps(doc))


class TestFiles:
    def test_atomic_write_and_hash(self, tmp_path):
        p = tmp_path / "sub" / "out.txt"
        atomic_write(p, "hello\n")
        assert p.read_text() == "hello\n"
        assert sha256(p) == "5891b5b522d5df086d0ff0b110fbd9d21bb4fc7163af34d08286a2e846f6be03"
        assert list(p.parent.iterdir()) == [p]

    def test_manifest(self, tmp_path):
        src = tmp_path / "in.csv"
        src.write_text("x")
        man = RunManifest("fit", {"shape": "gaussian"}, {"seed": 3})
        man.add_input(src)
        path = man.write(tmp_path / "model.json")
        d = json.loads(path.read_text())
        assert path.name == "model.json.manifest.json"
        assert d["inputs"][str(src)] == sha256(src)
        assert d["seeds"] == {"seed": 3} and d["timestamp"]
