import csv
import io

import numpy as np
import pytest

from conftest import DATA
from gpival.kriging import ValuedSample
from gpival.pipeline import StageError, fit_gpi_model, verify_measurements
from gpival.sampling import lhs_unit
from gpival.search import SAR_COLUMNS, CriticalReport, exceedance_probability
from gpival.space import box_space, build_sar_array_space

PUBLISHED = DATA / "critical_configurations.csv"


@pytest.fixture(scope="module")
def published():
    with open(PUBLISHED, newline="") as fh:
        return list(csv.DictReader(fh))


def column(rows, name):
    return np.array([float(r[name]) for r in rows])


class TestVerify:
    def test_boundary_inclusive(self):
        res = verify_measurements(["a", "b"], [1.5, -1.5], 1.5)
        assert res.passed

    def test_failures_listed(self):
        res = verify_measurements(["a", "b", "c"], [0.2, -1.6, 2.0], 1.5)
        assert not res.passed
        assert [r.config_id for r in res.failures] == ["b", "c"]
        assert "2 of 3 rows exceed" in res.table()

    def test_per_row_limits(self):
        assert verify_measurements(["a", "b"], [1.6, 1.6], [1.7, 1.5]).failures[0].config_id == "b"

    def test_empty_passes(self):
        assert verify_measurements([], [], 1.5).passed

    @pytest.mark.parametrize("measured,limit", [([np.nan], 1.0), ([1.0], -1.0)])
    def test_invalid(self, measured, limit):
        with pytest.raises(ValueError):
            verify_measurements(["a"], measured, limit)


class TestFit:
    def test_isotropic_identity_map(self):
        x = lhs_unit(60, 2, 0)
        res = fit_gpi_model(ValuedSample(x, np.sin(3 * x).sum(axis=1)), isotropic=True)
        assert res.anisotropy is None
        np.testing.assert_array_equal(res.model.anisotropy.scale, 1.0)
        assert set(res.diagnostics()) >= {"variogram", "fit_nrmse", "outliers", "warnings"}

    def test_outliers_kept_in_system(self):
        x = lhs_unit(80, 2, 1)
        z = np.sin(3 * x[:, 0])
        z[5] = 50.0
        res = fit_gpi_model(ValuedSample(x, z), isotropic=True)
        assert res.model.outliers == (5,)
        assert res.diagnostics()["outliers"] == ["5"]
        assert res.model.mean(x[5:6])[0] == pytest.approx(50.0, abs=1e-6)

    def test_dimension_mismatch(self):
        x = lhs_unit(20, 2, 0)
        with pytest.raises(StageError) as err:
            fit_gpi_model(ValuedSample(x, x[:, 0]), box_space([(0, 1)]))
        assert err.value.stage == "input"

    def test_stage_named_on_failure(self):
        x = np.column_stack([np.linspace(0, 1, 20), np.zeros(20)])
        with pytest.raises(StageError) as err:
            fit_gpi_model(ValuedSample(x, x[:, 0]))
        assert err.value.stage == "anisotropy"

    def test_structured_device(self, structured_fit):
        _, res = structured_fit
        assert res.model.fit_nrmse <= 0.25
        assert len(res.anisotropy.directional) == 8


class TestPublishedCriticalTable:
    def test_shape_and_order(self, published):
        assert len(published) == 44
        prob = column(published, "failure_prob_pct")
        assert np.all(np.diff(prob) <= 0) and prob.min() >= 5.0

    def test_rows_are_measurable_configurations(self, published):
        space = build_sar_array_space()
        for r in published:
            pt = [float(r[n]) for n in space.names]
            assert space.is_valid(pt, strict=True), r
            assert space.describe(pt)["antenna"] == r["antenna"]

    def test_report_schema_roundtrip(self, published):
        names = SAR_COLUMNS[1:]
        rep = CriticalReport(
            names, np.array([[float(r[n]) for n in names] for r in published]),
            column(published, "delta_dB"), column(published, "model_error_dB"),
            column(published, "failure_prob_pct") / 100, tuple(r["antenna"] for r in published))
        back = list(csv.DictReader(io.StringIO(rep.to_csv())))
        assert tuple(back[0]) == SAR_COLUMNS + ("delta_dB", "model_error_dB", "failure_prob")
        for src, got in zip(published, back):
            assert got["antenna"] == src["antenna"]
            for n in names + ("delta_dB", "model_error_dB"):
                assert float(got[n]) == float(src[n])
            assert float(got["failure_prob"]) == pytest.approx(float(src["failure_prob_pct"]) / 100)

    def test_probabilities_follow_from_mpe_15(self, published):
        d, e = column(published, "delta_dB"), column(published, "model_error_dB")
        published = column(published, "failure_prob_pct") / 100
        errors = {m: np.abs(exceedance_probability(d, e, -m, m) - published).max()
                  for m in (1.5, 1.6, 1.7)}
        assert errors[1.5] < 0.002
        assert errors[1.5] < errors[1.6] < errors[1.7]

    @pytest.mark.parametrize("limit", [1.5, 1.7])
    def test_kriged_deviations_within_mpe(self, published, limit):
        ids = [f"row{i}" for i in range(len(published))]
        assert verify_measurements(ids, column(published, "delta_dB"), limit).passed

    def test_tighter_mpe_flags_first_row(self, published):
        ids = [f"row{i}" for i in range(len(published))]
        res = verify_measurements(ids, column(published, "delta_dB"), 1.2)
        assert [r.config_id for r in res.failures] == ["row0"]
