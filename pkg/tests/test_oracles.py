import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from gpival.confirmation import confirm
from gpival.kriging import ValuedSample
from gpival.oracles import (DEFAULT_MPE, SMOOTH_LIMIT, OracleField, gaussian_process_draw, grid_oracle, sine_field,
                            sine_wave, synthetic_device)
from gpival.pipeline import fit_gpi_model
from gpival.sampling import LhsPlan, generate_initial_sample, generate_test_sample
from gpival.space import box_space
from gpival.variogram import VariogramModel


def profile_fit(profile, seed):
    fld = synthetic_device(profile, seed)
    pts = generate_initial_sample(LhsPlan(fld.space, 400, seed))
    return fld, pts, fit_gpi_model(ValuedSample(pts, fld(pts)), fld.space).model


def relative_rise(model):
    """Rise of the fitted variogram across bins holding at least 40 pairs."""
    emp = model.empirical
    g = model.variogram(emp.lags[emp.bin_counts >= 40])
    return (g.max() - g.min()) / g.max()


def y_sin(y):
    return y * np.sin(2 * np.pi * y)


class TestSine:
    @pytest.mark.parametrize("x,expected", [((0, 0), 0.0), ((1, 1), 0.0)])
    def test_trivial(self, x, expected):
        assert sine_wave([x])[0] == pytest.approx(expected, abs=1e-15)

    def test_direct_evaluation(self):
        assert sine_wave([(0.77, 0.77)])[0] == pytest.approx(0.77 * np.sin(2 * np.pi * 0.77))
        assert sine_wave([(0.77, 0.77)])[0] == pytest.approx(-0.764, abs=5e-4)

    def test_noise_is_seeded_and_order_free(self, rng):
        fld = sine_field(0.001, 3)
        x = rng.random((30, 2))
        a = fld(x)
        np.testing.assert_array_equal(fld(x[::-1])[::-1], a)
        assert np.std(a - sine_wave(x)) == pytest.approx(0.001, rel=0.5)
        assert not np.array_equal(sine_field(0.001, 4)(x), a)

    def test_noise_free_is_deterministic(self, rng):
        x = rng.random((5, 2))
        np.testing.assert_array_equal(sine_field(0.0)(x), sine_wave(x))

    def test_negative_noise(self):
        with pytest.raises(ValueError):
            OracleField(box_space([(0, 1)]), lambda x: x[:, 0], -1.0)


@pytest.fixture(scope="module")
def grid():
    return grid_oracle(sine_field(0.0), 1000, t_lower=-0.75, t_upper=0.75)


class TestGrid:
    def test_extrema_against_scalar_optimum(self, grid):
        # along the radius the field is y sin(2 pi y) with y in [0, 1]
        low = minimize_scalar(y_sin, bounds=(0.5, 1), method="bounded", options={"xatol": 1e-10})
        high = minimize_scalar(lambda y: -y_sin(y), bounds=(0, 0.5), method="bounded",
                               options={"xatol": 1e-10})
        assert grid.minimum == pytest.approx(low.fun, abs=1e-5)
        assert grid.maximum == pytest.approx(-high.fun, abs=1e-5)
        assert grid.minimum == pytest.approx(-0.765, abs=2e-3)
        assert grid.maximum == pytest.approx(0.2896, abs=1e-4)

    def test_regions(self, grid):
        sub = grid.points[grid.sublevel]
        assert len(sub) > 0 and not grid.superlevel.any()
        radius = np.linalg.norm(sub, axis=1)
        assert np.all(np.abs(radius - 1.09) < 0.06)

    def test_sublevel_monotone(self):
        a = grid_oracle(sine_field(0.0), 200, t_lower=-0.7).sublevel
        b = grid_oracle(sine_field(0.0), 200, t_lower=-0.75).sublevel
        assert np.all(a[b]) and a.sum() > b.sum()

    def test_constant_field(self):
        fld = OracleField(box_space([(0, 1), (0, 2)]), lambda x: np.full(len(x), 2.5))
        g = grid_oracle(fld, 11)
        assert g.minimum == g.maximum == 2.5

    def test_budget(self):
        with pytest.raises(ValueError, match="budget"):
            grid_oracle(synthetic_device("structured", 0), 10)


class TestGaussianProcess:
    def test_seeded(self, rng):
        x = rng.random((20, 2))
        v = VariogramModel("exponential", 0.1, 1.0, 0.5)
        np.testing.assert_array_equal(gaussian_process_draw(x, v, 1),
                                      gaussian_process_draw(x, v, 1))

    def test_marginal_variance(self):
        v = VariogramModel("exponential", 0.1, 0.9, 0.5)
        x = np.array([[0.0, 0.0], [5.0, 5.0]])
        draws = np.array([gaussian_process_draw(x, v, s) for s in range(2000)])
        assert draws.var(axis=0) == pytest.approx([1.0, 1.0], rel=0.1)
        # points beyond the range are uncorrelated
        assert abs(np.corrcoef(draws.T)[0, 1]) < 0.1


class TestSyntheticDevice:
    @pytest.mark.parametrize("profile", ["structured", "noisy", "injected-fault"])
    def test_bit_reproducible(self, profile, rng):
        fld = synthetic_device(profile, 5)
        x = fld.space.lower + rng.random((10, fld.space.ndim)) * (fld.space.upper - fld.space.lower)
        np.testing.assert_array_equal(fld(x), synthetic_device(profile, 5)(x))

    def test_unknown_profile(self):
        with pytest.raises(ValueError):
            synthetic_device("quiet")

    @pytest.mark.parametrize("seed", range(5))
    def test_fault_center_exceeds_mpe(self, seed):
        fld = synthetic_device("injected-fault", seed)
        center = np.array(fld.info["fault_center"])
        value = fld.deterministic(center[None])[0]
        assert abs(value) >= fld.info["fault_height"] - SMOOTH_LIMIT > DEFAULT_MPE
        assert np.sign(value) == fld.info["fault_sign"]
        assert fld.pocket(center[None])[0]

    def test_noisy_profile_is_flat(self):
        for seed in range(5):
            assert relative_rise(profile_fit("noisy", seed)[2]) < 0.3

    def test_noisy_profile_confirms(self):
        passed = 0
        for seed in range(10):
            fld, pts, model = profile_fit("noisy", seed)
            test = generate_test_sample(LhsPlan(fld.space, 50, seed + 100, mode="test"), pts)
            passed += confirm(model, ValuedSample(test, fld(test))).overall
        assert passed >= 8

    def test_structured_sill_to_nugget(self, structured_fit):
        ratios = [structured_fit[1].model.variogram]
        ratios += [profile_fit("structured", seed)[2].variogram for seed in range(1, 20)]
        good = [v.sill >= 5 * v.nugget for v in ratios]
        assert sum(good) >= 16
        assert good[0]
