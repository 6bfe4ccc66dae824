"""Desk-scale benchmarks: the sine-wave example on the unit square and the
discrimination power of model confirmation on Gaussian-process draws."""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .confirmation import confirm
from .kriging import GpiModel, ValuedSample
from .oracles import gaussian_process_draw, grid_oracle, sine_field, sine_wave
from .pipeline import fit_gpi_model
from .sampling import lhs_unit
from .search import DeltaMeasure, SearchParams, run_critical_search
from .variogram import AnisotropyMap, VariogramModel, empirical_variogram, fit, nrmse

REFERENCE = {"range": 0.97, "sill": 0.22, "nugget": 0.0}
TOLERANCE = {"range": 0.15, "sill": 0.05, "nugget": 0.01}
Z99 = 2.576
DISCRIMINATION_FIELD = VariogramModel("exponential", 0.1, 0.9, 0.5)


def sine_model(seed: int, size: int = 50, noise_std: float = 0.001) -> GpiModel:
    """Isotropic Gaussian model fitted to a seeded noisy LHS sample."""
    fld = sine_field(noise_std, seed)
    pts = lhs_unit(size, 2, seed)
    z = fld(pts)
    emp = empirical_variogram(pts, z)
    v = fit(emp, "gaussian", "free")
    return GpiModel(ValuedSample(pts, z), AnisotropyMap.identity(2), v, nrmse(v, emp),
                    fld.space, emp)


def variogram_ok(model: GpiModel) -> bool:
    v = model.variogram
    return bool(abs(v.range - REFERENCE["range"]) <= TOLERANCE["range"]
                and abs(v.sill - REFERENCE["sill"]) <= TOLERANCE["sill"]
                and v.nugget <= TOLERANCE["nugget"])


def diagonal_coverage(model: GpiModel, points: int = 200) -> float:
    """Share of diagonal points whose 99% interval covers the noiseless field."""
    t = np.linspace(0.0, 1.0, points)
    q = np.column_stack([t, t])
    pred = model.predict(q)
    return float(np.mean(np.abs(pred.mean - sine_wave(q)) <= Z99 * pred.inflated_std))


def search_recall(model: GpiModel, seed: int, sensitivity: float = 0.1,
                  iterations: int = 8, region_level: float = -0.70,
                  resolution: int = 1001) -> dict:
    """Run the search with thresholds +-0.75 and measure how far reported points
    lie from the dense-grid region ``{f <= region_level}``."""
    params = SearchParams(-0.75, 0.75, sensitivity, 0.1, iterations)
    rep = run_critical_search(model, params, seed)
    grid = grid_oracle(sine_field(0.0), resolution, t_lower=region_level)
    region = grid.points[grid.sublevel]
    dist = cKDTree(region).query(rep.points)[0] if len(rep) else np.empty(0)
    limit = DeltaMeasure(model.variogram, sensitivity)(0.05)
    return {
        "rows": len(rep),
        "population": rep.population,
        "max_distance": float(dist.max()) if dist.size else None,
        "limit": float(limit),
        "ok": bool(len(rep) > 0 and np.all(dist <= limit)),
    }


def sine_benchmark(seed: int = 0, size: int = 50, sensitivity: float = 0.1,
                   iterations: int = 8) -> dict:
    m = sine_model(seed, size)
    v = m.variogram
    return {
        "seed": seed,
        "variogram": v.to_dict(),
        "fit_nrmse": m.fit_nrmse,
        "variogram_ok": variogram_ok(m),
        "coverage_99": diagonal_coverage(m),
        "search": search_recall(m, seed, sensitivity, iterations),
    }


def discrimination_trial(seed: int, field: VariogramModel = DISCRIMINATION_FIELD,
                         sample_size: int = 200, test_size: int = 100) -> dict:
    """Confirmation outcomes for one matched and two mismatched model/test pairs.

    One Gaussian-process draw over an LHS model sample and uniform test points
    on the unit square.  ``matched`` confirms the isotropic fit on its own
    test data; ``range_x4`` uses the fitted variogram with four times the
    range; ``residual_x2`` doubles the test deviations from the kriged mean.
    Values are ``True`` when confirmation passes.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    s = lhs_unit(sample_size, 2, seed)
    t = rng.random((test_size, 2))
    z = gaussian_process_draw(np.vstack([s, t]), field, seed)
    model = fit_gpi_model(ValuedSample(s, z[:sample_size]), isotropic=True).model
    test = ValuedSample(t, z[sample_size:])
    v = model.variogram
    wide = VariogramModel(v.shape, v.nugget, v.sill, 4.0 * v.range)
    off = GpiModel(model.sample, model.anisotropy, wide, nrmse(wide, model.empirical),
                   None, model.empirical)
    mean = model.mean(t)
    scaled = ValuedSample(t, mean + 2.0 * (test.values - mean))
    return {
        "matched": confirm(model, test).overall,
        "range_x4": confirm(off, test).overall,
        "residual_x2": confirm(model, scaled).overall,
    }
