"""Ordinary kriging under a GPI model ``(sample, iota, gamma)``.

The kriging system is the variogram matrix of the transformed sample points
bordered by the unbiasedness row and column (one Lagrange multiplier).  The
whole sample enters every solve; the LU factorization is computed once per
model and reused.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sl
from scipy.spatial.distance import cdist, pdist, squareform

from .variogram import AnisotropyMap, EmpiricalVariogram, VariogramModel

PIVOT_TOL = 1e-12
NUGGET_FLOOR = 1e-5


class KrigingError(ValueError):
    pass


@dataclass(frozen=True)
class ValuedSample:
    """Configuration points with their measured deviations (dB)."""

    points: np.ndarray
    values: np.ndarray
    ids: tuple = ()

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        z = np.asarray(self.values, dtype=float).ravel()
        if len(pts) != len(z):
            raise KrigingError("points and values differ in length")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(z)):
            raise KrigingError("sample contains non-finite entries")
        ids = tuple(str(i) for i in self.ids) if len(self.ids) else tuple(str(i) for i in range(len(z)))
        if len(ids) != len(z):
            raise KrigingError("one id per point required")
        if len(set(ids)) != len(ids):
            raise KrigingError("sample ids must be unique")
        if len({tuple(p) for p in pts}) != len(pts):
            raise KrigingError("sample points must be pairwise distinct")
        pts.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", z)
        object.__setattr__(self, "ids", ids)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def ndim(self) -> int:
        return self.points.shape[1]

    def subset(self, mask) -> "ValuedSample":
        idx = np.flatnonzero(np.asarray(mask))
        return ValuedSample(self.points[idx], self.values[idx], tuple(self.ids[i] for i in idx))


@dataclass(frozen=True)
class Prediction:
    """Kriged mean with kriging and inflated standard errors."""

    mean: np.ndarray
    kriging_std: np.ndarray
    inflated_std: np.ndarray


@dataclass
class Diagnostics:
    negative_variance_clamps: int = 0


@dataclass(frozen=True, eq=False)
class GpiModel:
    """Gaussian-process interpolator defined by the triple (sample, iota, gamma).

    Parameters
    ----------
    sample : ValuedSample
    anisotropy : AnisotropyMap
        Map into the isotropic space on which ``variogram`` lives.
    variogram : VariogramModel
    fit_nrmse : float
        Goodness of fit of ``variogram``; inflates the kriging error.
    space : ConfigSpace, optional
    empirical : EmpiricalVariogram, optional
        The isotropic empirical variogram the fit was made on.
    outliers : tuple of int
        Sample indices excluded from the variogram but kept in the solve.
    nugget_floor : float
        Relative lower bound on the nugget used only inside the linear
        system, ``max(n, nugget_floor * (n + s))``.  Keeps near-zero-nugget
        Gaussian systems from interpolating measurement noise.
    """

    sample: ValuedSample
    anisotropy: AnisotropyMap
    variogram: VariogramModel
    fit_nrmse: float = 0.0
    space: object = None
    empirical: EmpiricalVariogram | None = None
    outliers: tuple = ()
    nugget_floor: float = NUGGET_FLOOR
    diagnostics: Diagnostics = field(default_factory=Diagnostics, compare=False)

    def __post_init__(self):
        if len(self.sample) == 0:
            raise KrigingError("model sample is empty")
        if self.anisotropy.ndim != self.sample.ndim:
            raise KrigingError("anisotropy dimension does not match the sample")
        if not (np.isfinite(self.fit_nrmse) and self.fit_nrmse >= 0):
            raise KrigingError("fit_nrmse must be finite and >= 0")
        if self.nugget_floor < 0:
            raise KrigingError("nugget_floor must be >= 0")
        object.__setattr__(self, "outliers", tuple(int(i) for i in self.outliers))

    @cached_property
    def system_variogram(self) -> VariogramModel:
        v = self.variogram
        n = max(v.nugget, self.nugget_floor * v.plateau)
        return VariogramModel(v.shape, n, v.sill, v.range)

    @cached_property
    def iso_points(self) -> np.ndarray:
        return self.anisotropy.apply(self.sample.points)

    @cached_property
    def _system(self):
        k = len(self.sample)
        gam = self.system_variogram(squareform(pdist(self.iso_points)))
        a = np.ones((k + 1, k + 1))
        a[:k, :k] = gam
        a[k, k] = 0.0
        lu, piv = sl.lu_factor(a, check_finite=False)
        pivots = np.abs(np.diag(lu))
        if pivots.min() <= PIVOT_TOL * max(pivots.max(), 1.0):
            raise KrigingError(f"singular kriging matrix; {self._closest_pair()}")
        return gam, (lu, piv)

    def _closest_pair(self) -> str:
        if len(self.sample) < 2:
            return "single-point sample"
        d = squareform(pdist(self.iso_points))
        np.fill_diagonal(d, np.inf)
        i, j = np.unravel_index(np.argmin(d), d.shape)
        return (f"nearest pair {self.sample.ids[i]!r} and {self.sample.ids[j]!r} "
                f"at isotropic distance {d[i, j]:.3g}")

    @cached_property
    def _dual(self) -> np.ndarray:
        _, fac = self._system
        rhs = np.append(self.sample.values, 0.0)
        return sl.lu_solve(fac, rhs, check_finite=False)

    def mean(self, x) -> np.ndarray:
        """Kriged mean only, via the dual form; O(k) per query point."""
        q = np.atleast_2d(np.asarray(x, dtype=float))
        if q.shape[1] != self.sample.ndim:
            raise KrigingError(f"query has {q.shape[1]} coordinates, model has {self.sample.ndim}")
        c = self._dual
        k = len(self.sample)
        g = self.system_variogram(cdist(self.anisotropy.apply(q), self.iso_points))
        return g @ c[:k] + c[k]

    def weights(self, x) -> np.ndarray:
        """Kriging weights, shape (k, m); the Lagrange row is dropped."""
        q = np.atleast_2d(np.asarray(x, dtype=float))
        _, fac = self._system
        k = len(self.sample)
        rhs = np.ones((k + 1, len(q)))
        rhs[:k] = self.system_variogram(cdist(self.iso_points, self.anisotropy.apply(q)))
        return sl.lu_solve(fac, rhs, check_finite=False)[:k]

    def predict(self, x) -> Prediction:
        """Vectorized ordinary kriging at the rows of ``x``."""
        q = np.atleast_2d(np.asarray(x, dtype=float))
        if q.shape[1] != self.sample.ndim:
            raise KrigingError(f"query has {q.shape[1]} coordinates, model has {self.sample.ndim}")
        gam, fac = self._system
        k = len(self.sample)
        g = self.system_variogram(cdist(self.iso_points, self.anisotropy.apply(q)))
        rhs = np.vstack([g, np.ones(len(q))])
        w = sl.lu_solve(fac, rhs, check_finite=False)[:k]
        mean = w.T @ self.sample.values
        var = -np.einsum("iq,iq->q", w, gam @ w) + 2.0 * np.einsum("iq,iq->q", w, g)
        neg = var < 0
        if neg.any():
            self.diagnostics.negative_variance_clamps += int(neg.sum())
            var = np.where(neg, 0.0, var)
        ek = np.sqrt(var)
        return Prediction(mean, ek, ek * (1.0 + self.fit_nrmse))

    def with_values(self, values) -> "GpiModel":
        """Same geometry and variogram with replaced sample values."""
        s = ValuedSample(self.sample.points, values, self.sample.ids)
        return GpiModel(s, self.anisotropy, self.variogram, self.fit_nrmse, self.space,
                        self.empirical, self.outliers, self.nugget_floor)


def krige(model: GpiModel, x) -> Prediction:
    """Ordinary kriging prediction at a single point or a batch of points."""
    return model.predict(x)


def standardized_residuals(model: GpiModel, test: ValuedSample) -> np.ndarray:
    """``(z - mean) / inflated_std`` for every test point."""
    pred = model.predict(test.points)
    zero = np.flatnonzero(pred.inflated_std <= 0)
    if zero.size:
        i = zero[0]
        raise KrigingError(
            f"zero model error at test point {test.ids[i]!r} {test.points[i].tolist()}; "
            "test points must not coincide with the model sample"
        )
    return (test.values - pred.mean) / pred.inflated_std
