"""Semivariograms: empirical estimation, theoretical models, fitting, anisotropy.

All three model shapes share the parametrization (nugget ``n``, sill ``s``,
range ``r``) where ``s`` is the plateau height above the nugget, so the total
plateau is ``n + s``.  Every model is exactly zero at lag 0; the nugget is the
limit from the right.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.spatial.distance import pdist

EXPONENTIAL = "exponential"
GAUSSIAN = "gaussian"
SPHERICAL = "spherical"
SHAPES = (EXPONENTIAL, GAUSSIAN, SPHERICAL)

ISOTROPIC_BINS = 50
DIRECTIONAL_BINS = 25
LAG_FRACTION = 0.75
ANGULAR_TOLERANCE = 22.5
FIT_STARTS = 5
MIN_POPULATED_BINS = 3
MIN_DIRECTIONAL_PAIRS = 250


class VariogramError(ValueError):
    pass


def _unit_structure(shape: str, u: np.ndarray) -> np.ndarray:
    if shape == EXPONENTIAL:
        return -np.expm1(-3.0 * u)
    if shape == GAUSSIAN:
        return -np.expm1(-4.0 * u * u)
    v = np.minimum(u, 1.0)
    return 1.5 * v - 0.5 * v**3


@dataclass(frozen=True)
class VariogramModel:
    """Isotropic semivariogram ``gamma(h)`` of a given shape.

    Parameters
    ----------
    shape : {"exponential", "gaussian", "spherical"}
    nugget : float
        Jump at the origin, ``>= 0``.
    sill : float
        Plateau height above the nugget, ``> 0``.
    range : float
        Characteristic lag, ``> 0``.
    """

    shape: str
    nugget: float
    sill: float
    range: float

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise VariogramError(f"unknown variogram shape {self.shape!r}")
        if not (np.isfinite(self.nugget) and self.nugget >= 0):
            raise VariogramError("nugget must be finite and >= 0")
        if not (np.isfinite(self.sill) and self.sill > 0):
            raise VariogramError("sill must be finite and > 0")
        if not (np.isfinite(self.range) and self.range > 0):
            raise VariogramError("range must be finite and > 0")

    @property
    def plateau(self) -> float:
        return self.nugget + self.sill

    def structure(self, h) -> np.ndarray:
        """Normalized structural part in [0, 1], without nugget or zero-lag rule."""
        return _unit_structure(self.shape, np.asarray(h, dtype=float) / self.range)

    def __call__(self, h):
        h = np.asarray(h, dtype=float)
        if np.any(h < 0):
            raise VariogramError("lag must be >= 0")
        out = self.nugget + self.sill * self.structure(h)
        out = np.where(h == 0, 0.0, out)
        return out if out.ndim else float(out)

    def inverse(self, g):
        """Lag ``h`` with ``gamma(h) = g`` for ``g`` strictly inside ``(n, n + s)``."""
        g = np.asarray(g, dtype=float)
        t = (g - self.nugget) / self.sill
        if np.any(~((t > 0) & (t < 1))):
            raise VariogramError(
                f"semivariance must lie strictly inside ({self.nugget}, {self.plateau})"
            )
        if self.shape == EXPONENTIAL:
            h = -self.range / 3.0 * np.log1p(-t)
        elif self.shape == GAUSSIAN:
            h = 0.5 * self.range * np.sqrt(-np.log1p(-t))
        else:
            # root of u^3 - 3u + 2t = 0 lying in [0, 1]
            u = 2.0 * np.cos((np.arccos(-t) - 2.0 * np.pi) / 3.0)
            h = self.range * np.clip(u, 0.0, 1.0)
        return h if h.ndim else float(h)

    def to_dict(self) -> dict:
        return {"shape": self.shape, "nugget": self.nugget, "sill": self.sill, "range": self.range}

    @classmethod
    def from_dict(cls, d: dict) -> "VariogramModel":
        return cls(d["shape"], float(d["nugget"]), float(d["sill"]), float(d["range"]))


def eval_model(model: VariogramModel, h):
    return model(h)


def inverse_model(model: VariogramModel, g):
    return model.inverse(g)


@dataclass(frozen=True)
class EmpiricalVariogram:
    """Binned Matheron semivariance estimate.

    Empty bins carry a mean of 0 and a count of 0; they are ignored by
    :func:`fit` and :func:`nrmse`.
    """

    bin_edges: np.ndarray
    bin_means: np.ndarray
    bin_counts: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        means = np.asarray(self.bin_means, dtype=float)
        counts = np.asarray(self.bin_counts, dtype=np.int64)
        if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
            raise VariogramError("bin edges must be strictly ascending")
        if means.shape != (len(edges) - 1,) or counts.shape != means.shape:
            raise VariogramError("need one mean and one count per bin")
        if np.any(means < 0) or np.any(counts < 0):
            raise VariogramError("bin means and counts must be >= 0")
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "bin_means", means)
        object.__setattr__(self, "bin_counts", counts)

    @property
    def lags(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def populated(self) -> np.ndarray:
        return self.bin_counts > 0

    @property
    def max_lag(self) -> float:
        return float(self.bin_edges[-1])

    def coverage(self, min_count: int = 40) -> float:
        """Fraction of bins holding at least ``min_count`` pairs."""
        return float(np.mean(self.bin_counts >= min_count))

    def to_dict(self) -> dict:
        return {
            "bin_edges": self.bin_edges.tolist(),
            "bin_means": self.bin_means.tolist(),
            "bin_counts": self.bin_counts.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EmpiricalVariogram":
        return cls(np.array(d["bin_edges"]), np.array(d["bin_means"]), np.array(d["bin_counts"]))


def _bin(dist, sqdiff, max_lag, bins) -> EmpiricalVariogram:
    if bins < 1:
        raise VariogramError("need at least one bin")
    if not max_lag > 0:
        raise VariogramError("all bins empty: no positive lag")
    edges = np.linspace(0.0, max_lag, bins + 1)
    keep = dist <= max_lag
    dist, sqdiff = dist[keep], sqdiff[keep]
    idx = np.minimum((dist / max_lag * bins).astype(np.int64), bins - 1)
    counts = np.bincount(idx, minlength=bins)
    sums = np.bincount(idx, weights=sqdiff, minlength=bins)
    if counts.sum() == 0:
        raise VariogramError("all bins empty")
    means = np.divide(sums, 2.0 * counts, out=np.zeros(bins), where=counts > 0)
    return EmpiricalVariogram(edges, means, counts)


def _prepare(points, values, metric):
    pts = np.asarray(points, dtype=float)
    z = np.asarray(values, dtype=float).ravel()
    if pts.ndim == 1:
        pts = pts[:, None]
    if len(pts) != len(z):
        raise VariogramError("points and values differ in length")
    if len(pts) < 2:
        raise VariogramError("need at least two points")
    if metric is not None:
        pts = metric.apply(pts)
    return pts, z


def empirical_variogram(points, values, metric=None, bins: int = ISOTROPIC_BINS,
                        lag_fraction: float = LAG_FRACTION) -> EmpiricalVariogram:
    """Matheron estimator over ``bins`` equal bins of ``[0, lag_fraction * diameter]``.

    Parameters
    ----------
    points : array_like, shape (k, n)
    values : array_like, shape (k,)
    metric : AnisotropyMap, optional
        Applied to the points before distances are taken.
    """
    pts, z = _prepare(points, values, metric)
    dist = pdist(pts)
    sqdiff = pdist(z[:, None], "sqeuclidean")
    return _bin(dist, sqdiff, lag_fraction * dist.max(), bins)


def directional_variogram(points, values, axis: int, tolerance: float = ANGULAR_TOLERANCE,
                          bins: int = DIRECTIONAL_BINS,
                          lag_fraction: float = LAG_FRACTION) -> EmpiricalVariogram:
    """Empirical variogram from pairs whose separation lies within ``tolerance``
    degrees of coordinate ``axis``.

    The lag window is ``lag_fraction`` of the largest qualifying separation.
    Points are expected to be prescaled already.
    """
    pts, z = _prepare(points, values, None)
    if not 0 <= axis < pts.shape[1]:
        raise VariogramError(f"axis {axis} out of range")
    if not 0 < tolerance <= 90:
        raise VariogramError("angular tolerance must be in (0, 90] degrees")
    i, j = np.triu_indices(len(pts), k=1)
    sep = pts[i] - pts[j]
    dist = np.sqrt(np.einsum("ij,ij->i", sep, sep))
    nz = dist > 0
    cos = np.zeros_like(dist)
    cos[nz] = np.abs(sep[nz, axis]) / dist[nz]
    ok = nz & (cos >= np.cos(np.radians(tolerance)) - 1e-12)
    if not ok.any():
        raise VariogramError(f"no lag pairs within {tolerance} degrees of axis {axis}")
    dist = dist[ok]
    sqdiff = (z[i[ok]] - z[j[ok]]) ** 2
    return _bin(dist, sqdiff, lag_fraction * dist.max(), bins)


SILL_CAP = 10.0


def fit(emp: EmpiricalVariogram, shape: str = GAUSSIAN, nugget_mode: str = "free",
        starts: int = FIT_STARTS) -> VariogramModel:
    """Count-weighted least-squares fit of ``(n, s, r)``.

    The range is bounded by the largest binned lag, the nugget by the largest
    bin mean and the sill by ten times that.  Several starting ranges are tried and the lowest cost
    wins.
    """
    if shape not in SHAPES:
        raise VariogramError(f"unknown variogram shape {shape!r}")
    if nugget_mode not in ("free", "fixed_zero"):
        raise VariogramError("nugget_mode must be 'free' or 'fixed_zero'")
    ok = emp.populated
    if ok.sum() < MIN_POPULATED_BINS:
        raise VariogramError(f"need at least {MIN_POPULATED_BINS} populated bins, got {int(ok.sum())}")
    h, y = emp.lags[ok], emp.bin_means[ok]
    w = np.sqrt(emp.bin_counts[ok].astype(float))
    ymax = float(y.max())
    if ymax <= 0:
        raise VariogramError("degenerate variogram: all semivariances are zero")
    rmax = emp.max_lag
    rmin = 1e-6 * rmax
    smin = 1e-9 * ymax
    free = nugget_mode == "free"

    def model_values(p):
        n = p[2] if free else 0.0
        return n + p[1] * _unit_structure(shape, h / p[0])

    lo = [rmin, smin] + ([0.0] if free else [])
    hi = [rmax, SILL_CAP * ymax] + ([ymax] if free else [])
    best = None
    for r0 in np.geomspace(0.05, 0.8, starts) * rmax:
        x0 = [r0, 0.5 * ymax] + ([0.05 * float(y.min())] if free else [])
        try:
            res = least_squares(lambda p: w * (model_values(p) - y), x0, bounds=(lo, hi),
                                method="trf", x_scale="jac")
        except (ValueError, np.linalg.LinAlgError) as exc:  # pragma: no cover
            raise VariogramError(f"variogram fit failed: {exc}") from exc
        if res.status > 0 and (best is None or res.cost < best.cost - 1e-15 * (1 + best.cost)):
            best = res
    if best is None:
        raise VariogramError("variogram fit did not converge")
    r, s = float(best.x[0]), float(best.x[1])
    n = float(best.x[2]) if free else 0.0
    return VariogramModel(shape, max(n, 0.0), s, r)


def nrmse(model: VariogramModel, emp: EmpiricalVariogram) -> float:
    """RMS misfit over populated bins divided by the mean empirical semivariance."""
    ok = emp.populated
    if not ok.any():
        raise VariogramError("no populated bins")
    yhat = emp.bin_means[ok]
    m = yhat.mean()
    if m <= 0:
        raise VariogramError("mean empirical semivariance is zero")
    y = model.nugget + model.sill * model.structure(emp.lags[ok])
    return float(np.sqrt(np.mean((y - yhat) ** 2)) / m)


@dataclass(frozen=True)
class AnisotropyMap:
    """Diagonal map ``iota(x) = x / (r_i * s_i)``.

    ``base_scale`` holds the per-dimension standard deviations ``s_i`` and
    ``ranges`` the directional ranges ``r_i`` measured in prescaled units.
    """

    base_scale: np.ndarray
    ranges: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.base_scale, dtype=float).ravel()
        r = np.asarray(self.ranges, dtype=float).ravel()
        if b.shape != r.shape or b.size == 0:
            raise VariogramError("base_scale and ranges must be equal-length vectors")
        if np.any(~np.isfinite(b)) or np.any(b <= 0) or np.any(~np.isfinite(r)) or np.any(r <= 0):
            raise VariogramError("anisotropy diagonal entries must be finite and > 0")
        object.__setattr__(self, "base_scale", b)
        object.__setattr__(self, "ranges", r)

    @classmethod
    def identity(cls, ndim: int) -> "AnisotropyMap":
        return cls(np.ones(ndim), np.ones(ndim))

    @property
    def ndim(self) -> int:
        return self.base_scale.size

    @property
    def scale(self) -> np.ndarray:
        return self.base_scale * self.ranges

    def apply(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) / self.scale

    def invert(self, u) -> np.ndarray:
        return np.asarray(u, dtype=float) * self.scale

    def to_dict(self) -> dict:
        return {"base_scale": self.base_scale.tolist(), "ranges": self.ranges.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "AnisotropyMap":
        return cls(np.array(d["base_scale"]), np.array(d["ranges"]))


@dataclass(frozen=True)
class AnisotropyFit:
    """Result of :func:`build_anisotropy`."""

    map: AnisotropyMap
    directional: tuple
    variograms: tuple
    warnings: tuple = field(default=())
    tolerances: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "map": self.map.to_dict(),
            "directional": [m.to_dict() for m in self.directional],
            "tolerances": list(self.tolerances),
            "warnings": list(self.warnings),
        }


def build_anisotropy(points, values, shape: str = GAUSSIAN, nugget_mode: str = "free",
                     tolerance: float = ANGULAR_TOLERANCE, bins: int = DIRECTIONAL_BINS,
                     min_pairs: int = MIN_DIRECTIONAL_PAIRS, tolerance_step: float = 7.5,
                     max_tolerance: float = 60.0, sill_spread: float = 0.5,
                     nugget_ratio: float = 0.2) -> AnisotropyFit:
    """Prescale by per-dimension standard deviations and fit one directional
    variogram per axis; the fitted ranges complete the diagonal map.

    In many dimensions a narrow cone around an axis holds few pairs, so the
    tolerance of an axis is widened by ``tolerance_step`` until at least
    ``min_pairs`` pairs are binned or ``max_tolerance`` is reached.

    ``warnings`` flags widened cones, sills differing by more than
    ``sill_spread`` (relative to the smallest) and nuggets above
    ``nugget_ratio`` of the plateau.
    """
    pts, z = _prepare(points, values, None)
    s0 = pts.std(axis=0)
    if np.any(s0 <= 0):
        bad = np.flatnonzero(s0 <= 0).tolist()
        raise VariogramError(f"sample does not span dimensions {bad}")
    pre = pts / s0
    models, emps, warnings = [], [], []
    tolerances = []
    for axis in range(pts.shape[1]):
        tol = tolerance
        try:
            while True:
                try:
                    emp = directional_variogram(pre, z, axis, tol, bins)
                    enough = emp.bin_counts.sum() >= min_pairs
                except VariogramError:
                    if tol >= max_tolerance:
                        raise
                    enough = False
                if enough or tol >= max_tolerance:
                    break
                tol = min(tol + tolerance_step, max_tolerance)
            m = fit(emp, shape, nugget_mode)
        except VariogramError as exc:
            raise VariogramError(f"directional fit failed on axis {axis}: {exc}") from exc
        if tol > tolerance:
            warnings.append(f"axis {axis}: angular tolerance widened to {tol:g} degrees")
        tolerances.append(tol)
        models.append(m)
        emps.append(emp)
    sills = np.array([m.plateau for m in models])
    if sills.max() > (1 + sill_spread) * sills.min():
        warnings.append(
            f"directional sills differ by more than {sill_spread:.0%}: "
            + ", ".join(f"{v:.3g}" for v in sills)
        )
    for axis, m in enumerate(models):
        if m.nugget > nugget_ratio * m.plateau:
            warnings.append(f"axis {axis}: nugget {m.nugget:.3g} is large relative to sill")
    ranges = np.array([m.range for m in models])
    return AnisotropyFit(AnisotropyMap(s0, ranges), tuple(models), tuple(emps), tuple(warnings),
                         tuple(tolerances))
