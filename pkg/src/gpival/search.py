"""Critical search: delta measure, population sizing, trajectory search and
probability filter.

The search runs in the isotropic coordinates of the model, where the delta
measure is a distance.  Its output is snapped to measurable configurations,
kriged once more and filtered by exceedance probability.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import norm

from .kriging import GpiModel
from .sampling import lhs_unit
from .space import ConfigSpace, box_space
from .variogram import VariogramModel

SENSITIVITY = 0.05
REPULSION = 0.1
ITERATIONS = 8
POPULATION_CAPS = (10, 1000)
REPORT_FLOOR = 0.05
SAR_COLUMNS = ("antenna", "f_MHz", "Pin_dBm", "PAR_dB", "BW_MHz", "s_mm", "theta_deg",
               "x_mm", "y_mm")
VALUE_COLUMNS = ("delta_dB", "model_error_dB", "failure_prob")


class SearchError(ValueError):
    pass


@dataclass(frozen=True)
class DeltaMeasure:
    """Smallest lag at which a threshold ``l`` away may be crossed with
    probability ``sensitivity``.

    With ``g(d) = sqrt(2 d) |Phi^-1(p)|`` the measure is 0 below ``g(n)``,
    the range ``r`` above ``g(gamma(r))`` and ``gamma^-1(l^2 / (2 Phi^-1(p)^2))``
    in between, which makes it continuous in ``l``.
    """

    variogram: VariogramModel
    sensitivity: float = SENSITIVITY

    def __post_init__(self):
        if not 0 < self.sensitivity < 0.5:
            raise SearchError("sensitivity must lie strictly inside (0, 0.5)")

    @cached_property
    def quantile(self) -> float:
        return float(abs(norm.ppf(self.sensitivity)))

    def g(self, d):
        return np.sqrt(2.0 * np.asarray(d, dtype=float)) * self.quantile

    @cached_property
    def breakpoints(self) -> tuple[float, float]:
        v = self.variogram
        return float(self.g(v.nugget)), float(self.g(v(v.range)))

    def __call__(self, l):
        l = np.asarray(l, dtype=float)
        if np.any(l < 0) or np.any(np.isnan(l)):
            raise SearchError("distance to threshold must be >= 0")
        lo, hi = self.breakpoints
        v = self.variogram
        out = np.where(l <= lo, 0.0, v.range)
        mid = (l > lo) & (l < hi)
        if mid.any():
            target = 0.5 * (l[mid] / self.quantile) ** 2
            # guard the open interval against round-off at the breakpoints
            eps = 1e-15 * v.plateau
            target = np.clip(target, v.nugget + eps, v.plateau - eps)
            out[mid] = np.minimum(v.inverse(target), v.range)
        return out if out.ndim else float(out)


def delta(dm: DeltaMeasure, l):
    return dm(l)


@dataclass(frozen=True)
class SearchParams:
    """Thresholds and tuning of the critical search.

    Parameters
    ----------
    t_lower, t_upper : float
        Thresholds ``T-`` < ``T+`` on the deviation (dB).
    sensitivity : float
        ``p`` of the delta measure, in (0, 0.5).
    repulsion : float
        ``q`` in [0, 1]; 0 disables the spreading term.
    iterations : int
        ``m >= 1``.
    caps : (int, int)
        Bounds on the initial population size.
    report_floor : float
        Minimal exceedance probability of a reported configuration.
    """

    t_lower: float
    t_upper: float
    sensitivity: float = SENSITIVITY
    repulsion: float = REPULSION
    iterations: int = ITERATIONS
    caps: tuple = POPULATION_CAPS
    report_floor: float = REPORT_FLOOR

    def __post_init__(self):
        if not self.t_lower < self.t_upper:
            raise SearchError("need t_lower < t_upper")
        if not 0 < self.sensitivity < 0.5:
            raise SearchError("sensitivity must lie strictly inside (0, 0.5)")
        if not 0 <= self.repulsion <= 1:
            raise SearchError("repulsion must lie in [0, 1]")
        if self.iterations < 1:
            raise SearchError("need at least one iteration")
        lo, hi = self.caps
        if not 2 <= lo <= hi:
            raise SearchError("population caps must satisfy 2 <= min <= max")
        object.__setattr__(self, "caps", (int(lo), int(hi)))
        if not 0 < self.report_floor <= 1:
            raise SearchError("report_floor must lie in (0, 1]")

    @property
    def t_mid(self) -> float:
        return 0.5 * (self.t_lower + self.t_upper)


def _bounds(model: GpiModel, space: ConfigSpace | None):
    space = space if space is not None else model.space
    if space is None:
        pts = model.sample.points
        space = box_space(list(zip(pts.min(axis=0), pts.max(axis=0))))
    return space


def required_sample_size(model: GpiModel, params: SearchParams,
                         space: ConfigSpace | None = None) -> int:
    """Initial population size: product over dimensions of the isotropic
    extent divided by the delta measure at the mean distance to the nearer
    threshold, clamped to ``params.caps``."""
    space = _bounds(model, space)
    z = model.sample.values
    lbar = float(np.mean(np.minimum(np.abs(z - params.t_lower), np.abs(z - params.t_upper))))
    d = DeltaMeasure(model.variogram, params.sensitivity)(lbar)
    lo, hi = params.caps
    if d <= 0:
        return hi
    extent = (space.upper - space.lower) / model.anisotropy.scale
    log_nu = float(np.sum(np.log(np.maximum(np.ceil(extent / d), 1.0))))
    if log_nu >= math.log(hi):
        return hi
    nu = int(round(math.exp(log_nu)))
    return int(min(max(nu, lo), hi))


def search(s0, f, params: SearchParams, dm: DeltaMeasure, lower, upper, metric=None):
    """Trajectory search moving a population towards threshold crossings.

    Parameters
    ----------
    s0 : array_like, shape (k, n)
        Initial population, in the original coordinates.
    f : callable
        Maps an (m, n) array of original coordinates to m values.
    lower, upper : array_like
        Box bounds of the domain; candidates are clipped to it.
    metric : AnisotropyMap, optional
        Isotropic transform in which steps and distances are measured.

    Returns
    -------
    points : ndarray, shape (k, n)
    values : ndarray, shape (k,)
    """
    s = np.array(s0, dtype=float, ndmin=2)
    if s.size == 0:
        raise SearchError("empty initial population")
    k, n = s.shape
    scale = metric.scale if metric is not None else np.ones(n)
    u = s / scale
    ulo = np.asarray(lower, dtype=float) / scale
    uhi = np.asarray(upper, dtype=float) / scale
    u = np.clip(u, ulo, uhi)
    z = np.asarray(f(u * scale), dtype=float)
    t0, tl, tu, q = params.t_mid, params.t_lower, params.t_upper, params.repulsion
    eye = np.eye(n)
    for it in range(1, params.iterations + 1):
        alpha = 1.0 / (2 * it)
        for j in range(k):
            x, zj = u[j], z[j]
            if zj > t0:
                d = alpha * dm(zj - tu) if zj > tu else 2 * alpha * dm(tu - zj)
                sgn = 1.0
            else:
                d = alpha * dm(tl - zj) if zj < tl else 2 * alpha * dm(zj - tl)
                sgn = -1.0
            cand = np.vstack([x, x + d * eye, x - d * eye])
            cand = np.clip(cand, ulo, uhi)
            zc = np.asarray(f(cand * scale), dtype=float)
            score = sgn * (zc - t0)
            if q > 0 and k > 1:
                others = np.delete(u, j, axis=0)
                dmin = cdist(cand, others).min(axis=1)
                score = score * dmin ** (q / 2)
            h = int(np.argmax(score))
            u[j], z[j] = cand[h], zc[h]
    return u * scale, z


@dataclass(frozen=True)
class FilterResult:
    lower: np.ndarray
    upper: np.ndarray
    middle: np.ndarray
    probability: np.ndarray


def exceedance_probability(mean, std, t_lower: float, t_upper: float) -> np.ndarray:
    """``min(Phi((T- - mu)/sigma) + Phi((mu - T+)/sigma), 1)``; indicator limit at sigma 0."""
    mu = np.asarray(mean, dtype=float)
    sd = np.asarray(std, dtype=float)
    pos = sd > 0
    safe = np.where(pos, sd, 1.0)
    with np.errstate(over="ignore"):
        p = norm.cdf((t_lower - mu) / safe) + norm.cdf((mu - t_upper) / safe)
    det = ((mu < t_lower) | (mu > t_upper)).astype(float)
    return np.minimum(np.where(pos, p, det), 1.0)


def filter_points(mean, std, params: SearchParams, p: float | None = None) -> FilterResult:
    """Split points into confident lower/upper crossings and the rest.

    Returns index arrays ``lower``, ``upper``, ``middle`` and the exceedance
    probability of each ``middle`` index.
    """
    p = params.sensitivity if p is None else p
    if not 0 < p < 1:
        raise SearchError("filter probability must lie in (0, 1)")
    mu = np.asarray(mean, dtype=float).ravel()
    sd = np.asarray(std, dtype=float).ravel()
    a = norm.ppf(p)
    tl, tu = params.t_lower, params.t_upper
    pos = sd > 0
    safe = np.where(pos, sd, 1.0)
    with np.errstate(over="ignore"):
        below_ok = np.where(pos, a <= (tl - mu) / safe, True)
        above_ok = np.where(pos, a <= (mu - tu) / safe, True)
    is_l = (mu < tl) & below_ok
    is_u = ~is_l & (mu > tu) & above_ok
    is_m = ~(is_l | is_u)
    prob = exceedance_probability(mu[is_m], sd[is_m], tl, tu)
    return FilterResult(np.flatnonzero(is_l), np.flatnonzero(is_u), np.flatnonzero(is_m), prob)


def filter(points, f, params: SearchParams, p: float | None = None):  # noqa: A001
    """Classify ``points`` with a predictor ``f`` returning ``(mean, std)``.

    Returns the point arrays ``L``, ``U``, ``M`` and probabilities ``P``.
    """
    pts = np.array(points, dtype=float, ndmin=2)
    mu, sd = f(pts)
    r = filter_points(mu, sd, params, p)
    return pts[r.lower], pts[r.upper], pts[r.middle], r.probability


@dataclass(frozen=True)
class CriticalReport:
    """Configurations likely to exceed a threshold, by descending probability."""

    names: tuple
    points: np.ndarray
    delta: np.ndarray
    model_error: np.ndarray
    probability: np.ndarray
    antennas: tuple = ()
    population: int = 0
    params: SearchParams | None = None

    def __len__(self) -> int:
        return len(self.probability)

    def columns(self) -> tuple:
        if set(SAR_COLUMNS[1:]) <= set(self.names):
            return SAR_COLUMNS + VALUE_COLUMNS
        return tuple(self.names) + VALUE_COLUMNS

    def rows(self) -> list[dict]:
        out = []
        for i in range(len(self)):
            row = {n: float(v) for n, v in zip(self.names, self.points[i])}
            row["antenna"] = self.antennas[i] if self.antennas else ""
            row["delta_dB"] = float(self.delta[i])
            row["model_error_dB"] = float(self.model_error[i])
            row["failure_prob"] = float(self.probability[i])
            out.append(row)
        return out

    def to_csv(self) -> str:
        cols = self.columns()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in self.rows():
            w.writerow([row[c] if isinstance(row[c], str) else repr(row[c]) for c in cols])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "columns": list(self.columns()),
            "rows": self.rows(),
            "population": self.population,
            "params": asdict(self.params) if self.params else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def run_critical_search(model: GpiModel, params: SearchParams, seed: int = 0,
                        space: ConfigSpace | None = None) -> CriticalReport:
    """Full critical search on a confirmed model.

    A maximin LHS population of the required size is moved by :func:`search`
    on the kriged mean, snapped to measurable configurations, kriged again and
    kept where the exceedance probability (with the inflated model error)
    reaches ``params.report_floor``.
    """
    space = _bounds(model, space)
    if space.ndim != model.sample.ndim:
        raise SearchError("space and model dimensions differ")
    nu = required_sample_size(model, params, space)
    lo, hi = space.lower, space.upper
    s0 = lo + lhs_unit(nu, space.ndim, seed) * (hi - lo)
    dm = DeltaMeasure(model.variogram, params.sensitivity)
    pts, _ = search(s0, model.mean, params, dm, lo, hi, model.anisotropy)
    snapped, seen = [], set()
    for p in pts:
        q = space.snap_nearest(p)
        if q is None:
            continue
        key = tuple(q)
        if key not in seen:
            seen.add(key)
            snapped.append(q)
    names = space.names
    if not snapped:
        empty = np.empty(0)
        return CriticalReport(names, np.empty((0, space.ndim)), empty, empty, empty,
                              population=nu, params=params)
    snapped = np.array(snapped)
    pred = model.predict(snapped)
    r = filter_points(pred.mean, pred.inflated_std, params, params.report_floor)
    prob = exceedance_probability(pred.mean, pred.inflated_std, params.t_lower, params.t_upper)
    mid = r.middle[r.probability >= params.report_floor]
    keep = np.concatenate([r.lower, r.upper, mid]).astype(int)
    order = keep[np.argsort(-prob[keep], kind="stable")]
    antennas = ()
    if space.has_sources:
        antennas = tuple(space.describe(p)["antenna"] for p in snapped[order])
    return CriticalReport(names, snapped[order], pred.mean[order], pred.inflated_std[order],
                          prob[order], antennas, population=nu, params=params)
