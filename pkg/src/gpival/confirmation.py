"""Model confirmation: goodness of fit, residual normality, QQ location/scale,
and outlier screening.

Stages run in the order fit -> normality -> QQ.  Every stage is computed for
the report, but ``overall`` fails at the first failing stage.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import norm

from .kriging import GpiModel, ValuedSample, standardized_residuals

NRMSE_ALPHA = 0.25
SW_ALPHA = 0.05
QQ_WINDOW = (0.025, 0.975)
QQ_MAX_LOCATION = 1.0
QQ_SCALE_BOUNDS = (0.5, 1.5)
IQR_MULTIPLIER = 2.0
STAGES = ("fit", "normality", "qq")


class ConfirmationError(ValueError):
    pass


def goodness_of_fit(model: GpiModel, alpha: float = NRMSE_ALPHA) -> bool:
    """Pass iff the model's variogram NRMSE is at most ``alpha``."""
    if not alpha > 0:
        raise ConfirmationError("alpha must be > 0")
    return bool(model.fit_nrmse <= alpha)


# Royston's polynomial coefficients for the Shapiro-Wilk weights and p-value.
_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.5440, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)


def _poly(c, x):
    return sum(ci * x**i for i, ci in enumerate(c))


def _sw_weights(n: int) -> np.ndarray:
    if n == 3:
        return np.array([-np.sqrt(0.5), 0.0, np.sqrt(0.5)])
    m = norm.ppf((np.arange(1, n + 1) - 0.375) / (n + 0.25))
    mm = np.sum(m * m)
    u = 1.0 / np.sqrt(n)
    a = np.empty(n)
    an = m[-1] / np.sqrt(mm) + _poly(_C1, u)
    if n > 5:
        an1 = m[-2] / np.sqrt(mm) + _poly(_C2, u)
        phi = (mm - 2 * m[-1] ** 2 - 2 * m[-2] ** 2) / (1 - 2 * an**2 - 2 * an1**2)
        a[2:-2] = m[2:-2] / np.sqrt(phi)
        a[-2], a[1] = an1, -an1
    else:
        phi = (mm - 2 * m[-1] ** 2) / (1 - 2 * an**2)
        a[1:-1] = m[1:-1] / np.sqrt(phi)
    a[-1], a[0] = an, -an
    return a


def shapiro_wilk(values) -> tuple[float, float]:
    """Shapiro-Wilk statistic ``W`` and its p-value (Royston's approximation).

    Valid for ``3 <= n <= 5000``.
    """
    x = np.sort(np.asarray(values, dtype=float).ravel())
    n = x.size
    if n < 3 or n > 5000:
        raise ConfirmationError("Shapiro-Wilk needs 3 <= n <= 5000")
    if not np.all(np.isfinite(x)):
        raise ConfirmationError("non-finite values")
    if x[-1] - x[0] <= 1e-15 * max(1.0, abs(x[0])):
        raise ConfirmationError("zero variance")
    a = _sw_weights(n)
    xc = x - x.mean()
    w = float(np.dot(a, x) ** 2 / np.dot(xc, xc))
    w = min(w, 1.0)
    if n == 3:
        p = 6.0 / np.pi * (np.arcsin(np.sqrt(w)) - np.arcsin(np.sqrt(0.75)))
        return w, float(np.clip(p, 0.0, 1.0))
    y = np.log1p(-w) if w < 1 else -np.inf
    if n <= 11:
        gamma = 0.459 * n - 2.273
        if y >= gamma:
            return w, 1e-99
        mu = _poly(_C3, n)
        sigma = np.exp(_poly(_C4, n))
        z = (-np.log(gamma - y) - mu) / sigma
    else:
        ln = np.log(n)
        mu = _poly(_C5, ln)
        sigma = np.exp(_poly(_C6, ln))
        z = (y - mu) / sigma
    return w, float(norm.sf(z))


@dataclass(frozen=True)
class QQFit:
    """Least-squares line through the windowed QQ points."""

    location: float
    scale: float
    theoretical: np.ndarray
    sample: np.ndarray

    def passed(self, max_location=QQ_MAX_LOCATION, scale_bounds=QQ_SCALE_BOUNDS) -> tuple[bool, bool]:
        return (bool(abs(self.location) <= max_location),
                bool(scale_bounds[0] <= self.scale <= scale_bounds[1]))


def qq_points(values) -> tuple[np.ndarray, np.ndarray]:
    """Normal QQ pairs using plotting positions ``(i - 0.5) / n``."""
    x = np.sort(np.asarray(values, dtype=float).ravel())
    n = x.size
    return norm.ppf((np.arange(1, n + 1) - 0.5) / n), x


def qq_metrics(values, window=QQ_WINDOW) -> QQFit:
    """QQ location (intercept) and scale (slope) over the central window of
    theoretical probabilities."""
    x = np.asarray(values, dtype=float).ravel()
    if x.size < 10:
        raise ConfirmationError("QQ metrics need at least 10 values")
    t, s = qq_points(x)
    probs = (np.arange(1, x.size + 1) - 0.5) / x.size
    keep = (probs >= window[0]) & (probs <= window[1])
    if keep.sum() < 2:
        raise ConfirmationError("fewer than 2 points inside the QQ window")
    scale, loc = np.polyfit(t[keep], s[keep], 1)
    return QQFit(float(loc), float(scale), t, s)


def detect_outliers(values, r: float = IQR_MULTIPLIER) -> np.ndarray:
    """Indices outside ``[q1 - r*IQR, q3 + r*IQR]`` (linear-interpolation quartiles)."""
    z = np.asarray(values, dtype=float).ravel()
    if z.size < 4:
        raise ConfirmationError("outlier detection needs at least 4 values")
    if r < 0:
        raise ConfirmationError("IQR multiplier must be >= 0")
    q1, q3 = np.percentile(z, [25, 75])
    iqr = q3 - q1
    return np.flatnonzero((z < q1 - r * iqr) | (z > q3 + r * iqr))


@dataclass(frozen=True)
class Thresholds:
    alpha: float = NRMSE_ALPHA
    sw_alpha: float = SW_ALPHA
    max_location: float = QQ_MAX_LOCATION
    scale_bounds: tuple = QQ_SCALE_BOUNDS


@dataclass(frozen=True)
class ConfirmationReport:
    nrmse: float
    nrmse_pass: bool
    sw_statistic: float
    sw_p: float
    sw_pass: bool
    qq_location: float
    qq_scale: float
    qq_location_pass: bool
    qq_scale_pass: bool
    overall: bool
    failed_stage: str | None
    thresholds: Thresholds
    residuals: tuple = field(repr=False)
    stages: tuple = STAGES

    def stage_passed(self) -> dict:
        return {
            "fit": self.nrmse_pass,
            "normality": self.sw_pass,
            "qq": self.qq_location_pass and self.qq_scale_pass,
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        d["thresholds"] = asdict(self.thresholds)
        d["residuals"] = list(self.residuals)
        d["stages"] = list(self.stages)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table(self) -> str:
        th = self.thresholds
        rows = [
            ("fit", f"NRMSE = {self.nrmse:.4f}", f"<= {th.alpha}", self.nrmse_pass),
            ("normality", f"SW p = {self.sw_p:.4f}", f"> {th.sw_alpha}", self.sw_pass),
            ("qq", f"location = {self.qq_location:.4f}", f"|.| <= {th.max_location}",
             self.qq_location_pass),
            ("qq", f"scale = {self.qq_scale:.4f}",
             f"in [{th.scale_bounds[0]}, {th.scale_bounds[1]}]", self.qq_scale_pass),
        ]
        lines = [f"{s:<10} {v:<22} {c:<16} {'pass' if ok else 'FAIL'}" for s, v, c, ok in rows]
        verdict = "PASS" if self.overall else f"FAIL (first failing stage: {self.failed_stage})"
        lines.append(f"overall: {verdict}")
        return "\n".join(lines)


def confirm(model: GpiModel, test: ValuedSample, thresholds: Thresholds = Thresholds(),
            min_test: int = 20) -> ConfirmationReport:
    """Run all confirmation stages on an independent test sample."""
    if len(test) < min_test:
        raise ConfirmationError(f"test sample needs at least {min_test} points, got {len(test)}")
    fit_ok = goodness_of_fit(model, thresholds.alpha)
    res = standardized_residuals(model, test)
    w, p = shapiro_wilk(res)
    sw_ok = bool(p > thresholds.sw_alpha)
    qq = qq_metrics(res)
    loc_ok, scale_ok = qq.passed(thresholds.max_location, thresholds.scale_bounds)
    failed = None
    for name, ok in (("fit", fit_ok), ("normality", sw_ok), ("qq", loc_ok and scale_ok)):
        if not ok:
            failed = name
            break
    return ConfirmationReport(
        nrmse=float(model.fit_nrmse), nrmse_pass=fit_ok, sw_statistic=w, sw_p=p, sw_pass=sw_ok,
        qq_location=qq.location, qq_scale=qq.scale, qq_location_pass=loc_ok,
        qq_scale_pass=scale_ok, overall=failed is None, failed_stage=failed,
        thresholds=thresholds, residuals=tuple(float(v) for v in res),
    )
