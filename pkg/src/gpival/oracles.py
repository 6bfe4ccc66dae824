"""Ground-truth fields for desk-scale checks of the whole workflow.

``sine_wave`` is the two-dimensional analytic benchmark.  ``synthetic_device``
emulates measured deviation surfaces over the SAR array space: a smooth
anisotropic surface, a noise-dominated one, and a smooth one with a localized
fault exceeding the permissible error.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial.distance import cdist

from .space import ConfigSpace, box_space, build_sar_array_space, mpe

PROFILES = ("structured", "noisy", "injected-fault")
GRID_BUDGET = 10**7
DEFAULT_MPE = mpe(0.30, 0.15)


def sine_wave(x) -> np.ndarray:
    """``y sin(2 pi y)`` with ``y = |x| / sqrt(2)`` on the unit square."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.linalg.norm(x, axis=1) / np.sqrt(2.0)
    return y * np.sin(2.0 * np.pi * y)


def _point_normals(points: np.ndarray, seed: int) -> np.ndarray:
    """One standard normal per point, a pure function of (coordinates, seed)."""
    out = np.empty(len(points))
    for i, p in enumerate(points):
        h = hashlib.blake2b(np.ascontiguousarray(p, dtype="<f8").tobytes(), digest_size=8)
        key = int.from_bytes(h.digest(), "little")
        out[i] = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, key]).standard_normal()
    return out


@dataclass(frozen=True)
class OracleField:
    """``Z(x) = f(x) + e`` with per-point reproducible Gaussian noise.

    Parameters
    ----------
    space : ConfigSpace
    deterministic : callable
        Maps an (m, n) array to m values.
    noise_std : float
    seed : int
    info : dict
        Construction details.
    pocket : callable, optional
        Membership test of an injected fault region.
    """

    space: ConfigSpace
    deterministic: Callable
    noise_std: float = 0.0
    seed: int = 0
    info: dict = field(default_factory=dict)
    pocket: Callable | None = None

    def __post_init__(self):
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        z = np.asarray(self.deterministic(pts), dtype=float)
        if self.noise_std > 0:
            z = z + self.noise_std * _point_normals(pts, self.seed)
        return z


def gaussian_process_draw(points, variogram, seed: int) -> np.ndarray:
    """One draw of a zero-mean stationary Gaussian process at ``points``.

    The covariance is ``plateau - gamma(h)``, so the nugget enters as white
    noise on the diagonal.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    cov = variogram.plateau - variogram(cdist(pts, pts))
    cov[np.diag_indices_from(cov)] = variogram.plateau
    chol = np.linalg.cholesky(cov + 1e-10 * variogram.plateau * np.eye(len(pts)))
    return chol @ np.random.default_rng(seed).standard_normal(len(pts))


def sine_field(noise_std: float = 0.001, seed: int = 0) -> OracleField:
    return OracleField(box_space([(0.0, 1.0), (0.0, 1.0)]), sine_wave, noise_std, seed,
                       {"name": "sine"})


def _unit(space: ConfigSpace, pts: np.ndarray) -> np.ndarray:
    return (pts - space.lower) / (space.upper - space.lower)


FEATURES = 300
LENGTH_SCALES = (0.2, 1.0)
SMOOTH_LIMIT = 1.2


def synthetic_device(profile: str = "structured", seed: int = 0,
                     space: ConfigSpace | None = None, fault_height: float = 3.0,
                     fault_width: float = 0.2) -> OracleField:
    """Synthetic deviation surface (dB) over a configuration space.

    The smooth part is a stationary Gaussian-process draw approximated by
    random Fourier features, with one seeded length scale per dimension
    (log-uniform in ``LENGTH_SCALES``, unit-box coordinates).  That gives
    geometric anisotropy of the kind the anisotropy map can remove.  A tanh
    soft limit keeps it inside ``+-SMOOTH_LIMIT`` dB, below the default MPE,
    so the structured profile never exceeds the MPE and a fault of
    ``fault_height`` >= ``SMOOTH_LIMIT + MPE`` always does at its centre.

    Parameters
    ----------
    profile : {"structured", "noisy", "injected-fault"}
        ``structured``: smooth surface with std 0.35 dB under 0.05 dB noise.
        ``noisy``: the same surface scaled to 0.02 dB under 0.25 dB noise.
        ``injected-fault``: ``structured`` plus a Gaussian bump of
        ``fault_height`` dB and width ``fault_width`` (unit-box units) over
        two seeded dimensions, centred on a seeded measurable configuration.
    seed : int
        Profiles with the same seed share the smooth part.
    space : ConfigSpace, optional
        Defaults to the SAR array space.
    """
    if profile not in PROFILES:
        raise ValueError(f"profile must be one of {PROFILES}")
    space = space if space is not None else build_sar_array_space()
    n = space.ndim
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    scales = np.exp(rng.uniform(*np.log(LENGTH_SCALES), n))
    freq = rng.standard_normal((FEATURES, n)) / scales
    phase = rng.uniform(0.0, 2.0 * np.pi, FEATURES)

    if profile == "noisy":
        amp, noise = 0.02, 0.25
    else:
        amp, noise = 0.35, 0.05
    coef = amp * np.sqrt(2.0 / FEATURES)

    def smooth(pts):
        raw = coef * np.cos(_unit(space, pts) @ freq.T + phase).sum(axis=1)
        return SMOOTH_LIMIT * np.tanh(raw / SMOOTH_LIMIT)

    info = {"profile": profile, "seed": seed, "amplitude": amp, "noise_std": noise,
            "length_scales": scales.tolist()}
    if profile != "injected-fault":
        return OracleField(space, smooth, noise, seed, info)

    frng = np.random.default_rng(np.random.SeedSequence([seed, 8]))
    dims = np.sort(frng.choice(n, size=2, replace=False))
    center = None
    while center is None:
        center = space.snap_nearest(space.lower + frng.random(n) * (space.upper - space.lower))
    cu = _unit(space, center[None, :])[0]
    sign = 1.0 if frng.random() < 0.5 else -1.0

    def bump(pts):
        u = _unit(space, pts)
        r2 = np.sum(((u[:, dims] - cu[dims]) / fault_width) ** 2, axis=1)
        return np.exp(-0.5 * r2)

    def faulty(pts):
        return smooth(pts) + sign * fault_height * bump(pts)

    info.update({
        "fault_dims": [int(d) for d in dims],
        "fault_center": center.tolist(),
        "fault_sign": sign,
        "fault_height": fault_height,
        "fault_width": fault_width,
    })
    return OracleField(space, faulty, noise, seed, info,
                       pocket=lambda pts: bump(np.atleast_2d(np.asarray(pts, dtype=float))) >= 0.5)


@dataclass(frozen=True)
class GridResult:
    axes: tuple
    values: np.ndarray
    argmin: np.ndarray
    minimum: float
    argmax: np.ndarray
    maximum: float
    sublevel: np.ndarray | None
    superlevel: np.ndarray | None

    @property
    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


def grid_oracle(fld: OracleField, resolution: int, t_lower: float | None = None,
                t_upper: float | None = None, budget: int = GRID_BUDGET) -> GridResult:
    """Dense-grid extrema and threshold regions of the noise-free field.

    ``sublevel`` / ``superlevel`` are boolean masks over :attr:`GridResult.points`
    for ``f <= t_lower`` and ``f >= t_upper``.
    """
    space = fld.space
    if space.ndim > 3 or resolution**space.ndim > budget:
        raise ValueError(
            f"grid of {resolution}^{space.ndim} points exceeds the budget of {budget}"
        )
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    axes = tuple(np.linspace(lo, hi, resolution) for lo, hi in zip(space.lower, space.upper))
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    vals = np.asarray(fld.deterministic(pts), dtype=float)
    i, j = int(np.argmin(vals)), int(np.argmax(vals))
    sub = vals <= t_lower if t_lower is not None else None
    sup = vals >= t_upper if t_upper is not None else None
    return GridResult(axes, vals, pts[i], float(vals[i]), pts[j], float(vals[j]), sub, sup)
