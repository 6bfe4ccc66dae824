"""Model creation from a valued sample and the verification of follow-up
measurements against the permissible error."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .confirmation import IQR_MULTIPLIER, detect_outliers
from .kriging import NUGGET_FLOOR, GpiModel, ValuedSample
from .space import ConfigSpace
from .variogram import (ANGULAR_TOLERANCE, GAUSSIAN, ISOTROPIC_BINS, AnisotropyFit,
                        AnisotropyMap, VariogramError, build_anisotropy, empirical_variogram,
                        fit, nrmse)


class StageError(RuntimeError):
    """A model-creation stage failed; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


@dataclass(frozen=True)
class FitResult:
    model: GpiModel
    anisotropy: AnisotropyFit | None
    warnings: tuple

    def diagnostics(self) -> dict:
        m = self.model
        d = {
            "variogram": m.variogram.to_dict(),
            "fit_nrmse": m.fit_nrmse,
            "outliers": [m.sample.ids[i] for i in m.outliers],
            "bin_coverage_40": m.empirical.coverage(40) if m.empirical is not None else None,
            "warnings": list(self.warnings),
        }
        if self.anisotropy is not None:
            d["anisotropy"] = self.anisotropy.to_dict()
        return d


def fit_gpi_model(sample: ValuedSample, space: ConfigSpace | None = None,
                  shape: str = GAUSSIAN, nugget_mode: str = "free", isotropic: bool = False,
                  tolerance: float = ANGULAR_TOLERANCE, bins: int = ISOTROPIC_BINS,
                  outlier_multiplier: float = IQR_MULTIPLIER,
                  nugget_floor: float = NUGGET_FLOOR) -> FitResult:
    """Outlier screening, directional fits, isotropic fit and NRMSE.

    Outliers are left out of every variogram but stay in the kriging system.
    With ``isotropic=True`` the anisotropy map is the identity.
    """
    if space is not None and space.ndim != sample.ndim:
        raise StageError("input", f"sample has {sample.ndim} dimensions, space has {space.ndim}")
    outliers = detect_outliers(sample.values, outlier_multiplier) if len(sample) >= 4 else []
    keep = np.ones(len(sample), dtype=bool)
    keep[outliers] = False
    pts, z = sample.points[keep], sample.values[keep]
    warnings = []
    aniso = None
    if isotropic:
        amap = AnisotropyMap.identity(sample.ndim)
    else:
        try:
            aniso = build_anisotropy(pts, z, shape, nugget_mode, tolerance)
        except VariogramError as exc:
            raise StageError("anisotropy", str(exc)) from exc
        amap = aniso.map
        warnings.extend(aniso.warnings)
    try:
        emp = empirical_variogram(pts, z, amap, bins)
        vario = fit(emp, shape, nugget_mode)
        err = nrmse(vario, emp)
    except VariogramError as exc:
        raise StageError("isotropic variogram", str(exc)) from exc
    if emp.coverage(40) < 0.75:
        warnings.append(f"only {emp.coverage(40):.0%} of bins hold at least 40 lag pairs")
    model = GpiModel(sample, amap, vario, err, space, emp, tuple(int(i) for i in outliers),
                     nugget_floor)
    return FitResult(model, aniso, tuple(warnings))


@dataclass(frozen=True)
class VerifyRow:
    config_id: str
    measured: float
    limit: float
    passed: bool


@dataclass(frozen=True)
class VerifyResult:
    rows: tuple

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    @property
    def failures(self) -> tuple:
        return tuple(r for r in self.rows if not r.passed)

    def table(self) -> str:
        lines = [f"{'config_id':<14} {'measured_dB':>12} {'MPE_dB':>8}  result"]
        for r in self.rows:
            lines.append(f"{r.config_id:<14} {r.measured:>12.3f} {r.limit:>8.3f}  "
                         f"{'pass' if r.passed else 'FAIL'}")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'} "
                     f"({len(self.failures)} of {len(self.rows)} rows exceed the MPE)")
        return "\n".join(lines)


def verify_measurements(ids, measured, limits) -> VerifyResult:
    """Pass iff every ``|measured|`` is within its MPE (dB); empty input passes."""
    measured = np.asarray(measured, dtype=float).ravel()
    limits = np.broadcast_to(np.asarray(limits, dtype=float), measured.shape)
    if np.any(np.isnan(measured)) or np.any(np.isnan(limits)):
        raise ValueError("measured values and limits must be numbers")
    if np.any(limits < 0):
        raise ValueError("MPE must be >= 0")
    rows = tuple(VerifyRow(str(i), float(m), float(l), bool(abs(m) <= l))
                 for i, m, l in zip(ids, measured, limits))
    return VerifyResult(rows)
