"""Validation domains: bounded product spaces with measurable rasters.

A :class:`ConfigSpace` is an ordered list of :class:`Dimension` intervals.
Generic spaces (e.g. the unit square used by the analytic benchmark) are
just that.  The built-in SAR spaces additionally carry source and
modulation tables, which couple the frequency/distance/power coordinates
and the PAR/bandwidth coordinates: only some combinations can actually be
measured in a lab.

Points are plain 1-D float arrays ordered like ``space.dimensions``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SPACE_FORMAT = "gpival.space"
SPACE_VERSION = 1

CONTINUOUS = "continuous"
DISCRETE = "discrete-raster"
INDEX = "index-based"
TREATMENTS = (CONTINUOUS, DISCRETE, INDEX)

# Width of the power raster above P_in,min (21 one-dB levels).
POWER_SPAN_DB = 20

# Dimension names that switch on the SAR coupling rules.
FREQ, DIST, THETA, X, Y, POWER, PAR, BW = (
    "f_MHz", "s_mm", "theta_deg", "x_mm", "y_mm", "Pin_dBm", "PAR_dB", "BW_MHz",
)


class SpaceError(ValueError):
    """Invalid space definition or configuration."""


@dataclass(frozen=True)
class Dimension:
    """One axis of a configuration space.

    ``period`` marks a circular coordinate (rotation angle); nearest-value
    snapping then wraps around.
    """

    name: str
    lower: float
    upper: float
    treatment: str = CONTINUOUS
    raster: tuple[float, ...] | None = None
    period: float | None = None

    def __post_init__(self):
        if not self.lower < self.upper:
            raise SpaceError(f"{self.name}: lower bound must be < upper bound")
        if self.treatment not in TREATMENTS:
            raise SpaceError(f"{self.name}: unknown treatment {self.treatment!r}")
        if self.raster is not None:
            r = tuple(float(v) for v in self.raster)
            if any(b <= a for a, b in zip(r, r[1:])):
                raise SpaceError(f"{self.name}: raster must be strictly ascending")
            if r and (r[0] < self.lower or r[-1] > self.upper):
                raise SpaceError(f"{self.name}: raster outside [{self.lower}, {self.upper}]")
            object.__setattr__(self, "raster", r)
        if self.treatment == DISCRETE and not self.raster:
            raise SpaceError(f"{self.name}: discrete dimension needs a raster")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def floor(self, v: float) -> float:
        """Largest raster value <= v (first raster value if none)."""
        r = self.raster
        i = np.searchsorted(r, v, side="right") - 1
        return r[max(int(i), 0)]

    def nearest(self, v: float) -> float:
        r = np.asarray(self.raster)
        if self.period:
            d = np.abs((r - v + self.period / 2) % self.period - self.period / 2)
        else:
            d = np.abs(r - v)
        return float(r[int(np.argmin(d))])

    def to_dict(self) -> dict:
        d = {"name": self.name, "lower": self.lower, "upper": self.upper,
             "treatment": self.treatment}
        if self.raster is not None:
            d["raster"] = list(self.raster)
        if self.period is not None:
            d["period"] = self.period
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Dimension":
        raster = d.get("raster")
        return cls(d["name"], float(d["lower"]), float(d["upper"]),
                   d.get("treatment", CONTINUOUS),
                   tuple(raster) if raster is not None else None,
                   d.get("period"))


@dataclass(frozen=True)
class SourceSpec:
    """A validation antenna and its P_in,min table keyed by (f, s)."""

    name: str
    kind: str
    pmin_table: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        if self.kind not in ("dipole", "vpifa", "cpifa"):
            raise SpaceError(f"{self.name}: unknown source kind {self.kind!r}")
        rows = tuple((float(f), float(s), float(p)) for f, s, p in self.pmin_table)
        object.__setattr__(self, "pmin_table", rows)

    @property
    def frequencies(self) -> tuple[float, ...]:
        return tuple(sorted({f for f, _, _ in self.pmin_table}))

    @property
    def allowed_distances(self) -> tuple[float, ...]:
        return tuple(sorted({s for _, s, _ in self.pmin_table}))

    def supports(self, f: float, s: float) -> bool:
        return any(f == tf and s == ts for tf, ts, _ in self.pmin_table)

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind,
                "pmin_table": [list(r) for r in self.pmin_table]}

    @classmethod
    def from_dict(cls, d: dict) -> "SourceSpec":
        return cls(d["name"], d["kind"], tuple(tuple(r) for r in d["pmin_table"]))


@dataclass(frozen=True)
class ModulationSpec:
    id: int
    description: str
    par: float
    bandwidth: float

    def __post_init__(self):
        if not 0 <= self.par <= 12:
            raise SpaceError(f"modulation {self.id}: PAR {self.par} dB outside [0, 12]")
        if not 0 <= self.bandwidth <= 100:
            raise SpaceError(f"modulation {self.id}: BW {self.bandwidth} MHz outside [0, 100]")

    def to_dict(self) -> dict:
        return {"id": self.id, "description": self.description,
                "par": self.par, "bandwidth": self.bandwidth}

    @classmethod
    def from_dict(cls, d: dict) -> "ModulationSpec":
        return cls(int(d["id"]), d["description"], float(d["par"]), float(d["bandwidth"]))


def mpe(u_system: float, u_source: float) -> float:
    """Maximum permissible error in dB for expanded uncertainties (fractions)."""
    if u_system < 0 or u_source < 0:
        raise ValueError("uncertainties must be non-negative")
    return 10.0 * math.log10(1.0 + u_system + u_source)


def min_power(source: SourceSpec, f: float, s: float) -> float:
    """P_in,min in dBm for ``source`` operated at frequency ``f`` and distance ``s``."""
    for tf, ts, p in source.pmin_table:
        if tf == f and ts == s:
            return p
    raise SpaceError(f"no such source configuration: {source.name} at f={f} MHz, s={s} mm")


@dataclass(frozen=True)
class ConfigSpace:
    """Product of dimension intervals plus (optional) SAR coupling tables."""

    dimensions: tuple[Dimension, ...]
    sources: tuple[SourceSpec, ...] = ()
    modulations: tuple[ModulationSpec, ...] = ()
    name: str = "custom"
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "dimensions", tuple(self.dimensions))
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "modulations", tuple(self.modulations))
        names = [d.name for d in self.dimensions]
        if len(set(names)) != len(names):
            raise SpaceError("duplicate dimension names")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})
        for d in self.dimensions:
            if d.treatment == INDEX and d.name != POWER:
                raise SpaceError(f"{d.name}: index-based treatment is reserved for {POWER}")
        if self.has_sources and not (FREQ in self._index and DIST in self._index):
            raise SpaceError("source tables need both frequency and distance dimensions")

    # -- geometry -----------------------------------------------------------
    @property
    def ndim(self) -> int:
        return len(self.dimensions)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dimensions)

    @property
    def lower(self) -> np.ndarray:
        return np.array([d.lower for d in self.dimensions])

    @property
    def upper(self) -> np.ndarray:
        return np.array([d.upper for d in self.dimensions])

    def index(self, name: str) -> int | None:
        return self._index.get(name)

    @property
    def has_sources(self) -> bool:
        return bool(self.sources)

    @property
    def has_modulations(self) -> bool:
        return bool(self.modulations) and PAR in self._index and BW in self._index

    def contains(self, point, tol: float = 1e-9) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(p.shape == (self.ndim,) and np.all(np.isfinite(p))
                    and np.all(p >= self.lower - tol) and np.all(p <= self.upper + tol))

    def clip(self, points) -> np.ndarray:
        return np.clip(np.asarray(points, dtype=float), self.lower, self.upper)

    # -- source / modulation tables ----------------------------------------
    def source_for(self, f: float, s: float) -> SourceSpec | None:
        for src in self.sources:
            if src.supports(f, s):
                return src
        return None

    def distances_at(self, f: float) -> tuple[float, ...]:
        return tuple(sorted({ts for src in self.sources
                             for tf, ts, _ in src.pmin_table if tf == f}))

    def power_min(self, point) -> float:
        """P_in,min of the source selected by the point's (f, s) pair."""
        f = point[self._index[FREQ]]
        s = point[self._index[DIST]]
        src = self.source_for(f, s)
        if src is None:
            raise SpaceError(f"no such source configuration: f={f} MHz, s={s} mm")
        return min_power(src, f, s)

    def modulation_for(self, par: float, bw: float) -> ModulationSpec | None:
        for m in self.modulations:
            if m.par == par and m.bandwidth == bw:
                return m
        return None

    def _nearest_modulation(self, par: float, bw: float, dominated: bool) -> ModulationSpec:
        mods = self.modulations
        if dominated:
            mods = [m for m in mods if m.par <= par and m.bandwidth <= bw] or list(self.modulations)
        d = [math.hypot(m.par - par, m.bandwidth - bw) for m in mods]
        return mods[int(np.argmin(d))]

    # -- validity ----------------------------------------------------------
    def is_valid(self, point, strict: bool = False) -> bool:
        """Whether ``point`` is a measurable configuration.

        Discrete coordinates must sit on their raster and the SAR coupling
        rules (source exists for (f, s), power on that source's raster,
        (PAR, BW) is a listed signal) must hold.  ``strict`` additionally
        requires rastered continuous coordinates (angle, location) to be on
        their raster, which is what nearest-snapping produces.
        """
        p = np.asarray(point, dtype=float)
        if not self.contains(p):
            return False
        for i, d in enumerate(self.dimensions):
            if d.raster is None:
                continue
            if d.treatment == DISCRETE or (strict and d.treatment == CONTINUOUS):
                if not np.any(np.isclose(p[i], d.raster, rtol=0, atol=1e-9)):
                    return False
        if self.has_sources:
            f, s = p[self._index[FREQ]], p[self._index[DIST]]
            src = self.source_for(f, s)
            if src is None:
                return False
            ip = self._index.get(POWER)
            if ip is not None:
                off = p[ip] - min_power(src, f, s)
                if not (-1e-9 <= off <= POWER_SPAN_DB + 1e-9 and abs(off - round(off)) < 1e-9):
                    return False
        if self.has_modulations:
            if self.modulation_for(p[self._index[PAR]], p[self._index[BW]]) is None:
                return False
        return True

    # -- snapping ----------------------------------------------------------
    def snap_floor(self, point) -> np.ndarray:
        """Map an index-domain point to a configuration by flooring.

        Discrete coordinates go to the largest raster value not above them
        (frequency first, then the distances available at that frequency).
        A signal is chosen among the listed (PAR, BW) pairs dominated by the
        coordinate pair.  The power coordinate is read as an index ``j`` and
        becomes ``P_in,min + floor(j)``, clamped to the 21 available levels.
        Continuous coordinates are left alone.
        """
        p = np.array(point, dtype=float)
        out = p.copy()
        for i, d in enumerate(self.dimensions):
            if d.treatment == DISCRETE:
                out[i] = d.floor(p[i])
            elif d.treatment == CONTINUOUS:
                out[i] = min(max(p[i], d.lower), d.upper)
        if self.has_sources:
            fi, si = self._index[FREQ], self._index[DIST]
            dists = self.distances_at(out[fi])
            if not dists:
                raise SpaceError(f"no source operates at {out[fi]} MHz")
            below = [s for s in dists if s <= p[si]]
            out[si] = below[-1] if below else dists[0]
        if self.has_modulations:
            pi, bi = self._index[PAR], self._index[BW]
            m = self._nearest_modulation(p[pi], p[bi], dominated=True)
            out[pi], out[bi] = m.par, m.bandwidth
        ip = self._index.get(POWER)
        if ip is not None and self.dimensions[ip].treatment == INDEX:
            j = min(math.floor(max(p[ip], 0.0)), POWER_SPAN_DB)
            out[ip] = self.power_min(out) + j
        return out

    def to_index(self, point) -> np.ndarray:
        """Inverse of the power mapping in :meth:`snap_floor` (dBm -> index)."""
        out = np.array(point, dtype=float)
        ip = self._index.get(POWER)
        if ip is not None and self.has_sources and self.dimensions[ip].treatment == INDEX:
            out[ip] = out[ip] - self.power_min(out)
        return out

    def snap_nearest(self, point) -> np.ndarray | None:
        """Snap a point of the continuous domain to the closest measurable one.

        Each coordinate goes to its nearest raster value in raw units; the
        source is then resolved from frequency (primary) and distance
        (secondary).  Returns ``None`` when no measurable configuration
        corresponds to the point.
        """
        p = np.asarray(point, dtype=float)
        if p.shape != (self.ndim,) or not np.all(np.isfinite(p)):
            return None
        out = self.clip(p)
        for i, d in enumerate(self.dimensions):
            if d.raster is not None:
                out[i] = d.nearest(out[i])
        if self.has_sources:
            fi, si = self._index[FREQ], self._index[DIST]
            dists = self.distances_at(out[fi])
            if not dists:
                return None
            out[si] = dists[int(np.argmin([abs(s - p[si]) for s in dists]))]
            ip = self._index.get(POWER)
            if ip is not None:
                pmin = self.power_min(out)
                out[ip] = min(max(math.floor(p[ip] - pmin + 0.5), 0), POWER_SPAN_DB) + pmin
        if self.has_modulations:
            pi, bi = self._index[PAR], self._index[BW]
            m = self._nearest_modulation(p[pi], p[bi], dominated=False)
            out[pi], out[bi] = m.par, m.bandwidth
        if not self.is_valid(out, strict=True):
            return None
        return out

    def describe(self, point) -> dict:
        """Name the coordinates of a point, adding the antenna when known."""
        row = {n: float(v) for n, v in zip(self.names, point)}
        if self.has_sources:
            src = self.source_for(row[FREQ], row[DIST])
            row["antenna"] = src.name if src else ""
        return row

    # -- persistence -------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format": SPACE_FORMAT,
            "version": SPACE_VERSION,
            "name": self.name,
            "dimensions": [d.to_dict() for d in self.dimensions],
            "sources": [s.to_dict() for s in self.sources],
            "modulations": [m.to_dict() for m in self.modulations],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConfigSpace":
        if d.get("format") != SPACE_FORMAT:
            raise SpaceError(f"not a {SPACE_FORMAT} document")
        if d.get("version") != SPACE_VERSION:
            raise SpaceError(f"unsupported space version {d.get('version')!r}")
        return cls(
            tuple(Dimension.from_dict(x) for x in d["dimensions"]),
            tuple(SourceSpec.from_dict(x) for x in d.get("sources", [])),
            tuple(ModulationSpec.from_dict(x) for x in d.get("modulations", [])),
            name=d.get("name", "custom"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ConfigSpace":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> "ConfigSpace":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def box_space(bounds: Sequence[tuple[float, float]],
              names: Iterable[str] | None = None, name: str = "box") -> ConfigSpace:
    """Continuous box, e.g. ``box_space([(0, 1), (0, 1)])`` for the unit square."""
    bounds = list(bounds)
    names = list(names) if names is not None else [f"x{i}" for i in range(len(bounds))]
    return ConfigSpace(tuple(Dimension(n, float(lo), float(hi))
                             for n, (lo, hi) in zip(names, bounds)), name=name)


# ---------------------------------------------------------------------------
# Built-in SAR validation tables

# (name, frequency MHz, {distance mm: P_in,min dBm})
_DIPOLES = [
    ("D300", 300, {15: 16, 25: 17}),
    ("D450", 450, {15: 14, 25: 15}),
    ("D750", 750, {15: 11, 25: 13}),
    ("D835", 835, {5: 10, 15: 10, 25: 13}),
    ("D900", 900, {5: 9, 15: 10, 25: 12}),
    ("D1450", 1450, {5: 5, 10: 6, 25: 12}),
    ("D1750", 1750, {5: 4, 10: 5, 25: 12}),
    ("D1950", 1950, {5: 2, 10: 4, 25: 12}),
    ("D2300", 2300, {5: 1, 10: 3, 25: 12}),
    ("D2450", 2450, {5: 0, 10: 3, 25: 12}),
    ("D2600", 2600, {5: 0, 10: 3, 25: 12}),
    ("D3700", 3700, {5: -2, 10: 2, 25: 12}),
    ("D4200", 4200, {5: -3, 10: 2, 25: 12}),
    ("D4600", 4600, {5: -3, 10: 2, 25: 11}),
    ("D5000", 5200, {5: -4, 10: 2, 25: 10}),
    ("D5000", 5500, {5: -5, 10: 1, 25: 10}),
    ("D5000", 5600, {5: -4, 10: 1, 25: 10}),
    ("D5000", 5800, {5: -4, 10: 1, 25: 8}),
]

_PIFAS = [
    ("V750", "vpifa", 750, 2, 9),
    ("V835", "vpifa", 835, 2, 9),
    ("V1950", "vpifa", 1950, 2, 11),
    ("V3700", "vpifa", 3700, 2, 11),
    ("C2450", "cpifa", 2450, 7, 12),
]

_MODULATIONS = [
    (1, "Unmodulated carrier", 0.0, 0.0),
    (2, "Pulse signal with a period of 10 ms and a duty cycle of 10 %", 10.0, 0.0),
    (3, "WCDMA, 12,2 kbps RMC, IS-2000", 2.91, 5.0),
    (4, "UMTS-FDD (HSDPA)", 3.98, 5.0),
    (5, "LTE-TDD (SC-FDMA, 1 RB, 20 MHz, QPSK, UL Subframe=2,7)", 11.96, 0.2),
    (6, "LTE-FDD (SC-FDMA, 100% RB, 1,4 MHz, QPSK)", 5.76, 1.4),
    (7, "LTE-FDD (SC-FDMA, 100% RB, 1,4 MHz, 16-QAM)", 6.41, 1.4),
    (8, "LTE-TDD (SC-FDMA, 1 RB, 1,4 MHz, 64-QAM)", 10.26, 1.4),
    (9, "LTE-FDD (SC-FDMA, 100% RB, 3 MHz, QPSK)", 5.73, 3.0),
    (10, "LTE-FDD (SC-FDMA, 100% RB, 3 MHz, 64-QAM)", 6.65, 3.0),
    (11, "LTE-FDD (SC-FDMA, 100% RB, 5 MHz, QPSK)", 5.75, 5.0),
    (12, "LTE-FDD (SC-FDMA, 100% RB, 5 MHz, 16-QAM)", 6.44, 5.0),
    (13, "LTE-FDD (SC-FDMA, 100% RB, 10 MHz, 64-QAM)", 6.59, 10.0),
    (14, "LTE-FDD (SC-FDMA, 100% RB, 20 MHz, QPSK)", 5.67, 20.0),
    (15, "5G NR (DFT-s-OFDM, 1 RB, 50 MHz, QPSK, 30 kHz)", 5.68, 0.4),
    (16, "5G NR (CP-OFDM, 1 RB, 80 MHz, QPSK, 30 kHz)", 7.89, 0.4),
    (17, "5G NR (CP-OFDM, 1 RB, 100 MHz, QPSK, 30 kHz)", 7.93, 0.4),
    (18, "5G NR (CP-OFDM, 1 RB, 40 MHz, QPSK, 60 kHz)", 7.7, 0.8),
    (19, "5G NR (CP-OFDM, 50% RB, 50 MHz, QPSK, 15 kHz)", 8.43, 25.0),
    (20, "5G NR TDD (CP-OFDM, 100% RB, 100 MHz, 256-QAM, 30 kHz)", 10.28, 100.0),
    (21, "IEEE 802.11a/h WiFi 5 GHz (OFDM, 24 Mbps)", 9.38, 20.0),
    (22, "IEEE 802.11a/h WiFi 5 GHz (OFDM, 36 Mbps)", 10.12, 20.0),
    (23, "IEEE 802.11ax (40MHz, MCS1, 90pc duty cycle)", 8.91, 40.0),
    (24, "IEEE 802.11ax (80MHz, MCS5, 90pc duty cycle)", 8.9, 80.0),
]

# Array measurement area (mm); encloses every location of the published
# critical-configuration table.
ARRAY_X = (-60.0, 60.0)
ARRAY_Y = (-110.0, 110.0)


def sar_sources() -> tuple[SourceSpec, ...]:
    dipoles: dict[str, list] = {}
    for name, f, table in _DIPOLES:
        dipoles.setdefault(name, []).extend((f, s, p) for s, p in table.items())
    out = [SourceSpec(n, "dipole", tuple(rows)) for n, rows in dipoles.items()]
    out += [SourceSpec(n, kind, ((f, s, p),)) for n, kind, f, s, p in _PIFAS]
    return tuple(out)


def sar_modulations() -> tuple[ModulationSpec, ...]:
    return tuple(ModulationSpec(*row) for row in _MODULATIONS)


def _sar_dimensions(array: bool) -> list[Dimension]:
    sources = sar_sources()
    mods = sar_modulations()
    freqs = sorted({f for s in sources for f in s.frequencies})
    dists = sorted({d for s in sources for d in s.allowed_distances})
    pmins = [p for s in sources for _, _, p in s.pmin_table]
    dims = [
        Dimension(FREQ, freqs[0], freqs[-1], DISCRETE, tuple(freqs)),
        Dimension(DIST, dists[0], dists[-1], DISCRETE, tuple(dists)),
        Dimension(THETA, 0.0, 360.0, CONTINUOUS, tuple(range(0, 360, 15)), period=360.0),
    ]
    if array:
        dims += [
            Dimension(X, *ARRAY_X, CONTINUOUS, tuple(np.arange(ARRAY_X[0], ARRAY_X[1] + 1))),
            Dimension(Y, *ARRAY_Y, CONTINUOUS, tuple(np.arange(ARRAY_Y[0], ARRAY_Y[1] + 1))),
        ]
    dims += [
        Dimension(POWER, min(pmins), max(pmins) + POWER_SPAN_DB, INDEX),
        Dimension(PAR, 0.0, 12.0, DISCRETE, tuple(sorted({m.par for m in mods}))),
        Dimension(BW, 0.0, 100.0, DISCRETE, tuple(sorted({m.bandwidth for m in mods}))),
    ]
    return dims


def build_sar_array_space() -> ConfigSpace:
    """Eight-dimensional space (f, s, theta, x, y, P_in, PAR, BW) for array systems."""
    return ConfigSpace(tuple(_sar_dimensions(array=True)), sar_sources(),
                       sar_modulations(), name="sar-array")


def build_sar_scanning_space() -> ConfigSpace:
    """Six-dimensional variant without the (x, y) location axes."""
    return ConfigSpace(tuple(_sar_dimensions(array=False)), sar_sources(),
                       sar_modulations(), name="sar-scanning")
