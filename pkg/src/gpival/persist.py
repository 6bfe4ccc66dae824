"""File interchange: sample CSVs, model JSON, atomic writes and run manifests."""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .kriging import GpiModel, ValuedSample
from .space import ConfigSpace
from .variogram import AnisotropyMap, EmpiricalVariogram, VariogramModel

ID_COLUMN = "config_id"
VALUE_COLUMN = "deviation_dB"
MODEL_FORMAT = "gpival.model"
MODEL_VERSION = 1


class FormatError(ValueError):
    pass


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v: float) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def sample_to_csv(names, points, values=None, ids=None) -> str:
    """CSV with ``config_id``, one column per dimension and ``deviation_dB``.

    A missing ``values`` leaves the value column empty (a measurement request).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    ids = list(ids) if ids is not None else [f"c{i:04d}" for i in range(len(pts))]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([ID_COLUMN, *names, VALUE_COLUMN])
    for i, p in enumerate(pts):
        v = "" if values is None else _fmt(values[i])
        w.writerow([ids[i], *(_fmt(x) for x in p), v])
    return buf.getvalue()


@dataclass(frozen=True)
class SampleTable:
    names: tuple
    ids: tuple
    points: np.ndarray
    values: np.ndarray

    @property
    def measured(self) -> bool:
        return not np.any(np.isnan(self.values))

    def valued(self) -> ValuedSample:
        if not self.measured:
            missing = [self.ids[i] for i in np.flatnonzero(np.isnan(self.values))[:5]]
            raise FormatError(f"missing {VALUE_COLUMN} for {missing}")
        return ValuedSample(self.points, self.values, self.ids)


def sample_from_csv(text: str, names=None) -> SampleTable:
    """Parse a sample CSV; ``names`` (if given) must match the dimension columns."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise FormatError("empty CSV: header row is mandatory")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != ID_COLUMN or header[-1] != VALUE_COLUMN:
        raise FormatError(f"header must be {ID_COLUMN}, <dimensions...>, {VALUE_COLUMN}")
    dims = tuple(header[1:-1])
    if names is not None and tuple(names) != dims:
        raise FormatError(f"dimension columns {list(dims)} do not match {list(names)}")
    ids, pts, vals = [], [], []
    for k, r in enumerate(rows[1:], start=2):
        if not r or all(not c.strip() for c in r):
            continue
        if len(r) != len(header):
            raise FormatError(f"line {k}: expected {len(header)} fields, got {len(r)}")
        try:
            pts.append([float(c) for c in r[1:-1]])
            vals.append(float(r[-1]) if r[-1].strip() else np.nan)
        except ValueError as exc:
            raise FormatError(f"line {k}: {exc}") from exc
        ids.append(r[0])
    if len(set(ids)) != len(ids):
        raise FormatError("duplicate config_id")
    pts_arr = np.array(pts, dtype=float).reshape(-1, len(dims))
    return SampleTable(dims, tuple(ids), pts_arr, np.array(vals, dtype=float))


def model_to_dict(model: GpiModel) -> dict:
    names = model.space.names if model.space is not None else tuple(
        f"x{i}" for i in range(model.sample.ndim))
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "sample_csv": sample_to_csv(names, model.sample.points, model.sample.values,
                                    model.sample.ids),
        "anisotropy": model.anisotropy.to_dict(),
        "variogram": model.variogram.to_dict(),
        "fit_nrmse": model.fit_nrmse,
        "empirical": model.empirical.to_dict() if model.empirical is not None else None,
        "outliers": list(model.outliers),
        "nugget_floor": model.nugget_floor,
        "space": model.space.to_dict() if model.space is not None else None,
    }


def model_from_dict(d: dict) -> GpiModel:
    if d.get("format") != MODEL_FORMAT:
        raise FormatError(f"not a {MODEL_FORMAT} document")
    if d.get("version") != MODEL_VERSION:
        raise FormatError(f"unsupported model version {d.get('version')!r}")
    space = ConfigSpace.from_dict(d["space"]) if d.get("space") else None
    table = sample_from_csv(d["sample_csv"], space.names if space else None)
    emp = EmpiricalVariogram.from_dict(d["empirical"]) if d.get("empirical") else None
    return GpiModel(
        table.valued(),
        AnisotropyMap.from_dict(d["anisotropy"]),
        VariogramModel.from_dict(d["variogram"]),
        float(d["fit_nrmse"]),
        space,
        emp,
        tuple(d.get("outliers", ())),
        float(d.get("nugget_floor", 0.0)),
    )


def model_to_json(model: GpiModel) -> str:
    return json.dumps(model_to_dict(model), indent=2, sort_keys=True)


def model_from_json(text: str) -> GpiModel:
    try:
        return model_from_dict(json.loads(text))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed model document: {exc}") from exc


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    """Provenance record written next to every CLI output."""

    command: str
    params: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    version: str = __version__
    timestamp: str = ""

    def add_input(self, path) -> None:
        self.inputs[str(path)] = sha256(path)

    def add_output(self, path) -> None:
        self.outputs[str(path)] = sha256(path)

    def to_json(self) -> str:
        d = asdict(self)
        d["timestamp"] = self.timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat()
        return json.dumps(d, indent=2, sort_keys=True, default=str)

    def write(self, out_path) -> Path:
        p = Path(str(out_path) + ".manifest.json")
        atomic_write(p, self.to_json())
        return p
