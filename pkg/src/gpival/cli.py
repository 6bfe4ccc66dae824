"""Command-line interface.

Exit codes: 0 success or pass, 1 validation failure, 2 usage or I/O error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .confirmation import Thresholds, confirm, qq_points
from .kriging import KrigingError
from .persist import (FormatError, RunManifest, atomic_write, model_from_json, model_to_json,
                      sample_from_csv, sample_to_csv)
from .pipeline import StageError, fit_gpi_model, verify_measurements
from .sampling import LhsPlan, SamplingError, generate_initial_sample, generate_test_sample
from .search import SearchError, SearchParams, run_critical_search
from .space import ConfigSpace, SpaceError, build_sar_array_space, build_sar_scanning_space, mpe
from .variogram import VariogramError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
BUILTIN_SPACES = {"sar-array": build_sar_array_space, "sar-scanning": build_sar_scanning_space}


class UsageError(Exception):
    pass


def _load_space(spec: str) -> ConfigSpace:
    if spec in BUILTIN_SPACES:
        return BUILTIN_SPACES[spec]()
    path = Path(spec)
    if not path.is_file():
        raise UsageError(f"--space: no built-in space or file named {spec!r}")
    return ConfigSpace.load(path)


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc


def _emit(args, text: str, manifest: RunManifest | None = None, suffix: str = "") -> None:
    if args.out is None:
        sys.stdout.write(text)
        return
    out = Path(str(args.out) + suffix) if suffix else Path(args.out)
    atomic_write(out, text)
    if manifest is not None:
        manifest.add_output(out)


def _threshold_pair(args) -> tuple[float, float]:
    if args.t_lower is not None or args.t_upper is not None:
        if args.t_lower is None or args.t_upper is None:
            raise UsageError("give both --t-lower and --t-upper")
        return args.t_lower, args.t_upper
    limit = args.mpe if args.mpe is not None else mpe(args.u_system, args.u_source)
    return -limit, limit


# -- subcommands -------------------------------------------------------------

def cmd_space(args) -> int:
    space = _load_space(args.space)
    _emit(args, space.to_json() + "\n")
    return EXIT_OK


def cmd_sample(args) -> int:
    space = _load_space(args.space)
    size = args.size if args.size is not None else (400 if args.mode == "initial" else 50)
    plan = LhsPlan(space, size, args.seed, args.mode)
    man = RunManifest("sample", {"space": args.space, "size": size, "mode": args.mode},
                      {"seed": args.seed})
    if args.mode == "initial":
        pts = generate_initial_sample(plan)
        prefix = "s"
    else:
        existing = np.empty((0, space.ndim))
        if args.existing:
            existing = sample_from_csv(_read(args.existing), space.names).points
            man.add_input(args.existing)
        pts = generate_test_sample(plan, existing)
        prefix = "t"
    ids = [f"{prefix}{i:04d}" for i in range(len(pts))]
    _emit(args, sample_to_csv(space.names, pts, None, ids), man)
    if args.out:
        man.write(args.out)
    return EXIT_OK


def cmd_fit(args) -> int:
    space = _load_space(args.space) if args.space else None
    table = sample_from_csv(_read(args.sample), space.names if space else None)
    res = fit_gpi_model(table.valued(), space, args.shape, args.nugget, args.isotropic,
                        args.tolerance)
    m = res.model
    man = RunManifest("fit", {"shape": args.shape, "nugget": args.nugget,
                              "isotropic": args.isotropic, "tolerance": args.tolerance})
    man.add_input(args.sample)
    _emit(args, model_to_json(m) + "\n", man)
    if args.out:
        atomic_write(Path(str(args.out) + ".diagnostics.json"),
                     json.dumps(res.diagnostics(), indent=2, sort_keys=True) + "\n")
        emp = m.empirical
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lag", "gamma_hat", "count", "gamma_fit"])
        for h, g, c in zip(emp.lags, emp.bin_means, emp.bin_counts):
            w.writerow([repr(float(h)), repr(float(g)) if c else "", int(c),
                        repr(float(m.variogram(h)))])
        atomic_write(Path(str(args.out) + ".variogram.csv"), buf.getvalue())
        man.write(args.out)
    v = m.variogram
    print(f"variogram {v.shape}: nugget={v.nugget:.6g} sill={v.sill:.6g} range={v.range:.6g} "
          f"NRMSE={m.fit_nrmse:.4f}", file=sys.stderr)
    for wmsg in res.warnings:
        print(f"warning: {wmsg}", file=sys.stderr)
    return EXIT_OK


def cmd_confirm(args) -> int:
    model = model_from_json(_read(args.model))
    names = model.space.names if model.space is not None else None
    test = sample_from_csv(_read(args.test), names).valued()
    rep = confirm(model, test, Thresholds(alpha=args.alpha))
    man = RunManifest("confirm", {"alpha": args.alpha})
    man.add_input(args.model)
    man.add_input(args.test)
    _emit(args, rep.to_json() + "\n", man)
    if args.out:
        t, s = qq_points(rep.residuals)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theoretical_quantile", "sample_quantile"])
        w.writerows([[repr(float(a)), repr(float(b))] for a, b in zip(t, s)])
        atomic_write(Path(str(args.out) + ".qq.csv"), buf.getvalue())
        man.write(args.out)
    print(rep.table(), file=sys.stderr)
    return EXIT_OK if rep.overall else EXIT_FAIL


def cmd_search(args) -> int:
    model = model_from_json(_read(args.model))
    space = _load_space(args.space) if args.space else None
    lo, hi = _threshold_pair(args)
    params = SearchParams(lo, hi, args.sensitivity, args.repulsion, args.iterations,
                          tuple(args.caps), args.floor)
    rep = run_critical_search(model, params, args.seed, space)
    man = RunManifest("search", {"t_lower": lo, "t_upper": hi, "sensitivity": args.sensitivity,
                                 "repulsion": args.repulsion, "iterations": args.iterations,
                                 "caps": list(params.caps), "floor": args.floor},
                      {"seed": args.seed})
    man.add_input(args.model)
    _emit(args, rep.to_csv(), man)
    if args.out:
        atomic_write(Path(str(args.out) + ".json"), rep.to_json() + "\n")
        man.write(args.out)
    print(f"population {rep.population}, {len(rep)} configuration(s) with failure "
          f"probability >= {args.floor}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    text = _read(args.report)
    rows = list(csv.DictReader(io.StringIO(text)))
    header = next(csv.reader(io.StringIO(text)), [])
    if not header:
        raise UsageError("empty report: header row is mandatory")
    if args.column not in header:
        raise UsageError(f"report has no {args.column!r} column")
    ids = [r.get("config_id") or str(i) for i, r in enumerate(rows)]
    try:
        measured = [float(r[args.column]) for r in rows]
        if "mpe_dB" in header and args.mpe is None:
            limits = [float(r["mpe_dB"]) for r in rows]
        else:
            limits = args.mpe if args.mpe is not None else mpe(args.u_system, args.u_source)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"non-numeric entry in report: {exc}") from exc
    res = verify_measurements(ids, measured, limits)
    text_out = res.table() + "\n"
    _emit(args, text_out)
    return EXIT_OK if res.passed else EXIT_FAIL


def cmd_benchmark(args) -> int:
    from .bench import sine_benchmark
    out = sine_benchmark(args.seed, size=args.size or 50, sensitivity=args.sensitivity,
                         iterations=args.iterations)
    _emit(args, json.dumps(out, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if out["variogram_ok"] else EXIT_FAIL


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gpival", description="Validate a multi-variable measurement system with a kriging model.",
                                epilog="exit codes: 0 pass, 1 validation failure, 2 usage or I/O error")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help="output file (default: stdout)"):
        sp.add_argument("--out", type=Path, default=None, help=out_help)

    s = sub.add_parser("space", help="write a configuration space as JSON")
    s.add_argument("--space", default="sar-array", help="built-in name or JSON file")
    common(s)
    s.set_defaults(func=cmd_space)

    s = sub.add_parser("sample", help="LHS measurement request (CSV with empty values)")
    s.add_argument("--space", default="sar-array")
    s.add_argument("--size", type=int, default=None, help="default 400 (initial) / 50 (test)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--mode", choices=("initial", "test"), default="initial")
    s.add_argument("--existing", help="initial sample CSV the test sample must avoid")
    common(s)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("fit", help="create a GPI model from a measured sample")
    s.add_argument("sample", help="sample CSV with deviation_dB filled in")
    s.add_argument("--space", default=None)
    s.add_argument("--shape", choices=("gaussian", "exponential", "spherical"), default="gaussian")
    s.add_argument("--nugget", choices=("free", "fixed_zero"), default="free")
    s.add_argument("--isotropic", action="store_true", help="skip the directional fits")
    s.add_argument("--tolerance", type=float, default=22.5, help="angular tolerance (deg)")
    common(s, "model JSON (diagnostics and variogram CSV are written beside it)")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("confirm", help="confirm a model on an independent test sample")
    s.add_argument("model")
    s.add_argument("test")
    s.add_argument("--alpha", type=float, default=0.25, help="NRMSE acceptance threshold")
    common(s, "report JSON (QQ data CSV is written beside it)")
    s.set_defaults(func=cmd_confirm)

    def thresholds(sp):
        sp.add_argument("--t-lower", type=float, default=None)
        sp.add_argument("--t-upper", type=float, default=None)
        sp.add_argument("--mpe", type=float, default=None, help="symmetric limit in dB")
        sp.add_argument("--u-system", type=float, default=0.30)
        sp.add_argument("--u-source", type=float, default=0.15)

    s = sub.add_parser("search", help="search for critical configurations")
    s.add_argument("model")
    s.add_argument("--space", default=None, help="override the space stored in the model")
    thresholds(s)
    s.add_argument("--sensitivity", type=float, default=0.05)
    s.add_argument("--repulsion", type=float, default=0.1)
    s.add_argument("--iterations", type=int, default=8)
    s.add_argument("--caps", type=int, nargs=2, default=(10, 1000), metavar=("MIN", "MAX"))
    s.add_argument("--floor", type=float, default=0.05, help="reported probability floor")
    s.add_argument("--seed", type=int, default=0)
    common(s, "report CSV (JSON is written beside it)")
    s.set_defaults(func=cmd_search)

    s = sub.add_parser("verify", help="check follow-up measurements against the MPE")
    s.add_argument("report", help="CSV with a measured deviation column")
    s.add_argument("--column", default="measured_dB")
    s.add_argument("--mpe", type=float, default=None)
    s.add_argument("--u-system", type=float, default=0.30)
    s.add_argument("--u-source", type=float, default=0.15)
    common(s)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("benchmark", help="analytic sine-wave benchmark")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--size", type=int, default=None)
    s.add_argument("--sensitivity", type=float, default=0.1)
    s.add_argument("--iterations", type=int, default=8)
    common(s)
    s.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, FormatError, SpaceError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (StageError, VariogramError, KrigingError, SamplingError, SearchError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
