"""End-to-end SAR validation on a synthetic device, with the device standing
in for the lab: sample, measure, fit, confirm, search, then measure and
verify the reported configurations."""
import argparse
import time

import numpy as np

from gpival.confirmation import confirm
from gpival.kriging import ValuedSample
from gpival.oracles import DEFAULT_MPE, synthetic_device
from gpival.pipeline import fit_gpi_model, verify_measurements
from gpival.sampling import LhsPlan, generate_initial_sample, generate_test_sample
from gpival.search import SearchParams, run_critical_search


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--profile", choices=("structured", "noisy", "injected-fault"),
                   default="injected-fault")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=400)
    p.add_argument("--test-size", type=int, default=50)
    p.add_argument("--mpe", type=float, default=DEFAULT_MPE)
    p.add_argument("--out", default=None, help="write the critical report CSV here")
    args = p.parse_args()

    start = time.perf_counter()
    fld = synthetic_device(args.profile, args.seed)
    space = fld.space
    pts = generate_initial_sample(LhsPlan(space, args.size, args.seed))
    fit = fit_gpi_model(ValuedSample(pts, fld(pts)), space)
    model = fit.model
    v = model.variogram
    print(f"device {args.profile} seed {args.seed}: {space.ndim} dimensions, {len(pts)} points")
    print(f"variogram {v.shape}: nugget={v.nugget:.4g} sill={v.sill:.4g} range={v.range:.4g} "
          f"NRMSE={model.fit_nrmse:.3f}")
    for w in fit.warnings:
        print(f"  warning: {w}")

    test = generate_test_sample(LhsPlan(space, args.test_size, args.seed + 1, "test"), pts)
    rep = confirm(model, ValuedSample(test, fld(test)))
    print(rep.table())

    params = SearchParams(-args.mpe, args.mpe)
    crit = run_critical_search(model, params, args.seed)
    print(f"search: population {crit.population}, {len(crit)} configuration(s) with "
          f"failure probability >= {params.report_floor}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(crit.to_csv())
    if len(crit):
        measured = fld(crit.points)
        res = verify_measurements([str(i) for i in range(len(crit))], measured, args.mpe)
        print(f"follow-up measurements: {len(res.failures)} of {len(res.rows)} exceed "
              f"the MPE of {args.mpe:.3f} dB")
        for r in res.failures[:10]:
            print(f"  row {r.config_id}: {r.measured:+.3f} dB")
        if fld.pocket is not None:
            inside = int(np.sum(fld.pocket(crit.points)))
            print(f"{inside} reported configuration(s) lie inside the injected fault")
    print(f"elapsed {time.perf_counter() - start:.1f} s")


if __name__ == "__main__":
    main()
