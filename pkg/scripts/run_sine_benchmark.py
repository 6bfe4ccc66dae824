"""Sine-wave benchmark over several seeds: variogram reproduction, 99%
interval coverage along the diagonal and search recall."""
import argparse
import json
import time

from gpival.bench import sine_benchmark


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--size", type=int, default=50)
    p.add_argument("--sensitivity", type=float, default=0.1)
    p.add_argument("--iterations", type=int, default=8)
    p.add_argument("--json", action="store_true", help="print one JSON object per seed")
    args = p.parse_args()

    start = time.perf_counter()
    rows = [sine_benchmark(s, args.size, args.sensitivity, args.iterations)
            for s in range(args.seeds)]
    if args.json:
        for r in rows:
            print(json.dumps(r, sort_keys=True))
        return
    print(f"{'seed':>4} {'range':>7} {'sill':>7} {'nugget':>8} {'vario':>5} {'cover99':>7} "
          f"{'rows':>4} {'maxdist':>7} {'limit':>6} {'recall':>6}")
    for r in rows:
        v, s = r["variogram"], r["search"]
        dist = "-" if s["max_distance"] is None else f"{s['max_distance']:.3f}"
        print(f"{r['seed']:>4} {v['range']:>7.3f} {v['sill']:>7.3f} {v['nugget']:>8.1e} "
              f"{'ok' if r['variogram_ok'] else 'no':>5} {r['coverage_99']:>7.3f} "
              f"{s['rows']:>4} {dist:>7} {s['limit']:>6.3f} {'ok' if s['ok'] else 'no':>6}")
    n = len(rows)
    print(f"variogram within tolerance: {sum(r['variogram_ok'] for r in rows)}/{n}")
    print(f"coverage >= 95%: {sum(r['coverage_99'] >= 0.95 for r in rows)}/{n}")
    print(f"search recall bound met: {sum(r['search']['ok'] for r in rows)}/{n}")
    print(f"elapsed {time.perf_counter() - start:.1f} s")


if __name__ == "__main__":
    main()
