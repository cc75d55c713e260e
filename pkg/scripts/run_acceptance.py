"""Run the acceptance criteria and write a JSON report.

    python3 scripts/run_acceptance.py --scale full --out results/acceptance.json
    python3 scripts/run_acceptance.py --ids 5 6 --workers 4
"""
import argparse
import time
from pathlib import Path

from mmaf_lab.acceptance import run_suite, write_results
from mmaf_lab.ensemble import default_workers


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--scale", choices=["smoke", "full"], default="full")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=default_workers())
    ap.add_argument("--ids", type=int, nargs="*")
    ap.add_argument("--out", default="results/acceptance.json")
    args = ap.parse_args()

    t0 = time.time()

    def show(r):
        print(f"{r.line()}  [{time.time() - t0:.0f}s]", flush=True)
        for rep in r.reports:
            if not rep.passed:
                print(f"    {rep.line()}", flush=True)

    results = run_suite(args.scale, args.seed, args.workers, args.ids, on_result=show)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_results(out, args.scale, args.seed, results)
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} criteria pass; report in {out}")


if __name__ == "__main__":
    main()
