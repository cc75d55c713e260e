"""How the sup-norm ball acceptance behaves as eps shrinks, and what it does to tau.

For one proposal pool (the first --draws driving paths) this prints, per eps:
acceptance rate, mean coalescence time of the accepted draws, and KS p-values
of the accepted w-probes against directly simulated flows that coalesced by the
deadline. Writes results/epsilon_tilt.csv.

    python3 scripts/epsilon_tilt.py --draws 20000 --workers 4
"""
import argparse
from pathlib import Path

import numpy as np

from mmaf_lab import conditioning as cond
from mmaf_lab.core import MassPartition
from mmaf_lab.ensemble import default_workers
from mmaf_lab.flow import GridSpec
from mmaf_lab.io import write_csv
from mmaf_lab.stats import ks_two_sample


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--draws", type=int, default=20_000)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--deadline", type=float, default=0.8)
    ap.add_argument("--eps", type=float, nargs="*", default=[4.0, 2.0, 1.0, 0.5, 0.3, 0.2, 0.1, 0.05])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=default_workers())
    ap.add_argument("--out", default="results/epsilon_tilt.csv")
    args = ap.parse_args()

    p = MassPartition.uniform(2)
    g = np.array([0.0, 1.0])
    grid = GridSpec(args.dt, 1.0)
    probes = (0.25, 0.5, 0.9)
    pool = cond.proposal_records(g, p, grid, args.deadline, args.seed, args.draws, probes, args.workers)
    direct = cond.mmaf_ensemble(g, p, grid, 2000, args.seed, probes, deadline=args.deadline, workers=args.workers)
    tau_direct = float(direct.records["tau"][:, 1].mean())
    print(f"on-time fraction {pool['on_time'].mean():.4f}; direct mean tau given deadline {tau_direct:.3f}")
    rows = []
    print(f"{'eps':>6} {'accepted':>9} {'rate':>9} {'mean tau':>9}  KS p at t=" + ", ".join(map(str, probes)))
    for eps in args.eps:
        acc = pool["on_time"] & (pool["rho"] < eps)
        n_acc = int(acc.sum())
        tau = float(pool["tau"][acc, 1].mean()) if n_acc else float("nan")
        ps = []
        for q in range(len(probes)):
            ps.append(ks_two_sample(pool["w"][acc, 0, q], direct.records["y"][:, 0, q])[1] if n_acc >= 20 else np.nan)
        rows.append([eps, n_acc, n_acc / args.draws, tau, *ps])
        print(f"{eps:6.3g} {n_acc:9d} {n_acc / args.draws:9.4g} {tau:9.3f}  " + ", ".join(f"{v:.2g}" for v in ps))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(out, ["eps", "accepted", "rate", "mean_tau", *[f"ks_p_t{t}" for t in probes]], rows,
              comments=[f"draws={args.draws} dt={args.dt} deadline={args.deadline} direct_mean_tau={tau_direct}"])


if __name__ == "__main__":
    main()
