"""Command line entry point: ``mmaf-lab {simulate,condition,directions,bridge,verify}``.

Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 acceptance failure.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import sys
import time
from pathlib import Path

import numpy as np

from . import acceptance
from . import conditioning as cond
from . import rng as streams
from .config import ConfigError, ScenarioConfig, load_file, resolve
from .ensemble import default_workers
from .flow import simulate_driving, solve_flow
from .io import write_csv, write_driving_csv, write_events_json, write_flow_csv, write_json, write_reports_json
from .stats import TestReport, ks_report, mean_band_report, moment_report, relative_gap_report, rn_diagnostic

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_FAIL = 0, 1, 2, 3


def _print_reports(reports: list[TestReport]):
    for r in reports:
        print(r.line())


def _prepare_out(cfg: ScenarioConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "config.resolved.json", cfg.to_dict())
    return out


def _probe_rows(records: np.ndarray, times):
    """Long-format rows ``sample, block, t, value`` from an ``(N, n, n_probes)`` array."""
    N, n, q = records.shape
    s, b, t = np.meshgrid(np.arange(N), np.arange(1, n + 1), np.arange(q), indexing="ij")
    return np.column_stack([s.ravel(), b.ravel(), np.asarray(times)[t.ravel()], records.ravel()])


# ---------------------------------------------------------------- commands


def cmd_simulate(cfg: ScenarioConfig, workers: int) -> int:
    out = _prepare_out(cfg)
    p, grid, g = cfg.partition, cfg.grid, np.asarray(cfg.g)
    for i in range(cfg.export_paths):
        x = simulate_driving(g, p, grid, streams.sample_rng(cfg.seed, streams.DIRECT, i), bridge=True)
        y = solve_flow(g, x)
        write_driving_csv(out / f"driving_{i}.csv", x)
        write_flow_csv(out / f"flow_{i}.csv", y)
        write_events_json(out / f"events_{i}.json", y)
    probes = tuple(cfg.probe_times)
    ens = cond.mmaf_ensemble(g, p, grid, cfg.N, cfg.seed, probes, with_qv=True, workers=workers)
    r = ens.records
    reports = []
    for k in range(p.n):
        for q, t in enumerate(probes):
            reports.append(mean_band_report(r["y"][:, k, q], g[k], f"martingale mean block {k + 1} t={t}"))
        reports.append(relative_gap_report(float(r["qv"][:, k].mean()), float(r["qv_target"][:, k].mean()),
                                           f"QV block {k + 1} vs int ds/m", 0.05, cfg.N))
    for u in range(p.n):
        for v in range(u + 1, p.n):
            target = float(r["cross_target"][:, u, v].mean())
            if target < 1e-3:
                continue  # pair almost never together: a relative comparison is meaningless
            reports.append(relative_gap_report(float(r["cross_qv"][:, u, v].mean()), target,
                                               f"cross-QV blocks {u + 1},{v + 1}", 0.05, cfg.N))
    write_reports_json(out / "reports.json", reports)
    write_csv(out / "tau.csv", [f"tau_{k}" for k in range(1, p.n)], r["tau"][:, 1:])
    _print_reports(reports)
    return EXIT_OK


def cmd_condition(cfg: ScenarioConfig, workers: int) -> int:
    out = _prepare_out(cfg)
    p, grid, g = cfg.partition, cfg.grid, np.asarray(cfg.g)
    probes = tuple(cfg.probe_times)
    ens = cond.epsilon_conditioned_ensemble(g, p, grid, cfg.eps, cfg.coal_deadline, cfg.N, cfg.seed,
                                            cfg.max_draws, probes, workers)
    direct = cond.mmaf_ensemble(g, p, grid, cfg.N, cfg.seed, probes, deadline=cfg.coal_deadline, workers=workers)
    reports = [
        TestReport(f"accepted-sample shortfall ({ens.n_samples} of {cfg.N} after {ens.n_draws} draws)",
                   ens.acceptance_rate, float(cfg.N - ens.n_samples), ens.n_samples, 0.5, "gap",
                   detail={"acceptance_rate": ens.acceptance_rate, "partial": ens.partial})
    ]
    if ens.n_samples:
        for k in range(p.n):
            for q, t in enumerate(probes):
                reports.append(ks_report(f"KS w_{k + 1}({t}) vs direct y_{k + 1}({t})",
                                         ens.records["w"][:, k, q], direct.records["y"][:, k, q]))
        write_csv(out / "probes_conditioned.csv", ["sample", "block", "t", "w"],
                  _probe_rows(ens.records["w"], probes))
    write_csv(out / "probes_direct.csv", ["sample", "block", "t", "y"], _probe_rows(direct.records["y"], probes))
    write_json(out / "ensemble.json", {"conditioned": ens.summary(), "direct": direct.summary()})
    write_reports_json(out / "reports.json", reports)
    print(f"acceptance rate {ens.acceptance_rate:.4g} ({ens.n_samples} accepted, {ens.n_draws} draws"
          f"{', partial' if ens.partial else ''})")
    _print_reports(reports)
    return EXIT_OK


def cmd_directions(cfg: ScenarioConfig, workers: int) -> int:
    out = _prepare_out(cfg)
    p, grid, g = cfg.partition, cfg.grid, np.asarray(cfg.g)
    if p.n < 2:
        raise ConfigError("masses", "direction sequences need at least two blocks")
    make = cond.zero_schedule if cfg.zero_drift else cond.default_schedule
    ladder = sorted(cfg.ladder)
    times = tuple(cfg.rn_times)
    rungs = cond.direction_ladder(g, p, grid, [make(p.n - 1, n) for n in ladder], cfg.N, cfg.seed, times, workers)
    rows, reports, diagnostics = [], [], []
    for j in cfg.rn_components:
        for q, t in enumerate(times):
            d = rn_diagnostic(ladder, [e.records["R"][:, j - 1, q] for e in rungs])
            diagnostics.append({"j": j, "t": t, **d.to_dict()})
            rows.extend((n, j, t, mu, se) for n, mu, se in zip(ladder, d.means, d.ses))
            if len(ladder) > 1:
                margin = float(np.min((d.means[:-1] - d.means[1:]) / d.diff_ses))
                reports.append(TestReport(f"E[R_j^2] decreasing beyond 2 SE, j={j} t={t}", margin, margin,
                                          cfg.N, 2.0, "margin"))
                reports.append(TestReport(f"E[R_j^2] final/first < 0.05, j={j} t={t}", d.final_ratio,
                                          d.final_ratio, cfg.N, 0.05, "gap"))
    direct = cond.mmaf_ensemble(g, p, grid, cfg.N, cfg.seed, times, workers=workers)
    for k in range(p.n):
        for q, t in enumerate(times):
            reports.append(ks_report(f"top rung KS w_{k + 1}({t}) vs direct y_{k + 1}({t})",
                                     rungs[-1].records["w"][:, k, q], direct.records["y"][:, k, q]))
    write_csv(out / "rn_diagnostics.csv", ["n", "j", "t", "mean_R2", "se"], rows)
    write_json(out / "rn_diagnostics.json", diagnostics)
    write_reports_json(out / "reports.json", reports)
    for dg in diagnostics:
        means = ", ".join(f"{v:.4g}" for v in dg["means"])
        print(f"j={dg['j']} t={dg['t']}: E[R^2] along {ladder}: {means}")
    _print_reports(reports)
    return EXIT_OK


def cmd_bridge(cfg: ScenarioConfig, workers: int) -> int:
    if abs(cfg.T - 1.0) > 1e-12:
        raise ConfigError("T", "the bridge demo needs T = 1")
    out = _prepare_out(cfg)
    grid = cfg.grid
    b = cond.bridge_demo(cfg.z0, grid, cfg.N, cfg.seed, workers)
    t = b.times
    write_csv(out / "bridge_curves.csv", ["t", "mean", "var", "target_mean", "target_var"],
              np.column_stack([t, b.mean(), b.var(), t * cfg.z0, t * (1 - t)]))
    reports = []
    for s in cfg.probe_times:
        if 0 < s < 1:
            i = grid.index(s)
            reports.append(moment_report(b.paths[:, i], t[i] * cfg.z0, t[i] * (1 - t[i]), f"bridge t={t[i]:.4g}"))
    reports.append(TestReport("bridge endpoint max error", b.endpoint_error(), b.endpoint_error(), cfg.N, 1e-15, "gap"))
    write_reports_json(out / "reports.json", reports)
    _print_reports(reports)
    return EXIT_OK


def cmd_verify(cfg: ScenarioConfig, workers: int, full: bool, list_only: bool) -> int:
    if list_only:
        for c in acceptance.CRITERIA:
            print(f"[{c.id}] {c.title}")
        return EXIT_OK
    out = _prepare_out(cfg)
    scale = "full" if full else "smoke"
    results = acceptance.run_suite(scale, cfg.seed, workers, on_result=lambda r: print(r.line(), flush=True))
    acceptance.write_results(out / "reports.json", scale, cfg.seed, results)
    failed = [r for r in results if not r.passed]
    for r in failed:
        for rep in r.reports:
            if not rep.passed:
                print(f"  [{r.id}] {rep.line()}")
    return EXIT_FAIL if failed else EXIT_OK


# ---------------------------------------------------------------- parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmaf-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "condition", "directions", "bridge", "verify"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML or JSON scenario file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        sp.add_argument("--workers", type=int, default=None, help="worker processes (default: number of cores)")
        sp.add_argument("--samples", type=int, dest="N")
        if name == "condition":
            sp.add_argument("--eps", type=float)
        if name == "bridge":
            sp.add_argument("--z0", type=float)
        if name == "verify":
            sp.add_argument("--full", action="store_true", default=None)
            sp.add_argument("--list", action="store_true", dest="list_only")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config", "workers", "list_only")}
    try:
        cfg = resolve(load_file(args.config) if args.config else {}, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    workers = args.workers or default_workers()
    started = time.time()
    try:
        if args.command == "verify":
            code = cmd_verify(cfg, workers, bool(cfg.full), args.list_only)
        else:
            code = {"simulate": cmd_simulate, "condition": cmd_condition, "directions": cmd_directions,
                    "bridge": cmd_bridge}[args.command](cfg, workers)
        if not getattr(args, "list_only", False):
            write_json(Path(cfg.out) / "run_meta.json", {
                "command": args.command,
                "workers": workers,
                "started": _dt.datetime.fromtimestamp(started).isoformat(timespec="seconds"),
                "elapsed_seconds": round(time.time() - started, 3),
                "exit_code": code,
            })
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return code


if __name__ == "__main__":
    sys.exit(main())
