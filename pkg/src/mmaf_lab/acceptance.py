"""Acceptance criteria as runnable checks.

Each criterion returns a list of :class:`TestReport`; it passes iff all its
reports pass. ``scale="full"`` uses the stated sample sizes, ``"smoke"`` a
reduced size with the same thresholds.
"""
from __future__ import annotations

import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import conditioning as cond
from . import rng as streams
from .basis import adapted_basis, tau_sum_check
from .core import MassPartition, TOL, project_onto_clusters
from .ensemble import map_samples, stack_records
from .flow import GridSpec, check_coalex, simulate_driving, solve_flow, integral_reconstruction
from .io import write_json
from .remainder import extract_noise, rebuild_wiener, remainder_from_arrays, remainder_map
from .stats import (
    TestReport,
    correlation_report,
    ks_report,
    mean_band_report,
    moment_report,
    relative_gap_report,
    rn_diagnostic,
)

GRID = GridSpec(1e-3, 1.0)


@dataclass(frozen=True)
class Criterion:
    id: int
    title: str
    run: Callable[[str, int, int], list[TestReport]]


def criterion_seed(seed: int, cid: int) -> int:
    return int(np.random.SeedSequence([int(seed), cid]).generate_state(1, dtype=np.uint32)[0])


def _gap(name, value, bound, n, statistic=None):
    return TestReport(name, value if statistic is None else statistic, value, n, bound, "gap")


def random_scenario(rng: np.random.Generator, n_max: int = 16, spread: float = 0.3):
    """Random partition (``n <= n_max``) and sorted start values, some of them tied."""
    n = int(rng.integers(1, n_max + 1))
    m = rng.dirichlet(np.full(n, 2.0))
    m = np.maximum(m, 1e-3)
    m /= m.sum()
    m[-1] = 1.0 - m[:-1].sum()
    g = np.sort(rng.normal(scale=spread, size=n))
    if n > 2 and rng.random() < 0.2:
        g[1] = g[0]
    return MassPartition(tuple(m)), g


def _random_flows(seed: int, count: int, min_blocks: int = 1):
    rng = streams.sample_rng(seed, streams.SCENARIO, 0)
    out = []
    while len(out) < count:
        p, g = random_scenario(rng)
        if p.n < min_blocks:
            continue
        x = simulate_driving(g, p, GRID, streams.sample_rng(seed, streams.DRIVING, len(out)), bridge=bool(len(out) % 2))
        out.append((p, g, x, solve_flow(g, x)))
    return out


# ---------------------------------------------------------------- 1-4: algebra


def crit_flow_identity(scale, seed, workers):
    count = 100 if scale == "full" else 20
    rec_err = order_err = mean_err = 0.0
    for p, g, x, y in _random_flows(seed, count):
        rec_err = max(rec_err, float(np.max(np.abs(integral_reconstruction(y, x) - y.values))))
        if p.n > 1:
            order_err = max(order_err, float(np.max(-np.diff(y.values, axis=0))), 0.0)
        mean_err = max(mean_err, float(np.max(np.abs(p.m @ y.values - p.m @ x.values))))
    tol = TOL.flow
    return [
        _gap("integral identity max error", rec_err, tol, count),
        _gap("order preservation max violation", order_err, tol, count),
        _gap("mass-weighted mean conservation max error", mean_err, tol, count),
    ]


def crit_basis(scale, seed, workers):
    count = 100 if scale == "full" else 20
    ortho = span = sign = annihil = 0.0
    n_vectors = 0
    for p, g, x, y in _random_flows(seed, count, min_blocks=2):
        b = adapted_basis(y)
        M = b.matrix()
        n_vectors += len(M)
        ortho = max(ortho, float(np.max(np.abs((M * p.m) @ M.T - np.eye(len(M))))))
        clusterings = y.event_clusterings()
        for j, c in enumerate(clusterings):
            k = y.n - 1 - j
            for l, e in b.vectors.items():
                target = e if l < k else np.zeros_like(e)
                span = max(span, float(np.max(np.abs(project_onto_clusters(e, c, p) - target))))
        for k in b.ks:
            sign = max(sign, float(np.max(-np.cumsum(b.vectors[k] * p.m))))
            i = b.tau_index[k]
            annihil = max(annihil, float(np.max(np.abs((b.vectors[k] * p.m) @ y.values[:, i:]))))
    return [
        _gap("orthonormality max error", ortho, TOL.algebraic, n_vectors),
        _gap("span/annihilation max error", span, TOL.algebraic, n_vectors),
        _gap("sign normalization max violation", max(sign, 0.0), TOL.algebraic, n_vectors),
        _gap("orthogonality to flow after tau_k", annihil, TOL.flow, n_vectors),
    ]


def crit_tau_sum(scale, seed, workers):
    count = 100 if scale == "full" else 20
    reports = []
    flows = [f for f in _random_flows(seed, count, min_blocks=2)]
    for beta in (0.6, 0.75, 1.0, 2.0):
        worst, checked = 0.0, 0
        for p, g, x, y in flows:
            if not y.events:
                continue
            n_floor = y.n - len(y.events)
            for nf in range(max(n_floor, 1), y.n):
                worst = max(worst, tau_sum_check(y, beta, nf)[2])
                checked += 1
        reports.append(_gap(f"tau-sum identity beta={beta}", worst, 1e-10, checked))
    return reports


def crit_round_trips(scale, seed, workers):
    count = 50
    flows = [f for f in _random_flows(seed, 4 * count, min_blocks=2) if f[3].events][:count]
    rng = streams.sample_rng(seed, streams.REMAINDER, 0)
    trip = zero = 0.0
    coal_zero_ok = True
    coal_nonzero_false = 0
    scales = np.logspace(-6, 1, len(flows))
    for (p, g, x, y), c in zip(flows, scales):
        walks = cond.brownian_from_noise(rng.standard_normal((p.n - 1, GRID.n_steps)), GRID.dt)
        z = remainder_from_arrays(y, c * walks)
        back = remainder_map(y, rebuild_wiener(y, z))
        trip = max(trip, max(float(np.max(np.abs(back.paths[k] - z.paths[k]))) for k in z.ks))
        z0 = remainder_from_arrays(y, np.zeros((p.n - 1, GRID.nt)))
        w0 = rebuild_wiener(y, z0)
        zero = max(zero, float(np.max(np.abs(w0.values - y.values))))
        coal_zero_ok &= check_coalex(w0)
        coal_nonzero_false += int(not check_coalex(rebuild_wiener(y, z)))
    n = len(flows)
    return [
        _gap("remainder of rebuilt path max error", trip, TOL.roundtrip, n),
        _gap("zero remainder rebuild max error", zero, 1e-15, n),
        _gap("check_coalex fails on z = 0 (count)", float(not coal_zero_ok), 0.5, n),
        _gap("nonzero z accepted as coalescing (count)", float(n - coal_nonzero_false), 0.5, n),
    ]


# ---------------------------------------------------------------- 5-6: laws


def crit_mmaf_law(scale, seed, workers):
    N = 5000 if scale == "full" else 500
    p = MassPartition((0.1, 0.2, 0.3, 0.4))
    g = np.array([0.0, 0.5, 1.0, 1.5])
    probes = (0.25, 0.5, 1.0)
    ens = cond.mmaf_ensemble(g, p, GRID, N, seed, probes, with_qv=True, workers=workers)
    r = ens.records
    reports = []
    for k in range(p.n):
        for q, t in enumerate(probes):
            reports.append(mean_band_report(r["y"][:, k, q], g[k], f"martingale mean block {k + 1} t={t}"))
    for k in range(p.n):
        reports.append(
            relative_gap_report(float(r["qv"][:, k].mean()), float(r["qv_target"][:, k].mean()),
                                f"QV block {k + 1} vs int ds/m", 0.05, N)
        )
    for u in range(p.n):
        for v in range(u + 1, p.n):
            reports.append(
                relative_gap_report(float(r["cross_qv"][:, u, v].mean()), float(r["cross_target"][:, u, v].mean()),
                                    f"cross-QV blocks {u + 1},{v + 1} vs int 1{{tau_uv<=s}}/m", 0.05, N)
            )
    return reports


def _reconstruction_sample(i, g, p, grid, seed, idx):
    x = simulate_driving(g, p, grid, streams.sample_rng(seed, streams.DRIVING, i), bridge=True)
    y = solve_flow(g, x)
    b = adapted_basis(y)
    n = p.n
    walks = cond.brownian_from_noise(
        streams.sample_rng(seed, streams.REMAINDER, i).standard_normal((n - 1, grid.n_steps)), grid.dt
    )
    w = rebuild_wiener(y, remainder_from_arrays(y, walks, b), b)
    fresh = cond.brownian_from_noise(
        streams.sample_rng(seed, streams.FRESH, i).standard_normal((n, grid.n_steps)), grid.dt
    )
    B = extract_noise(y, x, fresh, b)
    return {"w": w.values[:, idx], "B": B[:, idx], "y": y.values[:, idx]}


def crit_wiener_reconstruction(scale, seed, workers):
    N = 5000 if scale == "full" else 500
    p = MassPartition((0.2, 0.3, 0.5))
    g = np.array([0.0, 0.5, 1.0])
    times = (0.0, 0.5, 1.0)
    idx = np.array([GRID.index(t) for t in times])
    r = stack_records(map_samples(_reconstruction_sample, 0, N, (g, p, GRID, seed, idx), workers))
    reports = []
    dw = np.diff(r["w"], axis=2)  # (N, n, 2 intervals)
    dB = np.diff(r["B"], axis=2)
    for q, (a, b) in enumerate(zip(times[:-1], times[1:])):
        for k in range(p.n):
            reports.append(moment_report(dw[:, k, q], 0.0, (b - a) / p.m[k], f"w_{k + 1} increment on [{a},{b}]"))
        for k in range(p.n):
            for l in range(k + 1, p.n):
                reports.append(correlation_report(dw[:, k, q], dw[:, l, q], f"corr w_{k + 1},w_{l + 1} on [{a},{b}]"))
    for q, (a, b) in enumerate(zip(times[:-1], times[1:])):
        for k in range(p.n):
            reports.append(moment_report(dB[:, k, q], 0.0, b - a, f"B_{k} increment on [{a},{b}]"))
        for k in range(p.n):
            for l in range(k + 1, p.n):
                reports.append(correlation_report(dB[:, k, q], dB[:, l, q], f"corr B_{k},B_{l} on [{a},{b}]"))
    for k in range(p.n):
        for j in range(p.n):
            reports.append(correlation_report(r["B"][:, k, -1], r["y"][:, j, -1], f"corr B_{k}(1), y_{j + 1}(1)"))
    return reports


# ---------------------------------------------------------------- 7-8: conditioning


def crit_epsilon_conditioning(scale, seed, workers):
    N = 5000
    max_draws = 200_000 if scale == "full" else 2_000
    probes = (0.25, 0.5, 0.9)
    scenarios = [
        ("n=2", MassPartition.uniform(2), np.array([0.0, 1.0])),
        ("n=3", MassPartition((0.2, 0.3, 0.5)), np.array([0.0, 0.5, 1.0])),
    ]
    reports = []
    for label, p, g in scenarios:
        ens = cond.epsilon_conditioned_ensemble(g, p, GRID, 0.05, 0.8, N, seed, max_draws, probes, workers)
        reports.append(
            TestReport(
                f"{label} accepted-sample shortfall ({ens.n_samples} of {N} after {ens.n_draws} draws)",
                ens.acceptance_rate,
                float(N - ens.n_samples),
                ens.n_samples,
                0.5,
                "gap",
                detail={"acceptance_rate": ens.acceptance_rate, "partial": ens.partial, "n_draws": ens.n_draws},
            )
        )
        if ens.n_samples == 0:
            continue
        direct = cond.mmaf_ensemble(g, p, GRID, N, seed, probes, deadline=0.8, workers=workers)
        for k in range(p.n):
            for q, t in enumerate(probes):
                reports.append(
                    ks_report(f"{label} KS w_{k + 1}({t}) vs direct y_{k + 1}({t})",
                              ens.records["w"][:, k, q], direct.records["y"][:, k, q])
                )
    return reports


def crit_directions(scale, seed, workers):
    N = 5000 if scale == "full" else 500
    ladder = [1, 2, 4, 8, 16]
    p = MassPartition((0.2, 0.3, 0.5))
    g = np.array([0.0, 0.5, 1.0])
    times = (0.5, 1.0)
    schedules = [cond.default_schedule(p.n - 1, n) for n in ladder]
    rungs = cond.direction_ladder(g, p, GRID, schedules, N, seed, times, workers)
    reports = []
    for j in (1, 2):
        for q, t in enumerate(times):
            d = rn_diagnostic(ladder, [e.records["R"][:, j - 1, q] for e in rungs])
            margin = float(np.min((d.means[:-1] - d.means[1:]) / d.diff_ses))
            reports.append(
                TestReport(f"E[R_j^2] decreasing beyond 2 SE, j={j} t={t}", margin, margin, N, 2.0, "margin",
                           detail=d.to_dict())
            )
            reports.append(
                TestReport(f"E[R_j^2] final/first < 0.05, j={j} t={t}", d.final_ratio, d.final_ratio, N, 0.05,
                           "gap", detail=d.to_dict())
            )
    direct = cond.mmaf_ensemble(g, p, GRID, N, seed, times, workers=workers)
    top = rungs[-1]
    for k in range(p.n):
        for q, t in enumerate(times):
            reports.append(
                ks_report(f"top rung KS w_{k + 1}({t}) vs direct y_{k + 1}({t})",
                          top.records["w"][:, k, q], direct.records["y"][:, k, q])
            )
    o1 = all(
        cond.check_square_summable(cond.default_schedule, n, bound=cond.default_square_sum(n)) for n in ladder
    )
    o2 = cond.check_increasing_unbounded(cond.default_schedule, ladder, 16)
    reports.append(_gap("schedule square-summable in j (violations)", float(not o1), 0.5, len(ladder)))
    reports.append(_gap("schedule increasing and unbounded in n (violations)", float(not o2), 0.5, len(ladder)))
    return reports


# ---------------------------------------------------------------- 9-10: OU and bridge


def crit_ou_bound(scale, seed, workers):
    N = 10_000 if scale == "full" else 1000
    alphas = (0.5, 2.0, 8.0, 32.0)
    knots = (0.0, 0.1, 0.25, 0.5, 0.75, 1.0)
    pairs = [(s, t) for i, s in enumerate(knots) for t in knots[i + 1 :]]
    sq = cond.ou_increment_moments(alphas, pairs, GRID, N, seed, workers=workers)
    reports = []
    for a, alpha in enumerate(alphas):
        for q, (s, t) in enumerate(pairs):
            x = sq[:, a, q]
            mean, se = float(x.mean()), float(x.std(ddof=1) / np.sqrt(N))
            bound = min(1.0 / alpha, t - s)
            excess = (mean - bound) / se
            reports.append(
                TestReport(f"OU increment alpha={alpha} [{s},{t}] <= min(1/alpha, t-s) + 3 SE", mean, excess, N,
                           3.0, "gap", detail={"mean": mean, "se": se, "bound": bound})
            )
    return reports


def crit_bridge(scale, seed, workers):
    N = 10_000 if scale == "full" else 1000
    grid = GridSpec(1e-2, 1.0)
    probes = [round(0.1 * i, 10) for i in range(1, 10)]
    reports = []
    for z0 in (0.0, 0.7):
        b = cond.bridge_demo(z0, grid, N, seed, workers)
        for t in probes:
            i = grid.index(t)
            reports.append(moment_report(b.paths[:, i], t * z0, t * (1 - t), f"bridge z0={z0} t={t}"))
        reports.append(_gap(f"bridge z0={z0} endpoint max error", b.endpoint_error(), 1e-15, N))
    return reports


# ---------------------------------------------------------------- 11: reproducibility


def crit_reproducibility(scale, seed, workers):
    ids = [c.id for c in CRITERIA if c.id != 11]
    with tempfile.TemporaryDirectory() as tmp:
        blobs = []
        for k, w in enumerate((1, 2)):
            out = Path(tmp) / f"run{k}"
            out.mkdir()
            results = run_suite("smoke", seed, w, ids)
            write_results(out / "reports.json", "smoke", seed, results)
            blobs.append((out / "reports.json").read_bytes())
    same = blobs[0] == blobs[1]
    return [_gap("verify reports differ between --workers 1 and 2", float(not same), 0.5, 2,
                 statistic=float(len(blobs[0])))]


CRITERIA = [
    Criterion(1, "Discrete integral identity, order preservation, mean conservation", crit_flow_identity),
    Criterion(2, "Adapted basis orthonormality, span and sign conditions", crit_basis),
    Criterion(3, "Tau-sum identity", crit_tau_sum),
    Criterion(4, "Remainder round trips and coalescing characterization", crit_round_trips),
    Criterion(5, "Flow law: martingale means, QV and cross-QV", crit_mmaf_law),
    Criterion(6, "Wiener reconstruction and extracted noise", crit_wiener_reconstruction),
    Criterion(7, "Epsilon-conditioned Wiener vs direct flow", crit_epsilon_conditioning),
    Criterion(8, "OU direction ladder convergence", crit_directions),
    Criterion(9, "OU increment bound", crit_ou_bound),
    Criterion(10, "Brownian bridge moments", crit_bridge),
    Criterion(11, "Reproducibility across worker counts", crit_reproducibility),
]


@dataclass
class CriterionResult:
    id: int
    title: str
    reports: list[TestReport]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports) and bool(self.reports)

    def to_dict(self) -> dict:
        return {"id": self.id, "title": self.title, "passed": self.passed, "reports": [r.to_dict() for r in self.reports]}

    def line(self) -> str:
        bad = sum(not r.passed for r in self.reports)
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  [{self.id}] {self.title} ({len(self.reports) - bad}/{len(self.reports)} checks pass)"


def get_criterion(cid: int) -> Criterion:
    for c in CRITERIA:
        if c.id == cid:
            return c
    raise KeyError(cid)


def run_criterion(cid: int, scale: str = "full", seed: int = 0, workers: int = 1) -> CriterionResult:
    c = get_criterion(cid)
    return CriterionResult(c.id, c.title, c.run(scale, criterion_seed(seed, c.id), workers))


def run_suite(scale: str = "smoke", seed: int = 0, workers: int = 1, ids=None, on_result=None) -> list[CriterionResult]:
    out = []
    for c in CRITERIA:
        if ids is not None and c.id not in ids:
            continue
        res = run_criterion(c.id, scale, seed, workers)
        if on_result is not None:
            on_result(res)
        out.append(res)
    return out


def write_results(path, scale: str, seed: int, results: list[CriterionResult]):
    return write_json(
        path,
        {"scale": scale, "seed": int(seed), "passed": all(r.passed for r in results),
         "criteria": [r.to_dict() for r in results]},
    )
