"""Conditioning a Wiener path on coalescence.

Two mechanisms: shrinking sup-norm balls around zero remainder (rejection
sampling), and rebuilding from Ornstein-Uhlenbeck remainders whose drift grows
along a schedule. Also the Brownian bridge as the one-dimensional toy case.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from . import rng as streams
from .basis import adapted_basis, reference_basis
from .core import MassPartition, UsageError, as_step_vector
from .ensemble import collect_accepted, map_samples, stack_records
from .flow import GridSpec, inverse_mass_integral, simulate_driving, solve_flow
from .remainder import RemainderPath, rebuild_wiener, remainder_map
from .stats import realized_cross_qv, realized_qv

# ---------------------------------------------------------------- OU paths


def brownian_from_noise(noise, dt: float) -> np.ndarray:
    """Random walk ``sqrt(dt) * cumsum(noise)`` started at 0, along the last axis."""
    noise = np.asarray(noise, dtype=float)
    out = np.zeros(noise.shape[:-1] + (noise.shape[-1] + 1,))
    np.cumsum(noise * np.sqrt(dt), axis=-1, out=out[..., 1:])
    return out


def ou_from_noise(alpha: float, cutoff: float, dt: float, noise) -> np.ndarray:
    """OU path from 0 with mean reversion ``alpha`` on ``[0, cutoff]``, Brownian afterwards.

    Uses the exact Gaussian transition on each grid step, so there is no
    time-discretization error. ``alpha == 0`` is exactly the random walk of
    :func:`brownian_from_noise` on the same noise.
    """
    if alpha < 0:
        raise UsageError(f"alpha must be non-negative, got {alpha}")
    noise = np.asarray(noise, dtype=float)
    if alpha == 0:
        return brownian_from_noise(noise, dt)
    n_steps = noise.shape[-1]
    k = min(n_steps, int(np.floor(max(cutoff, 0.0) / dt + 1e-9)))
    a = np.exp(-alpha * dt)
    s = np.sqrt(-np.expm1(-2.0 * alpha * dt) / (2.0 * alpha))
    out = np.zeros(noise.shape[:-1] + (n_steps + 1,))
    if k > 0:
        out[..., 1 : k + 1] = lfilter([s], [1.0, -a], noise[..., :k], axis=-1)
    if k < n_steps:
        out[..., k + 1 :] = out[..., k : k + 1] + np.cumsum(noise[..., k:] * np.sqrt(dt), axis=-1)
    return out


def ou_path(alpha: float, cutoff: float, grid: GridSpec, seed) -> np.ndarray:
    noise = streams.as_rng(seed).standard_normal(grid.n_steps)
    return ou_from_noise(alpha, cutoff, grid.dt, noise)


def brownian_path(grid: GridSpec, seed) -> np.ndarray:
    """Standard BM on the grid; same noise consumption as :func:`ou_path`."""
    noise = streams.as_rng(seed).standard_normal(grid.n_steps)
    return brownian_from_noise(noise, grid.dt)


# ---------------------------------------------------------------- schedules


@dataclass(frozen=True)
class DirectionSchedule:
    """Drift coefficients ``alpha_j`` (``j = 1..``) for one direction index ``n``."""

    n: int
    alphas: tuple[float, ...]
    cutoff: float

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if any(a < 0 for a in self.alphas):
            raise UsageError("drift coefficients must be non-negative")

    @property
    def n_components(self) -> int:
        return len(self.alphas)

    def alpha(self, j: int) -> float:
        return self.alphas[j - 1]


def default_schedule(n_components: int, n: int) -> DirectionSchedule:
    """``alpha_j = n / 2^(j-1)``, drift switched off after time ``n``."""
    if n < 1:
        raise UsageError("direction index n must be at least 1")
    return DirectionSchedule(n, tuple(n / 2.0 ** (j - 1) for j in range(1, n_components + 1)), float(n))


def zero_schedule(n_components: int, n: int = 1) -> DirectionSchedule:
    """All drifts zero: the remainders stay Brownian."""
    return DirectionSchedule(n, (0.0,) * n_components, float(n))


def check_square_summable(make, n: int, j_max: int = 64, bound: float | None = None) -> bool:
    """Partial sums of ``alpha_j^2`` stay below ``bound`` and the tail becomes negligible.

    ``make(n_components, n)`` builds the schedule. Without a bound only the
    tail criterion (last half of the partial sums adds < 1e-9 relative) is used.
    """
    a = np.asarray(make(j_max, n).alphas)
    partial = np.cumsum(a * a)
    if bound is not None and np.any(partial > bound * (1 + 1e-12)):
        return False
    tail = partial[-1] - partial[j_max // 2 - 1]
    return bool(tail <= 1e-9 * max(partial[-1], np.finfo(float).tiny))


def check_increasing_unbounded(make, ladder, n_components: int, probe_n: int = 2**30, growth: float = 1e6) -> bool:
    """Each ``alpha_j`` strictly increases along ``ladder`` and has grown by ``growth`` at ``probe_n``.

    Unboundedness cannot be checked on a finite ladder; growth by a large
    factor far out is the computable stand-in.
    """
    ladder = sorted(ladder)
    table = np.array([make(n_components, n).alphas for n in ladder])
    increasing = bool(np.all(np.diff(table, axis=0) > 0)) if len(ladder) > 1 else True
    far = np.asarray(make(n_components, probe_n).alphas)
    return increasing and bool(np.all(far > growth * table[0]))


def default_square_sum(n: int) -> float:
    """``sum_j (n / 2^(j-1))^2 = 4 n^2 / 3``."""
    return 4.0 * n * n / 3.0


# ---------------------------------------------------------------- ensembles


@dataclass
class Ensemble:
    descriptor: dict
    probe_times: tuple[float, ...]
    records: dict[str, np.ndarray]
    n_draws: int
    acceptance_rate: float = 1.0
    partial: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        if not self.records:
            return 0
        return int(next(iter(self.records.values())).shape[0])

    def summary(self) -> dict:
        return {
            "descriptor": self.descriptor,
            "probe_times": list(self.probe_times),
            "n_samples": self.n_samples,
            "n_draws": self.n_draws,
            "acceptance_rate": self.acceptance_rate,
            "partial": self.partial,
            **self.extra,
        }


def config_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _descriptor(kind: str, g, p: MassPartition, grid: GridSpec, seed: int, n_samples: int, **params) -> dict:
    payload = {
        "kind": kind,
        "masses": list(p.masses),
        "g": [float(v) for v in g],
        "dt": grid.dt,
        "T": grid.T,
        "seed": int(seed),
        "N": int(n_samples),
        **params,
    }
    return {"config_hash": config_hash(payload), "seed": int(seed), "N": int(n_samples), "kind": kind}


def _probe_indices(grid: GridSpec, probe_times) -> np.ndarray:
    return np.array([grid.index(t) for t in probe_times], dtype=np.intp)


def _flow_sample(g, p, grid, seed, stream, i):
    x = simulate_driving(g, p, grid, streams.sample_rng(seed, stream, i), bridge=True)
    return x, solve_flow(g, x)


def _tau_row(y, n) -> np.ndarray:
    tau = np.full(n, np.inf)
    for j, ev in enumerate(y.events):
        tau[n - 1 - j] = ev.time
    return tau


def _mmaf_sample(i, g, p, grid, seed, probe_idx, deadline_idx, with_qv):
    x, y = _flow_sample(g, p, grid, seed, streams.DIRECT, i)
    n = p.n
    done = len(y.events) == n - 1 and (n == 1 or y.events[-1].index <= deadline_idx)
    rec = {"accepted": done, "y": y.values[:, probe_idx], "tau": _tau_row(y, n)}
    if with_qv:
        rec["qv"] = realized_qv(y.values)
        rec["qv_target"] = np.array([inverse_mass_integral(y, k)[-1] for k in range(n)])
        cross = np.zeros((n, n))
        target = np.zeros((n, n))
        for u in range(n):
            for v in range(u + 1, n):
                cross[u, v] = cross[v, u] = realized_cross_qv(y.values[u], y.values[v])
                target[u, v] = target[v, u] = inverse_mass_integral(y, u, v)[-1]
        rec["cross_qv"] = cross
        rec["cross_target"] = target
    return rec


def mmaf_ensemble(
    g,
    p: MassPartition,
    grid: GridSpec,
    N: int,
    seed: int,
    probe_times=(),
    deadline: float | None = None,
    with_qv: bool = False,
    workers: int = 1,
    max_draws: int | None = None,
) -> Ensemble:
    """Directly simulated coalescing flows (independent stream from the conditioned samplers).

    With ``deadline`` only flows that have fully coalesced by then are kept.
    """
    g = as_step_vector(g, p)
    probe_idx = _probe_indices(grid, probe_times)
    desc = _descriptor("mmaf", g, p, grid, seed, N, deadline=deadline, probes=list(probe_times))
    if deadline is None:
        recs = map_samples(_mmaf_sample, 0, N, (g, p, grid, seed, probe_idx, grid.n_steps, with_qv), workers)
        recs = [{k: v for k, v in r.items() if k != "accepted"} for r in recs]
        return Ensemble(desc, tuple(probe_times), stack_records(recs), N)
    max_draws = max_draws or 50 * N
    recs, drawn = collect_accepted(
        _mmaf_sample, N, max_draws, (g, p, grid, seed, probe_idx, grid.index(deadline), with_qv), workers
    )
    recs = [{k: v for k, v in r.items() if k != "accepted"} for r in recs]
    return Ensemble(desc, tuple(probe_times), stack_records(recs), drawn, len(recs) / max(drawn, 1), len(recs) < N)


def _eps_sample(i, g, p, grid, seed, eps, deadline_idx, probe_idx):
    x, y = _flow_sample(g, p, grid, seed, streams.DRIVING, i)
    n = p.n
    on_time = len(y.events) == n - 1 and (n == 1 or y.events[-1].index <= deadline_idx)
    rho = np.nan
    if on_time:
        rho = remainder_map(y, x).sup_norm()
    return {
        "accepted": bool(on_time and rho < eps),
        "on_time": on_time,
        "rho": rho,
        "w": x.values[:, probe_idx],
        "y": y.values[:, probe_idx],
        "tau": _tau_row(y, n),
    }


def epsilon_conditioned_ensemble(
    g,
    p: MassPartition,
    grid: GridSpec,
    eps: float,
    coal_deadline: float,
    N_target: int,
    seed: int,
    max_draws: int,
    probe_times=(),
    workers: int = 1,
) -> Ensemble:
    """Rejection sampler for the driving path given a small remainder.

    A draw ``w`` is accepted iff every coalescence of ``y = solve_flow(g, w)``
    happens by ``coal_deadline`` and ``max_k sup_t |xi_k(t)| < eps`` for the
    remainder ``xi`` of ``w``. Draw ``i`` always uses the same driving stream,
    so ensembles at different ``eps`` share their proposal pool. If
    ``max_draws`` runs out first the ensemble is returned with ``partial`` set.
    """
    if eps <= 0:
        raise UsageError("eps must be positive")
    if not 0 <= coal_deadline < grid.T:
        raise UsageError("coal_deadline must leave time after it for observing the remainder")
    g = as_step_vector(g, p)
    probe_idx = _probe_indices(grid, probe_times)
    args = (g, p, grid, seed, float(eps), grid.index(coal_deadline), probe_idx)
    recs, drawn = collect_accepted(_eps_sample, N_target, max_draws, args, workers)
    desc = _descriptor(
        "epsilon", g, p, grid, seed, N_target, eps=eps, coal_deadline=coal_deadline, probes=list(probe_times)
    )
    keep = ("w", "y", "tau", "rho")
    recs = [{k: r[k] for k in keep} for r in recs]
    return Ensemble(
        desc,
        tuple(probe_times),
        stack_records(recs),
        drawn,
        len(recs) / max(drawn, 1),
        len(recs) < N_target,
        extra={"eps": eps, "coal_deadline": coal_deadline, "max_draws": max_draws},
    )


def proposal_records(g, p, grid, coal_deadline: float, seed: int, draws: int, probe_times=(), workers: int = 1):
    """Everything the rejection sampler sees for the first ``draws`` proposals.

    Keys ``on_time``, ``rho`` (nan when not on time), ``w``, ``y``, ``tau``;
    the accepted set for any ``eps`` is ``on_time & (rho < eps)``.
    """
    g = as_step_vector(g, p)
    args = (g, p, grid, seed, np.inf, grid.index(coal_deadline), _probe_indices(grid, probe_times))
    recs = stack_records(map_samples(_eps_sample, 0, draws, args, workers))
    recs.pop("accepted")
    return recs


def acceptance_flags(g, p, grid, eps: float, coal_deadline: float, seed: int, draws: int, workers: int = 1):
    """Per-draw ``(on_time, rho, accepted)`` for the first ``draws`` proposals."""
    r = proposal_records(g, p, grid, coal_deadline, seed, draws, workers=workers)
    on_time, rho = r["on_time"], r["rho"]
    return on_time, rho, on_time & (rho < eps)


def direction_remainder(y, schedule: DirectionSchedule, noise, basis=None, h=None) -> RemainderPath:
    """Remainder built from OU coordinates in the fixed basis ``h``.

    ``xi_l`` (``l = 1..n-1``) is an OU path with drift ``alpha_l`` driven by
    ``noise[l - 1]``; the remainder in the adapted direction ``e_k`` is
    ``z_k(s) = sum_l (h_l, e_k)_m xi_l(s)`` on the shifted clock of ``tau_k``.
    """
    p, grid = y.partition, y.grid
    n = p.n
    if schedule.n_components < n - 1:
        raise UsageError(f"schedule has {schedule.n_components} components, need {n - 1}")
    b = adapted_basis(y) if basis is None else basis
    h = reference_basis(p) if h is None else h
    xi = np.vstack(
        [ou_from_noise(schedule.alpha(l), schedule.cutoff, grid.dt, noise[l - 1]) for l in range(1, n)]
    ) if n > 1 else np.zeros((0, grid.nt))
    paths = {}
    for k in b.ks:
        coef = (h[1:] * p.m) @ b.vectors[k]
        paths[k] = (coef @ xi)[: grid.nt - b.tau_index[k]]
    return RemainderPath(p, grid, dict(b.tau), dict(b.tau_index), paths)


def _psi_sample(i, g, p, grid, seed, schedules, probe_idx):
    x, y = _flow_sample(g, p, grid, seed, streams.DRIVING, i)
    n = p.n
    noise = streams.sample_rng(seed, streams.OU, i).standard_normal((max(n - 1, 1), grid.n_steps))
    b = adapted_basis(y)
    h = reference_basis(p)
    hm = h[1:] * p.m
    rec = {"y": y.values[:, probe_idx], "tau": _tau_row(y, n)}
    w_all, r_all, rho_all = [], [], []
    for sch in schedules:
        z = direction_remainder(y, sch, noise, b, h)
        w = rebuild_wiener(y, z, b)
        w_all.append(w.values[:, probe_idx])
        r_all.append(hm @ (w.values[:, probe_idx] - y.values[:, probe_idx]))
        rho_all.append(z.sup_norm())
    rec["w"] = np.stack(w_all)
    rec["R"] = np.stack(r_all)
    rec["rho"] = np.array(rho_all)
    return rec


def direction_ladder(
    g,
    p: MassPartition,
    grid: GridSpec,
    schedules: list[DirectionSchedule],
    N: int,
    seed: int,
    probe_times=(),
    workers: int = 1,
) -> list[Ensemble]:
    """One :func:`psi_direction_ensemble` per schedule, on common random numbers.

    Every rung reuses the same driving paths and the same OU noise, so the
    rungs differ only through the drift coefficients.
    """
    g = as_step_vector(g, p)
    probe_idx = _probe_indices(grid, probe_times)
    recs = map_samples(_psi_sample, 0, N, (g, p, grid, seed, tuple(schedules), probe_idx), workers)
    data = stack_records(recs)
    out = []
    for r, sch in enumerate(schedules):
        desc = _descriptor("psi", g, p, grid, seed, N, direction_index=sch.n, alphas=list(sch.alphas), cutoff=sch.cutoff,
                           probes=list(probe_times))
        records = {
            "y": data["y"],
            "tau": data["tau"],
            "w": data["w"][:, r],
            "R": data["R"][:, r],  # (N, n - 1, n_probes), rows j = 1..n-1
            "rho": data["rho"][:, r],
        }
        out.append(Ensemble(desc, tuple(probe_times), records, N, extra={"direction_index": sch.n}))
    return out


def psi_direction_ensemble(g, p, grid, schedule: DirectionSchedule, N: int, seed: int, probe_times=(), workers: int = 1):
    """Flows paired with driving paths rebuilt from OU remainders of one schedule."""
    return direction_ladder(g, p, grid, [schedule], N, seed, probe_times, workers)[0]


# ---------------------------------------------------------------- OU check


def _ou_sample(i, alphas, cutoff, grid, seed, pairs):
    noise = streams.sample_rng(seed, streams.OU, i).standard_normal(grid.n_steps)
    out = np.empty((len(alphas), len(pairs)))
    for a, alpha in enumerate(alphas):
        path = ou_from_noise(alpha, cutoff, grid.dt, noise)
        for q, (s, t) in enumerate(pairs):
            out[a, q] = (path[t] - path[s]) ** 2
    return {"sq": out}


def ou_increment_moments(alphas, time_pairs, grid: GridSpec, N: int, seed: int, cutoff: float | None = None, workers: int = 1):
    """Samples of ``(xi(t) - xi(s))^2`` with shape ``(N, len(alphas), len(time_pairs))``."""
    cutoff = grid.T if cutoff is None else cutoff
    pairs = tuple((grid.index(s), grid.index(t)) for s, t in time_pairs)
    recs = map_samples(_ou_sample, 0, N, (tuple(alphas), cutoff, grid, seed, pairs), workers)
    return stack_records(recs)["sq"]


# ---------------------------------------------------------------- bridge


@dataclass
class BridgeSamples:
    z0: float
    times: np.ndarray
    paths: np.ndarray  # N x nt

    def mean(self) -> np.ndarray:
        return self.paths.mean(axis=0)

    def var(self) -> np.ndarray:
        return self.paths.var(axis=0, ddof=1)

    def cov(self, s_idx: int, t_idx: int) -> float:
        a, b = self.paths[:, s_idx], self.paths[:, t_idx]
        return float(np.mean((a - a.mean()) * (b - b.mean())) * a.size / (a.size - 1))

    def endpoint_error(self) -> float:
        return float(np.max(np.abs(self.paths[:, -1] - self.z0)))


def _bridge_sample(i, z0, grid, seed):
    w = brownian_path(grid, streams.sample_rng(seed, streams.BRIDGE, i))
    t = grid.times
    return {"path": (w - t * w[-1]) + t * z0}


def bridge_demo(z0: float, grid: GridSpec, N: int, seed: int, workers: int = 1) -> BridgeSamples:
    """``(W_t - t W_1) + t z0`` for ``N`` independent Brownian paths on ``[0, 1]``."""
    if abs(grid.T - 1.0) > 1e-12:
        raise UsageError("the bridge demo lives on [0, 1]")
    recs = map_samples(_bridge_sample, 0, N, (float(z0), grid, seed), workers)
    return BridgeSamples(float(z0), grid.times, stack_records(recs)["path"])
