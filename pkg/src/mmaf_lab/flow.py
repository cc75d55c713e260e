"""Driving Wiener paths and the coalescing flow they drive.

The solver is the finite, grid-level version of the step-by-step construction
of the unique coalescing solution to ``y_t = g + int_0^t pr_{y_s} dx_s``:
between coalescences every cluster moves by the mass-weighted mean of its
members' driving increments; adjacent clusters whose levels touch or cross at
a grid point merge there, at the mass-weighted mean of their levels.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Clustering, MassPartition, TOL, UsageError, as_step_vector, project_onto_clusters
from .rng import as_rng


@dataclass(frozen=True)
class GridSpec:
    dt: float
    T: float

    def __post_init__(self):
        if not (self.dt > 0 and self.T > 0):
            raise UsageError(f"dt and T must be positive, got dt={self.dt}, T={self.T}")
        steps = self.T / self.dt
        if abs(steps - round(steps)) > 1e-8 * max(1.0, steps):
            raise UsageError(f"T={self.T} is not an integer multiple of dt={self.dt}")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def nt(self) -> int:
        return self.n_steps + 1

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.nt)

    def index(self, t: float) -> int:
        """Grid index of ``t``, rounding to the nearest point."""
        if t < -1e-12 or t > self.T + 1e-9 * max(1.0, self.T):
            raise UsageError(f"time {t} outside [0, {self.T}]")
        return min(int(round(t / self.dt)), self.n_steps)

    def floor_index(self, t: float) -> int:
        if t < -1e-12 or t > self.T + 1e-9 * max(1.0, self.T):
            raise UsageError(f"time {t} outside [0, {self.T}]")
        return min(int(np.floor(t / self.dt + 1e-9)), self.n_steps)


@dataclass(frozen=True, eq=False)
class DrivingPaths:
    """``n`` scalar paths on a uniform grid; row ``k`` is block ``k``."""

    partition: MassPartition
    grid: GridSpec
    values: np.ndarray
    start: np.ndarray
    # optional U(0,1) draws, one per block boundary and step, for the bridge crossing test in solve_flow
    crossing_uniforms: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.partition.n, self.grid.nt):
            raise UsageError(f"driving values have shape {v.shape}, expected {(self.partition.n, self.grid.nt)}")
        object.__setattr__(self, "values", v)
        if self.crossing_uniforms is not None:
            u = np.asarray(self.crossing_uniforms, dtype=float)
            if u.shape != (self.partition.n - 1, self.grid.n_steps):
                raise UsageError(f"crossing uniforms have shape {u.shape}, expected {(self.partition.n - 1, self.grid.n_steps)}")
            object.__setattr__(self, "crossing_uniforms", u)
        object.__setattr__(self, "start", as_step_vector(self.start, self.partition))


@dataclass(frozen=True)
class CoalescenceEvent:
    time: float
    index: int
    left_group: tuple[int, int]
    right_group: tuple[int, int]
    left_level: float
    right_level: float
    merge_value: float
    coalescence_point: float

    def to_dict(self) -> dict:
        return {
            "time": self.time,
            "index": self.index,
            "left_group": list(self.left_group),
            "right_group": list(self.right_group),
            "left_level": self.left_level,
            "right_level": self.right_level,
            "merge_value": self.merge_value,
            "coalescence_point": self.coalescence_point,
        }


@dataclass(frozen=True, eq=False)
class FlowPath:
    partition: MassPartition
    grid: GridSpec
    g: np.ndarray
    values: np.ndarray  # n x nt, block-expanded cluster levels
    events: tuple[CoalescenceEvent, ...]
    segments: tuple[tuple[int, Clustering], ...]  # (first grid index, clustering in force)

    @property
    def n(self) -> int:
        return self.partition.n

    def clustering_at_index(self, i: int) -> Clustering:
        current = self.segments[0][1]
        for start, c in self.segments:
            if start > i:
                break
            current = c
        return current

    def clustering_at(self, t: float) -> Clustering:
        return self.clustering_at_index(self.grid.floor_index(t))

    def levels_at_index(self, i: int) -> np.ndarray:
        c = self.clustering_at_index(i)
        return self.values[c.starts, i]

    def event_clusterings(self) -> list[Clustering]:
        """Clustering after each event, replaying tied events one at a time."""
        labels = list(range(self.n))
        out = []
        for ev in self.events:
            s, e = ev.left_group[0], ev.right_group[1]
            lab = labels[s]
            for b in range(s, e):
                labels[b] = lab
            out.append(Clustering.from_labels(labels))
        return out

    def block_path(self, k: int) -> np.ndarray:
        return self.values[k]


def simulate_driving(g, p: MassPartition, grid: GridSpec, seed, bridge: bool = False) -> DrivingPaths:
    """Independent Brownian motions started at ``g`` with variance rate ``1/m_k``.

    ``seed`` may be an integer or a ``numpy.random.Generator``. With
    ``bridge`` the generator also supplies the uniforms that switch on the
    between-grid-point crossing test of :func:`solve_flow`; the path values
    are the same either way.
    """
    g = as_step_vector(g, p)
    if np.any(np.diff(g) < 0):
        raise UsageError("initial values must be non-decreasing")
    rng = as_rng(seed)
    incr = rng.standard_normal((p.n, grid.n_steps)) * np.sqrt(grid.dt / p.m)[:, None]
    values = np.empty((p.n, grid.nt))
    values[:, 0] = g
    np.cumsum(incr, axis=1, out=values[:, 1:])
    values[:, 1:] += g[:, None]
    u = rng.random((p.n - 1, grid.n_steps)) if bridge else None
    return DrivingPaths(p, grid, values, g, u)


def _cluster_levels(mx: np.ndarray, x: np.ndarray, starts: np.ndarray, gmass: np.ndarray) -> np.ndarray:
    """Mass-weighted group means; singleton groups take ``x`` verbatim (``m x / m`` may be off by an ulp)."""
    levels = np.add.reduceat(mx, starts, axis=0) / gmass[:, None]
    single = np.diff(np.append(starts, x.shape[0])) == 1
    levels[single] = x[starts[single]]
    return levels


def _merged_level(left: float, right: float, right_share: float) -> float:
    # mass-weighted mean written so that equal levels stay exactly equal
    return left + right_share * (right - left)


def _pool(bounds, levels, gmass, forced=None):
    """Pool adjacent groups until levels are strictly increasing.

    ``forced[i]`` additionally merges groups ``i`` and ``i + 1``. Returns
    ``(first, last)`` original group indices for each pooled group.
    """
    stack = []  # [first_group, last_group, mass, level]
    for gi in range(len(bounds)):
        stack.append([gi, gi, gmass[gi], levels[gi]])
        while len(stack) > 1 and (
            stack[-2][3] >= stack[-1][3] or (forced is not None and forced[stack[-1][0] - 1])
        ):
            top = stack.pop()
            mass = stack[-1][2] + top[2]
            stack[-1][3] = _merged_level(stack[-1][3], top[3], top[2] / mass)
            stack[-1][1] = top[1]
            stack[-1][2] = mass
    return [(fg, lg) for fg, lg, _, _ in stack]


def solve_flow(g, x: DrivingPaths) -> FlowPath:
    """Coalescing solution driven by ``x``, computed exactly on the grid.

    Merges are detected at grid points (``level_i >= level_{i+1}``); all merges
    found at one grid point are recorded as separate pairwise events in
    increasing order of coalescence point.

    If ``x`` carries crossing uniforms, two adjacent clusters whose levels stay
    ordered over a step still merge at its right end when the Brownian bridge
    between the two level gaps would have touched zero: gap ``d0 -> d1`` with
    variance rate ``1/M_a + 1/M_b`` hits zero with probability
    ``exp(-2 d0 d1 / (rate dt))``. Without this test the missed crossings bias
    the outer clusters' means by ``O(sqrt(dt))``.
    """
    p, grid = x.partition, x.grid
    g = as_step_vector(g, p)
    if np.any(np.diff(g) < 0):
        raise UsageError("initial values must be non-decreasing")
    if not np.array_equal(x.values[:, 0], g):
        raise UsageError("driving paths must start at g")
    n, nt = p.n, grid.nt
    times = grid.times
    brk = p.breakpoints
    mx = p.m[:, None] * x.values
    values = np.empty((n, nt))
    events: list[CoalescenceEvent] = []
    segments: list[tuple[int, Clustering]] = []

    u = x.crossing_uniforms
    bounds = [(i, i + 1) for i in range(n)]
    start = 0
    forced = None
    while True:
        starts = np.array([s for s, _ in bounds], dtype=np.intp)
        gmass = np.add.reduceat(p.m, starts)
        here = _cluster_levels(mx[:, start : start + 1], x.values[:, start : start + 1], starts, gmass)[:, 0]
        pooled = _pool(bounds, here, gmass, forced)
        if len(pooled) < len(bounds):
            # replay merges one at a time, left to right by coalescence point
            t = float(times[start])
            new_bounds = []
            for fg, lg in pooled:
                cur_s, cur_e = bounds[fg]
                cur_mass, cur_level = gmass[fg], here[fg]
                for gi in range(fg + 1, lg + 1):
                    rs, re = bounds[gi]
                    merged = _merged_level(cur_level, here[gi], gmass[gi] / (cur_mass + gmass[gi]))
                    events.append(
                        CoalescenceEvent(
                            time=t,
                            index=start,
                            left_group=(cur_s, cur_e),
                            right_group=(rs, re),
                            left_level=float(cur_level),
                            right_level=float(here[gi]),
                            merge_value=float(merged),
                            coalescence_point=float(brk[rs]),
                        )
                    )
                    cur_e, cur_mass, cur_level = re, cur_mass + gmass[gi], merged
                new_bounds.append((cur_s, cur_e))
            bounds = new_bounds
            starts = np.array([s for s, _ in bounds], dtype=np.intp)
            gmass = np.add.reduceat(p.m, starts)
        clustering = Clustering(tuple(bounds))
        segments.append((start, clustering))

        levels = _cluster_levels(mx[:, start:], x.values[:, start:], starts, gmass)
        hit_pairs = None
        if len(bounds) > 1:
            gaps = np.diff(levels, axis=0)
            hit_pairs = gaps <= 0
            if u is not None and gaps.shape[1] > 1:
                rate = 1.0 / gmass[:-1] + 1.0 / gmass[1:]
                d0, d1 = gaps[:, :-1], gaps[:, 1:]
                prob = np.exp(-2.0 * np.maximum(d0, 0.0) * np.maximum(d1, 0.0) / (rate[:, None] * grid.dt))
                hit_pairs[:, 1:] |= u[starts[1:] - 1, start : start + d0.shape[1]] < prob
            hit_pairs[:, 0] = False
            hits = np.flatnonzero(np.any(hit_pairs, axis=0))
        else:
            hits = np.empty(0, dtype=np.intp)
        stop = start + int(hits[0]) if hits.size else nt
        forced = hit_pairs[:, int(hits[0])] if hits.size else None
        sizes = np.diff(np.append(starts, n))
        values[:, start:stop] = np.repeat(levels[:, : stop - start], sizes, axis=0)
        if stop >= nt:
            break
        start = stop

    return FlowPath(p, grid, g.copy(), values, tuple(events), tuple(segments))


def count_clusters(y: FlowPath, t: float) -> int:
    """Number of clusters at time ``t`` (right-continuous)."""
    if t < -1e-12 or t > y.grid.T + 1e-9:
        raise UsageError(f"time {t} outside [0, {y.grid.T}]")
    done = sum(1 for ev in y.events if ev.time <= t + 1e-12)
    return y.n - done


def coalescence_times(y: FlowPath) -> np.ndarray:
    """``tau[k]`` = first time the cluster count is at most ``k``.

    Index ``k`` runs over ``0..n-1``; ``tau[0]`` and any coalescence not
    reached within the horizon are ``inf``.
    """
    tau = np.full(y.n, np.inf)
    for j, ev in enumerate(y.events):
        tau[y.n - 1 - j] = ev.time
    return tau


def coalescence_indices(y: FlowPath) -> dict[int, int]:
    """Grid index of ``tau[k]`` for every ``k`` with finite coalescence time."""
    return {y.n - 1 - j: ev.index for j, ev in enumerate(y.events)}


def cluster_mass(y: FlowPath, block_index: int, t: float) -> float:
    if not 0 <= block_index < y.n:
        raise UsageError(f"block {block_index} outside 0..{y.n - 1}")
    s, e = y.clustering_at(t).group_of(block_index)
    return float(np.sum(y.partition.m[s:e]))


def inverse_mass_integral(y: FlowPath, block_index: int, partner: int | None = None) -> np.ndarray:
    """Running ``int_0^t 1{tau_{u,v} <= s} / m(u, s) ds`` on the grid.

    With ``partner`` omitted the indicator is dropped (quadratic variation of
    a single block); otherwise it switches on once ``block_index`` and
    ``partner`` share a cluster. Each step ``[t_i, t_{i+1})`` uses the clustering in
    force at ``t_i``.
    """
    grid = y.grid
    rate = np.empty(grid.n_steps)
    bounds = [st for st, _ in y.segments] + [grid.n_steps]
    for (st, c), en in zip(y.segments, bounds[1:]):
        s, e = c.group_of(block_index)
        together = partner is None or s <= partner < e
        rate[st:en] = (1.0 / float(np.sum(y.partition.m[s:e]))) if together else 0.0
    return np.concatenate([[0.0], np.cumsum(rate * grid.dt)])


def check_coalex(w, tol: float = TOL.coalex) -> bool:
    """Whether components that ever meet stay together afterwards.

    Two components meet at a grid point if they agree within ``tol`` there, or
    if their difference changes sign over the preceding step (a continuous
    path crossing between grid points meets in between).
    """
    v = np.asarray(getattr(w, "values", w), dtype=float)
    d = v[:, None, :] - v[None, :, :]
    close = np.abs(d) <= tol
    cross = np.zeros_like(close)
    cross[..., 1:] = (d[..., 1:] * d[..., :-1]) < 0
    meet = close | cross
    has_meet = meet.any(axis=-1)
    first = meet.argmax(axis=-1)
    stay = np.flip(np.logical_and.accumulate(np.flip(close, -1), axis=-1), -1)
    ok = np.take_along_axis(stay, first[..., None], axis=-1)[..., 0]
    return bool(np.all(~has_meet | ok))


def integral_reconstruction(y: FlowPath, x: DrivingPaths) -> np.ndarray:
    """Rebuild ``y`` as ``g`` plus clustered projections of the increments of ``x``.

    Within a segment of fixed clustering the path is its segment-start value
    plus the running sum of projected increments; at a segment start the
    accumulated value is re-projected onto the coarser clustering (the merge).
    Independent of the level arithmetic inside :func:`solve_flow`.
    """
    p = y.partition
    dx = np.diff(x.values, axis=1)
    out = np.empty_like(y.values)
    cur = y.g.astype(float)
    ends = [st for st, _ in y.segments[1:]] + [y.grid.nt]
    for (st, c), en in zip(y.segments, ends):
        cur = project_onto_clusters(cur, c, p)
        out[:, st] = cur
        if en - st > 1:
            steps = project_onto_clusters(dx[:, st : en - 1], c, p)
            out[:, st + 1 : en] = cur[:, None] + np.cumsum(steps, axis=1)
        if en < y.grid.nt:
            cur = out[:, en - 1] + project_onto_clusters(dx[:, en - 1], c, p)
    return out
