"""Mass-weighted linear algebra on step functions over a fixed partition of [0, 1).

A step function ``f = sum_k f_k 1_{[a_{k-1}, a_k)}`` is stored as the plain
numpy vector ``(f_1, ..., f_n)``; the partition carries the block masses and
hence the inner product ``(f, g)_m = sum_k f_k g_k m_k``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np


class UsageError(ValueError):
    """Raised when an operation is called with inputs violating its contract."""


@dataclass(frozen=True)
class Tolerances:
    algebraic: float = 1e-12
    flow: float = 1e-10
    roundtrip: float = 1e-9
    mass_sum: float = 1e-12
    coalex: float = 1e-9


TOL = Tolerances()


@dataclass(frozen=True, eq=False)
class MassPartition:
    """Ordered blocks ``[a_{k-1}, a_k)`` of [0, 1) with masses ``m_k``.

    Only the masses are stored; breakpoints are derived from them.
    """

    masses: tuple[float, ...]

    def __post_init__(self):
        ms = tuple(float(v) for v in self.masses)
        object.__setattr__(self, "masses", ms)
        if len(ms) == 0:
            raise UsageError("partition needs at least one block")
        if any(not np.isfinite(v) or v <= 0 for v in ms):
            raise UsageError(f"masses must be positive, got {ms}")
        if abs(sum(ms) - 1.0) > TOL.mass_sum:
            raise UsageError(f"masses must sum to 1, got {sum(ms)!r}")

    @classmethod
    def uniform(cls, n: int) -> "MassPartition":
        return cls(tuple([1.0 / n] * n))

    @property
    def n(self) -> int:
        return len(self.masses)

    @cached_property
    def m(self) -> np.ndarray:
        arr = np.asarray(self.masses, dtype=float)
        arr.setflags(write=False)
        return arr

    @cached_property
    def breakpoints(self) -> np.ndarray:
        """``a_0 = 0 < a_1 < ... < a_n``, with ``a_n`` forced to exactly 1."""
        a = np.concatenate([[0.0], np.cumsum(self.m)])
        a[-1] = 1.0
        a.setflags(write=False)
        return a

    def __eq__(self, other):
        return isinstance(other, MassPartition) and self.masses == other.masses

    def __hash__(self):
        return hash(self.masses)

    def __repr__(self):
        return f"MassPartition({list(self.masses)})"


def as_step_vector(f, p: MassPartition) -> np.ndarray:
    v = np.asarray(f, dtype=float)
    if v.ndim != 1 or v.shape[0] != p.n:
        raise UsageError(f"step vector of shape {v.shape} does not conform to {p.n} blocks")
    return v


@dataclass(frozen=True)
class Clustering:
    """Partition of block indices ``0..n-1`` into contiguous groups.

    ``bounds`` holds half-open ``(start, stop)`` ranges in index order.
    """

    bounds: tuple[tuple[int, int], ...]
    n: int = field(default=-1)

    def __post_init__(self):
        bounds = tuple((int(s), int(e)) for s, e in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        if not bounds:
            raise UsageError("clustering must have at least one group")
        n = bounds[-1][1] if self.n < 0 else self.n
        object.__setattr__(self, "n", n)
        pos = 0
        for s, e in bounds:
            if s != pos or e <= s:
                raise UsageError(f"groups must be contiguous and non-empty: {bounds}")
            pos = e
        if pos != n:
            raise UsageError(f"groups cover {pos} blocks, expected {n}")

    @classmethod
    def singletons(cls, n: int) -> "Clustering":
        return cls(tuple((i, i + 1) for i in range(n)))

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> "Clustering":
        labels = list(labels)
        bounds, start = [], 0
        for i in range(1, len(labels) + 1):
            if i == len(labels) or labels[i] != labels[i - 1]:
                bounds.append((start, i))
                start = i
        return cls(tuple(bounds))

    @property
    def n_groups(self) -> int:
        return len(self.bounds)

    @property
    def starts(self) -> np.ndarray:
        return np.array([s for s, _ in self.bounds], dtype=np.intp)

    def labels(self) -> np.ndarray:
        out = np.empty(self.n, dtype=np.intp)
        for gi, (s, e) in enumerate(self.bounds):
            out[s:e] = gi
        return out

    def group_of(self, block: int) -> tuple[int, int]:
        for s, e in self.bounds:
            if s <= block < e:
                return (s, e)
        raise UsageError(f"block {block} outside 0..{self.n - 1}")

    def group_masses(self, p: MassPartition) -> np.ndarray:
        return np.add.reduceat(p.m, self.starts)

    def is_refined_by(self, other: "Clustering") -> bool:
        """True if every group of ``other`` lies inside a group of ``self``."""
        mine = self.labels()
        return all(np.all(mine[s:e] == mine[s]) for s, e in other.bounds)


def inner_m(f, g, p: MassPartition) -> float:
    f = as_step_vector(f, p)
    g = as_step_vector(g, p)
    return float(np.sum(f * g * p.m))


def norm_m(f, p: MassPartition) -> float:
    return float(np.sqrt(inner_m(f, f, p)))


def project_onto_clusters(f, c: Clustering, p: MassPartition) -> np.ndarray:
    """Replace every entry of ``f`` by the mass-weighted mean over its group.

    This is the orthogonal projection, in ``(., .)_m``, onto vectors that are
    constant on the groups of ``c``. Works on the first axis, so an
    ``n x T`` array is projected column by column.
    """
    f = np.asarray(f, dtype=float)
    if f.shape[0] != p.n or c.n != p.n:
        raise UsageError("vector, clustering and partition disagree on block count")
    starts = c.starts
    w = p.m.reshape((-1,) + (1,) * (f.ndim - 1))
    sums = np.add.reduceat(w * f, starts, axis=0)
    gm = c.group_masses(p).reshape((-1,) + (1,) * (f.ndim - 1))
    return np.repeat(sums / gm, np.diff(np.append(starts, p.n)), axis=0)


def glue(x1, x2, r: float, dt: float) -> np.ndarray:
    """Path ``t -> x1(t ^ r) + x2((t - r)^+)`` on the grid of ``x1``.

    ``r`` is snapped to the nearest grid point; ``r = inf`` (or beyond the
    horizon) returns ``x1`` unchanged.
    """
    if r < 0:
        raise UsageError(f"glue time must be non-negative, got {r}")
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    nt = x1.shape[0]
    if not np.isfinite(r) or r / dt > nt - 1 + 1e-9:
        return x1.copy()
    i = int(round(r / dt))
    if x2.shape[0] < nt - i:
        raise UsageError("second leg too short for the horizon")
    out = np.empty(nt)
    out[: i + 1] = x1[: i + 1]
    out[i:] = x1[i] + x2[: nt - i]
    return out
