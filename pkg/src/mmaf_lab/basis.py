"""Orthonormal basis adapted to the coalescences of a flow path."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import MassPartition, UsageError
from .flow import FlowPath, coalescence_indices, coalescence_times


def merge_vector(a: float, b: float, c: float, p: MassPartition) -> np.ndarray:
    """Unit vector on ``[a, c)`` orthogonal to constants there, positive on ``[a, b)``."""
    brk = p.breakpoints
    left = (brk[:-1] >= a - 1e-15) & (brk[1:] <= b + 1e-15)
    right = (brk[:-1] >= b - 1e-15) & (brk[1:] <= c + 1e-15)
    e = np.zeros(p.n)
    e[left] = np.sqrt((c - b) / (b - a))
    e[right] = -np.sqrt((b - a) / (c - b))
    return e / np.sqrt(c - a)


@dataclass(frozen=True, eq=False)
class AdaptedBasis:
    partition: MassPartition
    vectors: dict[int, np.ndarray]  # k -> e_k, always contains k = 0
    tau: dict[int, float]  # k -> tau_k for k >= 1 with finite coalescence time
    tau_index: dict[int, int]
    triples: dict[int, tuple[float, float, float]]  # k -> (a, b, c) of the generating merge

    @property
    def ks(self) -> list[int]:
        """Indices ``k >= 1`` present, in increasing order."""
        return sorted(k for k in self.vectors if k >= 1)

    @property
    def complete(self) -> bool:
        return len(self.vectors) == self.partition.n

    def matrix(self) -> np.ndarray:
        """Rows ``e_0, e_{k_1}, ...`` for the present indices, ``k`` ascending."""
        return np.vstack([self.vectors[k] for k in sorted(self.vectors)])

    def to_dict(self) -> dict:
        return {
            "masses": list(self.partition.masses),
            "vectors": [
                {
                    "k": k,
                    "values": self.vectors[k].tolist(),
                    "tau": self.tau.get(k),
                    "triple": list(self.triples[k]) if k in self.triples else None,
                }
                for k in sorted(self.vectors)
            ],
        }


def adapted_basis(y: FlowPath) -> AdaptedBasis:
    """Build ``e_0 = 1`` and one ``e_k`` per coalescence event of ``y``.

    The event that takes the cluster count (replaying tied events one at a
    time) from ``k + 1`` to ``k`` produces ``e_k``. Flows that do not fully
    coalesce within the horizon get a partial basis.
    """
    p = y.partition
    brk = p.breakpoints
    vectors = {0: np.ones(p.n)}
    tau = coalescence_times(y)
    idx = coalescence_indices(y)
    triples = {}
    for j, ev in enumerate(y.events):
        k = y.n - 1 - j
        a, b, c = brk[ev.left_group[0]], brk[ev.left_group[1]], brk[ev.right_group[1]]
        vectors[k] = merge_vector(a, b, c, p)
        triples[k] = (float(a), float(b), float(c))
    return AdaptedBasis(
        partition=p,
        vectors=vectors,
        tau={k: float(tau[k]) for k in idx},
        tau_index=dict(idx),
        triples=triples,
    )


def reference_basis(p: MassPartition) -> np.ndarray:
    """A fixed orthonormal basis ``h_0 = 1, h_1, ..., h_{n-1}`` of the weighted space.

    ``h_j`` is the merge vector of ``[0, a_j)`` with ``[a_j, a_{j+1})``, i.e. the
    adapted basis of a flow that absorbs blocks left to right. It does not
    depend on any flow path.
    """
    brk = p.breakpoints
    rows = [np.ones(p.n)]
    for j in range(1, p.n):
        rows.append(merge_vector(0.0, brk[j], brk[j + 1], p))
    return np.vstack(rows)


def tau_sum_check(y: FlowPath, beta: float, n_floor: int) -> tuple[float, float, float]:
    """Compare ``sum_{k >= n_floor} tau_k^beta`` with ``beta int_0^{tau_{n_floor}} (N_t - n_floor) t^{beta-1} dt``.

    The cluster count is piecewise constant between events, so the integral is
    evaluated in closed form segment by segment. Returns
    ``(lhs, rhs, relative_gap)``.
    """
    if beta <= 0:
        raise UsageError("beta must be positive")
    if not 1 <= n_floor <= y.n - 1:
        raise UsageError(f"n_floor must lie in 1..{y.n - 1}")
    tau = coalescence_times(y)
    if not np.isfinite(tau[n_floor]):
        raise UsageError(f"tau_{n_floor} is infinite within the horizon")
    lhs = float(np.sum(tau[n_floor:] ** beta))
    # N(y_t) = n - #{events with time <= t}; integrate (N - n_floor) d(t^beta)
    times = np.array([ev.time for ev in y.events])
    upper = tau[n_floor]
    knots = np.unique(np.concatenate([[0.0], times[times <= upper], [upper]]))
    rhs = 0.0
    for lo, hi in zip(knots[:-1], knots[1:]):
        count = y.n - int(np.sum(times <= lo))
        rhs += (count - n_floor) * (hi**beta - lo**beta)
    gap = abs(lhs - rhs) / max(abs(lhs), np.finfo(float).tiny)
    return lhs, float(rhs), float(gap)
