"""Splitting a driving path into its coalescing part and the remainder, and back."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import AdaptedBasis, adapted_basis
from .core import MassPartition, UsageError, glue
from .flow import DrivingPaths, FlowPath, GridSpec


@dataclass(frozen=True, eq=False)
class RemainderPath:
    """Remainder coordinates ``xi_k`` on the shifted clocks ``[0, T - tau_k]``."""

    partition: MassPartition
    grid: GridSpec
    tau: dict[int, float]
    start: dict[int, int]  # grid index of tau_k
    paths: dict[int, np.ndarray]

    @property
    def ks(self) -> list[int]:
        return sorted(self.paths)

    def sup_norm(self) -> float:
        """``max_k sup_t |xi_k(t)|``; zero when no component is present."""
        return max((float(np.max(np.abs(v))) for v in self.paths.values()), default=0.0)

    def initial_values(self) -> dict[int, float]:
        return {k: float(v[0]) for k, v in self.paths.items()}


def _basis_for(y: FlowPath, basis: AdaptedBasis | None) -> AdaptedBasis:
    return adapted_basis(y) if basis is None else basis


def remainder_map(y: FlowPath, w: DrivingPaths, basis: AdaptedBasis | None = None) -> RemainderPath:
    """``xi_k(t) = (w_{t + tau_k}, e_k)_m`` for each ``k`` with finite ``tau_k``."""
    if w.partition != y.partition or w.grid != y.grid:
        raise UsageError("flow path and driving paths live on different partitions or grids")
    b = _basis_for(y, basis)
    m = y.partition.m
    paths = {}
    for k in b.ks:
        i = b.tau_index[k]
        paths[k] = (b.vectors[k] * m) @ w.values[:, i:]
    return RemainderPath(y.partition, y.grid, dict(b.tau), dict(b.tau_index), paths)


def rebuild_wiener(y: FlowPath, z: RemainderPath, basis: AdaptedBasis | None = None) -> DrivingPaths:
    """``w_t = y_t + sum_k 1{t >= tau_k} z_k(t - tau_k) e_k`` on the grid.

    ``z`` must carry exactly the components with finite ``tau_k``. Its start
    values are used as given; a remainder of a genuine driving path starts at
    the small grid overshoot of the merge rather than at zero.
    """
    b = _basis_for(y, basis)
    if sorted(z.paths) != b.ks:
        raise UsageError(f"remainder components {sorted(z.paths)} do not match coalescences {b.ks}")
    values = y.values.copy()
    for k in b.ks:
        i = b.tau_index[k]
        zk = np.asarray(z.paths[k], dtype=float)
        if zk.shape != (y.grid.nt - i,):
            raise UsageError(f"component {k} has {zk.shape[0]} points, expected {y.grid.nt - i}")
        values[:, i:] += np.outer(b.vectors[k], zk)
    return DrivingPaths(y.partition, y.grid, values, y.g)


def remainder_from_arrays(y: FlowPath, arrays, basis: AdaptedBasis | None = None) -> RemainderPath:
    """Wrap full-horizon paths (``n - 1`` rows, or a dict by ``k``) as a remainder for ``y``.

    Row ``k - 1`` (or entry ``k``) is truncated to the shifted clock of ``tau_k``.
    """
    b = _basis_for(y, basis)
    get = arrays.__getitem__ if isinstance(arrays, dict) else (lambda k: arrays[k - 1])
    paths = {k: np.asarray(get(k), dtype=float)[: y.grid.nt - b.tau_index[k]] for k in b.ks}
    return RemainderPath(y.partition, y.grid, dict(b.tau), dict(b.tau_index), paths)


def extract_noise(y: FlowPath, w: DrivingPaths, fresh, basis: AdaptedBasis | None = None) -> np.ndarray:
    """Brownian motions ``B_0..B_{n-1}`` independent of the flow.

    ``B_k`` follows the independent path ``fresh[k]`` up to ``tau_k`` and then
    the increments of ``w`` in direction ``e_k``; ``B_0`` is ``fresh[0]``.
    The caller supplies ``fresh`` (``n x nt``, rows starting at 0) from a
    stream independent of ``(y, w)``.
    """
    b = _basis_for(y, basis)
    fresh = np.asarray(fresh, dtype=float)
    if fresh.shape != (y.n, y.grid.nt):
        raise UsageError(f"fresh paths have shape {fresh.shape}, expected {(y.n, y.grid.nt)}")
    m = y.partition.m
    out = fresh.copy()
    for k in b.ks:
        i = b.tau_index[k]
        leg = (b.vectors[k] * m) @ (w.values[:, i:] - w.values[:, i : i + 1])
        out[k] = glue(fresh[k], leg, b.tau[k], y.grid.dt)
    return out
