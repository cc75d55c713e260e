"""Sample-parallel harness.

Samples are processed in fixed-size chunks of consecutive indices; each sample
draws only from its own ``(seed, stream, index)`` generators, and chunk results
are concatenated in index order. Output is therefore identical for any worker
count.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable

import numpy as np

CHUNK = 64


def default_workers() -> int:
    return os.cpu_count() or 1


def _run_chunk(fn: Callable, lo: int, hi: int, args: tuple) -> list:
    return [fn(i, *args) for i in range(lo, hi)]


def map_samples(fn: Callable, lo: int, hi: int, args: tuple = (), workers: int = 1) -> list:
    """``[fn(i, *args) for i in range(lo, hi)]``, possibly spread over processes.

    ``fn`` must be a module-level function so it can be pickled.
    """
    bounds = [(a, min(a + CHUNK, hi)) for a in range(lo, hi, CHUNK)]
    if workers <= 1 or len(bounds) <= 1:
        return [r for a, b in bounds for r in _run_chunk(fn, a, b, args)]
    out = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_chunk, fn, a, b, args) for a, b in bounds]
        for f in futures:
            out.extend(f.result())
    return out


def stack_records(records: list[dict]) -> dict[str, np.ndarray]:
    """Turn a list of per-sample dicts into a dict of arrays with a leading sample axis."""
    if not records:
        return {}
    return {key: np.stack([np.asarray(r[key]) for r in records]) for key in records[0]}


def collect_accepted(
    fn: Callable, n_target: int, max_draws: int, args: tuple = (), workers: int = 1, batch: int = 1024
) -> tuple[list[dict], int]:
    """Draw samples in index order until ``n_target`` have ``accepted`` set.

    Returns the first ``n_target`` accepted records and the number of draws
    needed to reach them (``max_draws`` if the target was not reached). Batch
    size only affects how much work is wasted past the stopping point, never
    the result.
    """
    accepted: list[dict] = []
    drawn = 0
    while drawn < max_draws and len(accepted) < n_target:
        hi = min(drawn + batch, max_draws)
        for i, rec in enumerate(map_samples(fn, drawn, hi, args, workers), start=drawn):
            if rec["accepted"]:
                accepted.append(rec)
                if len(accepted) == n_target:
                    return accepted, i + 1
        drawn = hi
    return accepted, drawn
