import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import scenarios
from mmaf_lab.basis import adapted_basis
from mmaf_lab.core import MassPartition, UsageError
from mmaf_lab.flow import DrivingPaths, GridSpec, check_coalex, simulate_driving, solve_flow
from mmaf_lab.remainder import (
    RemainderPath,
    extract_noise,
    rebuild_wiener,
    remainder_from_arrays,
    remainder_map,
)
from mmaf_lab.rng import sample_rng

GRID = GridSpec(1e-2, 1.0)


def linear_pair():
    p = MassPartition.uniform(2)
    grid = GridSpec(1e-3, 1.0)
    t = grid.times
    x = DrivingPaths(p, grid, np.vstack([t, 1 - t]), [0.0, 1.0])
    return x, solve_flow([0.0, 1.0], x)


def sampled(case, bridge=False):
    p, g, seed = case
    x = simulate_driving(g, p, GRID, seed, bridge=bridge)
    return x, solve_flow(g, x)


def expanded(y):
    return DrivingPaths(y.partition, y.grid, y.values, y.g)


def random_remainder(y, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    walks = np.cumsum(rng.normal(size=(max(y.n - 1, 1), y.grid.nt)), axis=1) * scale
    walks[:, 0] = 0.0
    return remainder_from_arrays(y, walks)


def test_two_particle_remainder_is_t():
    x, y = linear_pair()
    xi = remainder_map(y, x)
    assert xi.ks == [1] and xi.start[1] == 500
    s = y.grid.times[: y.grid.nt - 500]
    np.testing.assert_allclose(xi.paths[1], s, atol=1e-12)


def test_expanded_flow_has_zero_remainder():
    x, y = linear_pair()
    xi = remainder_map(y, expanded(y))
    assert xi.sup_norm() < 1e-12


def test_zero_remainder_rebuilds_flow():
    x, y = linear_pair()
    z = remainder_from_arrays(y, np.zeros((1, y.grid.nt)))
    assert np.array_equal(rebuild_wiener(y, z).values, y.values)


def test_remainder_skips_infinite_tau():
    p = MassPartition((0.5, 0.5))
    x = DrivingPaths(p, GRID, np.tile([[0.0], [1.0]], GRID.nt), [0.0, 1.0])
    y = solve_flow([0.0, 1.0], x)
    xi = remainder_map(y, x)
    assert xi.ks == [] and xi.sup_norm() == 0.0
    assert np.array_equal(rebuild_wiener(y, xi).values, x.values)


def test_partition_mismatch():
    x, y = linear_pair()
    other = simulate_driving([0.0, 1.0], MassPartition((0.3, 0.7)), y.grid, 0)
    with pytest.raises(UsageError):
        remainder_map(y, other)


def test_misaligned_remainder():
    x, y = linear_pair()
    z = remainder_map(y, x)
    with pytest.raises(UsageError):
        rebuild_wiener(y, RemainderPath(z.partition, z.grid, {}, {}, {}))
    with pytest.raises(UsageError):
        rebuild_wiener(y, RemainderPath(z.partition, z.grid, z.tau, z.start, {1: np.zeros(3)}))


@given(scenarios(min_n=2), st.integers(0, 2**16), st.booleans())
def test_round_trip_a(case, seed, bridge):
    _, y = sampled(case, bridge)
    z = random_remainder(y, seed)
    back = remainder_map(y, rebuild_wiener(y, z))
    assert back.ks == z.ks
    for k in z.ks:
        assert np.max(np.abs(back.paths[k] - z.paths[k])) < 1e-9


@given(scenarios(min_n=2), st.booleans())
def test_round_trip_b(case, bridge):
    x, y = sampled(case, bridge)
    b = adapted_basis(y)
    w = rebuild_wiener(y, remainder_map(y, x, b), b)
    m = case[0].m
    diff = w.values - x.values
    for k in b.ks:
        i = b.tau_index[k]
        assert np.max(np.abs((b.vectors[k] * m) @ diff[:, i:])) < 1e-9
    if b.complete:
        last = max(b.tau_index.values())
        assert np.max(np.abs(diff[:, last:])) < 1e-9


@given(scenarios(min_n=2), st.booleans())
def test_remainder_starts_near_zero(case, bridge):
    x, y = sampled(case, bridge)
    tol = 5 * max(GRID.dt, np.sqrt(GRID.dt) * y.n)
    for v in remainder_map(y, x).initial_values().values():
        assert abs(v) < tol


@given(scenarios(min_n=2), st.integers(0, 2**16))
def test_characterization(case, seed):
    _, y = sampled(case)
    assert check_coalex(rebuild_wiener(y, random_remainder(y, seed, scale=0.0)).values)
    z = random_remainder(y, seed)
    if z.ks and z.sup_norm() > 1e-6:
        assert not check_coalex(rebuild_wiener(y, z).values)


def test_extract_noise_without_merge_keeps_fresh():
    p = MassPartition((0.5, 0.5))
    x = DrivingPaths(p, GRID, np.tile([[0.0], [1.0]], GRID.nt), [0.0, 1.0])
    y = solve_flow([0.0, 1.0], x)
    fresh = np.cumsum(np.random.default_rng(0).normal(size=(2, GRID.nt)), axis=1)
    fresh[:, 0] = 0
    assert np.array_equal(extract_noise(y, x, fresh), fresh)


def test_extract_noise_immediate_handoff():
    p = MassPartition((0.4, 0.6))
    x = simulate_driving([0.0, 0.0], p, GRID, 3)
    y = solve_flow([0.0, 0.0], x)
    b = adapted_basis(y)
    assert b.tau[1] == 0.0
    fresh = np.zeros((2, GRID.nt))
    B = extract_noise(y, x, fresh)
    np.testing.assert_allclose(B[1], (b.vectors[1] * p.m) @ (x.values - x.values[:, :1]), atol=1e-12)
    assert np.array_equal(B[0], fresh[0])


def test_extract_noise_shape_check():
    x, y = linear_pair()
    with pytest.raises(UsageError):
        extract_noise(y, x, np.zeros((1, y.grid.nt)))


def test_rebuilt_wiener_increment_law():
    # light version of the acceptance check: fresh remainders give independent BMs of rate 1/m
    p = MassPartition((0.25, 0.75))
    g = np.array([0.0, 0.3])
    N = 2000
    incr = np.empty((N, 2))
    for i in range(N):
        x = simulate_driving(g, p, GRID, sample_rng(17, 0, i), bridge=True)
        y = solve_flow(g, x)
        walks = np.cumsum(sample_rng(17, 1, i).standard_normal((1, GRID.nt)) * np.sqrt(GRID.dt), axis=1)
        walks[:, 0] = 0.0
        w = rebuild_wiener(y, remainder_from_arrays(y, walks))
        incr[i] = w.values[:, -1] - w.values[:, 50]
    var = incr.var(axis=0, ddof=1)
    se = var * np.sqrt(2.0 / (N - 1))
    assert np.all(np.abs(var - 0.5 / p.m) < 4 * se)
    assert abs(np.corrcoef(incr.T)[0, 1]) * np.sqrt(N) < 4
