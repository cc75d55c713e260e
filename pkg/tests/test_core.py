import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import partitions
from mmaf_lab.core import (
    Clustering,
    MassPartition,
    UsageError,
    glue,
    inner_m,
    norm_m,
    project_onto_clusters,
)


def loop_projection(f, c, p):
    # plain-loop oracle for the group-average projection
    out = np.empty(p.n)
    for s, e in c.bounds:
        mass = sum(p.masses[i] for i in range(s, e))
        avg = sum(p.masses[i] * f[i] for i in range(s, e)) / mass
        for i in range(s, e):
            out[i] = avg
    return out


@st.composite
def clusterings(draw, n):
    cuts = sorted(draw(st.sets(st.integers(1, n - 1), max_size=n - 1))) if n > 1 else []
    edges = [0, *cuts, n]
    return Clustering(tuple(zip(edges[:-1], edges[1:])))


@st.composite
def vec_and_clustering(draw):
    p = draw(partitions())
    f = np.array(draw(st.lists(st.floats(-10, 10), min_size=p.n, max_size=p.n)))
    g = np.array(draw(st.lists(st.floats(-10, 10), min_size=p.n, max_size=p.n)))
    return p, f, g, draw(clusterings(p.n))


def test_partition_validation():
    with pytest.raises(UsageError):
        MassPartition((0.5, 0.4))
    with pytest.raises(UsageError):
        MassPartition((1.2, -0.2))
    with pytest.raises(UsageError):
        MassPartition(())
    p = MassPartition((0.25, 0.75))
    assert p.breakpoints.tolist() == [0.0, 0.25, 1.0]


def test_breakpoints_strictly_increasing():
    p = MassPartition.uniform(7)
    assert np.all(np.diff(p.breakpoints) > 0)
    assert p.breakpoints[-1] == 1.0


def test_inner_m_examples():
    assert inner_m([1, 1], [1, 1], MassPartition((0.5, 0.5))) == 1.0
    assert inner_m([2, 0], [0, 3], MassPartition((0.3, 0.7))) == 0.0
    # 0.25 * 1 + 0.75 * 1, evaluated by hand
    assert inner_m([1, -1], [1, -1], MassPartition((0.25, 0.75))) == pytest.approx(1.0, abs=1e-15)


def test_inner_m_dimension_mismatch():
    with pytest.raises(UsageError):
        inner_m([1, 2, 3], [1, 2], MassPartition((0.5, 0.5)))


def test_projection_examples():
    half = MassPartition((0.5, 0.5))
    one = Clustering(((0, 2),))
    assert project_onto_clusters([1, 3], one, half).tolist() == [2.0, 2.0]
    f = np.array([0.3, -1.0])
    assert np.array_equal(project_onto_clusters(f, Clustering.singletons(2), half), f)
    # 0 * 0.75 + 4 * 0.25
    assert project_onto_clusters([0, 4], one, MassPartition((0.75, 0.25))).tolist() == [1.0, 1.0]


def test_projection_columns():
    p = MassPartition((0.2, 0.3, 0.5))
    c = Clustering(((0, 2), (2, 3)))
    F = np.arange(12.0).reshape(3, 4)
    P = project_onto_clusters(F, c, p)
    for j in range(4):
        np.testing.assert_allclose(P[:, j], loop_projection(F[:, j], c, p), atol=1e-14)


@given(vec_and_clustering())
def test_projection_matches_loop_oracle(data):
    p, f, _, c = data
    np.testing.assert_allclose(project_onto_clusters(f, c, p), loop_projection(f, c, p), atol=1e-12)


@given(vec_and_clustering())
def test_projection_self_adjoint(data):
    p, f, g, c = data
    lhs = inner_m(project_onto_clusters(f, c, p), g, p)
    rhs = inner_m(f, project_onto_clusters(g, c, p), p)
    assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))


@given(vec_and_clustering())
def test_projection_idempotent_and_contracting(data):
    p, f, _, c = data
    once = project_onto_clusters(f, c, p)
    np.testing.assert_allclose(project_onto_clusters(once, c, p), once, atol=1e-12)
    assert norm_m(once, p) <= norm_m(f, p) + 1e-12


def test_clustering_validation_and_helpers():
    with pytest.raises(UsageError):
        Clustering(((0, 2), (3, 4)))
    with pytest.raises(UsageError):
        Clustering(())
    c = Clustering.from_labels([0, 0, 1, 2, 2])
    assert c.bounds == ((0, 2), (2, 3), (3, 5))
    assert c.group_of(4) == (3, 5)
    assert Clustering(((0, 5),)).is_refined_by(c)
    assert not c.is_refined_by(Clustering(((0, 5),)))


def test_glue_examples():
    dt = 0.5
    t = np.arange(0, 3.0 + dt / 2, dt)
    x1, x2 = t.copy(), 2 * t
    out = glue(x1, x2, 1.0, dt)
    assert out[4] == 3.0  # t = 2: x1(1) + x2(1)
    np.testing.assert_array_equal(glue(x1, np.zeros_like(t), 1.0, dt), np.minimum(t, 1.0))
    np.testing.assert_array_equal(glue(np.zeros_like(t), x2, 0.0, dt), x2)
    np.testing.assert_array_equal(glue(x1, x2, np.inf, dt), x1)


def test_glue_rejects_negative_time():
    with pytest.raises(UsageError):
        glue(np.zeros(3), np.zeros(3), -0.1, 0.1)


@given(st.integers(0, 50), st.integers(0, 2**16))
def test_glue_restriction_and_increments(i, seed):
    rng = np.random.default_rng(seed)
    dt = 0.02
    x1 = np.concatenate([[0.0], np.cumsum(rng.normal(size=50))])
    x2 = np.concatenate([[0.0], np.cumsum(rng.normal(size=50))])
    out = glue(x1, x2, i * dt, dt)
    np.testing.assert_array_equal(out[: i + 1], x1[: i + 1])
    np.testing.assert_allclose(np.diff(out[i:]), np.diff(x2[: 51 - i]), atol=1e-12)
