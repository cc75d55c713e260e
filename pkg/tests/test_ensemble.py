import numpy as np
import pytest

from mmaf_lab.ensemble import CHUNK, collect_accepted, map_samples, stack_records
from mmaf_lab.rng import sample_rng


def draw(i, seed):
    x = sample_rng(seed, 0, i).standard_normal(3)
    return {"i": i, "x": x, "accepted": bool(x[0] > 0.5)}


def test_map_samples_order_and_range():
    recs = map_samples(draw, 5, 5 + 2 * CHUNK + 3, (1,))
    assert [r["i"] for r in recs] == list(range(5, 5 + 2 * CHUNK + 3))


def test_worker_count_does_not_change_results():
    a = stack_records(map_samples(draw, 0, 3 * CHUNK, (7,), workers=1))
    b = stack_records(map_samples(draw, 0, 3 * CHUNK, (7,), workers=2))
    assert a.keys() == b.keys()
    for k in a:
        assert np.array_equal(a[k], b[k])


def test_sample_streams_are_independent_of_neighbours():
    full = map_samples(draw, 0, 100, (3,))
    single = draw(42, 3)
    assert np.array_equal(full[42]["x"], single["x"])


@pytest.mark.parametrize("batch", [1, 17, 64, 1000])
def test_collect_accepted_ignores_batch_size(batch):
    ref, ref_n = collect_accepted(draw, 20, 5000, (9,), batch=256)
    got, n = collect_accepted(draw, 20, 5000, (9,), batch=batch)
    assert n == ref_n
    assert [r["i"] for r in got] == [r["i"] for r in ref]
    assert got[-1]["i"] == n - 1


def test_collect_accepted_stops_at_max_draws():
    got, n = collect_accepted(draw, 10_000, 300, (9,))
    assert n == 300
    assert all(r["accepted"] for r in got)
    assert len(got) == sum(draw(i, 9)["accepted"] for i in range(300))


def test_stack_records_empty():
    assert stack_records([]) == {}
