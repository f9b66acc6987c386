import random
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from samplealign.errors import InsufficientSequencesError, WrongSampleCardinalityError
from samplealign.kmer import RankedSequence
from samplealign.partition import (
    BucketAssignment,
    PartitionConfig,
    PivotSet,
    bucket_of,
    check_load_bound,
    partition_set,
    sample_indices,
    select_local_samples,
    select_pivots,
)
from samplealign.seqcore import Sequence


def ranked(values):
    return [RankedSequence(Sequence(f"s{i}", "A", i), 0.0, v) for i, v in enumerate(values)]


def test_sample_indices():
    assert sample_indices(8, 3) == [2, 4, 6]
    assert sample_indices(3, 3) == [1, 1, 2]
    assert sample_indices(16, 3) == [4, 8, 12]


def test_sample_indices_oracle():
    for w in range(1, 40):
        for count in range(1, w + 1):
            want = []
            for j in range(1, count + 1):
                idx = int(j * w / (count + 1))
                want.append(min(w, max(1, idx)))
            assert sample_indices(w, count) == want


def test_select_local_samples():
    items = ranked([0.1 * i for i in range(8)])
    picks = select_local_samples(items, 3)
    assert [p.rank for p in picks] == [items[1].rank, items[3].rank, items[5].rank]
    with pytest.raises(InsufficientSequencesError):
        select_local_samples(items, 9)


def test_default_sample_count():
    assert PartitionConfig(4).resolve_sample_count(100) == 8
    assert PartitionConfig(16).resolve_sample_count(100) == 15
    assert PartitionConfig(4).resolve_sample_count(5) == 5
    assert PartitionConfig(4, 2).resolve_sample_count(100) == 2


def test_select_pivots():
    assert select_pivots([0.9, 0.4], 2).pivots == (0.4,)
    ys = list(range(12))
    assert select_pivots(ys, 4).pivots == (1, 5, 9)  # 1-based 2, 6, 10
    assert select_pivots([], 1).pivots == ()
    with pytest.raises(WrongSampleCardinalityError):
        select_pivots([1.0, 2.0], 3)


def test_select_pivots_oracle():
    rng = random.Random(2)
    for _ in range(50):
        ys = [rng.random() for _ in range(12)]
        s = sorted(ys)
        assert list(select_pivots(ys, 4).pivots) == [s[1], s[5], s[9]]


def test_bucket_of():
    piv = PivotSet([0.3, 0.7])
    assert bucket_of(0.3, piv) == 0
    assert bucket_of(0.31, piv) == 1
    assert bucket_of(0.9, piv) == 2
    assert bucket_of(-5, PivotSet()) == 0


def test_partition_ties_go_low():
    items = ranked([0.5] * 6)
    a = partition_set(items, PivotSet([0.5, 0.5, 0.5]))
    assert a.sizes() == [6, 0, 0, 0]


def test_partition_single_bucket():
    items = ranked([0.3, 0.1, 0.2])
    a = partition_set(items, PivotSet())
    assert [r.rank for r in a.buckets[0]] == [0.1, 0.2, 0.3]


def test_partition_oracle():
    rng = random.Random(4)
    items = ranked([rng.random() for _ in range(40)])
    piv = PivotSet(sorted(rng.random() for _ in range(3)))
    a = partition_set(items, piv)
    for b, bucket in enumerate(a.buckets):
        want = [it for it in items if next((i for i, p in enumerate(piv.pivots) if it.rank <= p), 3) == b]
        assert sorted(bucket, key=id) == sorted(want, key=id)


@given(st.lists(st.floats(-3, 1, allow_nan=False), max_size=60), st.lists(st.floats(-3, 1), max_size=7))
def test_partition_properties(values, pivots):
    items = ranked(values)
    a = partition_set(items, PivotSet(sorted(pivots)))
    assert Counter(id(x) for b in a.buckets for x in b) == Counter(id(x) for x in items)
    nonempty = [b for b in a.buckets if b]
    for lo, hi in zip(nonempty, nonempty[1:]):
        assert max(x.rank for x in lo) <= min(x.rank for x in hi)
    for b in a.buckets:
        keys = [(x.rank, x.source_index) for x in b]
        assert keys == sorted(keys)


def test_check_load_bound():
    r = check_load_bound(BucketAssignment([[None] * 5]), 5, 1)
    assert (r.max_bucket, r.bound_2w, r.holds) == (5, 10, True)
    r = check_load_bound([3, 3, 2], 8, 4)
    assert (r.max_bucket, r.bound_2w, r.holds) == (3, 4, True)
    assert not check_load_bound([4, 4, 0, 0], 8, 4).holds
