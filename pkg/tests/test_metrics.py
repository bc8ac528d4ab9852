import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bahc.errors import InvalidArgumentError
from bahc.metrics import StabilityMatrix, adjusted_rand, consensus, contingency, exact_recovery, rand_index
from bahc.partition import Partition


def all_partitions(d):
    """Every set partition of range(d), via restricted growth strings."""
    def grow(prefix, top):
        if len(prefix) == d:
            yield Partition.from_labels(prefix)
            return
        for lab in range(top + 2):
            yield from grow(prefix + [lab], max(top, lab))
    if d == 0:
        return
    yield from grow([0], 0)


def pair_count_ari(p, q):
    a = b = c = dd = 0
    lp, lq = p.labels(), q.labels()
    for x, y in itertools.combinations(range(p.d), 2):
        sp, sq = lp[x] == lp[y], lq[x] == lq[y]
        if sp and sq:
            a += 1
        elif sp:
            b += 1
        elif sq:
            c += 1
        else:
            dd += 1
    den = (a + b) * (b + dd) + (a + c) * (c + dd)
    if den == 0:
        return 1.0 if p == q else 0.0
    return float(Fraction(2 * (a * dd - b * c), den))


def test_partition_counts_are_bell_numbers():
    assert [sum(1 for _ in all_partitions(d)) for d in range(1, 7)] == [1, 2, 5, 15, 52, 203]


@pytest.mark.parametrize("d", [1, 2, 3, 4, 5, 6])
def test_ari_exhaustive(d):
    parts = list(all_partitions(d))
    for p in parts:
        for q in parts:
            assert adjusted_rand(p, q) == pytest.approx(pair_count_ari(p, q), abs=1e-12)


def test_rand_hand_value():
    p = Partition(4, ((0, 1), (2, 3)))
    q = Partition(4, ((0, 2), (1, 3)))
    assert rand_index(p, q) == 1.0 / 3.0


def test_ari_identical_and_bounded():
    p = Partition(5, ((0, 1), (2, 3, 4)))
    assert adjusted_rand(p, p) == 1.0
    assert exact_recovery(p, p)
    assert not exact_recovery(p, Partition.singletons(5))


def test_degenerate_denominator():
    assert adjusted_rand(Partition.singletons(4), Partition.singletons(4)) == 1.0
    assert adjusted_rand(Partition.one_block(4), Partition.one_block(4)) == 1.0
    assert adjusted_rand(Partition.singletons(4), Partition.one_block(4)) == 0.0


def test_contingency():
    p = Partition(4, ((0, 1), (2, 3)))
    q = Partition(4, ((0, 2), (1,), (3,)))
    t = contingency(p, q)
    assert t.sum() == 4 and t.shape == (2, 3)


def test_dimension_mismatch():
    with pytest.raises(InvalidArgumentError):
        rand_index(Partition.singletons(3), Partition.singletons(4))


labels = st.integers(2, 9).flatmap(lambda d: st.tuples(st.lists(st.integers(0, 3), min_size=d, max_size=d),
                                                       st.lists(st.integers(0, 3), min_size=d, max_size=d)))


@given(labels)
@settings(max_examples=100, deadline=None)
def test_ari_properties(pair):
    p, q = (Partition.from_labels(x) for x in pair)
    v = adjusted_rand(p, q)
    assert v <= 1.0 + 1e-12
    assert v == pytest.approx(adjusted_rand(q, p), abs=1e-12)
    assert 0.0 <= rand_index(p, q) <= 1.0


class TestConsensus:
    def test_identical_inputs(self):
        p = Partition(6, ((0, 3), (1, 2, 5), (4,)))
        stab, part = consensus([p, p, p], 3)
        assert part == p
        np.testing.assert_array_equal(stab.freq, p.co_membership())

    def test_frequencies(self):
        a = Partition(4, ((0, 1), (2, 3)))
        b = Partition(4, ((0, 1, 2), (3,)))
        stab, part = consensus([a, b], 2)
        assert np.all((stab.freq >= 0) & (stab.freq <= 1))
        assert np.all(np.diagonal(stab.freq) == 1.0)
        assert stab.freq[0, 2] == 0.5
        assert part == Partition(4, ((0, 1, 2), (3,))) or part == a

    def test_order_invariance(self):
        rng = np.random.default_rng(0)
        parts = [Partition.from_labels(rng.integers(0, 3, size=7).tolist()) for _ in range(5)]
        ref = consensus(parts, 3, seed=1)
        for perm in itertools.islice(itertools.permutations(parts), 10):
            stab, part = consensus(list(perm), 3, seed=1)
            assert part == ref[1]
            np.testing.assert_allclose(stab.freq, ref[0].freq, atol=1e-15)

    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            consensus([], 1)
        with pytest.raises(InvalidArgumentError):
            consensus([Partition.singletons(3), Partition.singletons(4)], 2)
        with pytest.raises(InvalidArgumentError):
            consensus([Partition.singletons(3)], 4)
        with pytest.raises(InvalidArgumentError):
            StabilityMatrix(2, np.array([[1.0, 2.0], [2.0, 1.0]]))
