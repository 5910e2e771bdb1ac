import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from unicusum.alphabet_dist import Categorical, SymbolStream
from unicusum.errors import TooLarge
from unicusum.universal_code import KTCoder, kraft_sum, kt_extend, kt_length, redundancy


def kt_prob_direct(seq, k):
    """Product of add-1/2 predictive probabilities, straight from the definition."""
    q = 1.0
    counts = [0] * k
    for i, x in enumerate(seq):
        q *= (counts[x] + 0.5) / (i + k / 2)
        counts[x] += 1
    return q


def test_kt_examples():
    assert kt_length(SymbolStream([], 2)) == 0.0
    assert kt_length([0], 2) == pytest.approx(1.0, abs=1e-12)
    assert kt_length([0, 0], 2) == pytest.approx(math.log2(8 / 3), abs=1e-12)
    assert kt_length([0, 0], 2) == pytest.approx(1.41504, abs=1e-5)
    assert kt_length([0, 1], 2) == pytest.approx(3.0, abs=1e-12)


def test_extend_examples():
    coder = KTCoder(2)
    st0 = coder.initial_state()
    assert coder.extend(st0.copy(), 1).length == pytest.approx(1.0)
    s = coder.extend(coder.initial_state(), 0)
    before = s.length
    coder.extend(s, 0)
    assert s.length - before == pytest.approx(math.log2(2 / 1.5), abs=1e-12)
    assert s.length - before == pytest.approx(0.41504, abs=1e-5)


@given(st.integers(2, 5).flatmap(
    lambda k: st.tuples(st.just(k), st.lists(st.integers(0, k - 1), max_size=80))))
def test_incremental_matches_batch(case):
    k, seq = case
    coder = KTCoder(k)
    s = coder.initial_state()
    for x in seq:
        kt_extend(s, x, k)
    assert s.length == pytest.approx(coder.length(seq), abs=1e-9)
    if len(seq) <= 40:
        assert coder.length(seq) == pytest.approx(-math.log2(kt_prob_direct(seq, k)), abs=1e-9)


@given(st.lists(st.integers(0, 2), min_size=1, max_size=60), st.randoms(use_true_random=False))
def test_permutation_invariance(seq, rnd):
    perm = list(seq)
    rnd.shuffle(perm)
    assert kt_length(perm, 3) == pytest.approx(kt_length(seq, 3), abs=1e-9)


def test_kraft_examples():
    coder = KTCoder(2)
    assert kraft_sum(coder, 0) == 1.0
    assert kraft_sum(coder, 2) == pytest.approx(1.0, abs=1e-12)
    # enumeration oracle for K=3, n=4 using the direct product form
    direct = sum(kt_prob_direct(s, 3) for s in itertools.product(range(3), repeat=4))
    assert direct == pytest.approx(1.0, abs=1e-12)
    assert kraft_sum(KTCoder(3), 4) == pytest.approx(1.0, abs=1e-9)


def test_kraft_guard():
    with pytest.raises(TooLarge):
        kraft_sum(KTCoder(2), 25)


def test_redundancy_examples(fair):
    coder = KTCoder(2)
    assert redundancy(coder, fair, 0) == 0.0
    r = redundancy(coder, fair, 12)
    assert r <= 0.5 * math.log2(12) + 2
    # direct enumeration oracle
    brute = max(-math.log2(kt_prob_direct(s, 2)) - 12
                for s in itertools.product(range(2), repeat=12))
    assert r == pytest.approx(brute, abs=1e-9)
    with pytest.raises(TooLarge):
        redundancy(coder, fair, 30)


def test_redundancy_sup_over_sources_is_constant_sequence():
    coder = KTCoder(2)
    for n in (1, 5, 12):
        assert redundancy(coder, None, n) == pytest.approx(coder.regret_bound(n), abs=1e-9)


def test_redundancy_per_symbol_shrinks(fair):
    coder = KTCoder(2)
    vals = [redundancy(coder, fair, n, "sampled", samples=128, seed=3) / n for n in (64, 4096)]
    assert vals[1] < vals[0]


def _compositions(m, k):
    if k == 1:
        yield (m,)
        return
    for i in range(m + 1):
        for rest in _compositions(m - i, k - 1):
            yield (i,) + rest


@pytest.mark.parametrize("k", [2, 3, 4])
def test_regret_bound_is_the_maximum(k):
    coder = KTCoder(k)
    for m in (1, 2, 7, 25):
        worst = -math.inf
        for c in _compositions(m, k):
            ml = sum(ci * math.log2(ci / m) for ci in c if ci)
            worst = max(worst, ml + coder.length_from_counts(c))
        assert worst == pytest.approx(coder.regret_bound(m), abs=1e-9)
