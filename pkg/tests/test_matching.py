import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prophet_match.bench import gen_random
from prophet_match.matching import (brute_force_matching, canonical_matching, is_matching,
                                    max_weight_matching)
from prophet_match.model import SizeLimitError, ValuationProfile, sample_profile

from conftest import make_instance


def complete_2x2(a, b, c, d):
    return make_instance(2, 2, [(0, 0, [a], [1]), (0, 1, [b], [1]),
                                (1, 0, [c], [1]), (1, 1, [d], [1])])


def test_single_edge():
    inst = make_instance(1, 1, [(0, 0, [5], [1])])
    res = max_weight_matching(inst, ValuationProfile((5.0,)))
    assert res.chosen == {0} and res.value == 5.0


def test_zero_edges_excluded():
    inst = complete_2x2(0, 0, 0, 0)
    res = max_weight_matching(inst, ValuationProfile((0.0,) * 4))
    assert res.chosen == frozenset() and res.value == 0.0
    assert brute_force_matching(inst, ValuationProfile((0.0,) * 4)).chosen == frozenset()


def test_two_by_two():
    inst = complete_2x2(3, 2, 2, 3)
    res = max_weight_matching(inst, ValuationProfile((3.0, 2.0, 2.0, 3.0)))
    assert res.sorted_ids == (0, 3) and res.value == 6.0


def test_parallel_edges():
    inst = make_instance(1, 1, [(0, 0, [1], [1]), (0, 0, [2], [1])])
    for res in (max_weight_matching(inst, np.array([1.0, 2.0])),
                brute_force_matching(inst, np.array([1.0, 2.0]))):
        assert res.chosen == {1}


def test_ties_pick_lexicographically_smallest():
    # {0,3} and {1,2} both weigh 4
    vals = np.array([2.0, 2.0, 2.0, 2.0])
    inst = complete_2x2(2, 2, 2, 2)
    assert max_weight_matching(inst, vals).sorted_ids == (0, 3)
    assert max_weight_matching(inst, vals, small_component=0).sorted_ids == (0, 3)
    # one heavy edge against two light ones of equal total
    inst = make_instance(2, 2, [(0, 1, [1], [1]), (1, 0, [1], [1]), (0, 0, [2], [1])])
    assert max_weight_matching(inst, np.array([1.0, 1.0, 2.0])).sorted_ids == (0, 1)


def test_brute_force_size_limit():
    inst = gen_random(6, 6, 21, 1, seed=0)
    with pytest.raises(SizeLimitError):
        brute_force_matching(inst, np.ones(21))


@pytest.mark.parametrize("small_component", [8, 0])
def test_agrees_with_brute_force(small_component):
    rng = np.random.default_rng(17)
    for k in range(200):
        inst = gen_random(int(rng.integers(1, 5)), int(rng.integers(1, 5)),
                          int(rng.integers(1, 11)), 3, 1.0, seed=k)
        prof = sample_profile(inst, k)
        fast = max_weight_matching(inst, prof, small_component=small_component)
        slow = brute_force_matching(inst, prof)
        assert fast.value == slow.value
        assert fast.chosen == slow.chosen
        assert is_matching(inst, fast.chosen)


def test_large_component_uses_assignment_path():
    rng = np.random.default_rng(3)
    for k in range(15):
        inst = gen_random(4, 4, 13, 1, 1.0, seed=100 + k)
        vals = rng.integers(1, 5, size=13).astype(float)
        assert (max_weight_matching(inst, vals).chosen
                == brute_force_matching(inst, vals).chosen)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 9), st.floats(0, 3))
def test_monotone_in_one_edge(seed, which, bump):
    inst = gen_random(3, 3, 10, 2, 1.0, seed)
    vals = np.array(sample_profile(inst, seed).values)
    before = max_weight_matching(inst, vals).value
    vals[which] += bump
    assert max_weight_matching(inst, vals).value >= before


def test_repeatable():
    inst = gen_random(5, 5, 14, 3, 1.0, seed=2)
    prof = sample_profile(inst, 4)
    assert len({max_weight_matching(inst, prof).chosen for _ in range(5)}) == 1
    assert canonical_matching(inst.left_list, inst.right_list, prof.values) == \
        sorted(max_weight_matching(inst, prof).chosen)
