import csv
import io
import json
from fractions import Fraction

import numpy as np
import pytest

from prophet_match.bench import gen_lower_bound
from prophet_match.matching import is_matching, max_weight_matching
from prophet_match.model import ArrivalOrder, InstanceError, ValuationProfile, sample_profile
from prophet_match.moments import compute_moments_exact
from prophet_match.policy import (exact_expected_welfare, exact_welfare_bound, make_orders,
                                  result_from_dict, result_to_csv, result_to_dict, run_vadd,
                                  simulate)
from prophet_match.pricing import PriceVector, solve_prices

from conftest import make_instance, single_edge, small_random

THIRD = PriceVector([1 / 3], [1 / 3])


def test_accept_at_fixed_point():
    rec = run_vadd(single_edge([1], [1]), THIRD, ArrivalOrder((0,)), ValuationProfile((1.0,)))
    assert rec.accepted == (0,)
    assert rec.welfare == 1
    assert float(rec.revenue) == pytest.approx(2 / 3) and float(rec.surplus) == pytest.approx(1 / 3)
    assert rec.welfare == rec.revenue + rec.surplus


def test_reject_above_threshold():
    rec = run_vadd(single_edge([1], [1]), PriceVector([0.6], [0.6]), ArrivalOrder((0,)),
                   ValuationProfile((1.0,)))
    assert rec.accepted == () and rec.welfare == 0


def test_covered_vertex_blocks_parallel_edge():
    inst = make_instance(1, 1, [(0, 0, [1], [1]), (0, 0, [1], [1])])
    rec = run_vadd(inst, THIRD, ArrivalOrder((0, 1)), ValuationProfile((1.0, 1.0)))
    assert rec.accepted == (0,)


def test_threshold_is_inclusive_and_exact():
    # 0.1 + 0.2 != 0.3 in floats; the exact test must still compare the real sum
    inst = single_edge([0.3], [1])
    prices = PriceVector([0.1], [0.2])
    exact = Fraction(0.1) + Fraction(0.2) <= Fraction(0.3)
    rec = run_vadd(inst, prices, ArrivalOrder((0,)), ValuationProfile((0.3,)))
    assert (rec.accepted == (0,)) == exact
    rec = run_vadd(single_edge([0.5], [1]), PriceVector([0.25], [0.25]), ArrivalOrder((0,)),
                   ValuationProfile((0.5,)))
    assert rec.accepted == (0,)


def test_price_dimension_mismatch():
    with pytest.raises(InstanceError):
        run_vadd(single_edge([1], [1]), PriceVector([0.1, 0.1], [0.1]), ArrivalOrder((0,)),
                 ValuationProfile((1.0,)))


def test_run_invariants():
    for k in range(30):
        inst = small_random(k, max_side=4, max_edges=8)
        prices = solve_prices(compute_moments_exact(inst)).prices
        for tag, order in make_orders(inst, "random", seed=k, count=3):
            prof = sample_profile(inst, k)
            rec = run_vadd(inst, prices, order, prof)
            assert is_matching(inst, rec.accepted)
            assert rec.welfare == rec.revenue + rec.surplus
            rev = sum(Fraction(float(prices.l[i])) for i in rec.covered_left) + \
                sum(Fraction(float(prices.r[j])) for j in rec.covered_right)
            assert rec.revenue == rev
            assert rec.welfare <= Fraction(max_weight_matching(inst, prof).value) + Fraction(1, 10**9)


def test_replay_is_non_adaptive():
    inst = small_random(7, max_side=4, max_edges=8)
    prices = solve_prices(compute_moments_exact(inst)).prices
    order = make_orders(inst, "random", seed=3)[0][1]
    prof = sample_profile(inst, 11)
    rec = run_vadd(inst, prices, order, prof)
    # replay: an edge is taken iff its endpoints are uncovered and it clears its threshold
    covered_l, covered_r, taken = set(), set(), []
    for e in order:
        edge = inst.edges[e]
        if edge.left in covered_l or edge.right in covered_r:
            continue
        if Fraction(prof[e]) >= Fraction(float(prices.l[edge.left])) + Fraction(float(prices.r[edge.right])):
            covered_l.add(edge.left)
            covered_r.add(edge.right)
            taken.append(e)
    assert tuple(taken) == rec.accepted


def test_simulate_deterministic_single_edge():
    res = simulate(single_edge([1], [1]), THIRD, [("identity", ArrivalOrder((0,)))], 50, seed=1)
    rep = res.reports[0]
    assert rep.mean_welfare == 1 and rep.mean_opt == 1 and rep.ratio == 1


def test_simulate_matches_exact_on_g2():
    inst, order = gen_lower_bound(2)
    prices = solve_prices(compute_moments_exact(inst)).prices
    exact = exact_expected_welfare(inst, prices, order)
    rep = simulate(inst, prices, [("batch-lb", order)], 10**5, seed=5).reports[0]
    assert abs(rep.ratio - exact["opt"] / exact["welfare"]) <= 3 * max(rep.stderr_ratio, 1e-12)
    assert abs(rep.mean_opt - exact["opt"]) <= 3 * rep.stderr_opt


def test_simulate_worst_order_on_random_3x3():
    inst = make_instance(3, 3, [(0, 0, [0, 1], [0.5, 0.5]), (0, 1, [0.5, 2], [0.7, 0.3]),
                                (1, 1, [0, 1.5], [0.4, 0.6]), (1, 2, [1], [1]),
                                (2, 0, [0, 3], [0.8, 0.2]), (2, 2, [0.25, 0.75], [0.5, 0.5])])
    prices = solve_prices(compute_moments_exact(inst)).prices
    res = simulate(inst, prices, make_orders(inst, "random", seed=2, count=10), 10**5, seed=9)
    worst = res.worst
    assert worst.mean_welfare >= worst.mean_opt / 3 - 3 * worst.stderr_welfare


def test_exact_bernoulli_example(bernoulli_edge):
    out = exact_expected_welfare(bernoulli_edge, PriceVector([0.25], [0.25]), ArrivalOrder((0,)))
    assert out == {"welfare": 0.5, "revenue": 0.25, "surplus": 0.25, "opt": 0.5}


def test_exact_equals_run_on_deterministic_instance():
    inst = make_instance(2, 2, [(0, 0, [1], [1]), (0, 1, [2], [1]), (1, 1, [1.5], [1])])
    prices = PriceVector([0.3, 0.2], [0.4, 0.6])
    order = ArrivalOrder((2, 0, 1))
    rec = run_vadd(inst, prices, order, ValuationProfile((1.0, 2.0, 1.5)))
    assert exact_expected_welfare(inst, prices, order)["welfare"] == float(rec.welfare)


def test_exact_prophet_inequality_and_bound():
    for k in range(25):
        inst = small_random(200 + k)
        mo = compute_moments_exact(inst)
        sol = solve_prices(mo)
        for tag, order in (make_orders(inst, "ascending-mean") + make_orders(inst, "descending-mean")
                           + make_orders(inst, "random", seed=k, count=2)):
            out = exact_expected_welfare(inst, sol.prices, order)
            assert out["welfare"] >= out["opt"] / 3 - 3 * sol.eps
            assert out["welfare"] >= exact_welfare_bound(inst, sol.prices, order, mo) - 1e-9


def test_orders():
    inst = small_random(1, max_edges=6)
    T = inst.n_edges
    for name in ("batch-lb", "ascending-mean", "descending-mean"):
        (tag, order), = make_orders(inst, name)
        assert sorted(order.sequence) == list(range(T))
    assert make_orders(inst, "random", seed=4, count=3) == make_orders(inst, "random", seed=4, count=3)
    assert len(make_orders(single_edge([1], [1]), "exhaustive")) == 1
    with pytest.raises(ValueError):
        make_orders(inst, "sideways")


def test_thread_invariance_and_export():
    inst, order = gen_lower_bound(3)
    prices = PriceVector(np.full(9, 0.3), np.full(9, 0.3))
    orders = [("batch-lb", order)] + make_orders(inst, "random", seed=1, count=2)
    a = simulate(inst, prices, orders, 1000, seed=3, threads=1)
    b = simulate(inst, prices, orders, 1000, seed=3, threads=2)
    assert result_to_dict(a) == result_to_dict(b)
    d = json.loads(json.dumps(result_to_dict(a)))
    assert result_to_dict(result_from_dict(d)) == d
    rows = list(csv.DictReader(io.StringIO(result_to_csv(a))))
    assert [r["order_tag"] for r in rows] == ["batch-lb", "random-0", "random-1"]
    assert set(rows[0]) == {"order_tag", "mean_welfare", "stderr", "mean_revenue",
                            "mean_surplus", "mean_opt", "ratio"}
