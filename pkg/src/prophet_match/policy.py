"""The non-adaptive vertex-additive threshold policy and its simulation.

An arriving edge ``(i, j)`` is accepted iff both endpoints are still free and
its value is at least ``l_i + r_j``.  Accepted welfare splits into revenue
(the thresholds paid) and surplus (the excess over them).
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from ._parallel import run_blocks, trial_blocks
from ._seeding import derive
from .matching import canonical_matching
from .model import (DEFAULT_ENUM_LIMIT, ArrivalOrder, InstanceError, MarketInstance,
                    ValuationProfile, dist_mean, dumps, enumerate_profiles, sample_values)
from .moments import ContributionMatrices
from .pricing import PriceVector

# relative width of the band where the float threshold test is re-done exactly
_BAND = 1e-14
EXHAUSTIVE_MAX_EDGES = 8


@dataclass(frozen=True)
class PolicyRunRecord:
    accepted: tuple[int, ...]
    welfare: Fraction
    revenue: Fraction
    surplus: Fraction
    covered_left: frozenset[int]
    covered_right: frozenset[int]


@dataclass(frozen=True)
class SimulationReport:
    order_strategy: str
    trials: int
    mean_welfare: float
    stderr_welfare: float
    mean_revenue: float
    mean_surplus: float
    mean_opt: float
    stderr_opt: float
    ratio: float | None
    stderr_ratio: float | None


@dataclass(frozen=True)
class SimulationResult:
    reports: tuple[SimulationReport, ...]
    seed: int

    @property
    def worst(self) -> SimulationReport:
        return min(self.reports, key=lambda rep: rep.mean_welfare)


def _check_prices(instance: MarketInstance, prices: PriceVector):
    if prices.l.shape != (instance.n_left,) or prices.r.shape != (instance.n_right,):
        raise InstanceError(
            f"prices of sizes ({prices.l.size}, {prices.r.size}) do not fit an instance "
            f"with {instance.n_left} left and {instance.n_right} right vertices")


def accept_mask(values: np.ndarray, thresholds: np.ndarray, l_of, r_of) -> np.ndarray:
    """Elementwise ``values >= l_i + r_j`` decided exactly.

    ``thresholds`` is the float sum ``l_i + r_j`` per edge; ``l_of``/``r_of``
    give the exact summands for the few entries too close to call in floats.
    """
    lo = thresholds * (1.0 - _BAND)
    hi = thresholds * (1.0 + _BAND)
    mask = values >= hi
    unsure = np.argwhere((values >= lo) & ~mask)
    for idx in unsure:
        idx = tuple(idx)
        e = idx[-1]
        mask[idx] = Fraction(float(values[idx])) >= Fraction(l_of[e]) + Fraction(r_of[e])
    return mask


def _edge_prices(instance: MarketInstance, prices: PriceVector):
    le = prices.l[instance.lefts] if instance.n_edges else np.zeros(0)
    re = prices.r[instance.rights] if instance.n_edges else np.zeros(0)
    return le, re, le + re


def _run_accepted(order_seq, ok_row, lefts, rights) -> list[int]:
    """Accepted edge ids given a per-edge threshold verdict ``ok_row``."""
    used_l: set[int] = set()
    used_r: set[int] = set()
    accepted = []
    for e in order_seq:
        if ok_row[e]:
            i, j = lefts[e], rights[e]
            if i not in used_l and j not in used_r:
                used_l.add(i)
                used_r.add(j)
                accepted.append(e)
    return accepted


def run_vadd(instance: MarketInstance, prices: PriceVector, order: ArrivalOrder,
             profile: ValuationProfile) -> PolicyRunRecord:
    """One run of the threshold policy with exact rational accounting."""
    _check_prices(instance, prices)
    values = np.asarray(profile.values, dtype=float)
    le, re, thr = _edge_prices(instance, prices)
    ok = accept_mask(values, thr, le, re)
    accepted = _run_accepted(order.sequence, ok, instance.left_list, instance.right_list)
    welfare = sum((Fraction(float(values[e])) for e in accepted), Fraction(0))
    revenue = sum((Fraction(float(le[e])) + Fraction(float(re[e])) for e in accepted), Fraction(0))
    return PolicyRunRecord(
        accepted=tuple(accepted),
        welfare=welfare,
        revenue=revenue,
        surplus=welfare - revenue,
        covered_left=frozenset(instance.left_list[e] for e in accepted),
        covered_right=frozenset(instance.right_list[e] for e in accepted),
    )


def _accounting(accepted, row, le, re) -> tuple[float, float, float]:
    """Correctly rounded welfare, revenue and surplus of one run."""
    vals = [float(row[e]) for e in accepted]
    prices = [float(le[e]) for e in accepted] + [float(re[e]) for e in accepted]
    welfare = math.fsum(vals)
    revenue = math.fsum(prices)
    surplus = math.fsum(vals + [-p for p in prices])
    return welfare, revenue, surplus


# -- arrival orders ---------------------------------------------------------------

def make_orders(instance: MarketInstance, strategy: str, seed: int = 0, count: int = 1
                ) -> list[tuple[str, ArrivalOrder]]:
    """Named arrival orders.

    ``batch-lb`` is ascending edge id (the batch order for lower-bound
    instances); ``random`` gives ``count`` seeded uniform permutations;
    ``ascending-mean``/``descending-mean`` sort by expected value (ties by id);
    ``exhaustive`` lists every permutation for at most 8 edges.
    """
    T = instance.n_edges
    means = [dist_mean(e.dist) for e in instance.edges]
    if strategy in ("batch-lb", "identity"):
        return [(strategy, ArrivalOrder.identity(instance))]
    if strategy == "ascending-mean":
        return [(strategy, ArrivalOrder(tuple(sorted(range(T), key=lambda e: (means[e], e)))))]
    if strategy == "descending-mean":
        return [(strategy, ArrivalOrder(tuple(sorted(range(T), key=lambda e: (-means[e], e)))))]
    if strategy == "random":
        out = []
        for k in range(count):
            rng = np.random.default_rng(derive(seed, 0x0D, k))
            out.append((f"random-{k}", ArrivalOrder(tuple(rng.permutation(T).tolist()))))
        return out
    if strategy == "exhaustive":
        if T > EXHAUSTIVE_MAX_EDGES:
            raise ValueError(f"exhaustive order search needs at most {EXHAUSTIVE_MAX_EDGES} edges")
        return [(f"perm-{k}", ArrivalOrder(p))
                for k, p in enumerate(itertools.permutations(range(T)))]
    raise ValueError(f"unknown order strategy {strategy!r}")


# -- simulation ---------------------------------------------------------------------

def _sim_block(instance, l, r, orders, seed, start, stop):
    """Per-trial (welfare, revenue, surplus) for every order, plus the offline optimum."""
    le, re, thr = _edge_prices(instance, PriceVector(l, r))
    values = sample_values(instance, [derive(seed, t) for t in range(start, stop)])
    ok = accept_mask(values, thr[None, :], le, re)
    lefts, rights = instance.left_list, instance.right_list
    seqs = [np.asarray(seq, dtype=np.intp) for seq in orders]
    positions = [np.argsort(seq) for seq in seqs]
    k = len(orders)
    out = np.zeros((stop - start, 3 * k + 1))
    for t, row in enumerate(values):
        chosen = canonical_matching(lefts, rights, row)
        out[t, -1] = math.fsum(row[chosen].tolist())
        cand = np.flatnonzero(ok[t])
        if cand.size == 0:
            continue
        for q in range(k):
            # only edges passing their threshold can be taken; visit them in arrival order
            visit = seqs[q][np.sort(positions[q][cand])].tolist()
            accepted = _run_accepted(visit, ok[t], lefts, rights)
            out[t, 3 * q:3 * q + 3] = _accounting(accepted, row, le, re)
    return out


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    n = len(x)
    mean = math.fsum(x.tolist()) / n
    se = float(np.sqrt(np.sum((x - mean) ** 2) / (n - 1) / n)) if n > 1 else 0.0
    return mean, se


def simulate(instance: MarketInstance, prices: PriceVector,
             orders: Sequence[tuple[str, ArrivalOrder]], trials: int, seed: int,
             threads: int = 1) -> SimulationResult:
    """Paired Monte Carlo evaluation of the policy under several arrival orders.

    Trial ``t`` draws one profile from ``derive(seed, t)``; every order and the
    offline optimum are evaluated on that same profile.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    _check_prices(instance, prices)
    for _, order in orders:
        if sorted(order.sequence) != list(range(instance.n_edges)):
            raise InstanceError("arrival order is not a permutation of the edge ids")
    seqs = [order.sequence for _, order in orders]
    tasks = [(instance, prices.l, prices.r, seqs, seed, a, b) for a, b in trial_blocks(trials)]
    data = np.concatenate(run_blocks(_sim_block, tasks, threads), axis=0)
    opt = data[:, -1]
    mean_opt, se_opt = _mean_se(opt)
    reports = []
    for q, (tag, _) in enumerate(orders):
        w = data[:, 3 * q]
        mean_w, se_w = _mean_se(w)
        mean_rev = math.fsum(data[:, 3 * q + 1].tolist()) / trials
        mean_sur = math.fsum(data[:, 3 * q + 2].tolist()) / trials
        ratio = se_ratio = None
        if mean_w > 0:
            ratio = mean_opt / mean_w
            if trials > 1:
                cov = np.cov(opt, w, ddof=1)
                var = (cov[0, 0] - 2 * ratio * cov[0, 1] + ratio ** 2 * cov[1, 1]) / mean_w ** 2
                se_ratio = float(math.sqrt(max(var, 0.0) / trials))
            else:
                se_ratio = 0.0
        reports.append(SimulationReport(tag, trials, mean_w, se_w, mean_rev, mean_sur,
                                        mean_opt, se_opt, ratio, se_ratio))
    return SimulationResult(tuple(reports), seed)


# -- exact evaluation -----------------------------------------------------------------

def exact_expected_welfare(instance: MarketInstance, prices: PriceVector, order: ArrivalOrder,
                           limit: int = DEFAULT_ENUM_LIMIT) -> dict:
    """Exact expectations of welfare, revenue, surplus and the offline optimum."""
    return exact_expected_welfare_many(instance, prices, [order], limit)[0]


def exact_expected_welfare_many(instance: MarketInstance, prices: PriceVector,
                                orders: Sequence[ArrivalOrder],
                                limit: int = DEFAULT_ENUM_LIMIT) -> list[dict]:
    """Like :func:`exact_expected_welfare` for several orders in one enumeration."""
    _check_prices(instance, prices)
    le, re, thr = _edge_prices(instance, prices)
    lefts, rights = instance.left_list, instance.right_list
    acc = [[[], [], []] for _ in orders]
    opt_terms = []
    for p, values in enumerate_profiles(instance, limit):
        row = np.asarray(values, dtype=float)
        ok = accept_mask(row, thr, le, re)
        chosen = canonical_matching(lefts, rights, row)
        opt_terms.append(p * math.fsum(row[chosen].tolist()))
        for q, order in enumerate(orders):
            w, rev, sur = _accounting(_run_accepted(order.sequence, ok, lefts, rights), row, le, re)
            acc[q][0].append(p * w)
            acc[q][1].append(p * rev)
            acc[q][2].append(p * sur)
    opt = math.fsum(opt_terms)
    return [{"welfare": math.fsum(a[0]), "revenue": math.fsum(a[1]),
             "surplus": math.fsum(a[2]), "opt": opt} for a in acc]


def exact_welfare_bound(instance: MarketInstance, prices: PriceVector, order: ArrivalOrder,
                        moments: ContributionMatrices, limit: int = DEFAULT_ENUM_LIMIT) -> float:
    """Expected covered-vertex revenue plus slack on uncovered pairs.

    Per profile this is ``sum_{i covered} l_i + sum_{j covered} r_j`` plus
    ``[M_ij - (l_i + r_j) Q_ij]^+`` summed over pairs with both endpoints left
    uncovered; its expectation lower-bounds the policy's expected welfare.
    """
    _check_prices(instance, prices)
    le, re, thr = _edge_prices(instance, prices)
    l, r = prices.l, prices.r
    slack = np.maximum(np.asarray(moments.M) - np.asarray(moments.Q) * (l[:, None] + r[None, :]), 0.0)
    lefts, rights = instance.left_list, instance.right_list
    terms = []
    for p, values in enumerate_profiles(instance, limit):
        row = np.asarray(values, dtype=float)
        accepted = _run_accepted(order.sequence, accept_mask(row, thr, le, re), lefts, rights)
        free_l = np.ones(instance.n_left, dtype=bool)
        free_r = np.ones(instance.n_right, dtype=bool)
        free_l[[lefts[e] for e in accepted]] = False
        free_r[[rights[e] for e in accepted]] = False
        value = (l[~free_l].sum() + r[~free_r].sum() + slack[np.ix_(free_l, free_r)].sum())
        terms.append(p * value)
    return math.fsum(terms)


# -- export -----------------------------------------------------------------------------

CSV_FIELDS = ["order_tag", "mean_welfare", "stderr", "mean_revenue", "mean_surplus",
              "mean_opt", "ratio"]


def report_to_dict(rep: SimulationReport) -> dict:
    return {
        "order_strategy": rep.order_strategy,
        "trials": rep.trials,
        "mean_welfare": rep.mean_welfare,
        "stderr_welfare": rep.stderr_welfare,
        "mean_revenue": rep.mean_revenue,
        "mean_surplus": rep.mean_surplus,
        "mean_opt": rep.mean_opt,
        "stderr_opt": rep.stderr_opt,
        "ratio": rep.ratio,
        "stderr_ratio": rep.stderr_ratio,
    }


def report_from_dict(data: dict) -> SimulationReport:
    return SimulationReport(**{k: data[k] for k in SimulationReport.__dataclass_fields__})


def result_to_dict(result: SimulationResult) -> dict:
    return {
        "seed": result.seed,
        "trials": result.reports[0].trials if result.reports else 0,
        "orders": [report_to_dict(rep) for rep in result.reports],
        "worst": result.worst.order_strategy if result.reports else None,
    }


def result_from_dict(data: dict) -> SimulationResult:
    return SimulationResult(tuple(report_from_dict(d) for d in data["orders"]), int(data["seed"]))


def result_to_json(result: SimulationResult) -> str:
    return dumps(result_to_dict(result))


def result_to_csv(result: SimulationResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for rep in result.reports:
        writer.writerow([rep.order_strategy, repr(rep.mean_welfare), repr(rep.stderr_welfare),
                         repr(rep.mean_revenue), repr(rep.mean_surplus), repr(rep.mean_opt),
                         "" if rep.ratio is None else repr(rep.ratio)])
    return buf.getvalue()
