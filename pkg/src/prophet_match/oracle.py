"""Exact baselines for tiny instances.

``optimal_online_value`` is the best expected value any online policy can
collect under a fixed arrival order.  Future values are independent of the
past, so the state is just the arrival position plus the set of free
vertices; the value function is computed by backward induction.
"""

from __future__ import annotations

import math

from .matching import canonical_matching
from .model import (DEFAULT_ENUM_LIMIT, ArrivalOrder, MarketInstance, SizeLimitError,
                    enumerate_profiles)

MAX_EDGES = 64
MAX_TRACKED_VERTICES = 22


def optimal_online_value(instance: MarketInstance, order: ArrivalOrder) -> float:
    T = instance.n_edges
    if T > MAX_EDGES:
        raise SizeLimitError(f"online DP supports at most {MAX_EDGES} edges, got {T}")
    seq = list(order.sequence)
    n = instance.n_left
    # vertex k < n is left vertex k, vertex n + j is right vertex j
    bits = [(1 << instance.edges[e].left) | (1 << (n + instance.edges[e].right)) for e in seq]
    atoms = [instance.edges[e].dist.atoms() for e in seq]

    # only vertices touched by edges still to come matter for the future
    relevant = [0] * (T + 1)
    for t in range(T - 1, -1, -1):
        relevant[t] = relevant[t + 1] | bits[t]
    widest = max((bin(m).count("1") for m in relevant), default=0)
    if widest > MAX_TRACKED_VERTICES:
        raise SizeLimitError(
            f"online DP would track {widest} vertices; limit is {MAX_TRACKED_VERTICES}")

    memo: dict[tuple[int, int], float] = {}

    def value(t: int, free: int) -> float:
        if t == T:
            return 0.0
        free &= relevant[t]
        key = (t, free)
        hit = memo.get(key)
        if hit is not None:
            return hit
        skip = value(t + 1, free)
        if free & bits[t] == bits[t]:
            take_rest = value(t + 1, free & ~bits[t])
            out = math.fsum(p * max(v + take_rest, skip) for v, p in atoms[t])
        else:
            out = skip
        memo[key] = out
        return out

    return value(0, (1 << (n + instance.n_right)) - 1)


def exact_opt_value(instance: MarketInstance, limit: int = DEFAULT_ENUM_LIMIT) -> float:
    """Expected offline optimum by enumerating every profile."""
    lefts, rights = instance.left_list, instance.right_list
    terms = []
    for p, values in enumerate_profiles(instance, limit):
        chosen = canonical_matching(lefts, rights, values)
        terms.append(p * math.fsum(values[e] for e in chosen))
    return math.fsum(terms)
