"""Instance generators.

``gen_lower_bound(n)`` builds the three-batch family on ``3n + 3n`` vertices
where no online policy beats roughly 4/9 of the offline optimum for large n:

* batch 1: ``(i, i+n)`` and ``(j+n, j)`` for ``i, j < n``, value 1/2;
* batch 2: ``(i, i+2n)`` and ``(j+2n, j)``, value 3/4 or 0 with equal odds;
* batch 3: the clique ``(i, j)`` for ``i, j < n``, value ``n`` w.p. ``1/n^2`` else 0.

Edge ids follow the batch order, so the identity order is the batch order.
"""

from __future__ import annotations

import numpy as np

from ._seeding import derive
from .model import ArrivalOrder, DiscreteDistribution, EdgeSpec, MarketInstance

VALUE_GRID = 8


def gen_lower_bound(n: int) -> tuple[MarketInstance, ArrivalOrder]:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    low = DiscreteDistribution.point(0.5)
    mid = DiscreteDistribution((0.0, 0.75), (0.5, 0.5))
    p = 1.0 / (n * n)
    high = DiscreteDistribution((0.0, float(n)), (1.0 - p, p))

    pairs: list[tuple[int, int, DiscreteDistribution]] = []
    pairs += [(i, i + n, low) for i in range(n)]
    pairs += [(j + n, j, low) for j in range(n)]
    pairs += [(i, i + 2 * n, mid) for i in range(n)]
    pairs += [(j + 2 * n, j, mid) for j in range(n)]
    pairs += [(i, j, high) for i in range(n) for j in range(n)]
    edges = tuple(EdgeSpec(k, a, b, d) for k, (a, b, d) in enumerate(pairs))
    inst = MarketInstance(3 * n, 3 * n, edges)
    return inst, ArrivalOrder.identity(inst)


def lower_bound_batches(n: int) -> tuple[range, range, range]:
    """Edge-id ranges of the three batches of ``gen_lower_bound(n)``."""
    return range(0, 2 * n), range(2 * n, 4 * n), range(4 * n, 4 * n + n * n)


def opt_floor(n: int) -> float:
    """Finite-n lower bound on the expected offline optimum of ``gen_lower_bound(n)``.

    Isolated positive batch-3 edges alone give ``n (1 - (2n-2)/n^2)``; each
    side's batch-1/batch-2 edges add ``(5/8) n (1 - 1/n)``.
    """
    return n * (1.0 - (2 * n - 2) / n**2) + 2 * (5.0 / 8.0) * n * (1.0 - 1.0 / n)


def gen_random(n: int, m: int, edges: int, max_support: int = 2, value_scale: float = 1.0,
               seed: int = 0) -> MarketInstance:
    """Seeded random multigraph with random discrete value distributions.

    Each support atom is 0 with probability 1/2 and otherwise a multiple of
    ``value_scale / 8`` in ``(0, value_scale]``; the dyadic grid keeps sums
    exact and produces plenty of ties.
    """
    if min(n, m, edges, max_support) < 1 or value_scale <= 0:
        raise ValueError("generator parameters must be positive")
    rng = np.random.default_rng(derive(seed, 0x6E72))
    out = []
    for k in range(edges):
        left = int(rng.integers(n))
        right = int(rng.integers(m))
        size = int(rng.integers(1, max_support + 1))
        values: list[float] = []
        for _ in range(size):
            if rng.random() < 0.5:
                v = 0.0
            else:
                v = value_scale * int(rng.integers(1, VALUE_GRID + 1)) / VALUE_GRID
            if v not in values:
                values.append(v)
        w = rng.random(len(values)) + 0.05
        probs = w / w.sum()
        probs[-1] = 1.0 - probs[:-1].sum()
        out.append(EdgeSpec(k, left, right, DiscreteDistribution(tuple(values), tuple(probs))))
    return MarketInstance(n, m, tuple(out))
