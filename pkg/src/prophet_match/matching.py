"""Exact maximum-weight matching with a canonical tie-break.

Among all maximum-weight matchings the one whose sorted edge-id list is
lexicographically smallest is returned, and zero-value edges are never
matched.  Values within ``tie_tolerance`` of the maximum count as ties.

The fast path splits the positive-value graph into connected components.
Tiny components are searched exhaustively; larger ones are solved with a
shortest-augmenting-path assignment solver followed by a greedy pass that
fixes edges in increasing id order while the optimum stays reachable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import MarketInstance, SizeLimitError, ValuationProfile

BRUTE_FORCE_MAX_EDGES = 20
SMALL_COMPONENT = 8


@dataclass(frozen=True)
class MatchingResult:
    chosen: frozenset[int]
    value: float

    @property
    def sorted_ids(self) -> tuple[int, ...]:
        return tuple(sorted(self.chosen))


def tie_tolerance(values) -> float:
    return 1e-12 * max(1.0, math.fsum(v for v in values if v > 0))


def matching_value(chosen, values) -> float:
    return math.fsum(values[e] for e in sorted(chosen))


def max_weight_matching(instance: MarketInstance, profile: ValuationProfile | np.ndarray,
                        *, small_component: int = SMALL_COMPONENT) -> MatchingResult:
    """Canonical maximum-weight matching of the realized profile.

    ``small_component`` is the largest component (in edges) solved by
    exhaustive search; pass 0 to force the assignment-solver path everywhere.
    """
    values = profile.values if isinstance(profile, ValuationProfile) else profile
    chosen = canonical_matching(instance.left_list, instance.right_list, values,
                                small_component=small_component)
    return MatchingResult(frozenset(chosen), matching_value(chosen, values))


def canonical_matching(lefts, rights, values, *, small_component: int = SMALL_COMPONENT
                       ) -> list[int]:
    """Sorted edge ids of the canonical maximum-weight matching."""
    arr = np.asarray(values, dtype=float)
    positive = np.flatnonzero(arr > 0.0).tolist()
    vals = arr.tolist()
    tol = 1e-12 * max(1.0, math.fsum(vals[e] for e in positive))

    # keep only the best parallel edge per vertex pair (ties -> lowest id)
    best: dict[tuple[int, int], int] = {}
    for e in positive:
        v = vals[e]
        key = (lefts[e], rights[e])
        cur = best.get(key)
        if cur is None or v > vals[cur]:
            best[key] = e
    if not best:
        return []

    # union-find over vertices; right vertex j is keyed as ~j
    parent: dict[int, int] = {}

    def find(x):
        root = x
        while parent.get(root, root) != root:
            root = parent[root]
        while parent.get(x, x) != root:
            parent[x], x = root, parent[x]
        return root

    for (i, j) in best:
        a, b = find(i), find(~j)
        if a != b:
            parent[a] = b

    components: dict[int, list[int]] = {}
    for (i, j), e in best.items():
        components.setdefault(find(i), []).append(e)

    chosen: list[int] = []
    for comp in components.values():
        if len(comp) == 1:
            chosen.append(comp[0])
            continue
        comp.sort()
        if len(comp) == 2 and small_component >= 2:
            # two distinct pairs in one component share a vertex: take one
            a, b = comp
            chosen.append(b if vals[b] > vals[a] + tol else a)
        elif len(comp) <= small_component:
            chosen.extend(_search_component(comp, lefts, rights, vals, tol))
        else:
            chosen.extend(_assignment_component(comp, lefts, rights, vals, tol))
    chosen.sort()
    return chosen


def _search_component(edges, lefts, rights, vals, tol):
    """Exhaustive search over the matchings of one small component."""
    found: list[tuple[float, tuple[int, ...]]] = []
    k = len(edges)

    def rec(pos, used_l, used_r, picked):
        if pos == k:
            found.append((math.fsum(vals[e] for e in picked), tuple(picked)))
            return
        e = edges[pos]
        i, j = lefts[e], rights[e]
        if i not in used_l and j not in used_r:
            picked.append(e)
            rec(pos + 1, used_l | {i}, used_r | {j}, picked)
            picked.pop()
        rec(pos + 1, used_l, used_r, picked)

    rec(0, frozenset(), frozenset(), [])
    top = max(v for v, _ in found)
    return list(min(ids for v, ids in found if v >= top - tol))


def _assignment_value(edges, lefts, rights, vals, allowed) -> float:
    """Maximum matching weight using only ``allowed`` edges (subset of ``edges``)."""
    use = [e for e in edges if allowed(e)]
    if not use:
        return 0.0
    rows = {i: k for k, i in enumerate(sorted({lefts[e] for e in use}))}
    cols = {j: k for k, j in enumerate(sorted({rights[e] for e in use}))}
    w = np.zeros((len(rows), len(cols)))
    for e in use:
        w[rows[lefts[e]], cols[rights[e]]] = vals[e]
    r, c = linear_sum_assignment(w, maximize=True)
    return math.fsum(w[r, c])


def _assignment_component(edges, lefts, rights, vals, tol):
    top = _assignment_value(edges, lefts, rights, vals, lambda e: True)
    picked: list[int] = []
    used_l: set[int] = set()
    used_r: set[int] = set()
    base = 0.0
    for pos, e in enumerate(edges):
        if base >= top - tol:
            break
        i, j = lefts[e], rights[e]
        if i in used_l or j in used_r:
            continue
        later = set(edges[pos + 1:])
        rest = _assignment_value(
            edges, lefts, rights, vals,
            lambda f: f in later and lefts[f] not in used_l and lefts[f] != i
            and rights[f] not in used_r and rights[f] != j)
        with_e = math.fsum([vals[x] for x in picked] + [vals[e]])
        if with_e + rest >= top - tol:
            picked.append(e)
            used_l.add(i)
            used_r.add(j)
            base = with_e
    return picked


def brute_force_matching(instance: MarketInstance, profile: ValuationProfile | np.ndarray
                         ) -> MatchingResult:
    """Enumerate every subset of positive edges; reference oracle for small instances."""
    values = profile.values if isinstance(profile, ValuationProfile) else profile
    if instance.n_edges > BRUTE_FORCE_MAX_EDGES:
        raise SizeLimitError(
            f"brute force supports at most {BRUTE_FORCE_MAX_EDGES} edges, got {instance.n_edges}")
    vals = [float(v) for v in values]
    tol = tie_tolerance(vals)
    positive = [e for e in range(instance.n_edges) if vals[e] > 0.0]
    candidates = []
    for mask in range(1 << len(positive)):
        subset = [positive[b] for b in range(len(positive)) if mask >> b & 1]
        ls = [instance.edges[e].left for e in subset]
        rs = [instance.edges[e].right for e in subset]
        if len(set(ls)) == len(ls) and len(set(rs)) == len(rs):
            candidates.append((math.fsum(vals[e] for e in subset), tuple(subset)))
    top = max(v for v, _ in candidates)
    chosen = min(ids for v, ids in candidates if v >= top - tol)
    return MatchingResult(frozenset(chosen), matching_value(chosen, vals))


def is_matching(instance: MarketInstance, edge_ids) -> bool:
    ls = [instance.edges[e].left for e in edge_ids]
    rs = [instance.edges[e].right for e in edge_ids]
    return len(set(ls)) == len(ls) and len(set(rs)) == len(rs)
