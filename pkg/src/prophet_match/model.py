"""Market instances, valuation profiles and arrival orders.

An instance is a bipartite multigraph with ``n_left`` left vertices,
``n_right`` right vertices and a list of edges, each carrying an independent
finite discrete value distribution.  Edge ids are the positions ``0..T-1``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from ._seeding import uniforms

PROB_TOL = 1e-12
DEFAULT_ENUM_LIMIT = 10**6


class InstanceError(ValueError):
    """Raised when an instance, profile or order fails validation."""


class SizeLimitError(ValueError):
    """Raised when an exact computation would exceed its enumeration limit."""


@dataclass(frozen=True)
class DiscreteDistribution:
    values: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))

    @classmethod
    def point(cls, value: float) -> "DiscreteDistribution":
        return cls((value,), (1.0,))

    def atoms(self) -> list[tuple[float, float]]:
        """(value, prob) pairs with strictly positive probability, in listed order."""
        return [(v, p) for v, p in zip(self.values, self.probs) if p > 0.0]

    @property
    def max_value(self) -> float:
        return max(self.values)


def dist_mean(dist: DiscreteDistribution) -> float:
    return math.fsum(v * p for v, p in zip(dist.values, dist.probs))


@dataclass(frozen=True)
class EdgeSpec:
    edge_id: int
    left: int
    right: int
    dist: DiscreteDistribution


@dataclass(frozen=True)
class MarketInstance:
    n_left: int
    n_right: int
    edges: tuple[EdgeSpec, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def lefts(self) -> np.ndarray:
        return np.array([e.left for e in self.edges], dtype=np.intp)

    @cached_property
    def rights(self) -> np.ndarray:
        return np.array([e.right for e in self.edges], dtype=np.intp)

    @cached_property
    def left_list(self) -> list[int]:
        return [e.left for e in self.edges]

    @cached_property
    def right_list(self) -> list[int]:
        return [e.right for e in self.edges]

    @cached_property
    def _sampling_tables(self) -> tuple[np.ndarray, np.ndarray]:
        width = max((len(e.dist.values) for e in self.edges), default=1)
        vals = np.zeros((self.n_edges, width))
        cum = np.full((self.n_edges, width), 2.0)
        for k, e in enumerate(self.edges):
            size = len(e.dist.values)
            vals[k, :size] = e.dist.values
            c = np.minimum(np.cumsum(e.dist.probs), 1.0)
            c[-1] = 1.0
            cum[k, :size] = c
        return vals, cum

    def support_product(self) -> int:
        """Number of profiles with positive probability."""
        return math.prod(len(e.dist.atoms()) for e in self.edges)


@dataclass(frozen=True)
class ValuationProfile:
    """Realized edge values, indexed by edge id."""

    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def __getitem__(self, edge_id: int) -> float:
        return self.values[edge_id]

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ArrivalOrder:
    sequence: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "sequence", tuple(int(e) for e in self.sequence))

    @classmethod
    def identity(cls, instance: MarketInstance) -> "ArrivalOrder":
        return cls(tuple(range(instance.n_edges)))

    def __iter__(self):
        return iter(self.sequence)

    def __len__(self) -> int:
        return len(self.sequence)


# -- validation ---------------------------------------------------------------

def validate_distribution(dist: DiscreteDistribution, where: str = "dist") -> list[str]:
    problems = []
    if len(dist.values) == 0:
        problems.append(f"{where}: empty support")
        return problems
    if len(dist.values) != len(dist.probs):
        problems.append(f"{where}: {len(dist.values)} values but {len(dist.probs)} probs")
        return problems
    for v in dist.values:
        if not math.isfinite(v) or v < 0:
            problems.append(f"{where}: negative or non-finite value {v!r}")
    if len(set(dist.values)) != len(dist.values):
        problems.append(f"{where}: duplicate support values")
    for p in dist.probs:
        if not math.isfinite(p) or p < 0 or p > 1:
            problems.append(f"{where}: probability {p!r} outside [0, 1]")
    total = math.fsum(dist.probs)
    if abs(total - 1.0) > PROB_TOL:
        problems.append(f"{where}: probs sum {total:.12g} != 1")
    return problems


def validate_instance(instance: MarketInstance) -> list[str]:
    """Return a list of violations; an empty list means the instance is well formed."""
    problems = []
    if instance.n_left < 1 or instance.n_right < 1:
        problems.append(f"vertex counts must be positive, got ({instance.n_left}, {instance.n_right})")
    seen = set()
    for pos, e in enumerate(instance.edges):
        where = f"edge {e.edge_id}"
        if e.edge_id in seen:
            problems.append(f"{where}: duplicate edge_id")
        seen.add(e.edge_id)
        if e.edge_id != pos:
            problems.append(f"{where}: edge_id must equal list position {pos}")
        if not 0 <= e.left < instance.n_left or not 0 <= e.right < instance.n_right:
            problems.append(f"{where}: endpoint out of range ({e.left}, {e.right})")
        problems.extend(validate_distribution(e.dist, where))
    return problems


def check_instance(instance: MarketInstance) -> MarketInstance:
    problems = validate_instance(instance)
    if problems:
        raise InstanceError("; ".join(problems))
    return instance


def check_order(instance: MarketInstance, order: ArrivalOrder) -> ArrivalOrder:
    if sorted(order.sequence) != list(range(instance.n_edges)):
        raise InstanceError(f"arrival order is not a permutation of 0..{instance.n_edges - 1}")
    return order


def check_profile(instance: MarketInstance, profile: ValuationProfile) -> ValuationProfile:
    if len(profile) != instance.n_edges:
        raise InstanceError(f"profile has {len(profile)} values for {instance.n_edges} edges")
    for e in instance.edges:
        if profile[e.edge_id] not in e.dist.values:
            raise InstanceError(f"edge {e.edge_id}: value {profile[e.edge_id]!r} not in support")
    return profile


# -- sampling and enumeration ---------------------------------------------------

def sample_values(instance: MarketInstance, trial_seeds: Sequence[int]) -> np.ndarray:
    """Draw one profile per trial seed; returns an array of shape (trials, T).

    Edge ``e`` in trial ``t`` uses the uniform derived from ``(trial_seeds[t], e)``,
    so a draw depends only on its own trial seed and edge id.
    """
    seeds = list(trial_seeds)
    if instance.n_edges == 0:
        return np.zeros((len(seeds), 0))
    vals, cum = instance._sampling_tables
    u = uniforms(seeds, np.arange(instance.n_edges))
    idx = (cum[None, :, :] <= u[:, :, None]).sum(axis=2)
    return np.take_along_axis(vals[None, :, :], idx[:, :, None], axis=2)[:, :, 0]


def sample_profile(instance: MarketInstance, trial_seed: int) -> ValuationProfile:
    return ValuationProfile(tuple(sample_values(instance, [trial_seed])[0]))


def enumerate_profiles(instance: MarketInstance, limit: int = DEFAULT_ENUM_LIMIT
                       ) -> Iterator[tuple[float, tuple[float, ...]]]:
    """Yield ``(probability, values)`` for every positive-probability profile.

    Profiles come in lexicographic order: edge 0 varies slowest, atoms in
    their listed order.
    """
    size = instance.support_product()
    if size > limit:
        raise SizeLimitError(
            f"{size} profiles exceed the enumeration limit of {limit}; use Monte Carlo")
    atom_lists = [e.dist.atoms() for e in instance.edges]
    for combo in itertools.product(*atom_lists):
        p = 1.0
        for _, q in combo:
            p *= q
        yield p, tuple(v for v, _ in combo)


# -- serialization --------------------------------------------------------------

def instance_to_dict(instance: MarketInstance) -> dict:
    return {
        "n_left": instance.n_left,
        "n_right": instance.n_right,
        "edges": [
            {"id": e.edge_id, "left": e.left, "right": e.right,
             "dist": {"values": list(e.dist.values), "probs": list(e.dist.probs)}}
            for e in instance.edges
        ],
    }


def instance_from_dict(data: dict) -> MarketInstance:
    try:
        edges = tuple(
            EdgeSpec(int(e["id"]), int(e["left"]), int(e["right"]),
                     DiscreteDistribution(e["dist"]["values"], e["dist"]["probs"]))
            for e in data["edges"]
        )
        return MarketInstance(int(data["n_left"]), int(data["n_right"]), edges)
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceError(f"malformed instance document: {exc!r}") from exc


def dumps(obj) -> str:
    """Canonical compact JSON used for every artifact the package writes."""
    return json.dumps(obj, separators=(",", ":"), allow_nan=False) + "\n"


def instance_to_json(instance: MarketInstance) -> str:
    return dumps(instance_to_dict(instance))


def instance_from_json(text: str) -> MarketInstance:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"instance is not valid JSON: {exc}") from exc
    return instance_from_dict(data)


def order_to_json(order: ArrivalOrder) -> str:
    return dumps(list(order.sequence))


def order_from_json(text: str) -> ArrivalOrder:
    return ArrivalOrder(tuple(json.loads(text)))


def profile_to_json(profile: ValuationProfile) -> str:
    return dumps(list(profile.values))


def profile_from_json(text: str) -> ValuationProfile:
    return ValuationProfile(tuple(json.loads(text)))
