"""Contribution matrix ``M`` and selection-probability matrix ``Q``.

``M[i, j]`` is the expected value of the edge the offline optimum uses between
left vertex ``i`` and right vertex ``j`` (zero when the pair is unmatched);
``Q[i, j]`` is the probability that the optimum matches ``i`` to ``j``.
Parallel edges share one cell.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from ._parallel import run_blocks, trial_blocks
from ._seeding import derive
from .matching import canonical_matching
from .model import (DEFAULT_ENUM_LIMIT, InstanceError, MarketInstance, dumps,
                    enumerate_profiles, sample_values)


@dataclass(frozen=True)
class ContributionMatrices:
    M: np.ndarray
    Q: np.ndarray
    trials: Union[int, str] = "exact"
    stderr_M: np.ndarray | None = None
    stderr_Q: np.ndarray | None = None
    stderr_opt: float | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.M.shape

    @property
    def exact(self) -> bool:
        return self.trials == "exact"


def prophet_value(moments: ContributionMatrices) -> float:
    """Expected offline optimum, i.e. the sum of all entries of ``M``."""
    return math.fsum(np.asarray(moments.M, dtype=float).ravel().tolist())


def compute_moments_exact(instance: MarketInstance, limit: int = DEFAULT_ENUM_LIMIT
                          ) -> ContributionMatrices:
    """Exact ``M`` and ``Q`` by enumerating every positive-probability profile."""
    n, m = instance.n_left, instance.n_right
    M = np.zeros((n, m))
    Q = np.zeros((n, m))
    lefts, rights = instance.left_list, instance.right_list
    for p, values in enumerate_profiles(instance, limit):
        for e in canonical_matching(lefts, rights, values):
            M[lefts[e], rights[e]] += p * values[e]
            Q[lefts[e], rights[e]] += p
    return ContributionMatrices(M, Q, "exact")


def _mc_block(instance: MarketInstance, seed: int, start: int, stop: int):
    n, m = instance.n_left, instance.n_right
    s_m = np.zeros((n, m))
    s_m2 = np.zeros((n, m))
    s_q = np.zeros((n, m))
    opt = np.zeros(stop - start)
    lefts, rights = instance.left_list, instance.right_list
    values = sample_values(instance, [derive(seed, t) for t in range(start, stop)])
    for k, row in enumerate(values):
        chosen = canonical_matching(lefts, rights, row)
        if not chosen:
            continue
        ii = instance.lefts[chosen]
        jj = instance.rights[chosen]
        v = row[chosen]
        s_m[ii, jj] += v
        s_m2[ii, jj] += v * v
        s_q[ii, jj] += 1.0
        opt[k] = math.fsum(v.tolist())
    return s_m, s_m2, s_q, opt


def compute_moments_mc(instance: MarketInstance, trials: int, seed: int, threads: int = 1
                       ) -> ContributionMatrices:
    """Monte Carlo estimates of ``M`` and ``Q`` from ``trials`` seeded profiles.

    Trial ``t`` samples its profile from ``derive(seed, t)``.  Standard errors
    are sample standard deviations over ``sqrt(trials)``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n, m = instance.n_left, instance.n_right
    tasks = [(instance, seed, a, b) for a, b in trial_blocks(trials)]
    s_m = np.zeros((n, m))
    s_m2 = np.zeros((n, m))
    s_q = np.zeros((n, m))
    opts = []
    for bm, bm2, bq, bopt in run_blocks(_mc_block, tasks, threads):
        s_m += bm
        s_m2 += bm2
        s_q += bq
        opts.append(bopt)
    opt = np.concatenate(opts)
    M = s_m / trials
    Q = s_q / trials
    if trials > 1:
        var_m = np.maximum(s_m2 - trials * M * M, 0.0) / (trials - 1)
        var_q = np.maximum(s_q - trials * Q * Q, 0.0) / (trials - 1)
        se_m = np.sqrt(var_m / trials)
        se_q = np.sqrt(var_q / trials)
        se_opt = float(opt.std(ddof=1) / math.sqrt(trials))
    else:
        se_m = np.zeros((n, m))
        se_q = np.zeros((n, m))
        se_opt = 0.0
    return ContributionMatrices(M, Q, int(trials), se_m, se_q, se_opt)


def check_moments(moments: ContributionMatrices, tol: float = 1e-9) -> list[str]:
    """Violations of the structural invariants of ``M`` and ``Q``."""
    M, Q = np.asarray(moments.M), np.asarray(moments.Q)
    problems = []
    if M.shape != Q.shape or M.ndim != 2:
        return [f"M has shape {M.shape} but Q has shape {Q.shape}"]
    if not (np.all(np.isfinite(M)) and np.all(np.isfinite(Q))):
        problems.append("non-finite entries")
    if np.any(M < 0):
        problems.append("M has negative entries")
    if np.any(Q < -tol) or np.any(Q > 1 + tol):
        problems.append("Q entries outside [0, 1]")
    if M.size and Q.sum(axis=1).max() > 1 + tol:
        problems.append(f"Q row sum {Q.sum(axis=1).max():.12g} exceeds 1")
    if M.size and Q.sum(axis=0).max() > 1 + tol:
        problems.append(f"Q column sum {Q.sum(axis=0).max():.12g} exceeds 1")
    if np.any((M > 0) & (Q <= 0)):
        problems.append("M positive where Q is zero")
    return problems


# -- serialization --------------------------------------------------------------

def moments_to_dict(moments: ContributionMatrices) -> dict:
    n, m = moments.shape
    out = {"n": n, "m": m, "M": moments.M.tolist(), "Q": moments.Q.tolist(),
           "trials": moments.trials}
    if moments.stderr_M is not None:
        out["stderr_M"] = moments.stderr_M.tolist()
    if moments.stderr_Q is not None:
        out["stderr_Q"] = moments.stderr_Q.tolist()
    if moments.stderr_opt is not None:
        out["stderr_opt"] = moments.stderr_opt
    return out


def moments_from_dict(data: dict) -> ContributionMatrices:
    try:
        n, m = int(data["n"]), int(data["m"])
        M = np.array(data["M"], dtype=float).reshape(n, m)
        Q = np.array(data["Q"], dtype=float).reshape(n, m)
        trials = data.get("trials", "exact")
        if trials != "exact":
            trials = int(trials)
        se_m = np.array(data["stderr_M"], dtype=float).reshape(n, m) if "stderr_M" in data else None
        se_q = np.array(data["stderr_Q"], dtype=float).reshape(n, m) if "stderr_Q" in data else None
        se_opt = float(data["stderr_opt"]) if "stderr_opt" in data else None
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceError(f"malformed moments document: {exc!r}") from exc
    return ContributionMatrices(M, Q, trials, se_m, se_q, se_opt)


def moments_to_json(moments: ContributionMatrices) -> str:
    return dumps(moments_to_dict(moments))


def moments_from_json(text: str) -> ContributionMatrices:
    return moments_from_dict(json.loads(text))
