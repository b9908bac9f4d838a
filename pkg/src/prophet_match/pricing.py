"""Vertex prices from the semi-linear fixed-point system.

Prices ``l`` (left) and ``r`` (right) are sought with

    l_i = sum_j [M_ij - Q_ij (l_i + r_j)]^+    and    r_j = sum_i [M_ij - Q_ij (l_i + r_j)]^+.

The solver starts from zero prices and, at every step, moves whichever side
has the larger L1 residual by half its residual vector.  Because every row
and column of ``Q`` sums to at most one, the combined residual shrinks by a
factor of at least 3/4 per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import InstanceError, dumps
from .moments import ContributionMatrices, prophet_value

CONTRACTION = 0.75


class NonConvergenceError(RuntimeError):
    """The iteration cap was reached; the inputs break the contraction argument."""


@dataclass(frozen=True)
class PriceVector:
    l: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "l", np.asarray(self.l, dtype=float))
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float))

    @classmethod
    def zeros(cls, n: int, m: int) -> "PriceVector":
        return cls(np.zeros(n), np.zeros(m))


@dataclass(frozen=True)
class ResidualPair:
    delta_l: np.ndarray
    delta_r: np.ndarray

    @property
    def norm_l(self) -> float:
        return float(np.abs(self.delta_l).sum())

    @property
    def norm_r(self) -> float:
        return float(np.abs(self.delta_r).sum())

    @property
    def l1_combined(self) -> float:
        return self.norm_l + self.norm_r


@dataclass(frozen=True)
class SlackMatrix:
    a_plus: np.ndarray

    @property
    def total(self) -> float:
        return math.fsum(self.a_plus.ravel().tolist())


@dataclass(frozen=True)
class PriceSolution:
    prices: PriceVector
    iterations: int
    final_residual: float
    trace: list[float]
    eps: float
    certificate: dict = field(default_factory=dict)
    q_rescaled: bool = False

    @property
    def certificate_gap(self) -> float:
        return self.certificate["gap"]


def _check_dims(prices: PriceVector, moments: ContributionMatrices):
    n, m = moments.shape
    if prices.l.shape != (n,) or prices.r.shape != (m,):
        raise ValueError(
            f"prices of sizes ({prices.l.size}, {prices.r.size}) do not fit {n}x{m} moments")


def _slack(l, r, M, Q) -> np.ndarray:
    return np.maximum(M - Q * (l[:, None] + r[None, :]), 0.0)


def slack_matrix(prices: PriceVector, moments: ContributionMatrices) -> SlackMatrix:
    """Entrywise positive part of ``M - Q * (l_i + r_j)``."""
    _check_dims(prices, moments)
    return SlackMatrix(_slack(prices.l, prices.r, np.asarray(moments.M), np.asarray(moments.Q)))


def residuals(prices: PriceVector, moments: ContributionMatrices) -> ResidualPair:
    _check_dims(prices, moments)
    a_plus = _slack(prices.l, prices.r, np.asarray(moments.M), np.asarray(moments.Q))
    return ResidualPair(prices.l - a_plus.sum(axis=1), prices.r - a_plus.sum(axis=0))


def rescale_q(Q: np.ndarray) -> tuple[np.ndarray, bool]:
    """Scale down any row, then any column, of ``Q`` whose sum exceeds one."""
    Q = np.array(Q, dtype=float)
    changed = False
    rows = Q.sum(axis=1)
    if np.any(rows > 1.0):
        Q[rows > 1.0] /= rows[rows > 1.0, None]
        changed = True
    cols = Q.sum(axis=0)
    if np.any(cols > 1.0):
        Q[:, cols > 1.0] /= cols[None, cols > 1.0]
        changed = True
    return Q, changed


def default_eps(moments: ContributionMatrices) -> float:
    return 1e-9 * max(1.0, prophet_value(moments))


def iteration_bound(total_m: float, eps: float) -> float:
    """Steps needed for a 3/4 contraction to bring ``2 * total_m`` below ``eps``."""
    if total_m <= 0:
        return 0.0
    return max(0.0, math.log(2.0 * total_m / eps, 1.0 / CONTRACTION))


def solve_prices(moments: ContributionMatrices, eps: float | None = None,
                 max_iter: int | None = None) -> PriceSolution:
    """Run the alternating half-step iteration until the combined residual is <= eps."""
    M = np.asarray(moments.M, dtype=float)
    if eps is None:
        eps = default_eps(moments)
    if not eps > 0 or not math.isfinite(eps):
        raise ValueError(f"eps must be a positive finite number, got {eps!r}")
    if not (np.all(np.isfinite(M)) and np.all(np.isfinite(moments.Q))):
        raise ValueError("moments contain non-finite entries")
    if np.any(M < 0):
        raise InstanceError("M must be non-negative")
    Q, rescaled = rescale_q(np.clip(moments.Q, 0.0, None))
    moments = ContributionMatrices(M, Q, moments.trials, moments.stderr_M,
                                   moments.stderr_Q, moments.stderr_opt)
    total_m = prophet_value(moments)
    if max_iter is None:
        max_iter = int(10 * (iteration_bound(total_m, eps) + 8))

    n, m = M.shape
    l, r = np.zeros(n), np.zeros(m)
    a_plus = _slack(l, r, M, Q)
    dl, dr = l - a_plus.sum(axis=1), r - a_plus.sum(axis=0)
    nl, nr = float(np.abs(dl).sum()), float(np.abs(dr).sum())
    trace = [nl + nr]
    iterations = 0
    while trace[-1] > eps:
        if iterations >= max_iter:
            raise NonConvergenceError(
                f"no convergence after {iterations} iterations (residual {trace[-1]:.3g})")
        if nl >= nr:
            l = l - 0.5 * dl
        else:
            r = r - 0.5 * dr
        a_plus = _slack(l, r, M, Q)
        dl, dr = l - a_plus.sum(axis=1), r - a_plus.sum(axis=0)
        nl, nr = float(np.abs(dl).sum()), float(np.abs(dr).sum())
        trace.append(nl + nr)
        iterations += 1

    if np.any(l < 0) or np.any(r < 0):
        raise AssertionError("solver produced negative prices")
    prices = PriceVector(l, r)
    cert = certificate(prices, moments, ResidualPair(dl, dr))
    return PriceSolution(prices, iterations, trace[-1], trace, float(eps), cert, rescaled)


def certificate(prices: PriceVector, moments: ContributionMatrices,
                residual: ResidualPair | None = None) -> dict:
    """Approximation certificate ``3 * sum(A+) + residual - opt >= 0``.

    With non-negative prices and row/column sums of ``Q`` at most one,
    ``opt <= sum(A+) + sum(l) + sum(r) <= 3 * sum(A+) + residual``.
    """
    if residual is None:
        residual = residuals(prices, moments)
    s = slack_matrix(prices, moments).total
    opt = prophet_value(moments)
    return {
        "s": s,
        "opt": opt,
        "gap": 3.0 * s + residual.l1_combined - opt,
        "fixed_point_defect_l": abs(math.fsum(prices.l.tolist()) - s),
        "fixed_point_defect_r": abs(math.fsum(prices.r.tolist()) - s),
    }


# -- serialization --------------------------------------------------------------

def solution_to_dict(sol: PriceSolution) -> dict:
    return {
        "l": sol.prices.l.tolist(),
        "r": sol.prices.r.tolist(),
        "iterations": sol.iterations,
        "final_residual": sol.final_residual,
        "trace": list(sol.trace),
        "certificate": dict(sol.certificate),
        "eps": sol.eps,
        "q_rescaled": sol.q_rescaled,
    }


def solution_from_dict(data: dict) -> PriceSolution:
    try:
        return PriceSolution(PriceVector(data["l"], data["r"]), int(data["iterations"]),
                             float(data["final_residual"]), list(data["trace"]),
                             float(data.get("eps", 0.0)), dict(data.get("certificate", {})),
                             bool(data.get("q_rescaled", False)))
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceError(f"malformed price document: {exc!r}") from exc


def solution_to_json(sol: PriceSolution) -> str:
    return dumps(solution_to_dict(sol))
