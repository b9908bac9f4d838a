"""Counter-based seed derivation.

Every random quantity in the package is a pure function of a 64-bit base seed
and one or more integer counters, mixed with SplitMix64.  This keeps draws
independent of evaluation order and worker count.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & MASK64
    x = ((x ^ (x >> 30)) * _M1) & MASK64
    x = ((x ^ (x >> 27)) * _M2) & MASK64
    return x ^ (x >> 31)


def derive(seed: int, *counters: int) -> int:
    """Mix a base seed with counters into a fresh 64-bit seed."""
    h = splitmix64(seed & MASK64)
    for c in counters:
        h = splitmix64(h ^ (c & MASK64))
    return h


def _splitmix64_array(x: np.ndarray) -> np.ndarray:
    x = x + np.uint64(_GOLDEN)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(_M1)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(_M2)
    return x ^ (x >> np.uint64(31))


def uniforms(trial_seeds, stream_ids) -> np.ndarray:
    """Uniform [0, 1) draws, one per (trial seed, stream id) pair.

    Returns an array of shape ``(len(trial_seeds), len(stream_ids))``.  Entry
    ``[t, k]`` equals ``derive(trial_seeds[t], stream_ids[k])`` mapped to the
    unit interval with 53 bits of precision.
    """
    seeds = np.asarray([splitmix64(int(s) & MASK64) for s in np.atleast_1d(trial_seeds)],
                       dtype=np.uint64)
    ids = np.asarray(stream_ids, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _splitmix64_array(seeds[:, None] ^ ids[None, :])
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
