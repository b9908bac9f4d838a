"""Order-preserving block execution.

Trials are cut into blocks of a fixed size that does not depend on the
worker count.  Each block is reduced on its own and block results are
combined in block order, so outputs are identical for any ``threads``.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

BLOCK_TRIALS = 256


def trial_blocks(trials: int, block: int = BLOCK_TRIALS) -> list[tuple[int, int]]:
    return [(start, min(start + block, trials)) for start in range(0, trials, block)]


def run_blocks(fn: Callable, tasks: Sequence[tuple], threads: int = 1) -> list:
    """Evaluate ``fn(*task)`` for every task, returning results in task order."""
    if threads <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, *zip(*tasks)))
