"""Cardinality-constrained greedy maximization.

An objective is anything with ``gains(cand_array) -> ndarray`` and
``commit(j) -> float`` (the classes in :mod:`smiselect.smi`).  Ties are broken
by the smallest candidate index everywhere, so naive and lazy greedy return
identical sequences on submodular objectives.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

LAZY_MAX_CANDIDATES = 10_000
DEFAULT_EPSILON = 0.1


@dataclass
class GreedyResult:
    selected: list[int] = field(default_factory=list)
    gains: list[float] = field(default_factory=list)
    evals: int = 0

    @property
    def value(self) -> float:
        return float(sum(self.gains))


def _candidates(candidates) -> np.ndarray:
    cand = np.unique(np.asarray(candidates, dtype=np.int64))
    return cand


def naive_greedy(f, candidates, budget: int) -> GreedyResult:
    if budget < 0:
        raise ValueError("budget must be non-negative")
    remaining = _candidates(candidates)
    res = GreedyResult()
    for _ in range(min(budget, remaining.size)):
        g = f.gains(remaining)
        res.evals += remaining.size
        pos = int(np.argmax(g))  # first maximum -> smallest index
        j = int(remaining[pos])
        res.gains.append(f.commit(j))
        res.selected.append(j)
        remaining = np.delete(remaining, pos)
    return res


def lazy_greedy(f, candidates, budget: int) -> GreedyResult:
    """Lazy evaluation with a max-heap of stale upper bounds.

    Heap entries are ``(-gain, index, step)``; an entry popped with a stale
    ``step`` is re-evaluated and pushed back.
    """
    if budget < 0:
        raise ValueError("budget must be non-negative")
    cand = _candidates(candidates)
    res = GreedyResult()
    budget = min(budget, cand.size)
    if budget == 0:
        return res
    g0 = f.gains(cand)
    res.evals += cand.size
    heap = [(-float(g), int(j), 0) for g, j in zip(g0, cand)]
    heapq.heapify(heap)
    step = 0
    while len(res.selected) < budget:
        neg, j, stamp = heapq.heappop(heap)
        if stamp == step:
            res.gains.append(f.commit(j))
            res.selected.append(j)
            step += 1
            continue
        g = float(f.gains(np.array([j], dtype=np.int64))[0])
        res.evals += 1
        heapq.heappush(heap, (-g, j, step))
    return res


def sample_size(n: int, budget: int, epsilon: float) -> int:
    """Per-step sample size ``ceil((n / B) * ln(1 / eps))``."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if budget <= 0:
        return 0
    return max(1, math.ceil((n / budget) * math.log(1.0 / epsilon)))


def stochastic_greedy(f, candidates, budget: int, epsilon: float = DEFAULT_EPSILON,
                      seed=0) -> GreedyResult:
    if budget < 0:
        raise ValueError("budget must be non-negative")
    remaining = _candidates(candidates)
    s = sample_size(remaining.size, budget, epsilon)
    rng = np.random.default_rng(seed)
    res = GreedyResult()
    for _ in range(min(budget, remaining.size)):
        if s >= remaining.size:
            sample = remaining
        else:
            sample = np.sort(rng.choice(remaining, size=s, replace=False))
        g = f.gains(sample)
        res.evals += sample.size
        j = int(sample[int(np.argmax(g))])
        res.gains.append(f.commit(j))
        res.selected.append(j)
        remaining = remaining[remaining != j]
    return res


METHODS = ("auto", "naive", "lazy", "stochastic")


def maximize(f, candidates, budget: int, method: str = "auto", epsilon: float = DEFAULT_EPSILON,
             seed=0) -> GreedyResult:
    if method not in METHODS:
        raise ValueError(f"unknown maximizer {method!r}; expected one of {METHODS}")
    if method == "auto":
        method = "lazy" if np.size(candidates) <= LAZY_MAX_CANDIDATES else "stochastic"
    if method == "naive":
        return naive_greedy(f, candidates, budget)
    if method == "lazy":
        return lazy_greedy(f, candidates, budget)
    return stochastic_greedy(f, candidates, budget, epsilon, seed)
