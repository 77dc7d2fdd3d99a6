"""Multi-seed summaries and pairwise significance penalty matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

DEFAULT_ALPHA = 0.05


@dataclass
class PenaltyMatrix:
    strategies: list[str]
    values: np.ndarray
    alpha: float
    n_rounds: int
    paired: bool = False

    def to_dict(self) -> dict:
        return {"strategies": list(self.strategies), "alpha": self.alpha, "n_rounds": self.n_rounds,
                "test": "paired" if self.paired else "welch",
                "matrix": [[float(v) for v in row] for row in self.values]}

    def to_csv(self) -> str:
        lines = ["," + ",".join(self.strategies)]
        for name, row in zip(self.strategies, self.values):
            lines.append(name + "," + ",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"


def _curves(curves: dict) -> tuple[list[str], list[np.ndarray]]:
    names = list(curves)
    arrs = [np.atleast_2d(np.asarray(curves[k], dtype=np.float64)) for k in names]
    return names, arrs


def welch_t(a: np.ndarray, b: np.ndarray) -> tuple[float, float, float]:
    """``(mean difference, standard error, Welch-Satterthwaite dof)``."""
    na, nb = a.size, b.size
    va, vb = a.var(ddof=1) / na, b.var(ddof=1) / nb
    diff = float(a.mean() - b.mean())
    se = math.sqrt(va + vb)
    if se == 0.0:
        return diff, 0.0, float(na + nb - 2)
    dof = (va + vb) ** 2 / (va ** 2 / (na - 1) + vb ** 2 / (nb - 1))
    return diff, se, dof


def paired_t(a: np.ndarray, b: np.ndarray) -> tuple[float, float, float]:
    d = a - b
    se = float(d.std(ddof=1) / math.sqrt(d.size))
    return float(d.mean()), se, float(d.size - 1)


def penalty_matrix(curves: dict, alpha: float = DEFAULT_ALPHA, paired: bool = False) -> PenaltyMatrix:
    """Pairwise per-round two-tailed t-tests.

    ``curves`` maps a strategy name to a (seeds x rounds) accuracy array.
    Cell ``(i, j)`` gains ``1 / n_rounds`` for each round in which ``i`` is
    significantly better than ``j``.  A round with zero standard error counts
    as significant exactly when the mean difference is nonzero.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    names, arrs = _curves(curves)
    if not names:
        raise ValueError("no strategies given")
    n_rounds = arrs[0].shape[1]
    for name, a in zip(names, arrs):
        if a.shape[1] != n_rounds:
            raise ValueError(f"strategy {name!r} has {a.shape[1]} rounds, expected {n_rounds}")
        if a.shape[0] < 2:
            raise ValueError(f"strategy {name!r} has {a.shape[0]} seed(s); at least 2 are needed")
    if paired and len({a.shape[0] for a in arrs}) > 1:
        raise ValueError("paired test needs the same seeds for every strategy")
    test = paired_t if paired else welch_t
    k = len(names)
    counts = np.zeros((k, k), dtype=np.int64)
    for i in range(k):
        for j in range(i + 1, k):
            for r in range(n_rounds):
                diff, se, dof = test(arrs[i][:, r], arrs[j][:, r])
                if se == 0.0:
                    if diff > 0:
                        counts[i, j] += 1
                    elif diff < 0:
                        counts[j, i] += 1
                    continue
                t = diff / se
                t_crit = sps.t.ppf(1.0 - alpha / 2.0, dof)
                if t > t_crit:
                    counts[i, j] += 1
                elif t < -t_crit:
                    counts[j, i] += 1
    return PenaltyMatrix(names, counts / n_rounds, alpha, n_rounds, paired)


@dataclass
class Summary:
    mean: np.ndarray
    std: np.ndarray
    n_seeds: int

    @property
    def single_seed(self) -> bool:
        return self.n_seeds < 2


def summarize(curves: dict) -> dict[str, Summary]:
    """Per-round sample mean and standard deviation (n - 1 denominator).

    With a single seed the deviation is reported as 0 and the summary is
    flagged through ``single_seed``.
    """
    out = {}
    for name, a in zip(*_curves(curves)):
        if a.shape[0] == 0:
            raise ValueError(f"strategy {name!r} has no seeds")
        std = a.std(axis=0, ddof=1) if a.shape[0] > 1 else np.zeros(a.shape[1])
        out[name] = Summary(a.mean(axis=0), std, a.shape[0])
    return out
