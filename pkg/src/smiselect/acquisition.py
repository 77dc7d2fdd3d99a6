"""Acquisition strategies: SMI-targeted selection plus the usual baselines.

All ``select_*`` functions return positions into the unlabeled pool, in
selection order.  Ranking baselines break ties by the smallest position.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import _accel
from .kernel import EmbeddingSet, build_kernel, regularize_spd, shift_to_nonneg, DEFAULT_RIDGE
from .maximizer import DEFAULT_EPSILON, GreedyResult, maximize
from .model import LinearProbe, gradient_embeddings
from .smi import REQUIRES, SmiKind, make_smi

SMI_NAMES = tuple(k.value for k in SmiKind)
BASELINE_NAMES = ("entropy", "leastconf", "margin", "random", "coreset", "badge")
STRATEGY_NAMES = SMI_NAMES + BASELINE_NAMES


# ---------------------------------------------------------------------------
# SMI selection
# ---------------------------------------------------------------------------


def smi_kernels(kind, pool: EmbeddingSet, query: EmbeddingSet, metric: str = "cosine",
                ridge: float = DEFAULT_RIDGE) -> dict:
    """Build exactly the kernels ``kind`` needs, ready for :func:`make_smi`."""
    kind = SmiKind(kind)
    need = REQUIRES[kind]
    ks = {"cross": build_kernel(pool, query, metric, allow_zero=True)}
    if "ground" in need:
        ks["ground"] = build_kernel(pool, None, metric, allow_zero=True)
    if "query" in need:
        ks["query"] = build_kernel(query, None, metric, allow_zero=True)
    if kind is SmiKind.LOGDETMI:
        ks["ground"] = regularize_spd(ks["ground"], ridge)
        ks["query"] = regularize_spd(ks["query"], ridge)
    elif any((k.values < 0).any() for k in ks.values()):
        # one shared affine map keeps ground and cross similarities comparable
        ks = {name: shift_to_nonneg(k, force=True) for name, k in ks.items()}
    return ks


def select_smi(kind, probe: LinearProbe, pool: EmbeddingSet, query: EmbeddingSet, budget: int,
               metric: str = "cosine", maximizer: str = "auto", epsilon: float = DEFAULT_EPSILON,
               ridge: float = DEFAULT_RIDGE, seed=0, query_labels: str = "true"
               ) -> tuple[np.ndarray, GreedyResult]:
    """Greedy maximisation of ``I_f(A; query)`` over gradient embeddings.

    Pool gradients use the hypothesized label.  Query gradients use the true
    labels when ``query_labels == "true"`` and the hypothesized ones otherwise.
    """
    if query.n == 0:
        raise ValueError("query set is empty")
    if query_labels not in ("true", "hypothesized"):
        raise ValueError(f"query_labels must be 'true' or 'hypothesized', got {query_labels!r}")
    g_pool = gradient_embeddings(probe, pool)
    q_lab = query.labels if query_labels == "true" else None
    g_query = gradient_embeddings(probe, query, q_lab)
    ks = smi_kernels(kind, g_pool, g_query, metric, ridge)
    f = make_smi(kind, **ks)
    res = maximize(f, np.arange(pool.n), budget, maximizer, epsilon, seed)
    return np.asarray(res.selected, dtype=np.int64), res


# ---------------------------------------------------------------------------
# uncertainty baselines
# ---------------------------------------------------------------------------


def _top(scores: np.ndarray, budget: int) -> np.ndarray:
    """Indices of the ``budget`` largest scores, ties to the smaller index."""
    order = np.argsort(-scores, kind="stable")
    return order[:max(0, min(budget, scores.size))].astype(np.int64)


def entropy_scores(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(p > 0, p * np.log(p), 0.0)
    return -plogp.sum(axis=1)


def least_conf_scores(p: np.ndarray) -> np.ndarray:
    return 1.0 - p.max(axis=1)


def margins(p: np.ndarray) -> np.ndarray:
    if p.shape[1] < 2:
        return np.ones(p.shape[0])
    top2 = -np.partition(-p, 1, axis=1)[:, :2]
    return top2[:, 0] - top2[:, 1]


def select_entropy(probe: LinearProbe, pool: EmbeddingSet, budget: int) -> np.ndarray:
    return _top(entropy_scores(probe.predict_proba(pool)), budget)


def select_least_conf(probe: LinearProbe, pool: EmbeddingSet, budget: int) -> np.ndarray:
    return _top(least_conf_scores(probe.predict_proba(pool)), budget)


def select_margin(probe: LinearProbe, pool: EmbeddingSet, budget: int) -> np.ndarray:
    return _top(-margins(probe.predict_proba(pool)), budget)


# ---------------------------------------------------------------------------
# random and diversity baselines
# ---------------------------------------------------------------------------


def select_random(pool_size: int, budget: int, seed=0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    k = max(0, min(budget, pool_size))
    return rng.choice(pool_size, size=k, replace=False).astype(np.int64)


def select_coreset(labeled: np.ndarray, pool: np.ndarray, budget: int, seed=0) -> np.ndarray:
    """Greedy k-center: repeatedly take the pool point farthest from the cover.

    The cover starts as the labeled points; with none, the first centre is a
    seeded uniform draw.
    """
    pool = np.ascontiguousarray(pool, dtype=np.float64)
    labeled = np.asarray(labeled, dtype=np.float64).reshape(-1, pool.shape[1])
    n = pool.shape[0]
    k = max(0, min(budget, n))
    d2 = np.full(n, np.inf)
    for row in labeled:
        _accel.min_sqdist_update(pool, np.ascontiguousarray(row), d2)
    chosen: list[int] = []
    if k and labeled.shape[0] == 0:
        j = int(np.random.default_rng(seed).integers(n))
        chosen.append(j)
        _accel.min_sqdist_update(pool, pool[j].copy(), d2)
        d2[j] = -1.0
    while len(chosen) < k:
        j = int(np.argmax(d2))
        chosen.append(j)
        _accel.min_sqdist_update(pool, pool[j].copy(), d2)
        d2[j] = -1.0
    return np.asarray(chosen, dtype=np.int64)


def kmeanspp_seeding(x: np.ndarray, budget: int, seed=0) -> np.ndarray:
    """D^2 sampling; the first centre is drawn proportional to the squared norm."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    k = max(0, min(budget, n))
    rng = np.random.default_rng(seed)
    d2 = np.einsum("ij,ij->i", x, x)
    taken = np.zeros(n, dtype=bool)
    chosen: list[int] = []
    while len(chosen) < k:
        w = np.where(taken, 0.0, d2)
        total = w.sum()
        if total > 0:
            j = int(rng.choice(n, p=w / total))
        else:
            j = int(rng.choice(np.flatnonzero(~taken)))
        chosen.append(j)
        taken[j] = True
        if len(chosen) == 1:
            # the origin only seeds the first draw; it is not a centre afterwards
            d2 = np.full(n, np.inf)
        _accel.min_sqdist_update(x, x[j].copy(), d2)
    return np.asarray(chosen, dtype=np.int64)


def select_badge(probe: LinearProbe, pool: EmbeddingSet, budget: int, seed=0) -> np.ndarray:
    return kmeanspp_seeding(gradient_embeddings(probe, pool).vectors, budget, seed)


# ---------------------------------------------------------------------------
# uniform strategy interface
# ---------------------------------------------------------------------------


@dataclass
class AcquisitionStrategy:
    kind: str
    metric: str = "cosine"
    maximizer: str = "auto"
    epsilon: float = DEFAULT_EPSILON
    ridge: float = DEFAULT_RIDGE
    query_labels: str = "true"

    def __post_init__(self):
        if self.kind not in STRATEGY_NAMES:
            raise ValueError(f"unknown strategy {self.kind!r}; expected one of {STRATEGY_NAMES}")

    @property
    def is_smi(self) -> bool:
        return self.kind in SMI_NAMES

    def params(self) -> dict:
        return asdict(self)

    def select(self, probe: LinearProbe, pool: EmbeddingSet, budget: int, *,
               labeled: EmbeddingSet | None = None, query: EmbeddingSet | None = None,
               seed=0) -> np.ndarray:
        """``min(budget, |pool|)`` distinct positions into ``pool``."""
        budget = max(0, min(budget, pool.n))
        if budget == 0:
            return np.zeros(0, dtype=np.int64)
        if self.is_smi:
            if query is None:
                raise ValueError(f"{self.kind} needs a query set")
            sel, _ = select_smi(self.kind, probe, pool, query, budget, self.metric, self.maximizer,
                                self.epsilon, self.ridge, seed, self.query_labels)
            return sel
        if self.kind == "entropy":
            return select_entropy(probe, pool, budget)
        if self.kind == "leastconf":
            return select_least_conf(probe, pool, budget)
        if self.kind == "margin":
            return select_margin(probe, pool, budget)
        if self.kind == "random":
            return select_random(pool.n, budget, seed)
        if self.kind == "coreset":
            lab = labeled.vectors if labeled is not None else np.zeros((0, pool.d))
            return select_coreset(lab, pool.vectors, budget, seed)
        return select_badge(probe, pool, budget, seed)
