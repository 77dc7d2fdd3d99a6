"""Imbalanced labeled / unlabeled / target / test splits.

Binary imbalance keeps ``|frequent| = rho * |rare|`` in both the labeled and
unlabeled pools.  Long-tail imbalance keeps the natural class distribution
and splits it 20/80 into labeled and unlabeled pools.  A balanced test pool
and the rare-class target set are carved out before either pool is drawn.
"""

from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .kernel import EmbeddingSet, read_embeddings

KINDS = ("binary", "longtail", "custom")


class ScenarioError(ValueError):
    pass


# Constants from the published experiments.  ``test`` and ``source`` are left
# out on purpose: they must be supplied by the caller.
PRESETS: dict[str, dict] = {
    "pneumonia": {"kind": "binary", "rho": 20, "labeled": 105, "unlabeled": 1100,
                  "budget": 10, "target": 5, "rare_classes": [1]},
    "path": {"kind": "binary", "rho": 20, "labeled": 3550, "unlabeled": 56800,
             "budget": 500, "target": 20, "rare_classes": [4, 6]},
    "blood": {"kind": "binary", "rho": 7, "labeled": 228, "unlabeled": 1824,
              "budget": 20, "target": 20, "rare_classes": [0, 1, 4, 6]},
    "isic": {"kind": "longtail", "num_tail": 3, "budget": 40, "target": 15,
             "labeled_fraction": 0.2},
    "aptos": {"kind": "longtail", "num_tail": 2, "budget": 20, "target": 10,
              "labeled_fraction": 0.2},
}


@dataclass
class ScenarioSpec:
    kind: str
    target: int
    test: int
    source: dict
    rare_classes: list[int] | None = None
    rho: float = 1.0
    labeled: int | None = None
    unlabeled: int | None = None
    seed: int = 0
    budget: int | None = None
    num_tail: int | None = None
    labeled_fraction: float = 0.2
    per_class_counts: list[int] | None = None
    custom: dict | None = None
    preset: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ScenarioError(f"kind: expected one of {KINDS}, got {self.kind!r}")
        if self.rho < 1:
            raise ScenarioError(f"rho: imbalance factor must be >= 1, got {self.rho}")
        if self.target <= 0:
            raise ScenarioError("target: target set size must be positive")
        if self.test < 0:
            raise ScenarioError("test: test set size must be non-negative")
        if self.rare_classes is not None:
            self.rare_classes = sorted(int(c) for c in self.rare_classes)
            if not self.rare_classes:
                raise ScenarioError("rare_classes: must be nonempty")
        elif self.kind != "longtail" or self.num_tail is None:
            raise ScenarioError("rare_classes: required (long-tail specs may give num_tail instead)")
        if self.kind == "binary" and (self.labeled is None or self.unlabeled is None):
            raise ScenarioError("binary scenarios need 'labeled' and 'unlabeled' sizes")
        if self.kind == "custom" and not self.custom:
            raise ScenarioError("custom: per-class 'labeled' and 'unlabeled' counts are required")
        if not 0.0 < self.labeled_fraction < 1.0:
            raise ScenarioError("labeled_fraction: must lie in (0, 1)")

    @classmethod
    def from_dict(cls, data: dict, path: str = "scenario") -> "ScenarioSpec":
        if not isinstance(data, dict):
            raise ScenarioError(f"{path}: expected an object")
        data = copy.deepcopy(data)
        name = data.get("preset")
        if name is not None:
            if name not in PRESETS:
                raise ScenarioError(f"{path}.preset: unknown preset {name!r}; known: {sorted(PRESETS)}")
            merged = copy.deepcopy(PRESETS[name])
            merged.update(data)
            data = merged
        known = set(cls.__dataclass_fields__)
        for key in data:
            if key not in known:
                raise ScenarioError(f"{path}.{key}: unknown key")
        for key in ("kind", "target", "test", "source"):
            if key not in data:
                raise ScenarioError(f"{path}.{key}: required field missing")
        return cls(**data)

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass
class Split:
    labeled: np.ndarray
    unlabeled: np.ndarray
    target: np.ndarray
    test: np.ndarray
    rare_classes: list[int] = field(default_factory=list)

    def pools(self) -> dict[str, np.ndarray]:
        return {"labeled": self.labeled, "unlabeled": self.unlabeled,
                "target": self.target, "test": self.test}


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def share(total: int, parts: int) -> list[int]:
    """Split ``total`` into ``parts`` integers differing by at most one."""
    if parts <= 0:
        return []
    base, extra = divmod(int(total), parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def rare_count(total: int, rho: float) -> int:
    """Rare-class share of a pool of ``total`` items with imbalance ``rho``."""
    return int(math.floor(total / (1.0 + rho) + 0.5))


class _Pools:
    """Per-class shuffled index stacks; draws pop from the front."""

    def __init__(self, labels: np.ndarray, num_classes: int, rng):
        self.stacks = {}
        for c in range(num_classes):
            idx = np.flatnonzero(labels == c)
            self.stacks[c] = list(rng.permutation(idx))

    def available(self, c: int) -> int:
        return len(self.stacks.get(c, []))

    def take(self, c: int, k: int) -> list[int]:
        got, self.stacks[c] = self.stacks[c][:k], self.stacks[c][k:]
        return got


def _check_deficit(pools: _Pools, need: dict[int, int]):
    short = {c: n - pools.available(c) for c, n in need.items() if n > pools.available(c)}
    if short:
        detail = ", ".join(f"class {c}: need {need[c]}, have {pools.available(c)} (short {d})"
                           for c, d in sorted(short.items()))
        raise ScenarioError(f"insufficient points for requested sizes: {detail}")


def _draw(pools: _Pools, plan: dict[int, int]) -> np.ndarray:
    out: list[int] = []
    for c in sorted(plan):
        out.extend(pools.take(c, plan[c]))
    return np.sort(np.asarray(out, dtype=np.int64))


def _classes(source: EmbeddingSet) -> int:
    if source.labels is None:
        raise ScenarioError("source embeddings carry no labels")
    return int(source.num_classes)


def _spread(total: int, classes: list[int]) -> dict[int, int]:
    return dict(zip(classes, share(total, len(classes))))


def _add(*plans: dict[int, int]) -> dict[int, int]:
    out: dict[int, int] = {}
    for p in plans:
        for c, k in p.items():
            out[c] = out.get(c, 0) + k
    return out


# ---------------------------------------------------------------------------
# split builders
# ---------------------------------------------------------------------------


def make_binary(spec: ScenarioSpec, source: EmbeddingSet) -> Split:
    num_classes = _classes(source)
    rare = list(spec.rare_classes)
    frequent = [c for c in range(num_classes) if c not in rare]
    if any(c < 0 or c >= num_classes for c in rare) or not frequent:
        raise ScenarioError("rare_classes must be a strict subset of the source classes")
    rng = np.random.default_rng(spec.seed)
    pools = _Pools(source.labels, num_classes, rng)

    test_plan = _spread(spec.test, list(range(num_classes)))
    target_plan = _spread(spec.target, rare)
    c_l = rare_count(spec.labeled, spec.rho)
    c_u = rare_count(spec.unlabeled, spec.rho)
    l_plan = _add(_spread(c_l, rare), _spread(spec.labeled - c_l, frequent))
    u_plan = _add(_spread(c_u, rare), _spread(spec.unlabeled - c_u, frequent))
    _check_deficit(pools, _add(test_plan, target_plan, l_plan, u_plan))

    test = _draw(pools, test_plan)
    target = _draw(pools, target_plan)
    labeled = _draw(pools, l_plan)
    unlabeled = _draw(pools, u_plan)
    return Split(labeled, unlabeled, target, test, rare)


def tail_classes(counts: np.ndarray, num_tail: int) -> list[int]:
    order = sorted(range(len(counts)), key=lambda c: (counts[c], c))
    return sorted(order[:num_tail])


def make_longtail(spec: ScenarioSpec, source: EmbeddingSet) -> Split:
    num_classes = _classes(source)
    rng = np.random.default_rng(spec.seed)
    pools = _Pools(source.labels, num_classes, rng)
    if spec.per_class_counts is not None:
        if len(spec.per_class_counts) != num_classes:
            raise ScenarioError(f"per_class_counts: expected {num_classes} entries")
        want = dict(enumerate(int(k) for k in spec.per_class_counts))
        _check_deficit(pools, want)
        for c, k in want.items():
            pools.stacks[c] = pools.stacks[c][:k]
    counts = np.array([pools.available(c) for c in range(num_classes)])

    if spec.rare_classes is not None:
        rare = list(spec.rare_classes)
    else:
        rare = tail_classes(counts, spec.num_tail)
    for c in rare:
        if c < 0 or c >= num_classes or counts[c] == 0:
            raise ScenarioError(f"tail class {c} is absent from the source")
    if len(rare) >= num_classes:
        raise ScenarioError("rare_classes must be a strict subset of the source classes")

    test_plan = _spread(spec.test, list(range(num_classes)))
    target_plan = _spread(spec.target, rare)
    _check_deficit(pools, _add(test_plan, target_plan))
    test = _draw(pools, test_plan)
    target = _draw(pools, target_plan)

    l_plan, u_plan = {}, {}
    for c in range(num_classes):
        rest = pools.available(c)
        l_plan[c] = int(math.floor(spec.labeled_fraction * rest + 0.5))
        u_plan[c] = rest - l_plan[c]
    labeled = _draw(pools, l_plan)
    unlabeled = _draw(pools, u_plan)
    return Split(labeled, unlabeled, target, test, rare)


def make_custom(spec: ScenarioSpec, source: EmbeddingSet) -> Split:
    num_classes = _classes(source)
    rare = list(spec.rare_classes)
    rng = np.random.default_rng(spec.seed)
    pools = _Pools(source.labels, num_classes, rng)
    try:
        l_plan = {int(c): int(k) for c, k in spec.custom["labeled"].items()}
        u_plan = {int(c): int(k) for c, k in spec.custom["unlabeled"].items()}
    except (KeyError, AttributeError, TypeError, ValueError):
        raise ScenarioError("custom: expected {'labeled': {class: count}, 'unlabeled': {class: count}}") from None
    test_plan = _spread(spec.test, list(range(num_classes)))
    target_plan = _spread(spec.target, rare)
    _check_deficit(pools, _add(test_plan, target_plan, l_plan, u_plan))
    test = _draw(pools, test_plan)
    target = _draw(pools, target_plan)
    labeled = _draw(pools, l_plan)
    unlabeled = _draw(pools, u_plan)
    return Split(labeled, unlabeled, target, test, rare)


def make_split(spec: ScenarioSpec, source: EmbeddingSet) -> Split:
    builder = {"binary": make_binary, "longtail": make_longtail, "custom": make_custom}[spec.kind]
    return builder(spec, source)


# ---------------------------------------------------------------------------
# sources
# ---------------------------------------------------------------------------


def make_synthetic_gaussians(num_classes: int, d: int, per_class_counts, class_separation: float,
                             seed: int = 0) -> EmbeddingSet:
    """Unit-variance isotropic Gaussian clusters.

    With ``num_classes <= d`` the means sit at ``(sep / sqrt 2) e_k`` so every
    pair of means is exactly ``class_separation`` apart.
    """
    if class_separation < 0:
        raise ValueError("class_separation must be non-negative")
    if np.isscalar(per_class_counts):
        per_class_counts = [int(per_class_counts)] * num_classes
    if len(per_class_counts) != num_classes:
        raise ValueError(f"expected {num_classes} per-class counts")
    rng = np.random.default_rng(seed)
    if num_classes <= d:
        means = np.zeros((num_classes, d))
        means[np.arange(num_classes), np.arange(num_classes)] = class_separation / math.sqrt(2.0)
    else:
        dirs = rng.normal(size=(num_classes, d))
        means = dirs / np.linalg.norm(dirs, axis=1, keepdims=True) * (class_separation / math.sqrt(2.0))
    xs, ys = [], []
    for c, k in enumerate(per_class_counts):
        xs.append(means[c] + rng.normal(size=(int(k), d)))
        ys.append(np.full(int(k), c, dtype=np.int64))
    return EmbeddingSet(np.vstack(xs), np.concatenate(ys), num_classes=num_classes)


SYNTHETIC_KEYS = {"num_classes", "d", "per_class_counts", "class_separation", "seed"}


def load_source(source: dict, base_dir: Path | None = None) -> EmbeddingSet:
    if not isinstance(source, dict) or len(source) != 1:
        raise ScenarioError("source: expected {'synthetic': {...}} or {'embeddings': path}")
    (kind, params), = source.items()
    if kind == "synthetic":
        extra = set(params) - SYNTHETIC_KEYS
        if extra:
            raise ScenarioError(f"source.synthetic.{sorted(extra)[0]}: unknown key")
        missing = {"num_classes", "d", "per_class_counts", "class_separation"} - set(params)
        if missing:
            raise ScenarioError(f"source.synthetic.{sorted(missing)[0]}: required field missing")
        return make_synthetic_gaussians(**params)
    if kind == "embeddings":
        path = Path(params)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return read_embeddings(path)
    raise ScenarioError(f"source.{kind}: unknown source kind")
