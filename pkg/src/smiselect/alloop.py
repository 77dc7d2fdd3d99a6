"""Targeted active-learning loop over a simulated labeling oracle.

Each round trains a fresh probe on the labeled pool, takes the misclassified
part of the target set as the query, selects a batch from the unlabeled
pool, reveals its labels, and grows the target set with the rare-class part
of the batch.  Metrics for round ``i`` describe the probe trained at the
start of that round and the batch it chose.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .acquisition import AcquisitionStrategy
from .kernel import EmbeddingSet
from .model import LinearProbe, ProbeConfig, misclassified_subset, train_probe
from .scenario import ScenarioSpec, Split, load_source, make_split

CSV_SCHEMA = "# schema: smiselect-rounds v1"


@dataclass
class RoundMetrics:
    round: int
    overall_accuracy: float
    rare_class_accuracy: float
    per_class_selection_counts: list[int]
    cumulative_rare_selected: int
    t_hat_size: int
    n_labeled: int
    truncated: bool = False


@dataclass
class AlState:
    split: Split
    target: np.ndarray
    probe: LinearProbe | None = None
    round: int = 0
    history: list[RoundMetrics] = field(default_factory=list)


def derive_seed(*keys: int) -> int:
    """Reproducible 32-bit seed from a tuple of integers."""
    return int(np.random.SeedSequence([int(k) & 0xFFFFFFFF for k in keys]).generate_state(1)[0])


def evaluate(probe: LinearProbe, test: EmbeddingSet, rare_classes) -> dict:
    """Overall accuracy and the unweighted mean accuracy over rare classes."""
    if test.labels is None:
        raise ValueError("test set must be labeled")
    pred = probe.predict(test.vectors)
    correct = pred == test.labels
    per_class = {}
    for c in np.unique(test.labels):
        per_class[int(c)] = float(correct[test.labels == c].mean())
    missing = [c for c in rare_classes if c not in per_class]
    if missing:
        raise ValueError(f"rare class {missing[0]} is missing from the test set")
    rare_mean = float(np.mean([per_class[c] for c in rare_classes])) if rare_classes else float("nan")
    overall = float(correct.mean()) if correct.size else float("nan")
    return {"overall": overall, "rare_mean": rare_mean, "per_class": per_class}


def run_al(spec: ScenarioSpec, strategy: AcquisitionStrategy, rounds: int, budget: int, seed: int = 0,
           probe_config: ProbeConfig = ProbeConfig(), source: EmbeddingSet | None = None
           ) -> list[RoundMetrics]:
    """Run ``rounds`` selection rounds; one :class:`RoundMetrics` per round."""
    return run_al_state(spec, strategy, rounds, budget, seed, probe_config, source).history


def run_al_state(spec: ScenarioSpec, strategy: AcquisitionStrategy, rounds: int, budget: int,
                 seed: int = 0, probe_config: ProbeConfig = ProbeConfig(),
                 source: EmbeddingSet | None = None) -> AlState:
    if rounds < 0 or budget < 0:
        raise ValueError("rounds and budget must be non-negative")
    if source is None:
        source = load_source(spec.source)
    split_spec = ScenarioSpec.from_dict({**spec.to_dict(), "seed": derive_seed(spec.seed, seed)})
    split = make_split(split_spec, source)
    num_classes = int(source.num_classes)
    rare = list(split.rare_classes)
    rare_mask = np.isin(np.arange(num_classes), rare)
    test = source.subset(split.test)

    state = AlState(split, split.target.copy())
    labeled = split.labeled.copy()
    unlabeled = split.unlabeled.copy()
    cumulative_rare = 0
    for i in range(1, rounds + 1):
        probe = train_probe(source.subset(labeled), num_classes,
                            ProbeConfig(probe_config.lr, probe_config.epochs, probe_config.l2,
                                        derive_seed(seed, i, 2), probe_config.target_accuracy))
        target_set = source.subset(state.target)
        t_hat = misclassified_subset(probe, target_set)
        truncated = unlabeled.size < budget
        picks = np.zeros(0, dtype=np.int64)
        if unlabeled.size:
            pos = strategy.select(probe, source.subset(unlabeled), budget,
                                  labeled=source.subset(labeled), query=target_set.subset(t_hat),
                                  seed=derive_seed(seed, i, 1))
            picks = unlabeled[pos]
        revealed = source.labels[picks]
        counts = np.bincount(revealed, minlength=num_classes)
        rare_picks = picks[rare_mask[revealed]]
        cumulative_rare += int(rare_picks.size)

        scores = evaluate(probe, test, rare)
        state.history.append(RoundMetrics(
            round=i,
            overall_accuracy=scores["overall"],
            rare_class_accuracy=scores["rare_mean"],
            per_class_selection_counts=[int(c) for c in counts],
            cumulative_rare_selected=cumulative_rare,
            t_hat_size=int(t_hat.size),
            n_labeled=int(labeled.size),
            truncated=bool(truncated),
        ))
        labeled = np.concatenate([labeled, picks])
        unlabeled = np.setdiff1d(unlabeled, picks, assume_unique=True)
        state.target = np.concatenate([state.target, rare_picks])
        state.probe = probe
        state.round = i
        if truncated:
            break
    state.split = Split(labeled, unlabeled, split.target, split.test, rare)
    return state


# ---------------------------------------------------------------------------
# CSV archive rows
# ---------------------------------------------------------------------------


def csv_columns(num_classes: int) -> list[str]:
    return (["run_id", "strategy", "seed", "round", "overall_acc", "rare_acc"]
            + [f"sel_class_{c}" for c in range(num_classes)]
            + ["t_hat_size", "cumulative_rare", "n_labeled", "truncated"])


def write_rounds_csv(path, history: list[RoundMetrics], run_id: str, strategy: str, seed: int,
                     num_classes: int) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(CSV_SCHEMA + "\n")
        w = csv.writer(fh)
        w.writerow(csv_columns(num_classes))
        for m in history:
            w.writerow([run_id, strategy, seed, m.round, repr(m.overall_accuracy),
                        repr(m.rare_class_accuracy), *m.per_class_selection_counts,
                        m.t_hat_size, m.cumulative_rare_selected, m.n_labeled, int(m.truncated)])


def read_rounds_csv(path) -> list[dict]:
    path = Path(path)
    with open(path, newline="") as fh:
        first = fh.readline().rstrip("\n")
        if first != CSV_SCHEMA:
            raise ValueError(f"{path}: expected schema line {CSV_SCHEMA!r}, got {first!r}")
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["seed"] = int(r["seed"])
        r["round"] = int(r["round"])
        r["overall_acc"] = float(r["overall_acc"])
        r["rare_acc"] = float(r["rare_acc"])
        r["t_hat_size"] = int(r["t_hat_size"])
        r["cumulative_rare"] = int(r["cumulative_rare"])
    return rows
