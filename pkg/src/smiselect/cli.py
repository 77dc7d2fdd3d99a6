"""Command-line entry point: ``select``, ``simulate`` and ``report``."""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .acquisition import STRATEGY_NAMES, AcquisitionStrategy, smi_kernels
from .alloop import read_rounds_csv, run_al, write_rounds_csv
from .kernel import DEFAULT_RIDGE, EmbeddingFormatError, read_embeddings
from .maximizer import DEFAULT_EPSILON, METHODS, maximize
from .model import ProbeConfig
from .scenario import PRESETS, ScenarioError, ScenarioSpec, load_source
from .smi import SMI_KINDS, make_smi
from .stats import DEFAULT_ALPHA, penalty_matrix, summarize


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# experiment configuration
# ---------------------------------------------------------------------------

CONFIG_KEYS = {"scenario", "strategies", "rounds", "budget", "seeds", "maximizer", "probe", "output_dir"}
STRATEGY_KEYS = {"kind", "label", "metric", "ridge", "query_labels"}
MAXIMIZER_KEYS = {"name", "epsilon"}
PROBE_KEYS = {"lr", "epochs", "l2", "target_accuracy"}


@dataclass
class ExperimentConfig:
    scenario: ScenarioSpec
    strategies: list[tuple[str, AcquisitionStrategy]]
    rounds: int
    budget: int
    seeds: list[int]
    maximizer: dict = field(default_factory=lambda: {"name": "auto", "epsilon": DEFAULT_EPSILON})
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    output_dir: str = "archive"

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "strategies": [{"label": lab, "kind": s.kind, "metric": s.metric, "ridge": s.ridge,
                            "query_labels": s.query_labels} for lab, s in self.strategies],
            "rounds": self.rounds,
            "budget": self.budget,
            "seeds": list(self.seeds),
            "maximizer": dict(self.maximizer),
            "probe": {"lr": self.probe.lr, "epochs": self.probe.epochs, "l2": self.probe.l2,
                      "target_accuracy": self.probe.target_accuracy},
            "output_dir": self.output_dir,
        }


def _unknown(d: dict, allowed: set, path: str):
    for key in d:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown key")


def _int(value, path: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{path}: expected an integer >= {minimum}, got {value!r}")
    return value


def parse_config(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object")
    _unknown(data, CONFIG_KEYS, "config")
    for key in ("scenario", "strategies", "rounds", "seeds"):
        if key not in data:
            raise ConfigError(f"config.{key}: required field missing")
    scen = data["scenario"]
    if isinstance(scen, str):
        scen = {"preset": scen}
    try:
        scenario = ScenarioSpec.from_dict(scen, "config.scenario")
    except ScenarioError as exc:
        msg = str(exc)
        raise ConfigError(msg if msg.startswith("config.") else f"config.scenario: {msg}") from None
    except TypeError as exc:
        raise ConfigError(f"config.scenario: {exc}") from None

    maximizer = {"name": "auto", "epsilon": DEFAULT_EPSILON}
    if "maximizer" in data:
        m = data["maximizer"]
        if isinstance(m, str):
            m = {"name": m}
        if not isinstance(m, dict):
            raise ConfigError("config.maximizer: expected an object")
        _unknown(m, MAXIMIZER_KEYS, "config.maximizer")
        maximizer.update(m)
        if maximizer["name"] not in METHODS:
            raise ConfigError(f"config.maximizer.name: expected one of {METHODS}")
        eps = maximizer["epsilon"]
        if not isinstance(eps, (int, float)) or not 0 < eps < 1:
            raise ConfigError("config.maximizer.epsilon: must lie in (0, 1)")

    strategies: list[tuple[str, AcquisitionStrategy]] = []
    raw = data["strategies"]
    if not isinstance(raw, list) or not raw:
        raise ConfigError("config.strategies: expected a nonempty list")
    seen: dict[str, int] = {}
    for i, entry in enumerate(raw):
        path = f"config.strategies[{i}]"
        if isinstance(entry, str):
            entry = {"kind": entry}
        if not isinstance(entry, dict) or "kind" not in entry:
            raise ConfigError(f"{path}.kind: required field missing")
        _unknown(entry, STRATEGY_KEYS, path)
        if entry["kind"] not in STRATEGY_NAMES:
            raise ConfigError(f"{path}.kind: unknown strategy {entry['kind']!r}")
        params = {k: v for k, v in entry.items() if k in {"metric", "ridge", "query_labels"}}
        strat = AcquisitionStrategy(entry["kind"], maximizer=maximizer["name"],
                                    epsilon=float(maximizer["epsilon"]), **params)
        label = entry.get("label", entry["kind"])
        seen[label] = seen.get(label, 0) + 1
        if seen[label] > 1:
            label = f"{label}#{seen[label]}"
        strategies.append((label, strat))

    rounds = _int(data["rounds"], "config.rounds", 1)
    budget = data.get("budget", scenario.budget)
    if budget is None:
        raise ConfigError("config.budget: required (no preset budget available)")
    budget = _int(budget, "config.budget")
    seeds = data["seeds"]
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("config.seeds: expected a nonempty list")
    for i, s in enumerate(seeds):
        _int(s, f"config.seeds[{i}]")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("config.seeds: seeds must be distinct")

    probe = ProbeConfig()
    if "probe" in data:
        if not isinstance(data["probe"], dict):
            raise ConfigError("config.probe: expected an object")
        _unknown(data["probe"], PROBE_KEYS, "config.probe")
        probe = ProbeConfig(**{**{"lr": probe.lr, "epochs": probe.epochs, "l2": probe.l2,
                                  "target_accuracy": probe.target_accuracy}, **data["probe"]})
    return ExperimentConfig(scenario, strategies, rounds, budget, list(seeds), maximizer, probe,
                            str(data.get("output_dir", "archive")))


def run_file(label: str, seed: int) -> str:
    return f"{label.replace('#', '_')}__seed{seed}.csv"


def _run_one(task):
    cfg_dict, base_dir, label, seed, out_path = task
    cfg = parse_config(cfg_dict)
    strat = dict(cfg.strategies)[label]
    scenario = cfg.scenario
    source = load_source(scenario.source, Path(base_dir))
    history = run_al(scenario, strat, cfg.rounds, cfg.budget, seed, cfg.probe, source)
    write_rounds_csv(out_path, history, f"{label}-s{seed}", label, seed, int(source.num_classes))
    return label, seed


def simulate(cfg: ExperimentConfig, base_dir: Path, jobs: int = 1, output_dir: Path | None = None) -> list:
    """Run every (strategy, seed) pair; returns the failing pairs."""
    out = Path(output_dir or cfg.output_dir)
    if not out.is_absolute():
        out = base_dir / out
    (out / "runs").mkdir(parents=True, exist_ok=True)
    cfg_dict = cfg.to_dict()
    # resolve relative embedding paths now so the manifest stands alone
    src = cfg_dict["scenario"]["source"]
    if "embeddings" in src:
        src["embeddings"] = str((base_dir / src["embeddings"]).resolve())
    runs = [{"run_id": f"{lab}-s{s}", "strategy": lab, "seed": s, "file": f"runs/{run_file(lab, s)}"}
            for lab, _ in cfg.strategies for s in cfg.seeds]
    manifest = {
        "library": "smiselect",
        "version": __version__,
        "config": cfg_dict,
        "preset": copy.deepcopy(PRESETS.get(cfg.scenario.preset)) if cfg.scenario.preset else None,
        "runs": runs,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    tasks = [(cfg_dict, str(base_dir), r["strategy"], r["seed"], str(out / r["file"])) for r in runs]
    failures = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = [(t, pool.submit(_run_one, t)) for t in tasks]
            for t, fut in futs:
                try:
                    fut.result()
                except Exception as exc:  # noqa: BLE001 - reported per run
                    failures.append((t[2], t[3], repr(exc)))
    else:
        for t in tasks:
            try:
                _run_one(t)
            except Exception as exc:  # noqa: BLE001 - reported per run
                failures.append((t[2], t[3], repr(exc)))
    return failures


def load_archive(archive: Path, metric: str = "rare_acc") -> tuple[dict, dict]:
    manifest_path = archive / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"{archive}: no manifest.json; not an archive produced by 'simulate'")
    manifest = json.loads(manifest_path.read_text())
    missing = [r["run_id"] for r in manifest["runs"] if not (archive / r["file"]).exists()]
    if missing:
        raise ConfigError(f"incomplete archive: missing runs {', '.join(missing)}")
    curves: dict[str, list] = {}
    for r in manifest["runs"]:
        rows = read_rounds_csv(archive / r["file"])
        curves.setdefault(r["strategy"], []).append([row[metric] for row in rows])
    lengths = {len(c) for runs in curves.values() for c in runs}
    if len(lengths) > 1:
        raise ConfigError(f"runs disagree on round count ({sorted(lengths)}); truncated runs cannot be compared")
    return manifest, {k: np.asarray(v, dtype=np.float64) for k, v in curves.items()}


def report(archive: Path, alpha: float = DEFAULT_ALPHA, metric: str = "rare_acc", paired: bool = False,
           out_dir: Path | None = None) -> dict:
    manifest, curves = load_archive(archive, metric)
    out_dir = out_dir or archive / "report"
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        pm = penalty_matrix(curves, alpha, paired)
    except ValueError as exc:
        raise ConfigError(f"{archive}: {exc}") from None
    payload = pm.to_dict()
    payload["metric"] = metric
    (out_dir / "penalty.json").write_text(json.dumps(payload, indent=2) + "\n")
    (out_dir / "penalty.csv").write_text(pm.to_csv())
    summ = summarize(curves)
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["strategy", "round", "mean", "std", "n_seeds", "single_seed"])
    for name, s in summ.items():
        for r, (m, sd) in enumerate(zip(s.mean, s.std), start=1):
            w.writerow([name, r, repr(float(m)), repr(float(sd)), s.n_seeds, int(s.single_seed)])
    (out_dir / "summary.csv").write_text(buf.getvalue())
    return payload


# ---------------------------------------------------------------------------
# argparse front end
# ---------------------------------------------------------------------------


def cmd_select(args) -> int:
    if args.budget < 0:
        raise ConfigError("--budget must be non-negative")
    ground = read_embeddings(args.embeddings)
    query = read_embeddings(args.query)
    if ground.d != query.d:
        raise EmbeddingFormatError(f"{args.query}: header field 'd' is {query.d}, ground set has d={ground.d}")
    ids: list[int] = []
    gains: list[float] = []
    if args.budget > 0 and ground.n > 0:
        ks = smi_kernels(args.function, ground, query, args.metric, args.ridge)
        f = make_smi(args.function, **ks)
        res = maximize(f, np.arange(ground.n), args.budget, args.maximizer, args.epsilon, args.seed)
        ids = [int(ground.ids[j]) for j in res.selected]
        gains = res.gains
    text = "".join(f"{i}\n" for i in ids)
    if args.out:
        Path(args.out).write_text(text)
        sidecar = Path(args.sidecar) if args.sidecar else Path(str(args.out) + ".json")
    else:
        sys.stdout.write(text)
        sidecar = Path(args.sidecar) if args.sidecar else None
    if sidecar is not None:
        sidecar.write_text(json.dumps({
            "function": args.function, "metric": args.metric, "budget": args.budget,
            "maximizer": args.maximizer, "selected_ids": ids, "gains": [float(g) for g in gains],
            "value": float(sum(gains)),
        }, indent=2) + "\n")
    return 0


def cmd_simulate(args) -> int:
    path = Path(args.config)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at byte offset {exc.pos}: {exc.msg}") from None
    if isinstance(data, dict) and "runs" in data and "config" in data:
        data = data["config"]  # a manifest reproduces its own archive
    cfg = parse_config(data)
    out = Path(args.output_dir).resolve() if args.output_dir else None
    failures = simulate(cfg, path.parent.resolve(), args.jobs, out)
    if failures:
        for label, seed, err in failures:
            print(f"run failed: strategy={label} seed={seed}: {err}", file=sys.stderr)
        return 1
    return 0


def cmd_report(args) -> int:
    payload = report(Path(args.archive), args.alpha, args.metric, args.paired,
                     Path(args.out) if args.out else None)
    json.dump(payload, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smiselect", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("select", help="one-shot SMI subset selection over embedding files")
    s.add_argument("--embeddings", required=True, help="ground-set embedding file (.json header)")
    s.add_argument("--query", required=True, help="query-set embedding file")
    s.add_argument("--function", required=True, choices=SMI_KINDS)
    s.add_argument("--budget", required=True, type=int)
    s.add_argument("--metric", default="cosine", choices=("cosine", "dot"))
    s.add_argument("--out", help="write selected ids here (default: stdout)")
    s.add_argument("--sidecar", help="JSON with per-step gains (default: <out>.json)")
    s.add_argument("--maximizer", default="auto", choices=METHODS)
    s.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    s.add_argument("--ridge", type=float, default=DEFAULT_RIDGE)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_select)

    m = sub.add_parser("simulate", help="run an active-learning experiment grid")
    m.add_argument("--config", required=True)
    m.add_argument("--jobs", type=int, default=1)
    m.add_argument("--output-dir", help="override the config's output_dir")
    m.set_defaults(func=cmd_simulate)

    r = sub.add_parser("report", help="penalty matrix and summary curves for an archive")
    r.add_argument("--archive", required=True)
    r.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    r.add_argument("--metric", default="rare_acc", choices=("rare_acc", "overall_acc"))
    r.add_argument("--paired", action="store_true", help="paired t-test instead of Welch")
    r.add_argument("--out", help="output directory (default: <archive>/report)")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (EmbeddingFormatError, ConfigError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
