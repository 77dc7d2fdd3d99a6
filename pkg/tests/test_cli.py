import json

import numpy as np
import pytest

from smiselect.cli import ConfigError, main, parse_config
from smiselect.kernel import EmbeddingSet, write_embeddings

SOURCE = {"synthetic": {"num_classes": 2, "d": 6, "per_class_counts": [1500, 1500],
                        "class_separation": 2.5, "seed": 0}}


def config(**kw):
    cfg = {"scenario": {"preset": "pneumonia", "test": 100, "source": SOURCE},
           "strategies": ["random", "entropy"], "rounds": 3, "seeds": [0, 1]}
    cfg.update(kw)
    return cfg


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


@pytest.fixture
def files(tmp_path, rng):
    ground = EmbeddingSet(np.abs(rng.normal(size=(20, 5))), ids=np.arange(100, 120))
    ground.vectors[7] = [0.1, 0.9, 0.3, 0.2, 0.5]
    query = EmbeddingSet(np.array([[0.1, 0.9, 0.3, 0.2, 0.5]]), ids=[0])
    write_embeddings(tmp_path / "ground", ground)
    write_embeddings(tmp_path / "query", query)
    return tmp_path / "ground.json", tmp_path / "query.json"


class TestSelect:
    def run(self, files, tmp_path, *extra):
        out = tmp_path / "sel.txt"
        code = main(["select", "--embeddings", str(files[0]), "--query", str(files[1]),
                     "--out", str(out), *extra])
        return code, out

    def test_budget_zero(self, files, tmp_path):
        code, out = self.run(files, tmp_path, "--function", "gcmi", "--budget", "0")
        assert code == 0 and out.read_text() == ""
        assert json.loads((tmp_path / "sel.txt.json").read_text())["selected_ids"] == []

    @pytest.mark.parametrize("fn", ["gcmi", "flqmi", "flvmi", "logdetmi"])
    def test_dominant_point(self, files, tmp_path, fn):
        code, out = self.run(files, tmp_path, "--function", fn, "--budget", "1")
        assert code == 0 and out.read_text() == "107\n"
        side = json.loads((tmp_path / "sel.txt.json").read_text())
        assert side["selected_ids"] == [107] and len(side["gains"]) == 1

    def test_stdout(self, files, capsys):
        assert main(["select", "--embeddings", str(files[0]), "--query", str(files[1]),
                     "--function", "flvmi", "--budget", "3"]) == 0
        assert len(capsys.readouterr().out.split()) == 3

    def test_ids_subset_fuzzed(self, tmp_path):
        for seed in range(15):
            rng = np.random.default_rng(seed)
            n, d = int(rng.integers(1, 30)), int(rng.integers(1, 6))
            ids = rng.choice(10_000, size=n, replace=False)
            write_embeddings(tmp_path / "g", EmbeddingSet(rng.normal(size=(n, d)) + 0.1, ids=ids))
            write_embeddings(tmp_path / "q", EmbeddingSet(rng.normal(size=(3, d)) + 0.1))
            fn = ["gcmi", "flqmi", "flvmi", "logdetmi"][seed % 4]
            budget = int(rng.integers(0, n + 3))
            out = tmp_path / "o.txt"
            assert main(["select", "--embeddings", str(tmp_path / "g.json"), "--query",
                         str(tmp_path / "q.json"), "--function", fn, "--budget", str(budget),
                         "--metric", "dot" if seed % 2 else "cosine", "--out", str(out)]) == 0
            got = [int(s) for s in out.read_text().split()]
            assert set(got) <= set(ids.tolist()) and len(got) == min(budget, n) == len(set(got))

    def test_malformed_file(self, files, tmp_path, capsys):
        bin_path = files[0].with_suffix(".bin")
        bin_path.write_bytes(bin_path.read_bytes()[:30])
        code, _ = self.run(files, tmp_path, "--function", "gcmi", "--budget", "1")
        assert code == 2
        assert "byte offset" in capsys.readouterr().err


class TestSimulate:
    def test_counting_and_manifest(self, tmp_path):
        path = write_config(tmp_path, config(output_dir="arch"))
        assert main(["simulate", "--config", str(path)]) == 0
        arch = tmp_path / "arch"
        runs = sorted((arch / "runs").glob("*.csv"))
        assert len(runs) == 4
        rows = sum(len(r.read_text().splitlines()) - 2 for r in runs)
        assert rows == 12
        manifest = json.loads((arch / "manifest.json").read_text())
        assert manifest["preset"]["rho"] == 20 and manifest["preset"]["budget"] == 10
        assert manifest["preset"]["target"] == 5
        assert manifest["config"]["budget"] == 10
        assert manifest["library"] == "smiselect" and manifest["version"]

    def test_deterministic_and_manifest_rerun(self, tmp_path):
        path = write_config(tmp_path, config(output_dir="a"))
        assert main(["simulate", "--config", str(path)]) == 0
        assert main(["simulate", "--config", str(path), "--output-dir", str(tmp_path / "b"),
                     "--jobs", "2"]) == 0
        assert main(["simulate", "--config", str(tmp_path / "a" / "manifest.json"),
                     "--output-dir", str(tmp_path / "c")]) == 0
        for f in (tmp_path / "a" / "runs").iterdir():
            assert (tmp_path / "b" / "runs" / f.name).read_bytes() == f.read_bytes()
            assert (tmp_path / "c" / "runs" / f.name).read_bytes() == f.read_bytes()

    def test_embedding_source(self, tmp_path, rng):
        x = np.concatenate([rng.normal(size=(400, 3)), rng.normal(size=(400, 3)) + 2])
        write_embeddings(tmp_path / "emb", EmbeddingSet(x, np.repeat([0, 1], 400), num_classes=2))
        cfg = config(scenario={"kind": "binary", "rho": 5, "labeled": 30, "unlabeled": 200,
                               "target": 4, "test": 40, "rare_classes": [1],
                               "source": {"embeddings": "emb.json"}},
                     budget=5, rounds=2, strategies=["flvmi"], seeds=[0, 1], output_dir="out")
        assert main(["simulate", "--config", str(write_config(tmp_path, cfg))]) == 0
        assert len(list((tmp_path / "out" / "runs").glob("*.csv"))) == 2

    def test_failure_exit_code(self, tmp_path, capsys):
        # the preset needs more rare points than the source holds
        small = {"synthetic": {**SOURCE["synthetic"], "per_class_counts": [1500, 20]}}
        cfg = config(scenario={"preset": "pneumonia", "test": 10, "source": small}, output_dir="x")
        assert main(["simulate", "--config", str(write_config(tmp_path, cfg))]) == 1
        err = capsys.readouterr().err
        assert "strategy=random seed=0" in err and "strategy=entropy seed=1" in err


class TestConfig:
    @pytest.mark.parametrize("patch,where", [
        ({"colour": 1}, "config.colour"),
        ({"strategies": [{"kind": "random", "temperature": 2}]}, r"config.strategies\[0\].temperature"),
        ({"strategies": ["tglister"]}, r"config.strategies\[0\].kind"),
        ({"seeds": [1, 1]}, "config.seeds"),
        ({"seeds": []}, "config.seeds"),
        ({"rounds": 0}, "config.rounds"),
        ({"maximizer": {"name": "lazy", "eps": 0.1}}, "config.maximizer.eps"),
        ({"maximizer": {"name": "stochastic", "epsilon": 1.5}}, "config.maximizer.epsilon"),
        ({"probe": {"momentum": 0.9}}, "config.probe.momentum"),
    ])
    def test_rejects_with_path(self, patch, where):
        with pytest.raises(ConfigError, match=where):
            parse_config(config(**patch))

    def test_scenario_key_path(self):
        cfg = config(scenario={"preset": "pneumonia", "test": 5, "source": SOURCE, "rh0": 3})
        with pytest.raises(ConfigError, match=r"config\.scenario\.rh0"):
            parse_config(cfg)

    def test_preset_by_name_needs_test(self):
        with pytest.raises(ConfigError, match="test"):
            parse_config(config(scenario="pneumonia"))

    def test_duplicate_labels(self):
        cfg = parse_config(config(strategies=["random", "random"]))
        assert [lab for lab, _ in cfg.strategies] == ["random", "random#2"]

    def test_cli_exit_code(self, tmp_path, capsys):
        path = write_config(tmp_path, config(colour=1))
        assert main(["simulate", "--config", str(path)]) == 2
        assert "config.colour" in capsys.readouterr().err

    def test_invalid_json(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{\"rounds\": 3,,}")
        assert main(["simulate", "--config", str(path)]) == 2
        assert "byte offset" in capsys.readouterr().err


class TestReport:
    def simulate(self, tmp_path, **kw):
        path = write_config(tmp_path, config(output_dir="arch", **kw))
        assert main(["simulate", "--config", str(path)]) == 0
        return tmp_path / "arch"

    def test_single_strategy(self, tmp_path, capsys):
        arch = self.simulate(tmp_path, strategies=["random"])
        capsys.readouterr()
        assert main(["report", "--archive", str(arch), "--alpha", "0.05"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["matrix"] == [[0.0]] and payload["alpha"] == 0.05

    def test_duplicates_give_zero(self, tmp_path, capsys):
        arch = self.simulate(tmp_path, strategies=["margin", "margin"])
        capsys.readouterr()
        assert main(["report", "--archive", str(arch)]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["matrix"] == [[0.0, 0.0], [0.0, 0.0]]

    def test_entries_are_multiples(self, tmp_path, capsys):
        arch = self.simulate(tmp_path, strategies=["random", "entropy", "flqmi"], seeds=[0, 1, 2])
        capsys.readouterr()
        assert main(["report", "--archive", str(arch), "--alpha", "0.5", "--metric", "overall_acc"]) == 0
        m = np.array(json.loads(capsys.readouterr().out)["matrix"])
        assert np.allclose(m * 3, np.round(m * 3), atol=1e-12)
        for name in ("penalty.json", "penalty.csv", "summary.csv"):
            assert (arch / "report" / name).exists()
        summary = (arch / "report" / "summary.csv").read_text().splitlines()
        assert len(summary) == 1 + 3 * 3

    def test_incomplete_archive(self, tmp_path, capsys):
        arch = self.simulate(tmp_path)
        next((arch / "runs").glob("entropy*seed1.csv")).unlink()
        assert main(["report", "--archive", str(arch)]) == 2
        assert "incomplete archive" in capsys.readouterr().err

    def test_single_seed_archive(self, tmp_path, capsys):
        arch = self.simulate(tmp_path, seeds=[0])
        assert main(["report", "--archive", str(arch)]) == 2
        assert "at least 2" in capsys.readouterr().err

    def test_not_an_archive(self, tmp_path):
        assert main(["report", "--archive", str(tmp_path)]) == 2
