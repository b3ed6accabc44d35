import csv

import numpy as np
import pytest

from gesturehmm.cli import main, read_scores
from gesturehmm.modelio import dumps, load_model


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--sessions", "8", "--seed", "3", "--out", str(root / "corpus")]) == 0
    assert main(["train", "--corpus", str(root / "corpus"), "--out", str(root / "model.json"),
                 "--states", "3", "--mix", "1", "--order", "1"]) == 0
    return root


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _session_args(root, k=0):
    return ["--series", str(root / "corpus" / f"synth{k:04d}.series.csv"),
            "--segments", str(root / "corpus" / f"synth{k:04d}.segments.csv")]


class TestPipeline:
    def test_corpus_written(self, workspace):
        files = sorted(p.name for p in (workspace / "corpus").iterdir())
        assert "corpus.toml" in files
        assert len([f for f in files if f.endswith(".series.csv")]) == 8

    def test_model_has_sequence_part(self, workspace):
        bank, seq = load_model(workspace / "model.json")
        assert seq is not None and seq.order == 1
        assert bank.config.n_states == 3

    def test_classify(self, workspace):
        out = workspace / "cls.csv"
        assert main(["classify", "--model", str(workspace / "model.json"), *_session_args(workspace),
                     "--out", str(out)]) == 0
        rows = _rows(out)
        assert len(rows) == 20
        assert {"true_label", "predicted_label", "n_windows", "score_rest"} <= set(rows[0])
        acc = np.mean([r["true_label"] == r["predicted_label"] for r in rows])
        assert acc >= 0.9

    def test_decode_from_session_and_scores_agree(self, workspace):
        model = str(workspace / "model.json")
        assert main(["classify", "--model", model, *_session_args(workspace, 1),
                     "--out", str(workspace / "s1.csv")]) == 0
        assert main(["decode", "--model", model, *_session_args(workspace, 1),
                     "--out", str(workspace / "d1.csv")]) == 0
        assert main(["decode", "--model", model, "--scores", str(workspace / "s1.csv"),
                     "--out", str(workspace / "d2.csv")]) == 0
        a, b = _rows(workspace / "d1.csv"), _rows(workspace / "d2.csv")
        assert [r["predicted_label"] for r in a] == [r["predicted_label"] for r in b]
        assert len(a) == 20

    def test_read_scores(self, workspace):
        main(["classify", "--model", str(workspace / "model.json"), *_session_args(workspace, 2),
              "--out", str(workspace / "s2.csv")])
        scores, true, lengths = read_scores(workspace / "s2.csv")
        assert scores.shape == (20, 5)
        assert len(true) == 20 and all(n >= 1 for n in lengths)

    def test_train_is_deterministic(self, workspace):
        out = workspace / "again.json"
        main(["train", "--corpus", str(workspace / "corpus"), "--out", str(out),
              "--states", "3", "--mix", "1", "--order", "1"])
        assert out.read_text() == (workspace / "model.json").read_text()
        assert dumps(*load_model(out)) == out.read_text()


class TestErrors:
    def test_decode_without_sequence_model(self, workspace, tmp_path):
        model = tmp_path / "bank.json"
        main(["train", "--corpus", str(workspace / "corpus"), "--out", str(model), "--states", "2", "--mix", "1"])
        assert main(["decode", "--model", str(model), *_session_args(workspace)]) == 2

    def test_missing_corpus(self, tmp_path):
        assert main(["train", "--corpus", str(tmp_path), "--out", str(tmp_path / "m.json")]) == 2

    def test_classify_needs_session(self, workspace):
        with pytest.raises(SystemExit):
            main(["classify", "--model", str(workspace / "model.json")])

    def test_bad_experiment_config(self, tmp_path):
        (tmp_path / "e.toml").write_text("folds = 5\n")
        assert main(["crossval", "--config", str(tmp_path / "e.toml")]) == 2


class TestExperimentCommands:
    def test_crossval(self, tmp_path):
        (tmp_path / "e.toml").write_text(
            "synth_sessions = 6\nfolds = 3\nfixed_n_states = 2\nfixed_n_mix = 1\norders = [0, 1]\n"
            "[synth]\nseed = 2\ngestures_per_session = 12\nchain = \"cycle\"\n")
        assert main(["crossval", "--config", str(tmp_path / "e.toml"), "--out", str(tmp_path / "res")]) == 0
        names = sorted(p.name for p in (tmp_path / "res").iterdir())
        assert names == ["crossval_aggregate.csv", "crossval_predictions.csv", "crossval_raw.csv",
                         "crossval_timing.csv"]
        assert len(_rows(tmp_path / "res" / "crossval_raw.csv")) == 6
