import csv

import numpy as np
import pytest

from gesturehmm.experiments import (
    AGGREGATE_HEADER,
    ExperimentConfig,
    assign_folds,
    compare_orders,
    crossval,
    gestures_by_label,
    sample_train_test,
    sweep_complexity,
    sweep_training_size,
)
from gesturehmm.signal import LABELS, ValidationError
from gesturehmm.synth import SynthConfig, chain_config


def _config(tmp_path=None, **kw):
    base = dict(synth=SynthConfig(seed=1), synth_sessions=10, train_per_class=20, test_per_class=20,
                n_states=[2], n_mix=[1], repetitions=1, train_sizes=[10], size_repetitions=1,
                fixed_n_states=2, fixed_n_mix=1, folds=3, max_iter=10,
                output_dir=str(tmp_path) if tmp_path else "unused")
    base.update(kw)
    return ExperimentConfig(**base)


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_from_dict_ranges(self):
        cfg = ExperimentConfig.from_dict({"n_min": 3, "n_max": 5, "m_min": 1, "m_max": 2,
                                          "synth": {"seed": 4, "chain": "cycle", "noise_std": 2.0}})
        assert cfg.n_states == [3, 4, 5] and cfg.n_mix == [1, 2]
        assert cfg.synth.seed == 4 and cfg.synth.noise_std == 2.0
        assert cfg.synth.transition == chain_config().transition

    def test_unknown_key(self):
        with pytest.raises(ValidationError, match="unknown"):
            ExperimentConfig.from_dict({"synth": {}, "foldz": 3})

    def test_toml_relative_corpus(self, tmp_path):
        (tmp_path / "e.toml").write_text('corpus_dir = "data"\n')
        assert ExperimentConfig.from_toml(tmp_path / "e.toml").corpus_dir == str(tmp_path / "data")

    @pytest.mark.parametrize("kw", [dict(orders=[0, 7]), dict(folds=1), dict(repetitions=0), dict(synth=None),
                                    dict(corpus_dir="x")])
    def test_invalid(self, kw):
        with pytest.raises(ValidationError):
            _config(**kw).validate()

    def test_order_above_limit(self):
        with pytest.raises(ValidationError):
            compare_orders(_config(orders=[7]), write=False)


class TestSampling:
    def test_disjoint_balanced(self, separable_sessions):
        by = gestures_by_label(separable_sessions)
        train, test = sample_train_test(by, 30, 40, seed=3)
        assert not {id(g) for g in train} & {id(g) for g in test}
        assert [sum(g.label is l for g in train) for l in LABELS] == [30] * 5
        assert [sum(g.label is l for g in test) for l in LABELS] == [40] * 5

    def test_insufficient(self, separable_sessions):
        with pytest.raises(ValidationError, match="per label"):
            sample_train_test(gestures_by_label(separable_sessions), 500, 500, seed=0)

    def test_folds_partition(self):
        fold_of = assign_folds(10, 5, seed=7)
        assert sorted(np.bincount(fold_of)) == [2] * 5

    def test_too_few_sessions(self):
        with pytest.raises(ValidationError, match="cannot fill"):
            assign_folds(3, 5, seed=0)


class TestComplexity:
    def test_single_cell(self, separable_sessions, tmp_path):
        res = sweep_complexity(_config(tmp_path), data=separable_sessions)
        assert len(res.aggregate) == 1
        assert len(_read(res.paths["aggregate"])) == 1
        assert list(_read(res.paths["aggregate"])[0]) == AGGREGATE_HEADER

    def test_separable_surface_flat(self, separable_sessions):
        cfg = _config(n_states=[3, 5, 8], n_mix=[1, 2], train_per_class=100, test_per_class=100)
        accs = [float(a["accuracy_mean"]) for a in sweep_complexity(cfg, data=separable_sessions,
                                                                     write=False).aggregate]
        assert len(accs) == 6
        assert max(accs) - min(accs) <= 0.02

    def test_bookkeeping(self, separable_sessions):
        res = sweep_complexity(_config(repetitions=2), data=separable_sessions, write=False)
        for row in res.rows:
            assert row.n_test == 100
            assert row.accuracy == row.n_correct / row.n_test
            assert row.n_correct == sum(t == p for t, p in row.predictions)
        agg = res.aggregate[0]
        assert agg["runs"] == 2
        assert float(agg["accuracy_mean"]) == pytest.approx(np.mean([r.accuracy for r in res.rows]))


class TestTrainingSize:
    def test_single_size(self, separable_sessions, tmp_path):
        res = sweep_training_size(_config(tmp_path, train_sizes=[65], test_per_class=20),
                                  data=separable_sessions)
        assert len(_read(res.paths["raw"])) == 1

    def test_fixed_test_set(self, separable_sessions):
        res = sweep_training_size(_config(train_sizes=[5, 10], size_repetitions=2), data=separable_sessions,
                                  write=False)
        truths = {tuple(t for t, _ in r.predictions) for r in res.rows}
        assert {r.n_test for r in res.rows} == {100}
        assert len(res.rows) == 4 and len(truths) == 1

    def test_noisy_curve_monotone_envelope(self):
        cfg = _config(synth=SynthConfig(seed=3, noise_std=3.0, gestures_per_session=25), synth_sessions=30,
                      train_sizes=[4, 16, 64], size_repetitions=4, test_per_class=60, fixed_n_states=3)
        res = sweep_training_size(cfg, write=False)
        rows = sorted(res.aggregate, key=lambda a: a["train_size"])
        means = np.array([float(a["accuracy_mean"]) for a in rows])
        stds = np.array([float(a["accuracy_std"]) for a in rows])
        envelope = np.maximum.accumulate(means)
        assert np.all(means >= envelope - stds)
        assert means[-1] > means[0]


class TestFolds:
    def test_every_session_tested_once(self, tmp_path):
        res = crossval(_config(tmp_path, synth_sessions=10, folds=5, orders=[0]))
        preds = _read(res.paths["predictions"])
        sessions = {}
        for p in preds:
            sessions.setdefault(p["session_id"], set()).add(p["fold"])
        assert len(sessions) == 10
        assert all(len(f) == 1 for f in sessions.values())
        per_fold = {}
        for sid, folds in sessions.items():
            per_fold.setdefault(folds.pop(), []).append(sid)
        assert sorted(len(v) for v in per_fold.values()) == [2] * 5

    def test_pooled_is_gesture_weighted(self):
        res = crossval(_config(synth_sessions=7, folds=3, orders=[0, 1]), write=False)
        for agg in res.aggregate:
            rows = [r for r in res.rows if r.order == agg["order"]]
            assert len(rows) == 3 and agg["runs"] == 3
            weighted = sum(r.accuracy * r.n_test for r in rows) / sum(r.n_test for r in rows)
            assert float(agg["accuracy_pooled"]) == pytest.approx(weighted, abs=1e-12)

    def test_compare_orders_adds_baseline(self):
        res = compare_orders(_config(orders=[2]), write=False)
        assert sorted({r.order for r in res.rows}) == [0, 2]

    def test_missing_label_in_fold(self):
        cfg = _config(synth=SynthConfig(seed=1, gestures_per_session=2), synth_sessions=3, folds=3)
        with pytest.raises(ValidationError, match="lack labels"):
            crossval(cfg, write=False)


class TestDeterminism:
    def test_byte_identical(self, tmp_path):
        a = crossval(_config(tmp_path / "a", orders=[0, 1]))
        b = crossval(_config(tmp_path / "b", orders=[0, 1]))
        for kind in ("raw", "aggregate", "predictions"):
            assert a.paths[kind].read_bytes() == b.paths[kind].read_bytes()

    def test_workers_do_not_change_results(self, separable_sessions, tmp_path):
        cfg1 = _config(tmp_path / "one", n_states=[2, 3], repetitions=2)
        cfg2 = _config(tmp_path / "two", n_states=[2, 3], repetitions=2, workers=2)
        a = sweep_complexity(cfg1, data=separable_sessions)
        b = sweep_complexity(cfg2, data=separable_sessions)
        assert a.paths["raw"].read_bytes() == b.paths["raw"].read_bytes()
        assert a.paths["aggregate"].read_bytes() == b.paths["aggregate"].read_bytes()

    def test_seed_changes_draws(self, separable_sessions):
        a = sweep_complexity(_config(base_seed=0), data=separable_sessions, write=False)
        b = sweep_complexity(_config(base_seed=1), data=separable_sessions, write=False)
        assert a.rows[0].seed != b.rows[0].seed


@pytest.mark.slow
class TestContextOracles:
    def test_chain_structure_helps(self):
        cfg = _config(synth=chain_config(seed=5, noise_std=4.0, gestures_per_session=25), synth_sessions=80,
                      folds=4, fixed_n_states=5, fixed_n_mix=2, orders=[1], max_iter=50)
        agg = {a["order"]: float(a["accuracy_pooled"]) for a in compare_orders(cfg, write=False).aggregate}
        assert agg[1] - agg[0] >= 0.02

    def test_uniform_chain_neutral(self):
        cfg = _config(synth=SynthConfig(seed=5, noise_std=4.0, gestures_per_session=25), synth_sessions=160,
                      folds=4, fixed_n_states=5, fixed_n_mix=2, orders=[1], max_iter=50)
        agg = {a["order"]: float(a["accuracy_pooled"]) for a in compare_orders(cfg, write=False).aggregate}
        assert abs(agg[1] - agg[0]) <= 0.01
