"""Experiment protocols: complexity grid, training-size curve, context orders, cross-validation.

Every cell derives its own seed from ``(base_seed, experiment, cell keys)``,
so results do not depend on worker scheduling. Each experiment writes
``<id>_raw.csv`` and ``<id>_aggregate.csv`` (byte-reproducible) plus
``<id>_timing.csv`` with wall times, which are not reproducible and are
therefore kept out of the result tables.
"""
from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .classifier import classify_scores, derive_seed, score_many, train_bank
from .corpus import featurize_corpus, load_corpus, read_toml
from .seqmodel import DEFAULT_OBSERVABLE, MAX_ORDER, decode_session, fit_sequence_model
from .signal import DEFAULT_W1, DEFAULT_W2, LABELS, N_LABELS, ValidationError
from .synth import SynthConfig, chain_config, generate_corpus

EXPERIMENT_KEYS = {"complexity": 1, "training_size": 2, "orders": 3, "crossval": 4}

RAW_HEADER = ["experiment", "n_states", "n_mix", "train_size", "order", "fold", "repetition", "seed",
              "n_test", "n_correct", "accuracy"] + [f"acc_{l.token}" for l in LABELS]
AGGREGATE_HEADER = ["experiment", "n_states", "n_mix", "train_size", "order", "runs", "n_test", "n_correct",
                    "accuracy_pooled", "accuracy_mean", "accuracy_std"] + [f"acc_{l.token}" for l in LABELS]
TIMING_HEADER = ["experiment", "n_states", "n_mix", "train_size", "order", "fold", "repetition", "wall_time_s"]
PREDICTION_HEADER = ["experiment", "order", "fold", "session_id", "position", "true_label", "predicted_label"]


@dataclass
class ExperimentConfig:
    corpus_dir: str | None = None
    synth: SynthConfig | None = None
    synth_sessions: int = 100
    w1: int = DEFAULT_W1
    w2: int = DEFAULT_W2
    n_states: list = field(default_factory=lambda: list(range(3, 26)))
    n_mix: list = field(default_factory=lambda: list(range(1, 8)))
    train_per_class: int = 650
    test_per_class: int = 650
    train_sizes: list = field(default_factory=lambda: list(range(65, 651, 65)))
    repetitions: int = 5
    size_repetitions: int = 30
    fixed_n_states: int = 13
    fixed_n_mix: int = 5
    orders: list = field(default_factory=lambda: [0, 1])
    folds: int = 5
    base_seed: int = 0
    tol: float = 1e-5
    max_iter: int = 50
    observable: str = DEFAULT_OBSERVABLE
    normalize_length: bool = False
    workers: int = 1
    output_dir: str = "results"

    def validate(self):
        if self.repetitions < 1 or self.size_repetitions < 1:
            raise ValidationError("repetitions must be >= 1")
        if self.folds < 2:
            raise ValidationError("fold count must be >= 2")
        if any(s < 1 for s in self.train_sizes) or self.train_per_class < 1 or self.test_per_class < 1:
            raise ValidationError("sizes must be positive")
        if any(not 0 <= n <= MAX_ORDER for n in self.orders):
            raise ValidationError(f"orders must lie in 0..{MAX_ORDER}")
        if (self.corpus_dir is None) == (self.synth is None):
            raise ValidationError("set exactly one of corpus_dir or synth")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        synth = d.pop("synth", None)
        for key, lo, hi in (("n_states", "n_min", "n_max"), ("n_mix", "m_min", "m_max")):
            if lo in d or hi in d:
                d[key] = list(range(int(d.pop(lo)), int(d.pop(hi)) + 1))
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown experiment config keys: {sorted(unknown)}")
        cfg = cls(**d)
        if synth is not None:
            cfg.synth = synth_config_from_dict(synth)
        return cfg

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        cfg = cls.from_dict(read_toml(path))
        if cfg.corpus_dir is not None and not Path(cfg.corpus_dir).is_absolute():
            cfg.corpus_dir = str(Path(path).parent / cfg.corpus_dir)
        return cfg


def synth_config_from_dict(d: dict) -> SynthConfig:
    """Build a SynthConfig from a TOML table; ``chain = "cycle"`` selects the structured label chain."""
    d = dict(d)
    chain = d.pop("chain", "uniform")
    if "durations" in d:
        d["durations"] = tuple(tuple(int(v) for v in pair) for pair in d["durations"])
    if "transition" in d:
        d["transition"] = tuple(tuple(float(v) for v in row) for row in d["transition"])
    if "initial" in d:
        d["initial"] = tuple(float(v) for v in d["initial"])
    if chain == "cycle":
        return chain_config(d.pop("self_prob", 0.0), **d)
    if chain != "uniform":
        raise ValidationError(f"unknown synthetic chain {chain!r}")
    return SynthConfig(**d)


@dataclass
class ResultRow:
    experiment: str
    n_states: int
    n_mix: int
    train_size: int | str
    order: int | str
    fold: int | str
    repetition: int | str
    seed: int
    n_test: int
    n_correct: int
    accuracy: float
    per_label: tuple
    wall_time: float = 0.0
    predictions: list = field(default_factory=list, repr=False)

    def csv_fields(self) -> list:
        return ([self.experiment, self.n_states, self.n_mix, self.train_size, self.order, self.fold,
                 self.repetition, self.seed, self.n_test, self.n_correct, _num(self.accuracy)]
                + [_num(a) for a in self.per_label])


def _num(x) -> str:
    return "nan" if x != x else repr(float(x))


def accuracy_summary(true, pred):
    """(n_correct, accuracy, per-label accuracy); labels absent from ``true`` give nan."""
    true = np.asarray([int(t) for t in true])
    pred = np.asarray([int(p) for p in pred])
    correct = true == pred
    per = tuple(float(correct[true == k].mean()) if np.any(true == k) else float("nan") for k in range(N_LABELS))
    return int(correct.sum()), float(correct.mean()) if len(true) else float("nan"), per


# -- data ------------------------------------------------------------------

def load_data(config: ExperimentConfig) -> list:
    """Featurized sessions from the corpus directory or the synthetic generator."""
    if config.corpus_dir is not None:
        corpus = load_corpus(config.corpus_dir)
    else:
        corpus = generate_corpus(config.synth, config.synth_sessions)
    return featurize_corpus(corpus, config.w1, config.w2)


def gestures_by_label(sessions) -> dict:
    by = {label: [] for label in LABELS}
    for s in sessions:
        for g in s.gestures:
            by[g.label].append(g)
    return by


def _check_counts(by, needed):
    counts = {label.token: len(v) for label, v in by.items()}
    if any(c < needed for c in counts.values()):
        raise ValidationError(f"need {needed} gestures per label for disjoint sampling, have {counts}")


def sample_train_test(by, train_per_class, test_per_class, seed):
    """Disjoint balanced train/test samples; returns lists of FeatureSequence."""
    _check_counts(by, train_per_class + test_per_class)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for label in LABELS:
        idx = rng.permutation(len(by[label]))
        train += [by[label][i] for i in idx[:train_per_class]]
        test += [by[label][i] for i in idx[train_per_class:train_per_class + test_per_class]]
    return train, test


def assign_folds(n_sessions: int, folds: int, seed: int) -> np.ndarray:
    """Fold index per session: a seeded shuffle dealt round-robin."""
    if n_sessions < folds:
        raise ValidationError(f"{n_sessions} sessions cannot fill {folds} folds")
    perm = np.random.default_rng(seed).permutation(n_sessions)
    fold_of = np.empty(n_sessions, dtype=int)
    fold_of[perm] = np.arange(n_sessions) % folds
    return fold_of


# -- cells -----------------------------------------------------------------

_DATA = None


def _set_data(data):
    global _DATA
    _DATA = data


def _bank(config, train, N, M, seed):
    return train_bank(train, N, M, seed=seed, tol=config.tol, max_iter=config.max_iter,
                      w1=config.w1, w2=config.w2, normalize_length=config.normalize_length)


def _evaluate(experiment, config, N, M, train, test, seed, **keys):
    start = time.perf_counter()
    bank = _bank(config, train, N, M, seed)
    pred = [classify_scores(v) for v in score_many(bank, test)]
    true = [g.label for g in test]
    n_correct, acc, per = accuracy_summary(true, pred)
    return ResultRow(experiment, N, M, keys.get("train_size", len(train) // N_LABELS), keys.get("order", 0),
                     keys.get("fold", ""), keys.get("repetition", ""), seed, len(test), n_correct, acc, per,
                     time.perf_counter() - start, list(zip(true, pred)))


def _complexity_cell(args):
    config, N, M, rep = args
    seed = derive_seed(config.base_seed, EXPERIMENT_KEYS["complexity"], N, M, rep)
    train, test = sample_train_test(gestures_by_label(_DATA), config.train_per_class, config.test_per_class, seed)
    return [_evaluate("complexity", config, N, M, train, test, seed, repetition=rep,
                      train_size=config.train_per_class)]


def _size_cell(args):
    config, size, rep = args
    by = gestures_by_label(_DATA)
    test_seed = derive_seed(config.base_seed, EXPERIMENT_KEYS["training_size"])
    pool, test = sample_train_test(by, max(config.train_sizes), config.test_per_class, test_seed)
    pool_by = {label: [g for g in pool if g.label == label] for label in LABELS}
    seed = derive_seed(config.base_seed, EXPERIMENT_KEYS["training_size"], size, rep)
    rng = np.random.default_rng(seed)
    train = [g for label in LABELS for g in (pool_by[label][i] for i in rng.permutation(len(pool_by[label]))[:size])]
    return [_evaluate("training_size", config, config.fixed_n_states, config.fixed_n_mix, train, test, seed,
                      repetition=rep, train_size=size)]


def _fold_cell(args):
    experiment, config, fold, orders = args
    sessions = _DATA
    fold_of = assign_folds(len(sessions), config.folds, derive_seed(config.base_seed, EXPERIMENT_KEYS[experiment]))
    train_s = [s for s, f in zip(sessions, fold_of) if f != fold]
    test_s = [s for s, f in zip(sessions, fold_of) if f == fold]
    seed = derive_seed(config.base_seed, EXPERIMENT_KEYS[experiment], fold)
    start = time.perf_counter()
    train = [g for s in train_s for g in s.gestures]
    by = gestures_by_label(train_s)
    missing = [label.token for label, v in by.items() if not v]
    if missing:
        raise ValidationError(f"fold {fold} training sessions lack labels {missing}")
    bank = _bank(config, train, config.fixed_n_states, config.fixed_n_mix, seed)
    train_scores = [score_many(bank, s.gestures) for s in train_s]
    test_scores = [score_many(bank, s.gestures) for s in test_s]
    shared = time.perf_counter() - start

    rows = []
    true = [g.label for s in test_s for g in s.gestures]
    where = [(s.session_id, k) for s in test_s for k in range(len(s.gestures))]
    for n in orders:
        t0 = time.perf_counter()
        if n == 0:
            pred = [classify_scores(v) for sc in test_scores for v in sc]
        else:
            scored = [(v, g.label, len(g)) for sc, s in zip(train_scores, train_s) for v, g in zip(sc, s.gestures)]
            model = fit_sequence_model([s.labels for s in train_s], scored, n, seed=seed,
                                       observable=config.observable)
            pred = [p for sc, s in zip(test_scores, test_s)
                    for p in decode_session(model, sc, [len(g) for g in s.gestures])]
        n_correct, acc, per = accuracy_summary(true, pred)
        log = [(sid, pos, t, p) for (sid, pos), t, p in zip(where, true, pred)]
        # train_size stays blank: fold sizes vary, and aggregation groups on it
        rows.append(ResultRow(experiment, config.fixed_n_states, config.fixed_n_mix, "", n, fold, "",
                              seed, len(true), n_correct, acc, per, shared + time.perf_counter() - t0, log))
    return rows


def _run_cells(fn, cells, data, workers):
    if workers <= 1 or len(cells) <= 1:
        _set_data(data)
        return [row for cell in cells for row in fn(cell)]
    with ProcessPoolExecutor(max_workers=workers, initializer=_set_data, initargs=(data,)) as pool:
        return [row for rows in pool.map(fn, cells) for row in rows]


# -- tables ------------------------------------------------------------------

def aggregate(rows) -> list:
    """Group rows by (experiment, N, M, train size, order); pooled and mean accuracy per group."""
    groups = {}
    for r in rows:
        groups.setdefault((r.experiment, r.n_states, r.n_mix, r.train_size, r.order), []).append(r)
    out = []
    for key, rs in groups.items():
        accs = np.array([r.accuracy for r in rs])
        n_test = sum(r.n_test for r in rs)
        n_correct = sum(r.n_correct for r in rs)
        pairs = [q[-2:] for r in rs for q in r.predictions]
        per = (accuracy_summary([t for t, _ in pairs], [p for _, p in pairs])[2] if pairs
               else tuple(float("nan") for _ in LABELS))
        std = float(accs.std(ddof=1)) if len(accs) > 1 else 0.0
        out.append([*key, len(rs), n_test, n_correct, _num(n_correct / n_test if n_test else float("nan")),
                    _num(accs.mean()), _num(std)] + [_num(a) for a in per])
    return out


def write_tables(rows, experiment: str, output_dir) -> dict:
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    paths = {kind: output_dir / f"{experiment}_{kind}.csv" for kind in ("raw", "aggregate", "timing")}
    with open(paths["raw"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RAW_HEADER)
        w.writerows(r.csv_fields() for r in rows)
    with open(paths["aggregate"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_HEADER)
        w.writerows(aggregate(rows))
    with open(paths["timing"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TIMING_HEADER)
        w.writerows([r.experiment, r.n_states, r.n_mix, r.train_size, r.order, r.fold, r.repetition,
                     f"{r.wall_time:.3f}"] for r in rows)
    if rows and rows[0].experiment in ("orders", "crossval"):
        paths["predictions"] = output_dir / f"{experiment}_predictions.csv"
        with open(paths["predictions"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(PREDICTION_HEADER)
            for r in rows:
                w.writerows([r.experiment, r.order, r.fold, sid, pos, t.token, p.token]
                            for sid, pos, t, p in r.predictions)
    return paths


@dataclass
class ExperimentResult:
    rows: list
    paths: dict

    @property
    def aggregate(self) -> list:
        return [dict(zip(AGGREGATE_HEADER, row)) for row in aggregate(self.rows)]


def _finish(rows, experiment, config, write):
    paths = write_tables(rows, experiment, config.output_dir) if write else {}
    return ExperimentResult(rows, paths)


# -- protocols -----------------------------------------------------------------

def sweep_complexity(config: ExperimentConfig, data=None, write: bool = True) -> ExperimentResult:
    """Every (N, M) in the grid, ``repetitions`` balanced train/test draws per cell."""
    config.validate()
    data = load_data(config) if data is None else data
    _check_counts(gestures_by_label(data), config.train_per_class + config.test_per_class)
    cells = [(config, N, M, rep) for N in config.n_states for M in config.n_mix for rep in range(config.repetitions)]
    return _finish(_run_cells(_complexity_cell, cells, data, config.workers), "complexity", config, write)


def sweep_training_size(config: ExperimentConfig, data=None, write: bool = True) -> ExperimentResult:
    """Fixed (N, M); training sets of each size drawn from a pool disjoint from one fixed test set."""
    config.validate()
    data = load_data(config) if data is None else data
    _check_counts(gestures_by_label(data), max(config.train_sizes) + config.test_per_class)
    cells = [(config, size, rep) for size in config.train_sizes for rep in range(config.size_repetitions)]
    return _finish(_run_cells(_size_cell, cells, data, config.workers), "training_size", config, write)


def _fold_experiment(experiment, config, orders, data, write):
    config.validate()
    data = load_data(config) if data is None else data
    assign_folds(len(data), config.folds, 0)
    cells = [(experiment, config, fold, orders) for fold in range(config.folds)]
    rows = _run_cells(_fold_cell, cells, data, config.workers)
    rows.sort(key=lambda r: (orders.index(r.order), r.fold))
    return _finish(rows, experiment, config, write)


def compare_orders(config: ExperimentConfig, data=None, write: bool = True) -> ExperimentResult:
    """Session-level k-fold comparison of HMM-S (order 0) against each context order."""
    orders = sorted(set(config.orders) | {0})
    if any(n > MAX_ORDER for n in orders):
        raise ValidationError(f"order exceeds {MAX_ORDER}")
    return _fold_experiment("orders", config, orders, data, write)


def crossval(config: ExperimentConfig, data=None, write: bool = True) -> ExperimentResult:
    """Session-level k-fold cross-validation of the configured orders."""
    return _fold_experiment("crossval", config, list(config.orders), data, write)
