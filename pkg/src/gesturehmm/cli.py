"""Command-line entry point: ``gesturehmm <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .classifier import classify_scores, score_many, train_bank
from .corpus import featurize_corpus, featurize_session, ingest, load_corpus, read_toml, write_corpus
from .modelio import load_model, save_model
from .seqmodel import DEFAULT_OBSERVABLE, OBSERVABLES, decode_session, fit_sequence_model
from .signal import DEFAULT_SAMPLE_RATE, LABELS, ValidationError, load_session
from .synth import generate_corpus

log = logging.getLogger("gesturehmm")

SCORE_COLUMNS = [f"score_{label.token}" for label in LABELS]


def _cmd_ingest(args):
    corpus = ingest(args.adapter, args.out)
    log.info("ingested %d sessions into %s", len(corpus), args.out)


def _cmd_synth(args):
    table = read_toml(args.config).get("synth", {}) if args.config else {}
    if args.seed is not None:
        table["seed"] = args.seed
    config = ex.synth_config_from_dict(table)
    corpus = generate_corpus(config, args.sessions)
    write_corpus(args.out, corpus)
    log.info("wrote %d synthetic sessions to %s", len(corpus), args.out)


def _cmd_train(args):
    sessions = featurize_corpus(load_corpus(args.corpus), args.w1, args.w2)
    train = [g for s in sessions for g in s.gestures]
    if args.per_class:
        by = ex.gestures_by_label(sessions)
        rng = np.random.default_rng(args.seed)
        train = [g for label in LABELS for g in
                 (by[label][i] for i in rng.permutation(len(by[label]))[:args.per_class])]
    bank = train_bank(train, args.states, args.mix, seed=args.seed, tol=args.tol, max_iter=args.max_iter,
                      w1=args.w1, w2=args.w2, normalize_length=args.normalize_length)
    seq_model = None
    if args.order:
        scored = [(v, g.label, len(g)) for s in sessions
                  for v, g in zip(score_many(bank, s.gestures), s.gestures)]
        seq_model = fit_sequence_model([s.labels for s in sessions], scored, args.order, seed=args.seed,
                                       observable=args.observable)
    save_model(args.out, bank, seq_model)
    log.info("saved model to %s", args.out)


def _open_out(path):
    return open(path, "w", newline="") if path and path != "-" else sys.stdout


def _session_scores(bank, args):
    series, segments = load_session(args.series, args.segments, args.sample_rate)
    session = featurize_session(series, segments, bank.config.w1, bank.config.w2)
    return session, score_many(bank, session.gestures)


def _cmd_classify(args):
    bank, _ = load_model(args.model)
    session, scores = _session_scores(bank, args)
    fh = _open_out(args.out)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["segment", "true_label", "predicted_label", "n_windows"] + SCORE_COLUMNS)
    for k, (g, v) in enumerate(zip(session.gestures, scores)):
        w.writerow([k, g.label.token if g.label is not None else "", classify_scores(v).token, len(g)]
                   + [repr(float(x)) for x in v])
    if fh is not sys.stdout:
        fh.close()


def read_scores(path):
    """Per-gesture score CSV with ``score_<label>`` columns, optional ``true_label`` and ``n_windows``.

    Returns ``(scores, true_labels, window_counts or None)``.
    """
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or any(c not in rows[0] for c in SCORE_COLUMNS):
        raise ValidationError(f"{path}: expected columns {SCORE_COLUMNS}")
    scores = np.array([[float(r[c]) for c in SCORE_COLUMNS] for r in rows])
    true = [r.get("true_label", "") or "" for r in rows]
    lengths = [int(r["n_windows"]) for r in rows] if "n_windows" in rows[0] else None
    return scores, true, lengths


def _cmd_decode(args):
    bank, seq_model = load_model(args.model)
    if seq_model is None:
        raise ValidationError(f"{args.model} holds no sequence model; train with --order")
    if args.scores:
        scores, true, lengths = read_scores(args.scores)
    else:
        session, scores = _session_scores(bank, args)
        true = [g.label.token for g in session.gestures]
        lengths = [len(g) for g in session.gestures]
    pred = decode_session(seq_model, scores, lengths)
    fh = _open_out(args.out)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["segment", "true_label", "hmm_s_label", "predicted_label"])
    for k, (t, v, p) in enumerate(zip(true, scores, pred)):
        w.writerow([k, t, classify_scores(v).token, p.token])
    if fh is not sys.stdout:
        fh.close()


def _experiment(fn):
    def run(args):
        config = ex.ExperimentConfig.from_toml(args.config)
        if args.out:
            config.output_dir = args.out
        if args.seed is not None:
            config.base_seed = args.seed
        if args.workers is not None:
            config.workers = args.workers
        result = fn(config)
        for path in result.paths.values():
            log.info("wrote %s", path)
    return run


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gesturehmm", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="convert an external dataset layout via an adapter TOML")
    s.add_argument("--adapter", required=True, type=Path)
    s.add_argument("--out", required=True, type=Path)
    s.set_defaults(func=_cmd_ingest)

    s = sub.add_parser("synth", help="write a synthetic corpus directory")
    s.add_argument("--config", type=Path, help="TOML file with a [synth] table")
    s.add_argument("--sessions", type=int, default=20)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True, type=Path)
    s.set_defaults(func=_cmd_synth)

    s = sub.add_parser("train", help="train an HMM bank (and optionally a sequence model)")
    s.add_argument("--corpus", required=True, type=Path)
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--states", type=int, default=13)
    s.add_argument("--mix", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tol", type=float, default=1e-5)
    s.add_argument("--max-iter", type=int, default=50)
    s.add_argument("--w1", type=int, default=9)
    s.add_argument("--w2", type=int, default=5)
    s.add_argument("--per-class", type=int, help="balanced random sample of this many gestures per label")
    s.add_argument("--order", type=int, default=0, help="also fit a context model of this order")
    s.add_argument("--observable", choices=list(OBSERVABLES), default=DEFAULT_OBSERVABLE)
    s.add_argument("--normalize-length", action="store_true")
    s.set_defaults(func=_cmd_train)

    for name, func, helptext in (("classify", _cmd_classify, "score and classify a session's segments"),
                                 ("decode", _cmd_decode, "decode a session with the sequence model")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--model", required=True, type=Path)
        s.add_argument("--series", type=Path)
        s.add_argument("--segments", type=Path)
        s.add_argument("--sample-rate", type=float, default=DEFAULT_SAMPLE_RATE)
        s.add_argument("--out", default="-")
        if name == "decode":
            s.add_argument("--scores", type=Path, help="per-gesture score CSV instead of a session")
        s.set_defaults(func=func)

    for name, fn in (("sweep-complexity", ex.sweep_complexity), ("sweep-size", ex.sweep_training_size),
                     ("compare-orders", ex.compare_orders), ("crossval", ex.crossval)):
        s = sub.add_parser(name, help=fn.__doc__.splitlines()[0])
        s.add_argument("--config", required=True, type=Path)
        s.add_argument("--out", type=Path)
        s.add_argument("--seed", type=int)
        s.add_argument("--workers", type=int)
        s.set_defaults(func=_experiment(fn))
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(message)s")
    if args.command in ("classify",) or (args.command == "decode" and not args.scores):
        if args.series is None or args.segments is None:
            build_parser().error(f"{args.command} needs --series and --segments")
    try:
        args.func(args)
    except ValidationError as exc:
        log.error("error: %s", exc)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
