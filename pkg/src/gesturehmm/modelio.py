"""JSON model files holding an HMM bank and, optionally, a sequence model.

Field order is fixed and every float is written with 17 significant digits,
so ``load(dump(x))`` reproduces all parameters bit for bit.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .classifier import BankConfig, HmmBank, derive_seed
from .gmm import FitReport, GaussianMixture
from .hmm import GestureHmm
from .seqmodel import EmissionReport, SequenceModel
from .signal import LABELS, GestureLabel, ValidationError, ZScoreStats

FORMAT = "gesturehmm-model"
VERSION = 1


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValidationError(f"cannot serialize non-finite value {x}")
    return format(x, ".17g")


def _scalar(v) -> str:
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _fmt_float(float(v))
    if isinstance(v, str):
        return json.dumps(v)
    raise TypeError(f"unsupported value {v!r}")


def _encode(obj, indent=0) -> str:
    pad = "  " * (indent + 1)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(obj, (list, tuple)):
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_scalar(v) for v in obj) + "]"
        items = [pad + _encode(v, indent + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + "  " * indent + "]"
    return _scalar(obj)


def _mixture_dict(mix: GaussianMixture) -> dict:
    return {"weights": mix.weights, "means": mix.means, "variances": mix.variances}


def _mixture_from(d) -> GaussianMixture:
    return GaussianMixture(np.array(d["weights"], dtype=float), np.array(d["means"], dtype=float),
                           np.array(d["variances"], dtype=float))


def _hmm_dict(label, hmm: GestureHmm, seed) -> dict:
    report = hmm.report or FitReport()
    return {
        "label": label.token,
        "n_states": hmm.n_states,
        "topology": "left-to-right-skip",
        "pi": hmm.pi,
        "A": hmm.A,
        "states": [_mixture_dict(s) for s in hmm.states],
        "training": {
            "seed": seed,
            "n_iter": report.n_iter,
            "converged": report.converged,
            "final_log_likelihood": report.final_log_likelihood if report.log_likelihoods else None,
            "flags": list(report.flags),
        },
    }


def _hmm_from(d) -> GestureHmm:
    t = d["training"]
    lls = [] if t["final_log_likelihood"] is None else [float(t["final_log_likelihood"])]
    report = FitReport(lls, int(t["n_iter"]), bool(t["converged"]), list(t["flags"]))
    return GestureHmm(np.array(d["pi"], dtype=float), np.array(d["A"], dtype=float),
                      tuple(_mixture_from(s) for s in d["states"]), report)


def bank_to_dict(bank: HmmBank) -> dict:
    c = bank.config
    return {
        "config": {
            "n_states": c.n_states, "n_mix": c.n_mix, "seed": c.seed, "tol": float(c.tol),
            "max_iter": c.max_iter, "w1": c.w1, "w2": c.w2, "normalize_length": c.normalize_length,
        },
        "zscore": {"mean": bank.zscore.mean, "std": bank.zscore.std},
        "models": [_hmm_dict(label, m, derive_seed(c.seed, int(label)))
                   for label, m in zip(LABELS, bank.models)],
    }


def bank_from_dict(d) -> HmmBank:
    c = d["config"]
    config = BankConfig(int(c["n_states"]), int(c["n_mix"]), int(c["seed"]), float(c["tol"]),
                        int(c["max_iter"]), int(c["w1"]), int(c["w2"]), bool(c["normalize_length"]))
    models = [None] * len(LABELS)
    for m in d["models"]:
        models[int(GestureLabel.parse(m["label"]))] = _hmm_from(m)
    if any(m is None for m in models):
        raise ValidationError("model file is missing a gesture model")
    stats = ZScoreStats(np.array(d["zscore"]["mean"], dtype=float), np.array(d["zscore"]["std"], dtype=float))
    return HmmBank(tuple(models), stats, config)


def seqmodel_to_dict(model: SequenceModel) -> dict:
    reduced = {} if model.report is None else {GestureLabel(k).token: v for k, v in model.report.reduced.items()}
    return {
        "order": model.order,
        "observable": model.observable,
        "priors": model.priors,
        "transitions": model.transitions,
        "emissions": [dict(label=label.token, **_mixture_dict(mix)) for label, mix in zip(LABELS, model.emissions)],
        "reduced_mixtures": reduced,
    }


def seqmodel_from_dict(d) -> SequenceModel:
    emissions = [None] * len(LABELS)
    for e in d["emissions"]:
        emissions[int(GestureLabel.parse(e["label"]))] = _mixture_from(e)
    report = EmissionReport({GestureLabel.parse(k): int(v) for k, v in d.get("reduced_mixtures", {}).items()})
    return SequenceModel(int(d["order"]), np.array(d["priors"], dtype=float),
                         np.array(d["transitions"], dtype=float), tuple(emissions), d["observable"], report)


def dumps(bank: HmmBank, sequence_model: SequenceModel | None = None) -> str:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "bank": bank_to_dict(bank),
        "sequence_model": None if sequence_model is None else seqmodel_to_dict(sequence_model),
    }
    return _encode(doc) + "\n"


def loads(text: str):
    """Parse a model document. Returns ``(HmmBank, SequenceModel or None)``."""
    doc = json.loads(text)
    if doc.get("format") != FORMAT:
        raise ValidationError(f"not a {FORMAT} document")
    seq = doc.get("sequence_model")
    return bank_from_dict(doc["bank"]), (None if seq is None else seqmodel_from_dict(seq))


def save_model(path, bank: HmmBank, sequence_model: SequenceModel | None = None):
    Path(path).write_text(dumps(bank, sequence_model))


def load_model(path):
    return loads(Path(path).read_text())
