"""Bank of five per-gesture HMMs scored by forward log-likelihood."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .hmm import GestureHmm, baum_welch, forward_log_likelihood, forward_log_likelihood_many, init_hmm
from .signal import (DEFAULT_W1, DEFAULT_W2, LABELS, FeatureSequence, GestureLabel, ValidationError,
                     ZScoreStats, apply_zscore, fit_zscore)


def derive_seed(*keys: int) -> int:
    """Stable 32-bit seed from a tuple of non-negative integers."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


@dataclass(frozen=True)
class BankConfig:
    n_states: int
    n_mix: int
    seed: int = 0
    tol: float = 1e-5
    max_iter: int = 50
    w1: int = DEFAULT_W1
    w2: int = DEFAULT_W2
    normalize_length: bool = False


@dataclass(frozen=True, eq=False)
class HmmBank:
    models: tuple
    zscore: ZScoreStats
    config: BankConfig

    def __post_init__(self):
        if len(self.models) != len(LABELS):
            raise ValidationError(f"bank needs {len(LABELS)} models, got {len(self.models)}")
        dims = {m.dim for m in self.models}
        if len(dims) != 1 or dims != {len(self.zscore.mean)}:
            raise ValidationError("bank models and z-score stats disagree on feature dimension")

    def model(self, label: GestureLabel) -> GestureHmm:
        return self.models[int(label)]


def _split_training(train):
    by_label = {label: [] for label in LABELS}
    for item in train:
        if isinstance(item, FeatureSequence):
            seq, label = item, item.label
        else:
            seq, label = item
        if label is None:
            raise ValidationError("training sequence has no label")
        by_label[GestureLabel(label)].append(seq)
    return by_label


def train_bank(train, N: int, M: int, seed: int = 0, tol: float = 1e-5, max_iter: int = 50,
               w1: int = DEFAULT_W1, w2: int = DEFAULT_W2, normalize_length: bool = False) -> HmmBank:
    """Fit z-score stats on all training windows, then one HMM per label.

    ``train`` holds un-normalized ``FeatureSequence`` objects (with labels) or
    ``(FeatureSequence, label)`` pairs.
    """
    by_label = _split_training(train)
    for label, seqs in by_label.items():
        if not seqs:
            raise ValidationError(f"no training sequences for label {label.token!r}")
    stats = fit_zscore([s for seqs in by_label.values() for s in seqs])
    models = []
    for label in LABELS:
        seqs = [apply_zscore(stats, s) for s in by_label[label]]
        hmm = init_hmm(N, M, seqs, seed=derive_seed(seed, int(label)))
        models.append(baum_welch(hmm, seqs, tol=tol, max_iter=max_iter))
    config = BankConfig(N, M, seed, tol, max_iter, w1, w2, normalize_length)
    return HmmBank(tuple(models), stats, config)


def score(bank: HmmBank, gesture: FeatureSequence) -> np.ndarray:
    """Log-likelihood of ``gesture`` under each label's model, canonical order."""
    if len(gesture) == 0:
        raise ValidationError("empty gesture")
    z = apply_zscore(bank.zscore, gesture)
    scores = np.array([forward_log_likelihood(m, z) for m in bank.models])
    if bank.config.normalize_length:
        scores = scores / len(z)
    return scores


def score_many(bank: HmmBank, gestures) -> np.ndarray:
    """``(n, 5)`` scores for many gestures; same values as ``score`` per gesture."""
    gestures = list(gestures)
    if not gestures:
        return np.zeros((0, len(LABELS)))
    z = [apply_zscore(bank.zscore, g) for g in gestures]
    scores = np.stack([forward_log_likelihood_many(m, z) for m in bank.models], axis=1)
    if bank.config.normalize_length:
        scores = scores / np.array([len(g) for g in z])[:, None]
    return scores


def classify_scores(scores) -> GestureLabel:
    """Argmax with ties resolved by canonical label order."""
    scores = np.asarray(scores, dtype=float)
    return GestureLabel(int(np.argmax(scores)))


def classify(bank: HmmBank, gesture: FeatureSequence) -> GestureLabel:
    return classify_scores(score(bank, gesture))


def permute_bank(bank: HmmBank, order) -> HmmBank:
    """Bank whose model at position k is ``bank.models[order[k]]``."""
    return replace(bank, models=tuple(bank.models[i] for i in order))
