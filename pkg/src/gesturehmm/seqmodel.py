"""Order-n gesture-context HMM over score vectors.

State ``i`` encodes the label tuple ``(g_1, ..., g_n)`` in base 5 with
``g_1`` most significant, so the most recent label is ``i % 5`` and the
successors of ``i`` are ``(i % 5**(n-1)) * 5 + h`` for ``h = 0..4``.
Transitions are stored as a ``(5**n, 5)`` successor table rather than a
dense ``5**n x 5**n`` matrix.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .gmm import GaussianMixture, gmm_fit, logsumexp
from .signal import LABELS, N_LABELS, GestureLabel, ValidationError

MAX_ORDER = 6
EMISSION_MIXTURES = 7
OBSERVABLES = ("window_log_posterior", "log_posterior", "raw")
DEFAULT_OBSERVABLE = "window_log_posterior"


def transform_scores(scores, observable: str = DEFAULT_OBSERVABLE, lengths=None) -> np.ndarray:
    """Map raw HMM-S score vectors to the observables the emission mixtures model.

    ``"log_posterior"`` subtracts the log-sum-exp of each vector (log class
    posteriors under a flat prior). ``"window_log_posterior"`` does the same
    after dividing each vector by its gesture's window count, given in
    ``lengths``. ``"raw"`` leaves the scores unchanged.
    """
    X = np.atleast_2d(np.asarray(scores, dtype=float))
    if observable not in OBSERVABLES:
        raise ValidationError(f"unknown observable {observable!r}; expected one of {OBSERVABLES}")
    if observable == "raw":
        return X
    if observable == "window_log_posterior":
        if lengths is None:
            raise ValidationError("the window_log_posterior observable needs per-gesture window counts")
        lengths = np.asarray(lengths, dtype=float).reshape(-1)
        if lengths.shape != (len(X),) or np.any(lengths < 1):
            raise ValidationError("need one window count >= 1 per score vector")
        X = X / lengths[:, None]
    return X - logsumexp(X, axis=1, keepdims=True)


def _check_order(n):
    if not 1 <= n <= MAX_ORDER:
        raise ValidationError(f"order must be in 1..{MAX_ORDER}, got {n}")


def enumerate_states(n: int):
    """All label n-tuples in lexicographic order plus the compatibility mask.

    The mask is dense ``(5**n, 5**n)`` booleans; avoid calling this for
    large ``n`` when only the tuples are needed (see ``state_tuples``).
    """
    states = state_tuples(n)
    S = len(states)
    mask = np.zeros((S, S), dtype=bool)
    src = np.arange(S)
    for h in range(N_LABELS):
        mask[src, successor_index(src, h, n)] = True
    return states, mask


def state_tuples(n: int) -> list:
    _check_order(n)
    return [tuple(GestureLabel(g) for g in combo) for combo in itertools.product(range(N_LABELS), repeat=n)]


def state_index(labels) -> int:
    idx = 0
    for g in labels:
        idx = idx * N_LABELS + int(g)
    return idx


def successor_index(i, h, n):
    return (np.asarray(i) % N_LABELS ** (n - 1)) * N_LABELS + h


def state_name(labels) -> str:
    return "".join(GestureLabel(g).letter for g in labels)


def _label_arrays(gesture_sequences):
    return [np.array([int(g) for g in seq], dtype=np.intp) for seq in gesture_sequences]


def _ngram_indices(labels, n):
    """Indices of every length-n window of one session."""
    if len(labels) < n:
        return np.zeros(0, dtype=np.intp)
    idx = np.zeros(len(labels) - n + 1, dtype=np.intp)
    for k in range(n):
        idx = idx * N_LABELS + labels[k:len(labels) - n + 1 + k]
    return idx


def transition_counts(gesture_sequences, n: int) -> np.ndarray:
    """Successor counts ``(5**n, 5)``; counting never crosses session boundaries."""
    _check_order(n)
    counts = np.zeros((N_LABELS ** n, N_LABELS))
    for labels in _label_arrays(gesture_sequences):
        if len(labels) < n + 1:
            continue
        src = _ngram_indices(labels[:-1], n)
        np.add.at(counts, (src, labels[n:]), 1)
    return counts


def estimate_transitions(gesture_sequences, n: int) -> np.ndarray:
    """Add-one smoothed successor table: (count(i -> h) + 1) / (count(i) + 5)."""
    counts = transition_counts(gesture_sequences, n)
    table = (counts + 1) / (counts.sum(axis=1, keepdims=True) + N_LABELS)
    return table / table.sum(axis=1, keepdims=True)


def estimate_priors(gesture_sequences, n: int) -> np.ndarray:
    """Add-one smoothed n-gram frequencies over all 5**n states."""
    _check_order(n)
    counts = np.zeros(N_LABELS ** n)
    for labels in _label_arrays(gesture_sequences):
        np.add.at(counts, _ngram_indices(labels, n), 1)
    priors = (counts + 1) / (counts.sum() + N_LABELS ** n)
    return priors / priors.sum()


def dense_transitions(table: np.ndarray, n: int) -> np.ndarray:
    S = N_LABELS ** n
    dense = np.zeros((S, S))
    src = np.arange(S)
    for h in range(N_LABELS):
        dense[src, successor_index(src, h, n)] = table[:, h]
    return dense


@dataclass
class EmissionReport:
    reduced: dict = field(default_factory=dict)


def fit_emissions(scored_training_gestures, seed: int = 0, n_mix: int = EMISSION_MIXTURES,
                  observable: str = DEFAULT_OBSERVABLE):
    """One mixture per true label over that label's (transformed) score vectors.

    Items are ``(scores, label)`` or ``(scores, label, n_windows)``; the
    window count is required by the ``window_log_posterior`` observable.
    A label with fewer than ``n_mix`` vectors gets as many components as it
    has vectors; this is recorded in the returned report.
    """
    by_label = {label: [] for label in LABELS}
    lengths = {label: [] for label in LABELS}
    for item in scored_training_gestures:
        label = GestureLabel(item[1])
        by_label[label].append(np.asarray(item[0], dtype=float))
        lengths[label].append(item[2] if len(item) > 2 else None)
    report = EmissionReport()
    mixtures = []
    for label in LABELS:
        vecs = by_label[label]
        if not vecs:
            raise ValidationError(f"no score vectors for label {label.token!r}")
        m = n_mix
        if len(vecs) < n_mix:
            m = len(vecs)
            report.reduced[label] = m
        lens = None if any(n is None for n in lengths[label]) else lengths[label]
        obs = transform_scores(np.array(vecs), observable, lens)
        mixtures.append(gmm_fit(obs, m, seed=seed + int(label)))
    return tuple(mixtures), report


@dataclass(frozen=True, eq=False)
class SequenceModel:
    order: int
    priors: np.ndarray
    transitions: np.ndarray
    emissions: tuple
    observable: str = DEFAULT_OBSERVABLE
    report: EmissionReport | None = field(default=None, repr=False)

    def __post_init__(self):
        _check_order(self.order)
        if self.observable not in OBSERVABLES:
            raise ValidationError(f"unknown observable {self.observable!r}")
        S = N_LABELS ** self.order
        if self.priors.shape != (S,) or self.transitions.shape != (S, N_LABELS):
            raise ValidationError("priors/transitions do not match the order")
        if len(self.emissions) != N_LABELS:
            raise ValidationError("need one emission mixture per label")
        if abs(self.priors.sum() - 1) > 1e-12 or np.any(np.abs(self.transitions.sum(axis=1) - 1) > 1e-12):
            raise ValidationError("priors and transition rows must sum to 1")

    @property
    def n_states(self) -> int:
        return N_LABELS ** self.order

    def emission_for_state(self, i: int) -> GaussianMixture:
        return self.emissions[i % N_LABELS]

    def label_log_emissions(self, session_scores, lengths=None) -> np.ndarray:
        """``(T, 5)`` log-density of each raw score vector under each label's mixture."""
        X = transform_scores(session_scores, self.observable, lengths)
        return np.stack([mix.log_pdf(X) for mix in self.emissions], axis=1)


def fit_sequence_model(label_sequences, scored_training_gestures, n: int, seed: int = 0,
                       n_mix: int = EMISSION_MIXTURES, observable: str = DEFAULT_OBSERVABLE) -> SequenceModel:
    """Priors and transitions from label sequences, tied emissions from scored gestures."""
    emissions, report = fit_emissions(scored_training_gestures, seed=seed, n_mix=n_mix, observable=observable)
    return SequenceModel(n, estimate_priors(label_sequences, n), estimate_transitions(label_sequences, n),
                         emissions, observable, report)


def _log(a):
    with np.errstate(divide="ignore"):
        return np.log(a)


def decode_states(model: SequenceModel, session_scores, lengths=None):
    """Viterbi over the context states. Returns ``(state_path, log-probability)``.

    ``lengths`` holds each gesture's window count; only the
    ``window_log_posterior`` observable uses it.
    """
    X = np.atleast_2d(np.asarray(session_scores, dtype=float))
    if len(X) == 0:
        raise ValidationError("session has no gestures")
    if not np.all(np.isfinite(X)):
        raise ValidationError("non-finite score vector")
    n = model.order
    S = model.n_states
    rest = N_LABELS ** (n - 1)
    label_ll = model.label_log_emissions(X, lengths)
    state_label = np.arange(S) % N_LABELS
    log_T = _log(model.transitions).reshape(N_LABELS, rest, N_LABELS)

    T = len(X)
    backptr = np.zeros((T, S), dtype=np.intp)
    delta = _log(model.priors) + label_ll[0][state_label]
    for t in range(1, T):
        # predecessor of j=(r, h) is g * rest + r for g in 0..4
        cand = delta.reshape(N_LABELS, rest)[:, :, None] + log_T
        g_best = np.argmax(cand, axis=0)
        best = np.take_along_axis(cand, g_best[None], axis=0)[0]
        backptr[t] = (g_best * rest + np.arange(rest)[:, None]).reshape(S)
        delta = best.reshape(S) + label_ll[t][state_label]
    path = np.empty(T, dtype=np.intp)
    path[-1] = int(np.argmax(delta))
    for t in range(T - 1, 0, -1):
        path[t - 1] = backptr[t, path[t]]
    return path, float(delta[path[-1]])


def decode_session(model: SequenceModel, session_scores, lengths=None) -> list:
    path, _ = decode_states(model, session_scores, lengths)
    return [GestureLabel(int(s) % N_LABELS) for s in path]


def param_count(n: int, D: int = 5, M: int = EMISSION_MIXTURES):
    """(prior, transition, emission, total) parameter counts of an order-n model."""
    if n < 1:
        raise ValidationError("order must be >= 1")
    prior = N_LABELS ** n
    transition = N_LABELS * prior
    emission = 2 * N_LABELS * D * M
    return prior, transition, emission, prior + transition + emission
