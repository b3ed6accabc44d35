"""Left-to-right-with-skip HMMs with Gaussian-mixture emissions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gmm import FitReport, GaussianMixture, gmm_fit, logsumexp, weighted_em_update, VAR_FLOOR
from .signal import FeatureSequence, ValidationError


class NumericalFailureError(ArithmeticError):
    """A training sequence has zero likelihood under the current model."""

    def __init__(self, sequence_index, iteration):
        self.sequence_index = sequence_index
        self.iteration = iteration
        super().__init__(f"sequence {sequence_index} has zero likelihood at iteration {iteration}")


def topology_mask(n_states: int) -> np.ndarray:
    """Allowed transitions i -> i, i+1, i+2, clamped at the last state."""
    if n_states < 1:
        raise ValidationError("need at least one state")
    mask = np.zeros((n_states, n_states), dtype=bool)
    for i in range(n_states):
        mask[i, i:min(i + 3, n_states)] = True
    return mask


def uniform_transitions(n_states: int) -> np.ndarray:
    mask = topology_mask(n_states)
    return mask / mask.sum(axis=1, keepdims=True)


def _log(a):
    with np.errstate(divide="ignore"):
        return np.log(a)


def forward_log(log_pi, log_A, log_B):
    """Log-space forward pass over one sequence.

    Returns the ``(T, N)`` log-alpha table and log P(O).
    """
    T = len(log_B)
    log_alpha = np.empty_like(log_B)
    log_alpha[0] = log_pi + log_B[0]
    for t in range(1, T):
        log_alpha[t] = logsumexp(log_alpha[t - 1][:, None] + log_A, axis=0) + log_B[t]
    return log_alpha, float(logsumexp(log_alpha[-1]))


def viterbi_log(log_pi, log_A, log_B):
    """Most probable path; ties go to the lower state index."""
    T, N = log_B.shape
    backptr = np.zeros((T, N), dtype=np.intp)
    delta = log_pi + log_B[0]
    for t in range(1, T):
        scores = delta[:, None] + log_A
        backptr[t] = np.argmax(scores, axis=0)
        delta = scores[backptr[t], np.arange(N)] + log_B[t]
    path = np.empty(T, dtype=np.intp)
    path[-1] = int(np.argmax(delta))
    for t in range(T - 1, 0, -1):
        path[t - 1] = backptr[t, path[t]]
    return path, float(delta[path[-1]])


@dataclass(frozen=True, eq=False)
class GestureHmm:
    """lambda = (pi, A, B) with one Gaussian mixture per state."""

    pi: np.ndarray
    A: np.ndarray
    states: tuple
    report: FitReport | None = field(default=None, repr=False)

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        A = np.asarray(self.A, dtype=float)
        N = len(pi)
        if A.shape != (N, N) or len(self.states) != N:
            raise ValidationError("pi, A and states disagree on the state count")
        mask = topology_mask(N)
        if np.any(A[~mask] != 0):
            raise ValidationError("transition matrix has mass outside the left-to-right mask")
        if np.any(np.abs(A.sum(axis=1) - 1) > 1e-12):
            raise ValidationError("transition rows must sum to 1")
        if pi[0] != 1 or np.any(pi[1:] != 0):
            raise ValidationError("pi must be one-hot on the first state")
        dims = {s.dim for s in self.states}
        if len(dims) != 1:
            raise ValidationError("all state mixtures must share one dimension")
        pi.setflags(write=False)
        A.setflags(write=False)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "states", tuple(self.states))

    @property
    def n_states(self) -> int:
        return len(self.pi)

    @property
    def dim(self) -> int:
        return self.states[0].dim

    @property
    def mask(self) -> np.ndarray:
        return topology_mask(self.n_states)

    def log_emissions(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ValidationError(f"expected feature dimension {self.dim}, got {X.shape[1]}")
        return np.stack([s.log_pdf(X) for s in self.states], axis=1)


def _windows(sequence) -> np.ndarray:
    if isinstance(sequence, FeatureSequence):
        return sequence.windows
    X = np.atleast_2d(np.asarray(sequence, dtype=float))
    if len(X) == 0:
        raise ValidationError("empty sequence")
    return X


def forward_log_likelihood(hmm: GestureHmm, sequence) -> float:
    X = _windows(sequence)
    _, ll = forward_log(_log(hmm.pi), _log(hmm.A), hmm.log_emissions(X))
    return ll


def viterbi(hmm: GestureHmm, sequence):
    """Return ``(state_path, log P(O, Q*))``."""
    X = _windows(sequence)
    return viterbi_log(_log(hmm.pi), _log(hmm.A), hmm.log_emissions(X))


def init_hmm(N: int, M: int, sequences, seed: int = 0) -> GestureHmm:
    """Uniform masked transitions; state j's mixture fitted on the j-th of N equal time spans."""
    seqs = [_windows(s) for s in sequences]
    if not seqs:
        raise ValidationError("init_hmm needs at least one sequence")
    if N < 1:
        raise ValidationError("N must be >= 1")
    flags = []
    pools = [[] for _ in range(N)]
    for X in seqs:
        T = len(X)
        owner = (np.arange(T) * N) // T
        for j in range(N):
            pools[j].append(X[owner == j])
    everything = np.vstack(seqs)
    states = []
    for j in range(N):
        pool = np.vstack(pools[j])
        if len(pool) < M:
            if "state_pool_fallback" not in flags:
                flags.append("state_pool_fallback")
            pool = everything
        m = M
        if len(pool) < M:
            m = len(pool)
            if "reduced_mixture_size" not in flags:
                flags.append("reduced_mixture_size")
        states.append(gmm_fit(pool, m, seed=seed + j))
    pi = np.zeros(N)
    pi[0] = 1.0
    return GestureHmm(pi, uniform_transitions(N), tuple(states), FitReport(flags=flags))


def _padded(log_b_parts, N):
    lengths = np.array([len(b) for b in log_b_parts])
    S, Tmax = len(lengths), int(lengths.max())
    log_B = np.zeros((S, Tmax, N))
    for s, b in enumerate(log_b_parts):
        log_B[s, :len(b)] = b
    return log_B, lengths


def forward_log_batch(log_pi, log_A, log_B, lengths) -> np.ndarray:
    """Per-sequence log P(O) for right-padded ``(S, Tmax, N)`` emissions."""
    S, Tmax, N = log_B.shape
    log_alpha = log_pi + log_B[:, 0]
    ll = np.empty(S)
    done = lengths == 1
    ll[done] = logsumexp(log_alpha[done], axis=1)
    for t in range(1, Tmax):
        log_alpha = logsumexp(log_alpha[:, :, None] + log_A[None], axis=1) + log_B[:, t]
        done = lengths == t + 1
        if np.any(done):
            ll[done] = logsumexp(log_alpha[done], axis=1)
    return ll


def forward_log_likelihood_many(hmm: GestureHmm, sequences) -> np.ndarray:
    seqs = [_windows(s) for s in sequences]
    if not seqs:
        return np.zeros(0)
    log_B_all = hmm.log_emissions(np.vstack(seqs))
    splits = np.cumsum([len(X) for X in seqs])[:-1]
    log_B, lengths = _padded(np.split(log_B_all, splits), hmm.n_states)
    return forward_log_batch(_log(hmm.pi), _log(hmm.A), log_B, lengths)


def forward_backward_batch(log_pi, log_A, log_B, lengths):
    """Batched log-space forward-backward over right-padded sequences.

    Returns per-sequence log-likelihoods, state posteriors ``(S, Tmax, N)``
    (zero on padding) and expected transition counts summed over the batch.
    """
    S, Tmax, N = log_B.shape
    log_alpha = np.empty((S, Tmax, N))
    log_alpha[:, 0] = log_pi + log_B[:, 0]
    for t in range(1, Tmax):
        log_alpha[:, t] = logsumexp(log_alpha[:, t - 1, :, None] + log_A[None], axis=1) + log_B[:, t]
    last = log_alpha[np.arange(S), lengths - 1]
    ll = logsumexp(last, axis=1)

    log_beta = np.zeros((S, Tmax, N))
    for t in range(Tmax - 2, -1, -1):
        nxt = logsumexp(log_A[None] + (log_B[:, t + 1] + log_beta[:, t + 1])[:, None, :], axis=2)
        log_beta[:, t] = np.where((t < lengths - 1)[:, None], nxt, 0.0)

    valid = np.arange(Tmax)[None, :] < lengths[:, None]
    with np.errstate(invalid="ignore"):
        gamma = np.exp(log_alpha + log_beta - ll[:, None, None])
    gamma = np.where(valid[:, :, None], gamma, 0.0)

    xi = np.zeros((N, N))
    for t in range(Tmax - 1):
        live = t + 1 < lengths
        if not np.any(live):
            break
        term = (log_alpha[live, t, :, None] + log_A[None]
                + (log_B[live, t + 1] + log_beta[live, t + 1])[:, None, :]
                - ll[live, None, None])
        xi += np.exp(term).sum(axis=0)
    return ll, gamma, xi


def baum_welch(hmm: GestureHmm, sequences, tol: float = 1e-5, max_iter: int = 50,
               var_floor: float = VAR_FLOOR) -> GestureHmm:
    """Re-estimate A and the state mixtures over many sequences; pi stays fixed.

    Stops when the mean per-window log-likelihood improves by less than
    ``tol`` or after ``max_iter`` updates. Raises ``NumericalFailureError``
    if any sequence has zero likelihood.
    """
    seqs = [_windows(s) for s in sequences]
    if not seqs:
        raise ValidationError("baum_welch needs at least one sequence")
    X_all = np.vstack(seqs)
    n_windows = len(X_all)
    N = hmm.n_states
    mask = hmm.mask
    log_pi = _log(hmm.pi)
    prior_flags = list(hmm.report.flags) if hmm.report is not None else []
    report = FitReport(flags=prior_flags)

    current = hmm
    for it in range(max_iter + 1):
        log_B_all = current.log_emissions(X_all)
        splits = np.cumsum([len(X) for X in seqs])[:-1]
        log_B, lengths = _padded(np.split(log_B_all, splits), N)
        ll, gamma, xi = forward_backward_batch(log_pi, _log(current.A), log_B, lengths)
        bad = np.flatnonzero(~np.isfinite(ll))
        if len(bad):
            raise NumericalFailureError(int(bad[0]), it)
        report.log_likelihoods.append(float(ll.sum() / n_windows))
        if it > 0 and report.log_likelihoods[-1] - report.log_likelihoods[-2] < tol:
            report.converged = True
            break
        if it == max_iter:
            break

        row = xi.sum(axis=1)
        A = current.A.copy()
        visited = row > 0
        A[visited] = np.where(mask[visited], xi[visited], 0.0) / row[visited, None]
        A /= A.sum(axis=1, keepdims=True)

        occupancy = np.concatenate([g[:n] for g, n in zip(gamma, lengths)])
        states = []
        for j, mix in enumerate(current.states):
            w = occupancy[:, j]
            if w.sum() <= 0:
                states.append(mix)
                continue
            new_mix, _ = weighted_em_update(mix, X_all, w, var_floor)
            states.append(new_mix)
        current = GestureHmm(hmm.pi, A, tuple(states))
        report.n_iter += 1
    return GestureHmm(current.pi, current.A, current.states, report)
