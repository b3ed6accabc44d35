"""Brute-force reference computations, deliberately independent of the package internals."""
import itertools
import math

import numpy as np

from gesturehmm.gmm import GaussianMixture
from gesturehmm.hmm import GestureHmm, topology_mask
from gesturehmm.seqmodel import SequenceModel, transform_scores


def scalar_mixture_logpdf(weights, means, variances, x):
    """log sum_k c_k prod_d N(x_d; mu_kd, var_kd), one scalar term at a time."""
    terms = []
    for c, mu, var in zip(weights, means, variances):
        log_term = math.log(c)
        for xd, m, v in zip(x, mu, var):
            log_term += -0.5 * math.log(2 * math.pi * v) - (xd - m) ** 2 / (2 * v)
        terms.append(log_term)
    top = max(terms)
    return top + math.log(math.fsum(math.exp(t - top) for t in terms))


def emission_table(hmm, X):
    return [[scalar_mixture_logpdf(s.weights, s.means, s.variances, x) for s in hmm.states] for x in X]


def path_log_prob(pi, A, table, path):
    if pi[path[0]] == 0:
        return -math.inf
    lp = math.log(pi[path[0]]) + table[0][path[0]]
    for t in range(1, len(path)):
        a = A[path[t - 1]][path[t]]
        if a == 0:
            return -math.inf
        lp += math.log(a) + table[t][path[t]]
    return lp


def brute_force_forward(hmm, X):
    table = emission_table(hmm, X)
    lps = [path_log_prob(hmm.pi, hmm.A, table, p) for p in itertools.product(range(hmm.n_states), repeat=len(X))]
    top = max(lps)
    return top + math.log(math.fsum(math.exp(lp - top) for lp in lps if lp > -math.inf))


def brute_force_viterbi(hmm, X):
    table = emission_table(hmm, X)
    best, best_path = -math.inf, None
    for p in itertools.product(range(hmm.n_states), repeat=len(X)):
        lp = path_log_prob(hmm.pi, hmm.A, table, p)
        if lp > best:
            best, best_path = lp, p
    return list(best_path), best


def random_mixture(rng, M, D):
    w = rng.dirichlet(np.ones(M))
    w = w / w.sum()
    return GaussianMixture(w, rng.normal(0, 1.5, (M, D)), rng.uniform(0.3, 2.0, (M, D)))


def random_hmm(rng, N, M, D):
    mask = topology_mask(N)
    A = np.zeros((N, N))
    for i in range(N):
        allowed = np.flatnonzero(mask[i])
        A[i, allowed] = rng.dirichlet(np.ones(len(allowed)))
        A[i] /= A[i].sum()
    pi = np.zeros(N)
    pi[0] = 1.0
    return GestureHmm(pi, A, tuple(random_mixture(rng, M, D) for _ in range(N)))


def brute_force_decode(model, scores):
    """Argmax over every compatible context-state path; returns ``(state_path, log-probability)``.

    A compatible path of T states of order n is fixed by a label sequence of
    length n + T - 1; state t is the window ``labels[t:t+n]``.
    """
    n, T = model.order, len(scores)
    obs = transform_scores(scores, model.observable)
    emis = np.array([[scalar_mixture_logpdf(m.weights, m.means, m.variances, o) for m in model.emissions]
                     for o in obs])
    seqs = np.array(list(itertools.product(range(5), repeat=n + T - 1)))
    states = np.zeros((len(seqs), T), dtype=int)
    for k in range(n):
        states = states * 5 + seqs[:, k:k + T]
    with np.errstate(divide="ignore"):
        total = np.log(model.priors)[states[:, 0]]
        for t in range(T):
            total = total + emis[t, seqs[:, t + n - 1]]
            if t > 0:
                total = total + np.log(model.transitions[states[:, t - 1], seqs[:, t + n - 1]])
    best = int(np.argmax(total))
    return [int(q) for q in states[best]], float(total[best])


def random_sequence_model(rng, n, observable="raw", M=2):
    S = 5 ** n
    priors = rng.dirichlet(np.ones(S))
    table = rng.dirichlet(np.ones(5), size=S)
    return SequenceModel(n, priors / priors.sum(), table / table.sum(axis=1, keepdims=True),
                         tuple(random_mixture(rng, M, 5) for _ in range(5)), observable)
