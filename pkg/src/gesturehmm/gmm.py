"""Diagonal-covariance Gaussian mixtures fitted by EM."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .signal import ValidationError

VAR_FLOOR = 1e-6
LOG_2PI = np.log(2.0 * np.pi)
_MIN_WEIGHT_FRACTION = 1e-10


def logsumexp(a, axis=None, keepdims=False):
    """log(sum(exp(a))) with the maximum shifted out; all -inf slices give -inf."""
    a = np.asarray(a, dtype=float)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    if not keepdims:
        out = np.squeeze(out, axis=axis) if axis is not None else out.reshape(())
    return out


@dataclass
class FitReport:
    log_likelihoods: list = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False
    flags: list = field(default_factory=list)

    @property
    def final_log_likelihood(self):
        return self.log_likelihoods[-1] if self.log_likelihoods else float("nan")


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    """Mixture weights ``(M,)``, means ``(M, D)`` and diagonal variances ``(M, D)``."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    report: FitReport | None = field(default=None, repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        mu = np.atleast_2d(np.asarray(self.means, dtype=float))
        var = np.atleast_2d(np.asarray(self.variances, dtype=float))
        if mu.shape != var.shape or mu.shape[0] != len(w):
            raise ValidationError(f"inconsistent mixture shapes {w.shape}, {mu.shape}, {var.shape}")
        if len(w) < 1:
            raise ValidationError("mixture needs at least one component")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValidationError("mixture weights must be positive and sum to 1")
        if np.any(var <= 0):
            raise ValidationError("variances must be positive")
        for name, arr in (("weights", w), ("means", mu), ("variances", var)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def joint_log_pdf(self, X) -> np.ndarray:
        """log c_k + log N(x_i; mu_k, var_k) as an ``(n, M)`` array."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ValidationError(f"expected dimension {self.dim}, got {X.shape[1]}")
        diff = X[:, None, :] - self.means[None, :, :]
        maha = np.sum(diff * diff / self.variances[None], axis=2)
        log_norm = -0.5 * (self.dim * LOG_2PI + np.sum(np.log(self.variances), axis=1))
        return np.log(self.weights)[None, :] + log_norm[None, :] - 0.5 * maha

    def log_pdf(self, X) -> np.ndarray:
        return logsumexp(self.joint_log_pdf(X), axis=1)

    def same_parameters(self, other: "GaussianMixture") -> bool:
        return (np.array_equal(self.weights, other.weights)
                and np.array_equal(self.means, other.means)
                and np.array_equal(self.variances, other.variances))


def gmm_log_pdf(gmm: GaussianMixture, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) != gmm.dim:
        raise ValidationError(f"expected a vector of length {gmm.dim}, got shape {x.shape}")
    return float(gmm.log_pdf(x[None, :])[0])


def _as_data(data, sample_weight):
    X = np.asarray(data, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    w = np.ones(len(X)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    if w.shape != (len(X),) or np.any(w < 0):
        raise ValidationError("sample_weight must be non-negative with one entry per point")
    return X, w


def weighted_em_update(gmm: GaussianMixture, X, sample_weight=None, var_floor: float = VAR_FLOOR):
    """One EM step on weighted data.

    Returns the updated mixture and the weighted mean log-likelihood of the
    data under the *input* mixture.
    """
    X, w = _as_data(X, sample_weight)
    joint = gmm.joint_log_pdf(X)
    ll = logsumexp(joint, axis=1)
    total = w.sum()
    mean_ll = float(np.dot(w, ll) / total)
    resp = np.exp(joint - ll[:, None]) * w[:, None]
    return _m_step(gmm, X, resp, total, var_floor), mean_ll


def _m_step(gmm, X, resp, total, var_floor):
    nk = resp.sum(axis=0)
    live = nk > _MIN_WEIGHT_FRACTION * total
    weights = np.maximum(nk, _MIN_WEIGHT_FRACTION * total)
    weights = weights / weights.sum()

    means = gmm.means.copy()
    variances = gmm.variances.copy()
    if np.any(live):
        r = resp[:, live]
        mu = (r.T @ X) / nk[live, None]
        diff = X[:, None, :] - mu[None, :, :]
        var = np.einsum("nk,nkd->kd", r, diff * diff) / nk[live, None]
        means[live] = mu
        variances[live] = np.maximum(var, var_floor)
    return GaussianMixture(weights, means, variances)


def _seed_means(X, w, M, rng, flags):
    """k-means++ seeding: each new centre drawn proportional to weight x squared distance."""
    p = w / w.sum()
    centers = [X[rng.choice(len(X), p=p)]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, M):
        score = w * d2
        s = score.sum()
        if s > 0:
            idx = rng.choice(len(X), p=score / s)
        else:
            idx = rng.choice(len(X), p=p)
            if "duplicate_components" not in flags:
                flags.append("duplicate_components")
        centers.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centers)


def init_mixture(data, M: int, seed: int = 0, sample_weight=None, var_floor: float = VAR_FLOOR,
                 flags: list | None = None) -> GaussianMixture:
    X, w = _as_data(data, sample_weight)
    if M < 1:
        raise ValidationError("M must be >= 1")
    if np.count_nonzero(w) < M:
        raise ValidationError(f"need at least M={M} data points, got {np.count_nonzero(w)}")
    rng = np.random.default_rng(seed)
    flags = [] if flags is None else flags
    means = _seed_means(X, w, M, rng, flags)
    mu = np.average(X, axis=0, weights=w)
    var = np.maximum(np.average((X - mu) ** 2, axis=0, weights=w), var_floor)
    return GaussianMixture(np.full(M, 1.0 / M), means, np.tile(var, (M, 1)))


def gmm_fit(data, M: int, seed: int = 0, tol: float = 1e-6, max_iter: int = 200,
            sample_weight=None, var_floor: float = VAR_FLOOR) -> GaussianMixture:
    """Fit a diagonal GMM by EM from a seeded k-means++ start.

    Stops when the mean log-likelihood improves by less than ``tol`` or after
    ``max_iter`` M-steps. The returned mixture carries a ``FitReport`` with
    the per-iteration log-likelihood trace.
    """
    X, w = _as_data(data, sample_weight)
    flags: list = []
    gmm = init_mixture(X, M, seed, w, var_floor, flags)
    report = FitReport(flags=flags)
    for it in range(max_iter + 1):
        joint = gmm.joint_log_pdf(X)
        ll = logsumexp(joint, axis=1)
        report.log_likelihoods.append(float(np.dot(w, ll) / w.sum()))
        if it > 0 and report.log_likelihoods[-1] - report.log_likelihoods[-2] < tol:
            report.converged = True
            break
        if it == max_iter:
            break
        resp = np.exp(joint - ll[:, None]) * w[:, None]
        gmm = _m_step(gmm, X, resp, w.sum(), var_floor)
        report.n_iter += 1
    return GaussianMixture(gmm.weights, gmm.means, gmm.variances, report)
