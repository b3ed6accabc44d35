"""Synthetic eating sessions with exact ground truth.

Each gesture is a per-label motif stretched to a sampled duration plus
i.i.d. Gaussian noise; label order within a session follows a first-order
Markov chain.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .signal import (DEFAULT_SAMPLE_RATE, LABELS, N_AXES, N_LABELS, GestureLabel, GestureSegment, SensorSeries,
                     ValidationError)

BASE_FREQUENCIES = (0.5, 0.75, 1.0, 1.25, 1.5)


@dataclass(frozen=True)
class Motif:
    """Per-axis template over normalized gesture time ``tau`` in [0, 1).

    ``kind="sine"``: ``amplitude * sin(2 pi frequency tau + phase)``.
    ``kind="linear"``: piecewise-linear through ``knots`` (``(K, 6)`` values at
    equally spaced tau from 0 to 1), scaled by ``amplitude``.
    ``offset`` is added per axis. ``render`` multiplies everything by ``scale``.
    """

    kind: str = "sine"
    frequency: float = 1.0
    phase: tuple = (0.0,) * N_AXES
    amplitude: tuple = (1.0,) * N_AXES
    knots: tuple = ()
    offset: tuple = (0.0,) * N_AXES

    def render(self, n_samples: int, scale: float = 1.0) -> np.ndarray:
        tau = (np.arange(n_samples) + 0.5) / n_samples
        amp = np.asarray(self.amplitude, dtype=float)
        if self.kind == "sine":
            phase = np.asarray(self.phase, dtype=float)
            values = np.sin(2 * np.pi * self.frequency * tau[:, None] + phase[None, :])
        elif self.kind == "linear":
            knots = np.asarray(self.knots, dtype=float)
            grid = np.linspace(0.0, 1.0, len(knots))
            values = np.stack([np.interp(tau, grid, knots[:, a]) for a in range(N_AXES)], axis=1)
        else:
            raise ValidationError(f"unknown motif kind {self.kind!r}")
        return scale * (amp[None, :] * values + np.asarray(self.offset, dtype=float)[None, :])


def default_motifs() -> tuple:
    """Five sinusoid bundles with distinct frequency, per-axis phase and offset.

    Label g sits at offset 1 on axis g and 0 elsewhere.
    """
    motifs = []
    for g, f in enumerate(BASE_FREQUENCIES):
        phase = tuple(2 * np.pi * ((0.37 * g + 0.21 * a) % 1.0) for a in range(N_AXES))
        offset = tuple(1.0 if a == g else 0.0 for a in range(N_AXES))
        motifs.append(Motif("sine", f, phase, offset=offset))
    return tuple(motifs)


def uniform_chain() -> np.ndarray:
    return np.full((N_LABELS, N_LABELS), 1.0 / N_LABELS)


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE
    separability: float = 1.0
    noise_std: float = 0.5
    gestures_per_session: int = 20
    durations: tuple = ((30, 75),) * N_LABELS
    transition: tuple = field(default_factory=lambda: tuple(map(tuple, uniform_chain())))
    initial: tuple | None = None
    motifs: tuple = field(default_factory=default_motifs)

    def validate(self):
        P = np.asarray(self.transition, dtype=float)
        if P.shape != (N_LABELS, N_LABELS) or np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1) > 1e-9):
            raise ValidationError("label transition matrix must be 5x5, non-negative and row-stochastic")
        if self.initial is not None:
            p0 = np.asarray(self.initial, dtype=float)
            if p0.shape != (N_LABELS,) or np.any(p0 < 0) or abs(p0.sum() - 1) > 1e-9:
                raise ValidationError("initial label distribution must be a 5-vector summing to 1")
        if self.noise_std < 0:
            raise ValidationError("noise_std must be >= 0")
        if len(self.durations) != N_LABELS or any(lo < 2 or hi < lo for lo, hi in self.durations):
            raise ValidationError("durations must be 5 (min, max) pairs with 2 <= min <= max")
        if len(self.motifs) != N_LABELS:
            raise ValidationError("need one motif per label")
        if self.gestures_per_session < 1:
            raise ValidationError("gestures_per_session must be >= 1")


def sample_labels(config: SynthConfig, n: int, rng) -> list:
    P = np.asarray(config.transition, dtype=float)
    p0 = np.full(N_LABELS, 1.0 / N_LABELS) if config.initial is None else np.asarray(config.initial, dtype=float)
    labels = [int(rng.choice(N_LABELS, p=p0))]
    for _ in range(n - 1):
        labels.append(int(rng.choice(N_LABELS, p=P[labels[-1]])))
    return [GestureLabel(g) for g in labels]


def generate_session(config: SynthConfig, index: int):
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, index]))
    labels = sample_labels(config, config.gestures_per_session, rng)
    blocks, segments, pos = [], [], 0
    for label in labels:
        lo, hi = config.durations[int(label)]
        n = int(rng.integers(lo, hi + 1))
        block = config.motifs[int(label)].render(n, config.separability)
        if config.noise_std > 0:
            block = block + rng.normal(0.0, config.noise_std, size=block.shape)
        blocks.append(block)
        segments.append(GestureSegment(pos, pos + n, label))
        pos += n
    series = SensorSeries(f"synth{index:04d}", config.sample_rate_hz, np.vstack(blocks))
    return series, segments


def generate_corpus(config: SynthConfig, sessions: int) -> list:
    """``sessions`` independent sessions; session k depends only on (config, k)."""
    config.validate()
    return [generate_session(config, k) for k in range(sessions)]


def chain_config(self_prob: float = 0.0, **kwargs) -> SynthConfig:
    """Config whose label chain cycles rest -> utensiling -> bite -> rest.

    Drink and other interrupt the cycle occasionally. ``self_prob`` is mass
    moved onto self-transitions.
    """
    R, U, B, D, O = (int(g) for g in LABELS)
    P = np.zeros((N_LABELS, N_LABELS))
    P[R, U], P[R, D], P[R, O] = 0.8, 0.1, 0.1
    P[U, B], P[U, R] = 0.9, 0.1
    P[B, R], P[B, U] = 0.85, 0.15
    P[D, R], P[D, U] = 0.7, 0.3
    P[O, R], P[O, U] = 0.6, 0.4
    P = (1 - self_prob) * P + self_prob * np.eye(N_LABELS)
    return SynthConfig(transition=tuple(map(tuple, P)), **kwargs)
