"""Session ingestion, causal Gaussian smoothing and windowed features.

Sessions are stored as ``(T, 6)`` float arrays with axis order
``x, y, z, yaw, pitch, roll``. Gesture segments are half-open sample
ranges into a session.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

AXES = ("x", "y", "z", "yaw", "pitch", "roll")
N_AXES = len(AXES)
N_FEATURES = 3 * N_AXES

DEFAULT_SAMPLE_RATE = 15.0
DEFAULT_W1 = 9
DEFAULT_W2 = 5


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class ParseError(ValidationError):
    """A session or annotation file could not be parsed."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class GestureLabel(enum.IntEnum):
    """The five gesture types, in canonical order."""

    REST = 0
    UTENSILING = 1
    BITE = 2
    DRINK = 3
    OTHER = 4

    @property
    def token(self) -> str:
        return self.name.lower()

    @property
    def letter(self) -> str:
        return self.name[0]

    @classmethod
    def parse(cls, token: str) -> "GestureLabel":
        try:
            return cls[token.strip().upper()]
        except KeyError:
            raise ValidationError(f"unknown gesture label {token!r}") from None


LABELS = tuple(GestureLabel)
N_LABELS = len(LABELS)


@dataclass(frozen=True)
class SensorSeries:
    """Uniformly sampled 6-axis wrist motion for one eating session."""

    session_id: str
    sample_rate_hz: float
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 2 or samples.shape[1] != N_AXES:
            raise ValidationError(f"samples must have shape (T, {N_AXES}), got {samples.shape}")
        if len(samples) == 0:
            raise ValidationError("series has no samples")
        if not np.all(np.isfinite(samples)):
            raise ValidationError("series contains non-finite samples")
        if not self.sample_rate_hz > 0:
            raise ValidationError("sample_rate_hz must be positive")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return len(self.samples)


@dataclass(frozen=True)
class GestureSegment:
    start_index: int
    end_index: int
    label: GestureLabel

    def __post_init__(self):
        if self.end_index < self.start_index:
            raise ValidationError(f"end before start: [{self.start_index}, {self.end_index})")
        if self.end_index == self.start_index:
            raise ValidationError(f"empty segment at {self.start_index}")
        if self.start_index < 0:
            raise ValidationError(f"negative start index {self.start_index}")

    def __len__(self):
        return self.end_index - self.start_index


@dataclass(frozen=True)
class FeatureSequence:
    """Per-window feature vectors of one gesture, shape ``(n_windows, 18)``."""

    windows: np.ndarray
    label: GestureLabel | None = None

    def __post_init__(self):
        windows = np.atleast_2d(np.asarray(self.windows, dtype=float))
        if windows.shape[0] < 1:
            raise ValidationError("feature sequence needs at least one window")
        windows.setflags(write=False)
        object.__setattr__(self, "windows", windows)

    def __len__(self):
        return len(self.windows)

    @property
    def dim(self) -> int:
        return self.windows.shape[1]


@dataclass(frozen=True)
class ZScoreStats:
    """Per-feature mean and raw (unsubstituted) sample std."""

    mean: np.ndarray
    std: np.ndarray = field(repr=False)

    @property
    def safe_std(self) -> np.ndarray:
        return np.where(self.std == 0, 1.0, self.std)


def validate_segments(segments: Sequence[GestureSegment], length: int):
    prev_end = 0
    for k, seg in enumerate(segments):
        if seg.end_index > length:
            raise ValidationError(f"segment {k} [{seg.start_index}, {seg.end_index}) exceeds series length {length}")
        if seg.start_index < prev_end:
            raise ValidationError(f"segment {k} overlaps or precedes the previous segment")
        prev_end = seg.end_index


def _data_rows(path):
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            yield lineno, next(csv.reader([stripped]))


def read_series(path, session_id: str | None = None, sample_rate_hz: float = DEFAULT_SAMPLE_RATE) -> SensorSeries:
    path = Path(path)
    rows = []
    for lineno, fields in _data_rows(path):
        if len(fields) != N_AXES:
            raise ParseError(path, lineno, f"expected {N_AXES} columns, got {len(fields)}")
        try:
            values = [float(f) for f in fields]
        except ValueError:
            raise ParseError(path, lineno, f"non-numeric field in {fields!r}") from None
        if not all(math.isfinite(v) for v in values):
            raise ParseError(path, lineno, "non-finite value")
        rows.append(values)
    if not rows:
        raise ValidationError(f"{path}: no samples")
    if session_id is None:
        session_id = path.name.split(".")[0]
    return SensorSeries(session_id, sample_rate_hz, np.array(rows))


def read_segments(path) -> list[GestureSegment]:
    path = Path(path)
    segments = []
    for lineno, fields in _data_rows(path):
        if len(fields) != 3:
            raise ParseError(path, lineno, f"expected 3 columns, got {len(fields)}")
        try:
            start, end = int(fields[0]), int(fields[1])
        except ValueError:
            raise ParseError(path, lineno, f"non-integer index in {fields!r}") from None
        try:
            segments.append(GestureSegment(start, end, GestureLabel.parse(fields[2])))
        except ValidationError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return segments


def load_session(series_path, annotation_path, sample_rate_hz: float = DEFAULT_SAMPLE_RATE):
    """Read a session file and its annotation file.

    Returns
    -------
    (SensorSeries, list of GestureSegment)
    """
    series = read_series(series_path, sample_rate_hz=sample_rate_hz)
    segments = read_segments(annotation_path)
    validate_segments(segments, len(series))
    return series, segments


def write_series(path, series: SensorSeries):
    with open(path, "w", newline="") as fh:
        fh.write("# " + ",".join(AXES) + "\n")
        for row in series.samples:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def write_segments(path, segments: Iterable[GestureSegment]):
    with open(path, "w", newline="") as fh:
        fh.write("# start_index,end_index,label\n")
        for seg in segments:
            fh.write(f"{seg.start_index},{seg.end_index},{seg.label.token}\n")


def smoothing_weights(sample_rate_hz: float, width_s: float = 1.0, sigma_s: float = 2.0 / 3.0) -> np.ndarray:
    """Unnormalized causal Gaussian weights indexed by lag (0 = current sample)."""
    width = max(1, int(round(width_s * sample_rate_hz)))
    sigma = sigma_s * sample_rate_hz
    lags = np.arange(width)
    return np.exp(-(lags ** 2) / (2.0 * sigma ** 2))


def gaussian_smooth(series: SensorSeries) -> SensorSeries:
    """Causal Gaussian smoothing over a 1 s window, sigma 2/3 s.

    Near the session start only the available samples are averaged and the
    weights are renormalized over them.
    """
    weights = smoothing_weights(series.sample_rate_hz)
    x = series.samples
    T = len(x)
    out = np.empty_like(x)
    for a in range(N_AXES):
        out[:, a] = np.convolve(x[:, a], weights)[:T]
    norm = np.cumsum(weights)[np.minimum(np.arange(T), len(weights) - 1)]
    out /= norm[:, None]
    return SensorSeries(series.session_id, series.sample_rate_hz, out)


def window_count(length: int, w1: int, w2: int) -> int:
    if length < 1:
        raise ValidationError("empty segment")
    if length < w1:
        return 1
    return 1 + (length - w1) // w2


def window_features(x: np.ndarray, w1: int = DEFAULT_W1, w2: int = DEFAULT_W2) -> np.ndarray:
    """Mean, std (ddof=1) and slope per axis for sliding windows over ``x``.

    ``x`` is a ``(T, 6)`` block of smoothed samples. Windows start every ``w2``
    samples and must fit entirely; a block shorter than ``w1`` yields a single
    window over the whole block.
    """
    if w1 < 2 or not 1 <= w2 <= w1:
        raise ValidationError(f"need w1 >= 2 and 1 <= w2 <= w1, got w1={w1}, w2={w2}")
    x = np.asarray(x, dtype=float)
    T = len(x)
    if T < 1:
        raise ValidationError("empty segment")
    if T < w1:
        mean = x.mean(axis=0)
        std = x.std(axis=0, ddof=1) if T > 1 else np.zeros(x.shape[1])
        slope = (x[-1] - x[0]) / T
        return np.concatenate([mean, std, slope])[None, :]

    starts = np.arange(window_count(T, w1, w2)) * w2
    win = x[starts[:, None] + np.arange(w1)]  # (n_windows, w1, axes)
    mean = win.mean(axis=1)
    std = win.std(axis=1, ddof=1)
    slope = (win[:, -1] - win[:, 0]) / w1
    return np.concatenate([mean, std, slope], axis=1)


def extract_features(series: SensorSeries, segment: GestureSegment,
                     w1: int = DEFAULT_W1, w2: int = DEFAULT_W2) -> FeatureSequence:
    if segment.end_index > len(series):
        raise ValidationError("segment exceeds series length")
    block = series.samples[segment.start_index:segment.end_index]
    return FeatureSequence(window_features(block, w1, w2), segment.label)


def fit_zscore(training_windows) -> ZScoreStats:
    """Pool training windows (an array or an iterable of FeatureSequence) and fit z-score stats."""
    if isinstance(training_windows, np.ndarray):
        X = np.atleast_2d(training_windows)
    else:
        parts = [s.windows if isinstance(s, FeatureSequence) else np.atleast_2d(s) for s in training_windows]
        if not parts:
            raise ValidationError("fit_zscore needs at least 2 windows, got 0")
        X = np.vstack(parts)
    if len(X) < 2:
        raise ValidationError(f"fit_zscore needs at least 2 windows, got {len(X)}")
    # constant columns get an exact 0 rather than a roundoff-sized spread
    std = np.where(np.ptp(X, axis=0) == 0, 0.0, X.std(axis=0, ddof=1))
    return ZScoreStats(X.mean(axis=0), std)


def apply_zscore(stats: ZScoreStats, sequence: FeatureSequence) -> FeatureSequence:
    if sequence.dim != len(stats.mean):
        raise ValidationError(f"feature dimension {sequence.dim} != stats dimension {len(stats.mean)}")
    return FeatureSequence((sequence.windows - stats.mean) / stats.safe_std, sequence.label)


def invert_zscore(stats: ZScoreStats, sequence: FeatureSequence) -> FeatureSequence:
    return FeatureSequence(sequence.windows * stats.safe_std + stats.mean, sequence.label)
