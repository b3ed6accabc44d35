"""Corpus directories, featurization and the configurable import adapter.

A corpus directory holds ``<id>.series.csv`` / ``<id>.segments.csv`` pairs
and an optional ``corpus.toml`` with ``sample_rate_hz``.
"""
from __future__ import annotations

import re
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .signal import (DEFAULT_SAMPLE_RATE, DEFAULT_W1, DEFAULT_W2, N_AXES, FeatureSequence, GestureLabel,
                     GestureSegment, SensorSeries, ValidationError, extract_features, gaussian_smooth,
                     load_session, validate_segments, write_segments, write_series)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SERIES_SUFFIX = ".series.csv"
SEGMENTS_SUFFIX = ".segments.csv"


def read_toml(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def write_corpus(directory, corpus, sample_rate_hz: float | None = None):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rates = {series.sample_rate_hz for series, _ in corpus}
    rate = sample_rate_hz if sample_rate_hz is not None else (rates.pop() if len(rates) == 1 else DEFAULT_SAMPLE_RATE)
    (directory / "corpus.toml").write_text(f"sample_rate_hz = {float(rate)!r}\n")
    for series, segments in corpus:
        write_series(directory / f"{series.session_id}{SERIES_SUFFIX}", series)
        write_segments(directory / f"{series.session_id}{SEGMENTS_SUFFIX}", segments)


def load_corpus(directory, sample_rate_hz: float | None = None) -> list:
    """All sessions in ``directory``, sorted by session id."""
    directory = Path(directory)
    if sample_rate_hz is None:
        meta = directory / "corpus.toml"
        sample_rate_hz = read_toml(meta).get("sample_rate_hz", DEFAULT_SAMPLE_RATE) if meta.exists() \
            else DEFAULT_SAMPLE_RATE
    corpus = []
    for series_path in sorted(directory.glob("*" + SERIES_SUFFIX)):
        sid = series_path.name[:-len(SERIES_SUFFIX)]
        series, segments = load_session(series_path, directory / f"{sid}{SEGMENTS_SUFFIX}", sample_rate_hz)
        corpus.append((series, segments))
    if not corpus:
        raise ValidationError(f"no sessions found in {directory}")
    return corpus


@dataclass(frozen=True)
class SessionGestures:
    """Raw (un-normalized) feature sequences of one session's gestures, in time order."""

    session_id: str
    gestures: tuple

    @property
    def labels(self) -> list:
        return [g.label for g in self.gestures]


def featurize_session(series: SensorSeries, segments, w1: int = DEFAULT_W1, w2: int = DEFAULT_W2):
    smoothed = gaussian_smooth(series)
    return SessionGestures(series.session_id, tuple(extract_features(smoothed, s, w1, w2) for s in segments))


def featurize_corpus(corpus, w1: int = DEFAULT_W1, w2: int = DEFAULT_W2) -> list:
    return [featurize_session(series, segments, w1, w2) for series, segments in corpus]


# -- import adapter ---------------------------------------------------------

def _split(line, delimiter):
    if delimiter in (None, "", "whitespace"):
        return line.split()
    return [f.strip() for f in line.split(delimiter)]


def _read_table(path, delimiter, skip_rows, comment):
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if lineno <= skip_rows:
                continue
            stripped = line.strip()
            if not stripped or (comment and stripped.startswith(comment)):
                continue
            rows.append((lineno, _split(stripped, delimiter)))
    return rows


def _adapt_series(path, cfg, sample_rate_hz, session_id):
    cols = cfg.get("columns", list(range(N_AXES)))
    scale = np.asarray(cfg.get("scale", [1.0] * N_AXES), dtype=float)
    if len(cols) != N_AXES:
        raise ValidationError(f"series.columns must list {N_AXES} column indices")
    values = []
    for lineno, fields in _read_table(path, cfg.get("delimiter", ","), cfg.get("skip_rows", 0), cfg.get("comment", "#")):
        try:
            values.append([float(fields[c]) for c in cols])
        except (IndexError, ValueError):
            raise ValidationError(f"{path}:{lineno}: cannot read columns {cols}") from None
    return SensorSeries(session_id, sample_rate_hz, np.array(values) * scale)


def _adapt_segments(path, cfg, sample_rate_hz, length):
    start_col, end_col, label_col = cfg.get("columns", [0, 1, 2])
    unit = cfg.get("unit", "sample")
    base = cfg.get("index_base", 0)
    end_inclusive = cfg.get("end_inclusive", False)
    mapping = {str(k): v for k, v in cfg.get("labels", {}).items()}
    unmapped = cfg.get("unmapped", "error")
    segments = []
    for lineno, fields in _read_table(path, cfg.get("delimiter", ","), cfg.get("skip_rows", 0), cfg.get("comment", "#")):
        raw = fields[label_col]
        token = mapping.get(raw, raw if not mapping else None)
        if token is None:
            if unmapped == "skip":
                continue
            raise ValidationError(f"{path}:{lineno}: unmapped label {raw!r}")
        try:
            start, end = float(fields[start_col]), float(fields[end_col])
        except (IndexError, ValueError):
            raise ValidationError(f"{path}:{lineno}: cannot read start/end") from None
        if unit == "seconds":
            start, end = start * sample_rate_hz, end * sample_rate_hz
        elif unit != "sample":
            raise ValidationError(f"unknown annotation unit {unit!r}")
        start_i = int(round(start)) - base
        end_i = int(round(end)) - base + (1 if end_inclusive else 0)
        end_i = min(end_i, length)
        segments.append(GestureSegment(start_i, end_i, GestureLabel.parse(token)))
    segments.sort(key=lambda s: s.start_index)
    validate_segments(segments, length)
    return segments


def ingest(adapter_config, out_dir) -> list:
    """Convert an external dataset layout into a corpus directory.

    ``adapter_config`` is a dict (or TOML path) with keys::

        root = "path/to/raw"            # relative paths resolve against the TOML file
        series_glob = "**/*.txt"
        annotation_pattern = "{stem}.gt"  # relative to each series file's folder
        session_id_pattern = "{stem}"
        sample_rate_hz = 15
        [series]       delimiter, skip_rows, comment, columns (6 indices), scale
        [annotations]  delimiter, skip_rows, comment, columns [start, end, label],
                       unit ("sample" | "seconds"), index_base, end_inclusive,
                       labels (raw token -> label name), unmapped ("error" | "skip")

    Returns the ingested corpus.
    """
    base_dir = Path(".")
    if not isinstance(adapter_config, dict):
        base_dir = Path(adapter_config).parent
        adapter_config = read_toml(adapter_config)
    cfg = adapter_config
    root = base_dir / cfg.get("root", ".")
    rate = float(cfg.get("sample_rate_hz", DEFAULT_SAMPLE_RATE))
    corpus = []
    for series_path in sorted(root.glob(cfg.get("series_glob", "*.csv"))):
        stem = series_path.stem
        ann_path = series_path.parent / cfg.get("annotation_pattern", "{stem}.labels").format(stem=stem)
        if not ann_path.exists():
            continue
        sid = re.sub(r"[^A-Za-z0-9_-]", "_", cfg.get("session_id_pattern", "{stem}").format(
            stem=stem, parent=series_path.parent.name))
        series = _adapt_series(series_path, cfg.get("series", {}), rate, sid)
        segments = _adapt_segments(ann_path, cfg.get("annotations", {}), rate, len(series))
        corpus.append((series, segments))
    if not corpus:
        raise ValidationError(f"adapter matched no session/annotation pairs under {root}")
    write_corpus(out_dir, corpus, rate)
    return corpus
