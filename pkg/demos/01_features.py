"""From raw wrist motion to z-scored window features.

Generates one synthetic session, smooths it, cuts each gesture into
overlapping windows and standardizes the 18 features.
"""
import numpy as np

from gesturehmm.corpus import featurize_corpus
from gesturehmm.signal import apply_zscore, fit_zscore, gaussian_smooth, window_count
from gesturehmm.synth import SynthConfig, generate_corpus

series, segments = generate_corpus(SynthConfig(seed=0, gestures_per_session=8), 1)[0]
print(f"session {series.session_id}: {len(series)} samples at {series.sample_rate_hz} Hz")

smoothed = gaussian_smooth(series)
print("raw vs smoothed spread per axis:")
print(np.round(series.samples.std(axis=0), 2))
print(np.round(smoothed.samples.std(axis=0), 2))

session = featurize_corpus([(series, segments)])[0]
for seg, g in zip(segments, session.gestures):
    n = seg.end_index - seg.start_index
    print(f"{seg.label.token:>10}: {n:3d} samples -> {len(g)} windows (expected {window_count(n, 9, 5)})")

stats = fit_zscore(session.gestures)
z = apply_zscore(stats, session.gestures[0])
print("first gesture, first window after z-scoring:", np.round(z.windows[0, :6], 2))
