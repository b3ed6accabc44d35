import numpy as np
import pytest

from gesturehmm.classifier import train_bank
from gesturehmm.corpus import featurize_corpus
from gesturehmm.signal import LABELS
from gesturehmm.synth import SynthConfig, generate_corpus


def balanced(sessions, per_class):
    """First ``per_class`` gestures of each label, in session order."""
    out = {label: [] for label in LABELS}
    for s in sessions:
        for g in s.gestures:
            if len(out[g.label]) < per_class:
                out[g.label].append(g)
    return [g for label in LABELS for g in out[label]]


@pytest.fixture(scope="session")
def separable_sessions():
    return featurize_corpus(generate_corpus(SynthConfig(seed=1, gestures_per_session=25), 48))


@pytest.fixture(scope="session")
def separable_bank(separable_sessions):
    """N=5, M=2 bank on 100 gestures per class from the first 36 sessions."""
    return train_bank(balanced(separable_sessions[:36], 100), 5, 2, seed=0)


@pytest.fixture(scope="session")
def held_out(separable_sessions):
    return [g for s in separable_sessions[36:] for g in s.gestures]


@pytest.fixture
def rng():
    return np.random.default_rng(0)
