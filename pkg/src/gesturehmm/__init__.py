"""Eating-gesture recognition with per-gesture HMMs and a gesture-context HMM."""

from .signal import (GestureLabel, GestureSegment, SensorSeries, FeatureSequence, ZScoreStats, ValidationError,
                     load_session, gaussian_smooth, extract_features, fit_zscore, apply_zscore)
from .gmm import GaussianMixture, gmm_fit, gmm_log_pdf
from .hmm import GestureHmm, init_hmm, baum_welch, forward_log_likelihood, viterbi
from .classifier import HmmBank, train_bank, score, classify
from .seqmodel import (SequenceModel, enumerate_states, estimate_transitions, estimate_priors, fit_emissions,
                       fit_sequence_model, decode_session, param_count)
from .synth import SynthConfig, generate_corpus

__version__ = "0.1.0"
