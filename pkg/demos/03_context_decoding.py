"""Use the order of gestures within a meal to correct single-gesture mistakes.

The synthetic chain makes some label successions far likelier than others,
so decoding a whole session jointly beats classifying each gesture alone.
"""
import numpy as np

from gesturehmm.classifier import classify_scores, score_many, train_bank
from gesturehmm.corpus import featurize_corpus
from gesturehmm.seqmodel import decode_session, fit_sequence_model
from gesturehmm.synth import chain_config, generate_corpus

sessions = featurize_corpus(generate_corpus(chain_config(seed=5, noise_std=4.0, gestures_per_session=25), 40))
train_sessions, test_sessions = sessions[:30], sessions[30:]

bank = train_bank([g for s in train_sessions for g in s.gestures], N=5, M=2, seed=0)
scored = [(v, g.label, len(g)) for s in train_sessions
          for v, g in zip(score_many(bank, s.gestures), s.gestures)]
model = fit_sequence_model([s.labels for s in train_sessions], scored, 1, seed=0)

alone = joint = total = 0
for s in test_sessions:
    scores = score_many(bank, s.gestures)
    truth = s.labels
    alone += sum(classify_scores(v) == t for v, t in zip(scores, truth))
    joint += sum(p == t for p, t in zip(decode_session(model, scores, [len(g) for g in s.gestures]), truth))
    total += len(truth)
print(f"per-gesture accuracy   {alone / total:.3f}")
print(f"session decoding (n=1) {joint / total:.3f}")
print("learned transition table (rows: previous label):")
print(np.round(model.transitions, 2))
