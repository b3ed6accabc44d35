"""Train one left-to-right HMM per gesture type and classify held-out gestures."""
import numpy as np

from gesturehmm.classifier import classify_scores, score_many, train_bank
from gesturehmm.corpus import featurize_corpus
from gesturehmm.experiments import gestures_by_label, sample_train_test
from gesturehmm.signal import LABELS
from gesturehmm.synth import SynthConfig, generate_corpus

sessions = featurize_corpus(generate_corpus(SynthConfig(seed=1, noise_std=2.0, gestures_per_session=25), 40))
train, test = sample_train_test(gestures_by_label(sessions), 60, 60, seed=0)

bank = train_bank(train, N=5, M=2, seed=0)
scores = score_many(bank, test)
pred = [classify_scores(v) for v in scores]

confusion = np.zeros((5, 5), dtype=int)
for g, p in zip(test, pred):
    confusion[LABELS.index(g.label), LABELS.index(p)] += 1
print("rows: true label, columns: predicted")
print("            " + " ".join(f"{l.token:>10}" for l in LABELS))
for label, row in zip(LABELS, confusion):
    print(f"{label.token:>10}  " + " ".join(f"{c:10d}" for c in row))
print(f"accuracy {np.trace(confusion) / confusion.sum():.3f}")
