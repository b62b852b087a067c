"""Train the IMU-text aligner on a small dataset, then classify held-out
windows by similarity to per-class description anchors, including a class the
model saw only 8 times."""

import numpy as np

import privimu as p
from privimu.imuclip import TrainConfig

series = p.generate_synthetic(p.SyntheticConfig(samples_per_class=80, seed=7))
names = series.class_names
windows = p.make_windows(series)
train, test = p.split(windows, 0.8, seed=1)

# Pretend the last class is sensitive: only 8 training examples of it.
train = p.few_shot_subsample(train, {5}, k=8, seed=1)
print(f"training on {len(train)} windows ({names[5]!r} limited to 8 shots)")

corpus = p.templated_corpus(names, 25)
encoder = p.FallbackTextEncoder()
checkpoint = p.train(train, corpus, TrainConfig(epochs=12, seed=1), encoder, names)
print(f"loss: {checkpoint.train_loss_history[0]:.3f} -> {checkpoint.train_loss_history[-1]:.3f}")

hits = {name: [0, 0] for name in names}
for w in test:
    label, ranking = p.classify(w, checkpoint, names, corpus, encoder)
    hits[names[w.label]][1] += 1
    hits[names[w.label]][0] += label == names[w.label]

print("\nper-class top-1 accuracy on held-out windows:")
for name, (ok, n) in hits.items():
    marker = "  (8-shot)" if name == names[5] else ""
    print(f"  {name:20s} {ok / n:5.1%}{marker}")

sample = next(w for w in test if w.label == 5)
_, ranking = p.classify(sample, checkpoint, names, corpus, encoder)
print(f"\nranking for one {names[5]!r} window:")
for cls, score in ranking.entries:
    print(f"  {score:+.3f}  {cls}")

path = "/tmp/privimu_demo_checkpoint.zip"
p.save_checkpoint(checkpoint, path)
reloaded = p.load_checkpoint(path)
label, _ = p.classify(sample, reloaded, names, corpus, encoder)
print(f"\ncheckpoint round-trip to {path}: same answer -> {label == ranking.top1()}")
