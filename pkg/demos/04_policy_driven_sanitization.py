"""The privacy loop: a white/black/gray policy drives window replacement, and
changing the policy mid-stream changes behavior immediately, with no
retraining."""

import numpy as np

import privimu as p
from privimu.imuclip import TrainConfig
from privimu.policy import PolicyStore

series = p.generate_synthetic(p.SyntheticConfig(samples_per_class=80, seed=7))
names = series.class_names
windows = p.make_windows(series)
train, test = p.split(windows, 0.8, seed=1)

corpus = p.templated_corpus(names, 25)
encoder = p.FallbackTextEncoder()
checkpoint = p.train(train, corpus, TrainConfig(epochs=12, seed=1), encoder, names)
library = p.build_library(train, names, names, normalizer=checkpoint.normalizer)

policy = p.PrivacyPolicy(
    white=frozenset(names[0:2]),
    black=frozenset(names[2:4]),   # sensitive: suppress these
    gray=frozenset(names[4:6]),    # acceptable replacements
    version=1,
)
print("policy:", {"white": sorted(policy.white), "black": sorted(policy.black),
                  "gray": sorted(policy.gray)})

print("\nsanitizing one window per class:")
for cls_id, name in enumerate(names):
    window = next(w for w in test if w.label == cls_id)
    result = p.sanitize(window, checkpoint, policy, corpus, library, encoder, rng=cls_id)
    line = f"  {name:20s} -> {result.action.value:11s}"
    if result.replacement_class:
        line += f" as {result.replacement_class!r}"
    untouched = np.array_equal(result.output.data, window.data)
    print(line + f"  (bytes untouched: {untouched})")

# Runtime policy flip: the user promotes one black class to white mid-stream.
store = PolicyStore(policy, names)
stream = [w for w in test if w.label == 2][:6]
results = []
gen = p.sanitize_stream(stream, checkpoint, store, corpus, library, encoder, seed=3)
for i, result in enumerate(gen):
    results.append(result)
    if i == 2:
        relaxed = p.PrivacyPolicy(
            white=policy.white | {names[2]},
            black=policy.black - {names[2]},
            gray=policy.gray,
        )
        store.update(relaxed)
        print(f"\npolicy updated after window {i}: {names[2]!r} is white now")

print(f"\nstream of {names[2]!r} windows:")
for i, r in enumerate(results):
    print(f"  window {i}: v{r.policy_version} {r.action.value}")
