"""Activity-description corpora and the built-in text encoder: nearby wordings
land nearby in the embedding space, which is what anchors lean on."""

import numpy as np

import privimu as p

classes = ["waving arms", "hammering a nail", "slow strolling"]
corpus = p.templated_corpus(classes, n_per_class=25)
print("corpus:", {name: len(descs) for name, descs in corpus.activities.items()})
print("first three descriptions for 'waving arms':")
for d in corpus.activities["waving arms"][:3]:
    print("  -", d)
print("corpus hash:", p.corpus_hash(corpus)[:16], "...")

issues = p.validate_corpus(corpus, classes + ["juggling"])
print("\nvalidated against a class list that also expects 'juggling':")
for issue in issues:
    print("  !", issue)

encoder = p.FallbackTextEncoder()
print("\nencoder id:", encoder.encoder_id)

pairs = [
    ("waving arms slowly", "waving arms quickly"),
    ("waving arms slowly", "hammering a nail"),
    ("a person slow strolling", "someone slow strolling repeatedly"),
]
print("cosine similarity between wordings:")
for a, b in pairs:
    sim = float(encoder.encode(a) @ encoder.encode(b))
    print(f"  {a!r:35s} vs {b!r:40s} -> {sim:+.3f}")
