"""Run the gateway on localhost and drive it over HTTP: read the policy,
classify and sanitize windows, tighten the policy at runtime, and watch the
metrics move. The WebSocket stream is exercised by the web console in
frontend/ and by tests/test_gateway.py."""

import json
import tempfile
import threading
import time
from pathlib import Path

import numpy as np
import requests
import uvicorn

import privimu as p
from privimu.gateway import GatewayConfig, create_app
from privimu.imuclip import TrainConfig
from privimu.policy import save_policy
from privimu.sanitizer import save_library

workdir = Path(tempfile.mkdtemp(prefix="privimu_gateway_"))
series = p.generate_synthetic(p.SyntheticConfig(samples_per_class=60, seed=7))
names = series.class_names
windows = p.make_windows(series)
train, test = p.split(windows, 0.8, seed=1)

corpus = p.templated_corpus(names, 25)
encoder = p.FallbackTextEncoder()
checkpoint = p.train(train, corpus, TrainConfig(epochs=10, seed=1), encoder, names)
library = p.build_library(train, names, names, normalizer=checkpoint.normalizer)
policy = p.PrivacyPolicy(
    white=frozenset(names[0:4]), black=frozenset(names[4:5]),
    gray=frozenset(names[5:6]), version=1,
)

p.save_checkpoint(checkpoint, workdir / "checkpoint.zip")
p.save_corpus(corpus, workdir / "corpus.json")
save_library(library, workdir / "library.npz")
save_policy(policy, workdir / "policy.json")
print("artifacts in", workdir)

config = GatewayConfig(
    checkpoint_path=str(workdir / "checkpoint.zip"),
    corpus_path=str(workdir / "corpus.json"),
    library_path=str(workdir / "library.npz"),
    policy_path=str(workdir / "policy.json"),
    port=8787,
)
server = uvicorn.Server(uvicorn.Config(create_app(config), host="127.0.0.1",
                                       port=config.port, log_level="warning"))
thread = threading.Thread(target=server.run, daemon=True)
thread.start()
while not server.started:
    time.sleep(0.05)
base = f"http://127.0.0.1:{config.port}/api/v1"
print("gateway up at", base)

print("\npolicy:", requests.get(f"{base}/policy").json())

def wire(w):
    return {"length": w.data.shape[0], "channels": w.data.shape[1],
            "data": w.data.tolist()}

white_w = next(w for w in test if w.label == 0)
black_w = next(w for w in test if w.label == 4)

reply = requests.post(f"{base}/classify", json=wire(black_w)).json()
print("\nclassify a sensitive window; top 3 of the ranking:")
for cls, score in reply["ranking"][:3]:
    print(f"  {score:+.3f}  {cls}")

for label, w in (("white", white_w), ("black", black_w)):
    reply = requests.post(f"{base}/sanitize", json=wire(w)).json()
    print(f"sanitize {label} window -> {reply['action']}"
          + (f" as {reply['replacement']!r}" if reply["replacement"] else ""))

# Tighten the policy at runtime: one more class becomes sensitive.
update = {
    "white": sorted(names[0:3]), "black": sorted(names[3:5]),
    "gray": sorted(names[5:6]), "version": 0,
}
version = requests.put(f"{base}/policy", data=json.dumps(update)).json()["version"]
print(f"\npolicy tightened at runtime (now v{version}): {names[3]!r} is black")
newly_black = next(w for w in test if w.label == 3)
reply = requests.post(f"{base}/sanitize", json=wire(newly_black)).json()
print(f"same model, no retraining: {names[3]!r} window -> {reply['action']}")

print("\nmetrics:", requests.get(f"{base}/metrics").json())
server.should_exit = True
thread.join(timeout=5)
