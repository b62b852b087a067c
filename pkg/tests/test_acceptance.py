"""Acceptance suite: property checks plus desk-scale directional reproduction
on the built-in synthetic dataset (6 classes, 500 windows/class, seeds 1-3).

Each criterion prints one PASS/FAIL line (run with `pytest -s` or `-v` to see
them). Heavy artifacts are trained once in module-scoped fixtures and shared;
the epoch budget is reduced below the desk default to keep the whole suite
near the 15-minute target on a small CPU (thresholds unchanged).
"""

from __future__ import annotations

import json
import threading

import numpy as np
import pytest
from fastapi.testclient import TestClient

import privimu as p
from oracles import fd_gradient, random_unit_batch, supcon_bruteforce
from privimu.evaluation import (
    DeskScaleConfig,
    description_ablation,
    few_shot_curve,
    run_dynamic_experiment,
    run_transform_experiment,
)
from privimu.gateway import GatewayConfig, create_app
from privimu.imuclip import supcon_loss
from privimu.policy import PolicyError, PolicyStore, save_policy
from privimu.sanitizer import Action, save_library

SEEDS = (1, 2, 3)
DESK = DeskScaleConfig(imuclip_epochs=20, adversary_epochs=15)
ABLATION_DESK = DeskScaleConfig(imuclip_epochs=25, adversary_epochs=15)


def report(name: str, ok: bool, detail: str = ""):
    print(f"\n{'PASS' if ok else 'FAIL'}: {name}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def series():
    return p.generate_synthetic(p.SyntheticConfig())


@pytest.fixture(scope="module")
def names(series):
    return series.class_names


@pytest.fixture(scope="module")
def policy(names):
    return p.PrivacyPolicy(
        white=frozenset(names[0:2]),
        black=frozenset(names[2:4]),
        gray=frozenset(names[4:6]),
        version=1,
    )


@pytest.fixture(scope="module")
def shared_cache():
    return {}


@pytest.fixture(scope="module")
def static_results(series, policy, shared_cache):
    return run_transform_experiment(
        series, policy, k_list=(64,), seeds=SEEDS, desk=DESK, cache=shared_cache
    )


@pytest.fixture(scope="module")
def dynamic_results(series, names, policy, shared_cache):
    return run_dynamic_experiment(
        series,
        policy,
        inference_gray_override=frozenset(names[0:2]),
        seeds=SEEDS,
        desk=DESK,
        cache=shared_cache,
    )


@pytest.fixture(scope="module")
def fewshot_results(series, names):
    return few_shot_curve(
        series, ks=(0, 1, 4, 8, 32, 64), seeds=(1,),
        held_out_classes=(names[2],), desk=DESK,
    )


@pytest.fixture(scope="module")
def ablation_results(series, names):
    return description_ablation(
        series, n_desc=(1, 25, 50, 75, 100), k=8, seeds=SEEDS,
        held_out_classes=(names[0],), desk=ABLATION_DESK,
    )


def test_criterion_loss_correctness():
    """supcon loss matches brute force to 1e-10; gradients match central FD."""
    rng = np.random.default_rng(2024)
    worst_loss = 0.0
    worst_grad = 0.0
    for _ in range(20):
        z, labels = random_unit_batch(rng, 6, 8, 3)
        tau = float(rng.uniform(0.05, 1.0))
        loss, grad = supcon_loss(z, labels, tau)
        brute = supcon_bruteforce(z, labels, tau)
        worst_loss = max(worst_loss, abs(loss - brute) / abs(brute))
        fd = fd_gradient(z, labels, tau)
        worst_grad = max(worst_grad, np.linalg.norm(grad - fd) / np.linalg.norm(fd))
    ok = worst_loss <= 1e-10 and worst_grad <= 1e-4
    report(
        "loss correctness (20 random 6-row batches)",
        ok,
        f"max loss rel err {worst_loss:.2e}, max grad rel err {worst_grad:.2e}",
    )


def test_criterion_before_transformation_utility(static_results):
    """Adversary and aligner both reach macro-F1 >= 0.90 on clean test data."""
    adv_scores = []
    clip_scores = []
    for seed in SEEDS:
        cell = static_results["seeds"][seed]
        adv_scores.append(float(np.mean(list(cell["before"].per_class.values()))))
        clip_scores.append(cell["imuclip_macro_f1"][64])
    ok = all(s >= 0.90 for s in adv_scores) and all(s >= 0.90 for s in clip_scores)
    report(
        "before-transformation utility",
        ok,
        f"adversary macro-F1 {[f'{s:.3f}' for s in adv_scores]}, "
        f"classify macro-F1 {[f'{s:.3f}' for s in clip_scores]}",
    )


def test_criterion_static_transformation(static_results):
    """k=64: black <= 0.05, gray >= 0.85, white within 0.03 of before, all seeds."""
    details = []
    ok = True
    for seed in SEEDS:
        cell = static_results["seeds"][seed]
        before_white = cell["before"].groups["white"]
        after = cell["after"][64].groups
        seed_ok = (
            after["black"] <= 0.05
            and after["gray"] >= 0.85
            and abs(after["white"] - before_white) <= 0.03
        )
        ok = ok and seed_ok
        details.append(
            f"seed {seed}: black {after['black']:.3f}, gray {after['gray']:.3f}, "
            f"white {after['white']:.3f} (before {before_white:.3f})"
        )
    report("static transformation (published-table analogue)", ok, "; ".join(details))


def test_criterion_few_shot_trend(fewshot_results):
    """Detection F1 non-decreasing in k within a 0.05 band; k=8 F1 >= 0.80."""
    ks = fewshot_results["ks"]
    f1 = fewshot_results["mean_f1"]
    band_ok = all(
        f1[i] >= max(f1[: i + 1]) - 0.05 for i in range(len(f1))
    )
    k8 = f1[ks.index(8)]
    ok = band_ok and k8 >= 0.80
    report(
        "few-shot detection trend",
        ok,
        "curve " + ", ".join(f"k={k}:{v:.3f}" for k, v in zip(ks, f1)),
    )


def test_criterion_dynamic_privacy(dynamic_results):
    """Post-training gray override: ours >= 0.85, RAE <= 0.10, gap >= 0.5."""
    details = []
    ok = True
    for seed in SEEDS:
        cell = dynamic_results["seeds"][seed]
        ours = cell["ours_replacement_f1"]
        rae = cell["rae_replacement_f1"]
        seed_ok = ours >= 0.85 and rae <= 0.10 and ours - rae >= 0.5
        ok = ok and seed_ok
        details.append(f"seed {seed}: ours {ours:.3f}, rae {rae:.3f}")
    report("dynamic privacy (gray-set override)", ok, "; ".join(details))


def test_criterion_description_ablation(ablation_results):
    """F1@100 descriptions >= F1@1; non-negative Spearman trend on every seed."""
    details = []
    ok = True
    for seed in SEEDS:
        scores = ablation_results["f1_per_seed"][seed]
        rho = ablation_results["spearman_per_seed"][seed]
        seed_ok = scores[-1] >= scores[0] and rho >= 0.0
        ok = ok and seed_ok
        details.append(
            f"seed {seed}: F1@1 {scores[0]:.3f} -> F1@100 {scores[-1]:.3f}, rho {rho:.2f}"
        )
    report("description-count ablation", ok, "; ".join(details))


def test_criterion_algorithm1_identity(static_results, policy, names):
    """Non-black top-1 passes through bit-identical; every replacement is gray."""
    checked = 0
    violations = 0
    for seed in SEEDS:
        cell = static_results["seeds"][seed]
        for window, result in zip(cell["test_windows"], cell["sanitized"][64]):
            checked += 1
            if p.categorize(result.detected_top1, policy) is not p.Category.BLACK:
                if result.action is not Action.PASSTHROUGH or not np.array_equal(
                    result.output.data, window.data
                ):
                    violations += 1
            else:
                if (
                    result.action is not Action.REPLACED
                    or result.replacement_class not in policy.gray
                ):
                    violations += 1
    ok = violations == 0
    report(
        "replacement-algorithm identity",
        ok,
        f"{checked} windows checked across {len(SEEDS)} seeds, {violations} violations",
    )


def test_criterion_policy_atomicity():
    """1 writer + 8 readers, 10k reads: only complete snapshots, monotone versions."""
    known = {f"c{i}" for i in range(6)}
    classes = sorted(known)
    store = PolicyStore(p.PrivacyPolicy(white=frozenset({"c0"})), known)

    def writer():
        for i in range(300):
            white = frozenset(classes[: 1 + i % 3])
            black = frozenset(classes[3 : 3 + i % 2])
            gray = frozenset(classes[5:]) if black else frozenset()
            try:
                store.update(p.PrivacyPolicy(white=white, black=black, gray=gray))
            except PolicyError:
                pass

    observations = [[] for _ in range(8)]

    def reader(slot):
        for _ in range(1250):
            snap = store.current
            observations[slot].append((snap.white, snap.black, snap.gray, snap.version))

    threads = [threading.Thread(target=writer)] + [
        threading.Thread(target=reader, args=(i,)) for i in range(8)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    history = {v: (pol.white, pol.black, pol.gray, pol.version) for v, pol, _ in store.history()}
    reads = 0
    stale = 0
    monotone = True
    for slot_obs in observations:
        versions = [v for *_rest, v in slot_obs]
        monotone = monotone and versions == sorted(versions)
        for obs in slot_obs:
            reads += 1
            if obs != history[obs[3]]:
                stale += 1
    ok = reads == 10_000 and stale == 0 and monotone
    report(
        "policy atomicity stress",
        ok,
        f"{reads} reads, {stale} torn, versions monotone={monotone}",
    )


def test_criterion_gateway_contract(
    tmp_path, small_series, small_checkpoint, small_corpus, small_library, small_policy,
    test_windows_by_class,
):
    """HTTP/WS conformance: shapes, error codes, mid-stream policy switchover."""
    ckpt = tmp_path / "ckpt.zip"
    corpus_path = tmp_path / "corpus.json"
    library_path = tmp_path / "library.npz"
    policy_path = tmp_path / "policy.json"
    p.save_checkpoint(small_checkpoint, ckpt)
    p.save_corpus(small_corpus, corpus_path)
    save_library(small_library, library_path)
    save_policy(small_policy, policy_path)
    config = GatewayConfig(
        checkpoint_path=str(ckpt), corpus_path=str(corpus_path),
        library_path=str(library_path), policy_path=str(policy_path), seed=3,
    )
    names = small_series.class_names
    failures = []

    def check(cond, label):
        if not cond:
            failures.append(label)

    app = create_app(config)
    with TestClient(app) as client:
        got = client.get("/api/v1/policy").json()
        check(got["version"] == small_policy.version, "policy GET version")

        bad = {"white": [names[0]], "black": [names[0]], "gray": [names[4]], "version": 0}
        resp = client.put("/api/v1/policy", content=json.dumps(bad))
        check(resp.status_code == 400 and "errors" in resp.json(), "invalid PUT 400")
        check(
            client.get("/api/v1/policy").json()["version"] == small_policy.version,
            "version unchanged after rejected PUT",
        )

        white_w = test_windows_by_class[0][0]
        black_w = test_windows_by_class[2][0]

        def wire(w):
            return {
                "length": w.data.shape[0], "channels": w.data.shape[1],
                "data": w.data.tolist(),
            }

        malformed = wire(white_w)
        malformed["channels"] += 1
        resp = client.post("/api/v1/classify", json=malformed)
        check(resp.status_code == 422, "shape mismatch 422")

        resp = client.post("/api/v1/classify", json=wire(white_w)).json()
        scores = [s for _, s in resp["ranking"]]
        check(scores == sorted(scores, reverse=True), "ranking sorted")

        resp = client.post("/api/v1/sanitize", json=wire(white_w)).json()
        check(resp["action"] == "passthrough", "white passthrough")
        check(np.allclose(np.asarray(resp["window"]["data"]), white_w.data),
              "passthrough echoes data")

        resp = client.post("/api/v1/sanitize", json=wire(black_w)).json()
        if resp["action"] == "replaced":
            check(resp["replacement"] in small_policy.gray, "replacement in gray")

        with client.websocket_connect("/api/v1/stream") as ws:
            for seq in (1, 2):
                ws.send_json({"seq": seq, "window": wire(white_w)})
                reply = ws.receive_json()
                check(reply["seq"] == seq, f"stream order seq {seq}")
                v_before = reply["policy_version"]
            update = {
                "white": sorted(names[0:2]), "black": sorted(names[2:4]),
                "gray": sorted(names[4:6]), "version": 0,
            }
            put = client.put("/api/v1/policy", content=json.dumps(update))
            check(put.status_code == 200, "valid PUT 200")
            for seq in (3, 4, 5):
                ws.send_json({"seq": seq, "window": wire(white_w)})
                reply = ws.receive_json()
                check(reply["seq"] == seq, f"stream order seq {seq}")
                check(reply["policy_version"] == v_before + 1, f"switchover seq {seq}")

        metrics = client.get("/api/v1/metrics").json()
        check(metrics["windows_seen"] >= 7, "windows_seen counted")
        check(metrics["windows_replaced"] <= metrics["windows_seen"], "counter sanity")

        acts = client.get("/api/v1/activities").json()
        check([a["name"] for a in acts] == names, "activities list")

    ok = not failures
    report("gateway HTTP/WS contract", ok, "all checks" if ok else f"failed: {failures}")
