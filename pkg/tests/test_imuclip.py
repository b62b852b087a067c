import numpy as np
import pytest
import torch

import privimu as p
from privimu.datasets import IMUWindow
from privimu.imuclip import (
    CheckpointError,
    ClassifyError,
    DegenerateAnchorError,
    SimilarityRanking,
    SupConError,
    TrainConfig,
    TrainingError,
    embed_windows,
    predict_labels,
    supcon_loss,
)
from privimu.model import ModelHyperparams, build_model


from oracles import fd_gradient, forward_oracle, random_unit_batch, supcon_bruteforce


class TestSupConLoss:
    def test_two_identical_same_class_zero_loss(self):
        z = np.array([[1.0, 0.0], [1.0, 0.0]])
        loss, _grad = supcon_loss(z, [0, 0], temperature=1.0)
        assert loss == pytest.approx(0.0, abs=1e-12)

    def test_singleton_class_contributes_zero(self):
        rng = np.random.default_rng(0)
        z, _ = random_unit_batch(rng, 3, 4, 2)
        labels = np.array([0, 0, 1])  # index 2 has no positives
        loss, _ = supcon_loss(z, labels, 0.5)
        assert loss == pytest.approx(supcon_bruteforce(z, labels, 0.5), rel=1e-12)

    def test_matches_bruteforce_and_fd(self):
        rng = np.random.default_rng(42)
        z, labels = random_unit_batch(rng, 4, 6, 2)
        loss, grad = supcon_loss(z, labels, 0.07)
        assert loss == pytest.approx(supcon_bruteforce(z, labels, 0.07), rel=1e-10)
        fd = fd_gradient(z, labels, 0.07)
        assert np.linalg.norm(grad - fd) / np.linalg.norm(fd) <= 1e-4

    def test_no_positive_pairs_rejected(self):
        z = np.eye(3)
        with pytest.raises(SupConError, match="no positive pairs"):
            supcon_loss(z, [0, 1, 2], 0.07)

    def test_batch_of_one_rejected(self):
        with pytest.raises(SupConError):
            supcon_loss(np.ones((1, 3)), [0], 0.07)

    def test_nonnegative_on_random_unit_batches(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            z, labels = random_unit_batch(rng, 6, 8, 3)
            loss, _ = supcon_loss(z, labels, 0.2)
            assert loss >= -1e-12

    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        z, labels = random_unit_batch(rng, 6, 5, 3)
        loss, _ = supcon_loss(z, labels, 0.1)
        perm = rng.permutation(6)
        loss_p, _ = supcon_loss(z[perm], labels[perm], 0.1)
        assert loss_p == pytest.approx(loss, rel=1e-12)


class TestEncodeIMU:
    def tiny_model(self, seed=0):
        hp = ModelHyperparams(
            window_length=2, channels=2, d_model=4, n_heads=2, d_text=8,
            d_shared=6, patch_timesteps=1,
        )
        return hp, build_model(hp, seed=seed)

    def test_deterministic_and_unit_norm(self):
        hp, model = self.tiny_model()
        w = IMUWindow(data=np.array([[0.3, -1.2], [2.0, 0.1]]))
        a = p.encode_imu(w, model)
        b = p.encode_imu(w, model)
        assert np.array_equal(a, b)
        assert abs(np.linalg.norm(a) - 1.0) <= 1e-6

    def test_matches_straight_line_oracle_random_params(self):
        hp, model = self.tiny_model(seed=3)
        state = {k: v.detach().numpy().astype(np.float64) for k, v in model.state_dict().items()}
        w = np.array([[0.5, -0.25], [1.5, 2.0]])
        got = p.encode_imu(IMUWindow(data=w), model)
        want = forward_oracle(w, state, hp)
        assert np.allclose(got, want, atol=1e-5)

    def test_matches_oracle_fixed_params(self):
        # All-ones conv kernel; attention projections zeroed so each block
        # reduces to LayerNorm of its input plus the out-bias.
        hp, model = self.tiny_model(seed=0)
        state = model.state_dict()
        new_state = {}
        for key, value in state.items():
            if key == "encoder.patch.weight":
                new_state[key] = torch.ones_like(value)
            elif ".qkv." in key or ".out." in key:
                new_state[key] = torch.zeros_like(value)
            else:
                new_state[key] = value
        model.load_state_dict(new_state)
        arrays = {k: v.numpy().astype(np.float64) for k, v in new_state.items()}
        w = np.array([[1.0, 2.0], [3.0, -4.0]])
        got = p.encode_imu(IMUWindow(data=w), model)
        want = forward_oracle(w, arrays, hp)
        assert np.allclose(got, want, atol=1e-5)

    def test_shape_mismatch_rejected(self):
        hp, model = self.tiny_model()
        with pytest.raises(Exception, match="does not match"):
            p.encode_imu(IMUWindow(data=np.zeros((3, 2))), model)


class TestAnchors:
    def tiny(self):
        hp = ModelHyperparams(
            window_length=4, channels=2, d_model=4, n_heads=2, d_text=16,
            d_shared=8, patch_timesteps=2,
        )
        model = build_model(hp, seed=1)

        class TinyEncoder:
            encoder_id = "tiny"
            d_text = 16

            def encode(self, text):
                from privimu.corpus import fallback_text_encode

                return fallback_text_encode(text, 16, seed=0).vector

        return model, TinyEncoder()

    def test_single_description_equals_projection(self):
        model, enc = self.tiny()
        corpus = p.DescriptionCorpus(version=1, activities={"a": ["only one"]})
        anchor = p.encode_class_anchor("a", corpus, model, enc)
        t = torch.from_numpy(enc.encode("only one").astype(np.float32)).unsqueeze(0)
        with torch.no_grad():
            expected = model.embed_text(t).squeeze(0).numpy()
        assert np.allclose(anchor, expected, atol=1e-6)

    def test_duplicate_description_idempotent(self):
        model, enc = self.tiny()
        one = p.DescriptionCorpus(version=1, activities={"a": ["walk fast"]})
        two = p.DescriptionCorpus(version=1, activities={"a": ["walk fast", "walk fast"]})
        assert np.allclose(
            p.encode_class_anchor("a", one, model, enc),
            p.encode_class_anchor("a", two, model, enc),
            atol=1e-6,
        )

    def test_three_descriptions_match_bruteforce_mean(self):
        model, enc = self.tiny()
        descs = ["alpha move", "beta move", "gamma move"]
        corpus = p.DescriptionCorpus(version=1, activities={"a": descs})
        anchor = p.encode_class_anchor("a", corpus, model, enc)
        projected = []
        for d in descs:
            t = torch.from_numpy(enc.encode(d).astype(np.float32)).unsqueeze(0)
            with torch.no_grad():
                projected.append(model.embed_text(t).squeeze(0).numpy().astype(np.float64))
        mean = np.mean(projected, axis=0)
        assert np.allclose(anchor, mean / np.linalg.norm(mean), atol=1e-6)

    def test_unknown_class_rejected(self):
        model, enc = self.tiny()
        corpus = p.DescriptionCorpus(version=1, activities={"a": ["x"]})
        with pytest.raises(Exception, match="unknown activity"):
            p.encode_class_anchor("b", corpus, model, enc)

    def test_antipodal_descriptions_degenerate(self):
        model, enc = self.tiny()

        class OppositeEncoder:
            encoder_id = "opp"
            d_text = 16

            def __init__(self):
                self.calls = 0

            def encode(self, text):
                v = np.zeros(16)
                v[0] = 1.0 if text == "plus" else -1.0
                return v

        # Zero the projection bias so opposite inputs project to opposite outputs.
        state = model.state_dict()
        state["text_proj.bias"] = torch.zeros_like(state["text_proj.bias"])
        model.load_state_dict(state)
        corpus = p.DescriptionCorpus(version=1, activities={"a": ["plus", "minus"]})
        with pytest.raises(DegenerateAnchorError, match="degenerate anchor"):
            p.encode_class_anchor("a", corpus, model, OppositeEncoder())


class TestSimilarity:
    def test_identical_anchor_scores_one(self):
        v = np.array([0.6, 0.8])
        ranking = p.similarity(v, {"same": v.copy(), "other": np.array([0.8, -0.6])})
        assert ranking.entries[0] == ("same", pytest.approx(1.0))

    def test_orthogonal_scores_zero(self):
        ranking = p.similarity(np.array([1.0, 0.0]), {"orth": np.array([0.0, 1.0])})
        assert ranking.entries[0][1] == pytest.approx(0.0, abs=1e-12)

    def test_matches_bruteforce_dots(self):
        rng = np.random.default_rng(5)
        v = rng.normal(size=4)
        v /= np.linalg.norm(v)
        anchors = {}
        for name in ("a", "b", "c"):
            u = rng.normal(size=4)
            anchors[name] = u / np.linalg.norm(u)
        ranking = p.similarity(v, anchors)
        scores = {name: float(np.dot(v, u)) for name, u in anchors.items()}
        expected = sorted(scores.items(), key=lambda kv: -kv[1])
        assert [n for n, _ in ranking.entries] == [n for n, _ in expected]
        for (n1, s1), (n2, s2) in zip(ranking.entries, expected):
            assert s1 == pytest.approx(s2, rel=1e-12)

    def test_insertion_order_invariance(self):
        rng = np.random.default_rng(8)
        v = rng.normal(size=3)
        items = [(f"c{i}", rng.normal(size=3)) for i in range(4)]
        r1 = p.similarity(v, dict(items))
        r2 = p.similarity(v, dict(reversed(items)))
        assert r1.entries == r2.entries

    def test_tie_breaks_by_class_index(self):
        v = np.array([1.0, 0.0])
        anchor = np.array([0.0, 1.0])
        ranking = p.similarity(
            v, {"zeta": anchor.copy(), "alpha": anchor.copy()}, class_order=["zeta", "alpha"]
        )
        assert [n for n, _ in ranking.entries] == ["zeta", "alpha"]

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ClassifyError, match="dimension mismatch"):
            p.similarity(np.ones(3), {"a": np.ones(4)})

    def test_empty_anchor_map_rejected(self):
        with pytest.raises(ClassifyError):
            p.similarity(np.ones(3), {})


class TestTopK:
    def ranking(self):
        return SimilarityRanking(entries=[(f"c{i}", 1.0 - 0.1 * i) for i in range(5)])

    def test_full_prefix(self):
        r = self.ranking()
        assert p.top_k(r, 5).entries == r.entries

    def test_k1_is_argmax(self):
        assert p.top_k(self.ranking(), 1).entries == [("c0", 1.0)]

    def test_k3_matches_sort_oracle(self):
        r = self.ranking()
        expected = sorted(r.entries, key=lambda e: -e[1])[:3]
        assert p.top_k(r, 3).entries == expected

    def test_out_of_range_rejected(self):
        with pytest.raises(ClassifyError):
            p.top_k(self.ranking(), 6)
        with pytest.raises(ClassifyError):
            p.top_k(self.ranking(), 0)


class TestTraining:
    def test_loss_descends(self, small_series, small_split, small_corpus, encoder):
        train_w, _ = small_split
        ckpt = p.train(
            train_w, small_corpus, TrainConfig(epochs=5, seed=2), encoder,
            small_series.class_names,
        )
        assert ckpt.train_loss_history[-1] < ckpt.train_loss_history[0]

    def test_seeded_runs_identical(self, small_series, small_split, small_corpus, encoder):
        train_w, _ = small_split
        subset = train_w[:120]
        cfg = TrainConfig(epochs=2, seed=9)
        a = p.train(subset, small_corpus, cfg, encoder, small_series.class_names)
        b = p.train(subset, small_corpus, cfg, encoder, small_series.class_names)
        assert a.train_loss_history == b.train_loss_history
        for key in a.state:
            assert np.array_equal(a.state[key], b.state[key])

    def test_needs_two_classes(self, small_series, small_split, small_corpus, encoder):
        train_w, _ = small_split
        only0 = [w for w in train_w if w.label == 0]
        with pytest.raises(TrainingError, match="at least 2 classes"):
            p.train(only0, small_corpus, TrainConfig(epochs=1), encoder, small_series.class_names)

    def test_corpus_coverage_gap_rejected(self, small_series, small_split, encoder):
        train_w, _ = small_split
        partial = p.templated_corpus(small_series.class_names[:2], 3)
        with pytest.raises(TrainingError, match="does not cover"):
            p.train(train_w, partial, TrainConfig(epochs=1), encoder, small_series.class_names)


class TestClassify:
    def test_single_candidate_always_wins(
        self, small_checkpoint, small_corpus, encoder, test_windows_by_class
    ):
        window = test_windows_by_class[0][0]
        only = small_checkpoint.class_names[3]
        label, ranking = p.classify(window, small_checkpoint, [only], small_corpus, encoder)
        assert label == only
        assert len(ranking.entries) == 1

    def test_never_leaves_candidate_set(
        self, small_checkpoint, small_corpus, encoder, small_split
    ):
        _, test_w = small_split
        cands = small_checkpoint.class_names[1:3]
        for w in test_w[:40]:
            label, _ = p.classify(w, small_checkpoint, cands, small_corpus, encoder)
            assert label in cands

    def test_trained_class_top1(
        self, small_checkpoint, small_corpus, encoder, test_windows_by_class, small_series
    ):
        names = small_series.class_names
        hits = 0
        total = 0
        for cls_id, windows in test_windows_by_class.items():
            for w in windows[:10]:
                label, _ = p.classify(w, small_checkpoint, names, small_corpus, encoder)
                hits += label == names[cls_id]
                total += 1
        assert hits / total >= 0.9

    def test_text_encoder_mismatch_rejected(
        self, small_checkpoint, small_corpus, test_windows_by_class
    ):
        other = p.FallbackTextEncoder(seed=123)
        with pytest.raises(ClassifyError, match="text encoder mismatch"):
            p.classify(
                test_windows_by_class[0][0], small_checkpoint,
                small_checkpoint.class_names, small_corpus, other,
            )

    def test_unknown_candidate_rejected(
        self, small_checkpoint, small_corpus, encoder, test_windows_by_class
    ):
        with pytest.raises(ClassifyError, match="unknown candidate"):
            p.classify(
                test_windows_by_class[0][0], small_checkpoint, ["no such class"],
                small_corpus, encoder,
            )

    def test_embeddings_unit_norm(self, small_checkpoint, small_split):
        _, test_w = small_split
        z = embed_windows(test_w[:16], small_checkpoint)
        assert np.all(np.abs(np.linalg.norm(z, axis=1) - 1.0) <= 1e-6)

    def test_predict_labels_agrees_with_classify(
        self, small_checkpoint, small_corpus, encoder, small_split, small_series
    ):
        _, test_w = small_split
        names = small_series.class_names
        ids = predict_labels(test_w[:20], small_checkpoint, names, small_corpus, encoder)
        for w, idx in zip(test_w[:20], ids):
            label, _ = p.classify(w, small_checkpoint, names, small_corpus, encoder)
            assert label == names[idx]


class TestCheckpointPersistence:
    @pytest.mark.parametrize("suffix", ["dir", "zip"])
    def test_save_load_round_trip(self, small_checkpoint, tmp_path, suffix):
        path = tmp_path / ("ckpt.zip" if suffix == "zip" else "ckpt")
        p.save_checkpoint(small_checkpoint, path)
        loaded = p.load_checkpoint(path)
        assert loaded.class_names == small_checkpoint.class_names
        assert loaded.corpus_hash == small_checkpoint.corpus_hash
        assert loaded.text_encoder_id == small_checkpoint.text_encoder_id
        assert set(loaded.state) == set(small_checkpoint.state)
        for key in loaded.state:
            assert np.array_equal(loaded.state[key], small_checkpoint.state[key])
        assert np.allclose(loaded.normalizer.mean, small_checkpoint.normalizer.mean)

    def test_truncated_tensor_rejected(self, small_checkpoint, tmp_path):
        path = tmp_path / "ckpt"
        p.save_checkpoint(small_checkpoint, path)
        victim = sorted(path.glob("*.bin"))[0]
        victim.write_bytes(victim.read_bytes()[:-8])
        with pytest.raises(CheckpointError, match="corrupt"):
            p.load_checkpoint(path)

    def test_corrupt_zip_rejected(self, tmp_path):
        path = tmp_path / "ckpt.zip"
        path.write_bytes(b"definitely not a zip")
        with pytest.raises(CheckpointError, match="corrupt"):
            p.load_checkpoint(path)

    def test_version_mismatch_rejected(self, small_checkpoint, tmp_path):
        import json

        path = tmp_path / "ckpt"
        p.save_checkpoint(small_checkpoint, path)
        manifest = json.loads((path / "manifest.json").read_text())
        manifest["format_version"] = 99
        (path / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(CheckpointError, match="format_version"):
            p.load_checkpoint(path)

    def test_classify_stable_across_round_trip(
        self, small_checkpoint, small_corpus, encoder, small_split, small_series, tmp_path
    ):
        _, test_w = small_split
        path = tmp_path / "ckpt.zip"
        p.save_checkpoint(small_checkpoint, path)
        loaded = p.load_checkpoint(path)
        names = small_series.class_names
        for w in test_w[:15]:
            before, rank_before = p.classify(w, small_checkpoint, names, small_corpus, encoder)
            after, rank_after = p.classify(w, loaded, names, small_corpus, encoder)
            assert before == after
            assert [n for n, _ in rank_before.entries] == [n for n, _ in rank_after.entries]


class TestAcceptanceLossSweep:
    def test_twenty_random_six_row_batches(self):
        rng = np.random.default_rng(2024)
        for _ in range(20):
            z, labels = random_unit_batch(rng, 6, 8, 3)
            tau = float(rng.uniform(0.05, 1.0))
            loss, grad = supcon_loss(z, labels, tau)
            brute = supcon_bruteforce(z, labels, tau)
            assert abs(loss - brute) / max(abs(brute), 1e-300) <= 1e-10
            fd = fd_gradient(z, labels, tau)
            assert np.linalg.norm(grad - fd) / np.linalg.norm(fd) <= 1e-4
