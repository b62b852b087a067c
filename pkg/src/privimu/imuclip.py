"""Contrastive IMU-text alignment: supervised contrastive loss, class anchors,
similarity ranking, training, and checkpoint persistence.

The shared space holds unit-norm vectors from both modalities; a class anchor
is the renormalized mean of the projected embeddings of that class's
descriptions, and classification is cosine similarity against anchors.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .corpus import DescriptionCorpus, TextEncoder
from .datasets import (
    IMUWindow,
    Normalizer,
    apply_normalizer,
    fit_normalizer,
    window_labels,
)
from .model import IMUClipModel, ModelHyperparams, build_model

CHECKPOINT_FORMAT_VERSION = 1


class SupConError(ValueError):
    """Invalid batch for the supervised contrastive loss."""


class TrainingError(RuntimeError):
    """Training preconditions violated or training diverged."""


class ClassifyError(ValueError):
    """Invalid classification request (unknown class, encoder mismatch, shape)."""


class DegenerateAnchorError(ValueError):
    """Anchor mean collapsed to (near) zero norm."""


class CheckpointError(RuntimeError):
    """Unreadable, corrupt, or version-incompatible checkpoint."""


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    lr_imu: float = 1e-3
    lr_text_projection: float = 1e-3
    temperature: float = 0.07
    weight_decay: float = 0.01
    seed: int = 0
    d_model: int = 64
    n_heads: int = 4
    d_shared: int = 512
    patch_timesteps: int = 4

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


@dataclass
class SimilarityRanking:
    """Classes ordered by descending cosine score; ties resolved by class index."""

    entries: list[tuple[str, float]]
    query_id: int | None = None

    def top1(self) -> str:
        return self.entries[0][0]

    def scores(self) -> dict[str, float]:
        return dict(self.entries)


@dataclass
class Checkpoint:
    """Everything inference needs: parameters, normalizer, class list, corpus hash."""

    hyperparams: ModelHyperparams
    state: dict[str, np.ndarray]
    normalizer: Normalizer
    class_names: list[str]
    corpus_hash: str
    text_encoder_id: str
    format_version: int = CHECKPOINT_FORMAT_VERSION
    train_loss_history: list[float] | None = field(default=None, compare=False, repr=False)
    _model: IMUClipModel | None = field(default=None, init=False, compare=False, repr=False)

    def model(self) -> IMUClipModel:
        if self._model is None:
            model = IMUClipModel(self.hyperparams)
            tensors = {k: torch.from_numpy(np.ascontiguousarray(v, dtype=np.float32))
                       for k, v in self.state.items()}
            model.load_state_dict(tensors)
            model.eval()
            self._model = model
        return self._model

    def class_index(self, name: str) -> int:
        try:
            return self.class_names.index(name)
        except ValueError:
            raise ClassifyError(f"unknown class {name!r}") from None


def supcon_loss_torch(
    embeddings: torch.Tensor, labels: torch.Tensor, temperature: float
) -> torch.Tensor:
    """Supervised contrastive loss over one batch.

    Sum over anchors n of the mean over positives p (same label, p != n) of
    -log( exp(z_n.z_p / tau) / sum_{a != n} exp(z_n.z_a / tau) ). Anchors with
    no positives contribute zero. Log-sum-exp uses max subtraction.
    """
    n = embeddings.shape[0]
    if n < 2:
        raise SupConError("batch must contain at least 2 embeddings")
    if labels.shape[0] != n:
        raise SupConError("labels length must match batch size")
    sim = embeddings @ embeddings.T / temperature
    eye = torch.eye(n, dtype=torch.bool, device=embeddings.device)
    sim_others = sim.masked_fill(eye, float("-inf"))
    row_max = sim_others.max(dim=1, keepdim=True).values.detach()
    log_denom = torch.logsumexp(sim_others - row_max, dim=1) + row_max.squeeze(1)
    pos_mask = (labels.unsqueeze(0) == labels.unsqueeze(1)) & ~eye
    pos_counts = pos_mask.sum(dim=1)
    if not bool((pos_counts > 0).any()):
        raise SupConError("no positive pairs in batch")
    log_prob = sim - log_denom.unsqueeze(1)
    per_anchor = -(log_prob * pos_mask.to(sim.dtype)).sum(dim=1) / pos_counts.clamp(min=1)
    per_anchor = torch.where(pos_counts > 0, per_anchor, torch.zeros_like(per_anchor))
    return per_anchor.sum()


def supcon_loss(
    embeddings: np.ndarray, labels: np.ndarray, temperature: float
) -> tuple[float, np.ndarray]:
    """64-bit loss value and gradient with respect to the embeddings."""
    z = torch.tensor(np.asarray(embeddings, dtype=np.float64), requires_grad=True)
    lab = torch.tensor(np.asarray(labels, dtype=np.int64))
    loss = supcon_loss_torch(z, lab, temperature)
    loss.backward()
    return float(loss.item()), z.grad.numpy()


def encode_imu(window: IMUWindow, model: IMUClipModel) -> np.ndarray:
    """Shared-space embedding of one already-normalized window."""
    with torch.no_grad():
        x = torch.from_numpy(window.data.astype(np.float32)).unsqueeze(0)
        z = model.embed_imu(x)
    return z.squeeze(0).numpy().astype(np.float64)


def encode_class_anchor(
    class_name: str,
    corpus: DescriptionCorpus,
    model: IMUClipModel,
    text_encoder: TextEncoder,
) -> np.ndarray:
    """Normalized mean of the projected embeddings of a class's descriptions."""
    descs = corpus.descriptions(class_name)
    vecs = np.stack([text_encoder.encode(d) for d in descs]).astype(np.float32)
    with torch.no_grad():
        z = model.embed_text(torch.from_numpy(vecs)).numpy().astype(np.float64)
    mean = z.mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm < 1e-8:
        raise DegenerateAnchorError(f"degenerate anchor for class {class_name!r}")
    return mean / norm


def compute_anchors(
    classes: list[str],
    corpus: DescriptionCorpus,
    model: IMUClipModel,
    text_encoder: TextEncoder,
) -> dict[str, np.ndarray]:
    return {c: encode_class_anchor(c, corpus, model, text_encoder) for c in classes}


def similarity(
    window_embedding: np.ndarray,
    anchors: dict[str, np.ndarray],
    class_order: list[str] | None = None,
    query_id: int | None = None,
) -> SimilarityRanking:
    """Cosine scores against every anchor, sorted descending; ties broken by
    ascending class index (position in `class_order`, alphabetical if omitted)."""
    if not anchors:
        raise ClassifyError("anchor map is empty")
    order = class_order if class_order is not None else sorted(anchors)
    index = {name: i for i, name in enumerate(order)}
    missing = [name for name in anchors if name not in index]
    if missing:
        raise ClassifyError(f"classes missing from class_order: {missing}")
    entries = []
    for name, anchor in anchors.items():
        if anchor.shape != window_embedding.shape:
            raise ClassifyError(
                f"dimension mismatch for {name!r}: {anchor.shape} vs {window_embedding.shape}"
            )
        score = float(np.clip(np.dot(window_embedding, anchor), -1.0, 1.0))
        entries.append((name, score))
    entries.sort(key=lambda e: (-e[1], index[e[0]]))
    return SimilarityRanking(entries=entries, query_id=query_id)


def top_k(ranking: SimilarityRanking, k: int) -> SimilarityRanking:
    if not 1 <= k <= len(ranking.entries):
        raise ClassifyError(f"k must be in [1, {len(ranking.entries)}], got {k}")
    return SimilarityRanking(entries=ranking.entries[:k], query_id=ranking.query_id)


def _check_candidates(
    checkpoint: Checkpoint,
    candidate_classes: list[str],
    corpus: DescriptionCorpus,
    text_encoder: TextEncoder,
) -> None:
    if text_encoder.encoder_id != checkpoint.text_encoder_id:
        raise ClassifyError(
            f"text encoder mismatch: checkpoint was trained with "
            f"{checkpoint.text_encoder_id!r}, got {text_encoder.encoder_id!r}"
        )
    if not candidate_classes:
        raise ClassifyError("candidate class list is empty")
    for c in candidate_classes:
        if c not in checkpoint.class_names:
            raise ClassifyError(f"unknown candidate class {c!r}")
        if c not in corpus.activities:
            raise ClassifyError(f"candidate class {c!r} has no corpus descriptions")


def embed_windows(windows: list[IMUWindow], checkpoint: Checkpoint) -> np.ndarray:
    """Batched shared-space embeddings of raw windows (normalizer applied here)."""
    hp = checkpoint.hyperparams
    arr = np.empty((len(windows), hp.window_length, hp.channels), dtype=np.float32)
    for i, w in enumerate(windows):
        if w.shape != (hp.window_length, hp.channels):
            raise ClassifyError(
                f"window {i} shape {w.shape} does not match checkpoint "
                f"({hp.window_length}, {hp.channels})"
            )
        arr[i] = apply_normalizer(checkpoint.normalizer, w).data
    model = checkpoint.model()
    outputs = []
    with torch.no_grad():
        for s in range(0, len(windows), 512):
            outputs.append(model.embed_imu(torch.from_numpy(arr[s : s + 512])).numpy())
    return np.concatenate(outputs, axis=0).astype(np.float64)


def classify(
    window: IMUWindow,
    checkpoint: Checkpoint,
    candidate_classes: list[str],
    corpus: DescriptionCorpus,
    text_encoder: TextEncoder,
    anchors: dict[str, np.ndarray] | None = None,
) -> tuple[str, SimilarityRanking]:
    """Top-1 label and the full similarity ranking over the candidate set.

    The window is raw sensor data; the checkpoint's normalizer is applied
    internally. Precomputed `anchors` (a superset is fine) skip re-encoding."""
    _check_candidates(checkpoint, candidate_classes, corpus, text_encoder)
    if anchors is None:
        anchors = compute_anchors(candidate_classes, corpus, checkpoint.model(), text_encoder)
    else:
        missing = [c for c in candidate_classes if c not in anchors]
        if missing:
            raise ClassifyError(f"anchors missing for classes: {missing}")
    z = embed_windows([window], checkpoint)[0]
    ranking = similarity(
        z,
        {c: anchors[c] for c in candidate_classes},
        class_order=checkpoint.class_names,
    )
    return ranking.top1(), ranking


def predict_labels(
    windows: list[IMUWindow],
    checkpoint: Checkpoint,
    candidate_classes: list[str],
    corpus: DescriptionCorpus,
    text_encoder: TextEncoder,
    anchors: dict[str, np.ndarray] | None = None,
) -> np.ndarray:
    """Batched top-1 prediction; returns global class ids (checkpoint order)."""
    _check_candidates(checkpoint, candidate_classes, corpus, text_encoder)
    if anchors is None:
        anchors = compute_anchors(candidate_classes, corpus, checkpoint.model(), text_encoder)
    # Columns ordered by ascending class index so argmax ties pick the lowest id.
    cand = sorted(candidate_classes, key=checkpoint.class_index)
    anchor_matrix = np.stack([anchors[c] for c in cand])  # (K, d)
    z = embed_windows(windows, checkpoint)  # (N, d)
    scores = z @ anchor_matrix.T
    cols = scores.argmax(axis=1)
    ids = np.asarray([checkpoint.class_index(c) for c in cand], dtype=np.int64)
    return ids[cols]


def train(
    train_windows: list[IMUWindow],
    corpus: DescriptionCorpus,
    config: TrainConfig,
    text_encoder: TextEncoder,
    class_names: list[str],
    corpus_hash_value: str | None = None,
) -> Checkpoint:
    """Train the aligner on labeled raw windows.

    Each step samples a window batch, pairs every window with one uniformly
    sampled description of its class, embeds both modalities, and applies the
    supervised contrastive loss over the mixed 2B-row batch (labels are class
    ids; modality is ignored). The text encoder is frozen; the IMU side and the
    text projection head take AdamW updates. Deterministic for a fixed seed."""
    from .corpus import corpus_hash as _corpus_hash

    labels = window_labels(train_windows)
    present = sorted(set(int(l) for l in labels))
    if len(present) < 2:
        raise TrainingError("need at least 2 classes present in training data")
    missing = [class_names[i] for i in present if class_names[i] not in corpus.activities]
    if missing:
        raise TrainingError(f"corpus does not cover training classes: {missing}")

    normalizer = fit_normalizer(train_windows)
    length, channels = train_windows[0].shape
    arr = np.empty((len(train_windows), length, channels), dtype=np.float32)
    for i, w in enumerate(train_windows):
        arr[i] = apply_normalizer(normalizer, w).data

    hp = ModelHyperparams(
        window_length=length,
        channels=channels,
        d_model=config.d_model,
        n_heads=config.n_heads,
        d_text=text_encoder.d_text,
        d_shared=config.d_shared,
        patch_timesteps=config.patch_timesteps,
        temperature=config.temperature,
    )
    model = build_model(hp, seed=config.seed)
    model.train()

    desc_banks = {
        cls_id: torch.from_numpy(
            np.stack(
                [text_encoder.encode(d) for d in corpus.descriptions(class_names[cls_id])]
            ).astype(np.float32)
        )
        for cls_id in present
    }

    optimizer = torch.optim.AdamW(
        [
            {"params": list(model.imu_side_parameters()), "lr": config.lr_imu},
            {"params": list(model.text_proj.parameters()), "lr": config.lr_text_projection},
        ],
        weight_decay=config.weight_decay,
    )

    rng = np.random.default_rng(config.seed)
    x_all = torch.from_numpy(arr)
    n = len(train_windows)
    loss_history = []
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        epoch_anchors = 0
        for s in range(0, n, config.batch_size):
            idx = perm[s : s + config.batch_size]
            batch_labels = labels[idx]
            text_rows = torch.stack(
                [
                    desc_banks[int(lab)][int(rng.integers(desc_banks[int(lab)].shape[0]))]
                    for lab in batch_labels
                ]
            )
            z_imu = model.embed_imu(x_all[idx])
            z_text = model.embed_text(text_rows)
            z = torch.cat([z_imu, z_text], dim=0)
            lab_t = torch.from_numpy(np.concatenate([batch_labels, batch_labels]))
            loss = supcon_loss_torch(z, lab_t, config.temperature)
            if not torch.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, step {s // config.batch_size}"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.item())
            epoch_anchors += z.shape[0]
        loss_history.append(epoch_loss / max(epoch_anchors, 1))

    model.eval()
    state = {
        k: v.detach().numpy().astype(np.float32).copy()
        for k, v in model.state_dict().items()
    }
    return Checkpoint(
        hyperparams=hp,
        state=state,
        normalizer=normalizer,
        class_names=list(class_names),
        corpus_hash=corpus_hash_value if corpus_hash_value is not None else _corpus_hash(corpus),
        text_encoder_id=text_encoder.encoder_id,
        train_loss_history=loss_history,
    )


def _manifest(checkpoint: Checkpoint) -> dict:
    return {
        "format_version": checkpoint.format_version,
        "hyperparams": checkpoint.hyperparams.to_dict(),
        "class_names": checkpoint.class_names,
        "corpus_hash": checkpoint.corpus_hash,
        "text_encoder_id": checkpoint.text_encoder_id,
        "normalizer": {
            "mean": checkpoint.normalizer.mean.tolist(),
            "std": checkpoint.normalizer.std.tolist(),
            "constant_channel_mask": checkpoint.normalizer.constant_channel_mask.tolist(),
        },
        "parameters": [
            {"name": k, "shape": list(v.shape)} for k, v in checkpoint.state.items()
        ],
    }


def save_checkpoint(checkpoint: Checkpoint, path: str | Path) -> None:
    """Write manifest.json plus one little-endian float32 row-major tensor file
    per parameter; a `.zip` suffix selects archive form, anything else a directory."""
    path = Path(path)
    manifest = json.dumps(_manifest(checkpoint), indent=2)
    blobs = {
        f"{name}.bin": np.ascontiguousarray(arr, dtype="<f4").tobytes()
        for name, arr in checkpoint.state.items()
    }
    if path.suffix == ".zip":
        with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
            zf.writestr("manifest.json", manifest)
            for name, blob in blobs.items():
                zf.writestr(name, blob)
    else:
        path.mkdir(parents=True, exist_ok=True)
        (path / "manifest.json").write_text(manifest, encoding="utf-8")
        for name, blob in blobs.items():
            (path / name).write_bytes(blob)


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)

    def read_entry(name: str) -> bytes:
        if path.suffix == ".zip":
            with zipfile.ZipFile(path) as zf:
                return zf.read(name)
        target = path / name
        if not target.exists():
            raise KeyError(name)
        return target.read_bytes()

    try:
        manifest = json.loads(read_entry("manifest.json").decode("utf-8"))
    except (zipfile.BadZipFile, KeyError, OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"corrupt checkpoint archive at {path}: {e}") from e

    version = manifest.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format_version {version!r} "
            f"(expected {CHECKPOINT_FORMAT_VERSION})"
        )
    state = {}
    try:
        for entry in manifest["parameters"]:
            name, shape = entry["name"], tuple(entry["shape"])
            blob = read_entry(f"{name}.bin")
            expected = int(np.prod(shape)) * 4 if shape else 4
            if len(blob) != expected:
                raise CheckpointError(
                    f"corrupt checkpoint archive: tensor {name!r} has {len(blob)} bytes, "
                    f"expected {expected}"
                )
            state[name] = np.frombuffer(blob, dtype="<f4").reshape(shape).copy()
        norm = manifest["normalizer"]
        checkpoint = Checkpoint(
            hyperparams=ModelHyperparams.from_dict(manifest["hyperparams"]),
            state=state,
            normalizer=Normalizer(
                mean=np.asarray(norm["mean"], dtype=np.float64),
                std=np.asarray(norm["std"], dtype=np.float64),
                constant_channel_mask=np.asarray(norm["constant_channel_mask"], dtype=bool),
            ),
            class_names=list(manifest["class_names"]),
            corpus_hash=manifest["corpus_hash"],
            text_encoder_id=manifest["text_encoder_id"],
            format_version=version,
        )
    except CheckpointError:
        raise
    except (KeyError, ValueError, zipfile.BadZipFile, OSError) as e:
        raise CheckpointError(f"corrupt checkpoint archive at {path}: {e}") from e
    return checkpoint
