"""Window sanitization: detect black-listed activities, pick the most similar
gray-listed class from the similarity ranking, and emit a synthesized window of
that class in place of the original.

Synthesis is exemplar-based: a stored training window of the target class is
jittered (amplitude scale, circular time shift, small noise). The library holds
normalized windows; `sanitize` maps replacements back to raw units so both
passthrough and replaced outputs live in the input's space.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .corpus import DescriptionCorpus, TextEncoder
from .datasets import IMUWindow, Normalizer, apply_normalizer, invert_normalizer
from .imuclip import Checkpoint, SimilarityRanking, classify, compute_anchors
from .policy import Category, PolicyStore, PrivacyPolicy, categorize

logger = logging.getLogger(__name__)


class SanitizerError(RuntimeError):
    """Invalid sanitizer configuration or unsatisfiable replacement request."""


class Action(enum.Enum):
    PASSTHROUGH = "passthrough"
    REPLACED = "replaced"


@dataclass
class JitterConfig:
    enabled: bool = True
    amplitude_low: float = 0.9
    amplitude_high: float = 1.1
    max_shift_fraction: float = 0.1
    noise_scale: float = 0.02  # times the per-class per-channel std


@dataclass
class ExemplarLibrary:
    """Per-class stacks of normalized windows plus per-class channel stds."""

    windows: dict[str, np.ndarray]  # class -> (n, L, C)
    channel_std: dict[str, np.ndarray]  # class -> (C,)

    def __post_init__(self):
        for cls, arr in self.windows.items():
            if arr.ndim != 3 or arr.shape[0] < 1:
                raise SanitizerError(f"class {cls!r} needs at least one exemplar")

    @property
    def window_shape(self) -> tuple[int, int]:
        arr = next(iter(self.windows.values()))
        return arr.shape[1], arr.shape[2]


@dataclass
class SanitizationResult:
    output: IMUWindow
    action: Action
    detected_top1: str
    replacement_class: str | None
    ranking: SimilarityRanking
    policy_version: int


def build_library(
    train_windows: list[IMUWindow],
    classes: list[str],
    class_names: list[str],
    normalizer: Normalizer | None = None,
) -> ExemplarLibrary:
    """Group training windows by class; `normalizer` (typically the checkpoint's)
    is applied when the inputs are raw. Every requested class needs a window."""
    name_to_id = {name: i for i, name in enumerate(class_names)}
    grouped: dict[str, list[np.ndarray]] = {c: [] for c in classes}
    for w in train_windows:
        if w.label is None:
            continue
        name = class_names[w.label]
        if name in grouped:
            data = apply_normalizer(normalizer, w).data if normalizer else w.data
            grouped[name].append(data)
    missing = [c for c in classes if not grouped[c]]
    if missing:
        raise SanitizerError(f"no training windows for classes: {missing}")
    for c in classes:
        if c not in name_to_id:
            raise SanitizerError(f"class {c!r} not in class list")
    windows = {c: np.stack(grouped[c]) for c in classes}
    channel_std = {
        c: windows[c].reshape(-1, windows[c].shape[2]).std(axis=0) for c in classes
    }
    return ExemplarLibrary(windows=windows, channel_std=channel_std)


def save_library(library: ExemplarLibrary, path: str | Path) -> None:
    arrays = {}
    for i, (cls, arr) in enumerate(library.windows.items()):
        arrays[f"windows_{i}"] = arr
        arrays[f"std_{i}"] = library.channel_std[cls]
    meta = json.dumps({"classes": list(library.windows.keys())})
    np.savez_compressed(path, __meta__=np.frombuffer(meta.encode("utf-8"), dtype=np.uint8), **arrays)


def load_library(path: str | Path) -> ExemplarLibrary:
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode("utf-8"))
        windows = {}
        channel_std = {}
        for i, cls in enumerate(meta["classes"]):
            windows[cls] = data[f"windows_{i}"]
            channel_std[cls] = data[f"std_{i}"]
    return ExemplarLibrary(windows=windows, channel_std=channel_std)


def _as_rng(rng: int | np.random.Generator) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def synthesize(
    target_class: str,
    library: ExemplarLibrary,
    rng: int | np.random.Generator = 0,
    jitter: JitterConfig | None = None,
) -> IMUWindow:
    """One synthesized window of the target class, in the library's space:
    uniformly pick an exemplar, scale amplitude, circularly shift in time, add
    per-channel noise. With jitter disabled the picked exemplar passes through."""
    if target_class not in library.windows:
        raise SanitizerError(f"unknown class {target_class!r} in exemplar library")
    jitter = jitter if jitter is not None else JitterConfig()
    gen = _as_rng(rng)
    stack = library.windows[target_class]
    data = stack[int(gen.integers(stack.shape[0]))].copy()
    if jitter.enabled:
        length = data.shape[0]
        data = data * gen.uniform(jitter.amplitude_low, jitter.amplitude_high)
        max_shift = int(jitter.max_shift_fraction * length)
        if max_shift > 0:
            data = np.roll(data, int(gen.integers(-max_shift, max_shift + 1)), axis=0)
        sigma = jitter.noise_scale * library.channel_std[target_class]
        data = data + gen.normal(0.0, 1.0, size=data.shape) * sigma
    return IMUWindow(data=data, label=None, source_index=0)


def select_replacement(
    ranking: SimilarityRanking,
    policy: PrivacyPolicy,
    unlisted_as_black: bool = False,
) -> str:
    """Scan the ranking from rank 2 down and return the first gray-listed class
    (unlisted classes count as gray unless `unlisted_as_black`)."""
    for name, _score in ranking.entries[1:]:
        cat = categorize(name, policy)
        if cat is Category.GRAY or (cat is Category.UNLISTED and not unlisted_as_black):
            return name
    raise SanitizerError("no gray-listed class available in ranking")


def sanitize(
    window: IMUWindow,
    checkpoint: Checkpoint,
    policy: PrivacyPolicy,
    corpus: DescriptionCorpus,
    library: ExemplarLibrary,
    text_encoder: TextEncoder,
    rng: int | np.random.Generator = 0,
    anchors: dict[str, np.ndarray] | None = None,
    jitter: JitterConfig | None = None,
    unlisted_as_black: bool = False,
) -> SanitizationResult:
    """Run the replacement algorithm on one raw window.

    Classify over the policy's candidate set (W|B|G); a top-1 outside the black
    list passes the input through untouched. A black top-1 is replaced by a
    synthesized window of the most similar gray class, mapped back to raw units
    and shape-matched to the input. The replacement scan always has the full
    ranking available, so a gray candidate exists whenever the policy is valid."""
    candidates = [
        c
        for c in checkpoint.class_names
        if c in policy.white or c in policy.black or c in policy.gray
    ]
    if not candidates:
        raise SanitizerError("policy lists no classes known to the checkpoint")
    _top1, ranking = classify(
        window, checkpoint, candidates, corpus, text_encoder, anchors=anchors
    )
    top1 = ranking.top1()
    if categorize(top1, policy) is not Category.BLACK:
        return SanitizationResult(
            output=window,
            action=Action.PASSTHROUGH,
            detected_top1=top1,
            replacement_class=None,
            ranking=ranking,
            policy_version=policy.version,
        )
    replacement = select_replacement(ranking, policy, unlisted_as_black=unlisted_as_black)
    synth = synthesize(replacement, library, rng=rng, jitter=jitter)
    if synth.shape != window.shape:
        raise SanitizerError(
            f"library window shape {synth.shape} does not match input {window.shape}"
        )
    raw = invert_normalizer(checkpoint.normalizer, synth)
    return SanitizationResult(
        output=raw,
        action=Action.REPLACED,
        detected_top1=top1,
        replacement_class=replacement,
        ranking=ranking,
        policy_version=policy.version,
    )


def sanitize_stream(
    windows: Iterable[IMUWindow],
    checkpoint: Checkpoint,
    policy_store: PolicyStore,
    corpus: DescriptionCorpus,
    library: ExemplarLibrary,
    text_encoder: TextEncoder,
    seed: int = 0,
    jitter: JitterConfig | None = None,
    unlisted_as_black: bool = False,
) -> Iterator[SanitizationResult]:
    """Sanitize a window stream in order. The policy snapshot is taken once per
    window, so a mid-stream update applies from the next window on. Windows of
    the wrong shape are skipped with a logged diagnostic."""
    expected = (checkpoint.hyperparams.window_length, checkpoint.hyperparams.channels)
    anchors = None
    anchors_classes: frozenset[str] = frozenset()
    for i, window in enumerate(windows):
        if window.shape != expected:
            logger.warning(
                "skipping stream window %d: shape %s does not match %s",
                i,
                window.shape,
                expected,
            )
            continue
        policy = policy_store.current
        listed = policy.white | policy.black | policy.gray
        if anchors is None or listed != anchors_classes:
            candidates = [c for c in checkpoint.class_names if c in listed]
            anchors = compute_anchors(candidates, corpus, checkpoint.model(), text_encoder)
            anchors_classes = frozenset(listed)
        yield sanitize(
            window,
            checkpoint,
            policy,
            corpus,
            library,
            text_encoder,
            rng=np.random.default_rng((seed, i)),
            anchors=anchors,
            jitter=jitter,
            unlisted_as_black=unlisted_as_black,
        )


def result_to_wire(result: SanitizationResult, top_k_size: int | None = None) -> dict:
    """The JSON wire form used by the gateway."""
    entries = result.ranking.entries
    if top_k_size is not None:
        entries = entries[:top_k_size]
    length, channels = result.output.shape
    return {
        "action": result.action.value,
        "top1": result.detected_top1,
        "replacement": result.replacement_class,
        "policy_version": result.policy_version,
        "window": {
            "length": length,
            "channels": channels,
            "data": [[float(v) for v in row] for row in result.output.data],
        },
        "top_k": [[name, score] for name, score in entries],
    }
