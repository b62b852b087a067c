"""Per-activity natural-language description corpora and text encoders.

A corpus file is UTF-8 JSON:

    {"version": 1, "activities": {"<name>": ["<desc>", ...], ...}}

The built-in text encoder is deterministic (character-trigram hashing followed
by a fixed random-sign projection); any callable producing unit-norm vectors of
the right width can replace it (see `TextEncoder`).
"""

from __future__ import annotations

import hashlib
import json
import os
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

D_TEXT_DEFAULT = 512
_N_BUCKETS = 4096
_PROJECTION_CACHE: dict[tuple[int, int], np.ndarray] = {}


class CorpusError(ValueError):
    """Malformed corpus file or invalid corpus operation."""


@dataclass
class DescriptionCorpus:
    version: int
    activities: dict[str, list[str]]  # activity name -> ordered descriptions

    def __post_init__(self):
        for name, descs in self.activities.items():
            if not name:
                raise CorpusError("empty activity name")
            if not descs:
                raise CorpusError(f"activity {name!r} has no descriptions")
            if any(not isinstance(d, str) or not d for d in descs):
                raise CorpusError(f"activity {name!r} has an empty description")

    def descriptions(self, activity: str) -> list[str]:
        if activity not in self.activities:
            raise CorpusError(f"unknown activity {activity!r}")
        return self.activities[activity]

    def truncated(self, n: int) -> "DescriptionCorpus":
        """Corpus restricted to the first n descriptions per activity."""
        if n < 1:
            raise CorpusError("n must be >= 1")
        return DescriptionCorpus(
            version=self.version,
            activities={k: v[:n] for k, v in self.activities.items()},
        )


@dataclass
class TextEmbedding:
    vector: np.ndarray  # (d_text,), unit norm
    source_hash: str  # sha256 of the input text


def corpus_hash(corpus: DescriptionCorpus) -> str:
    """Content hash of the canonical serialization; stable across key order."""
    canonical = json.dumps(
        {"version": corpus.version, "activities": corpus.activities},
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=True,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_corpus(path: str | Path) -> DescriptionCorpus:
    path = Path(path)

    def reject_duplicates(pairs):
        seen = {}
        for key, value in pairs:
            if key in seen:
                raise CorpusError(f"{path}: duplicate activity name {key!r}")
            seen[key] = value
        return seen

    try:
        raw = json.loads(path.read_text(encoding="utf-8"), object_pairs_hook=reject_duplicates)
    except json.JSONDecodeError as e:
        raise CorpusError(f"{path}: malformed JSON: {e}") from e
    if not isinstance(raw, dict) or "activities" not in raw:
        raise CorpusError(f"{path}: missing 'activities' key")
    activities = raw["activities"]
    if not isinstance(activities, dict):
        raise CorpusError(f"{path}: 'activities' must be an object")
    for name, descs in activities.items():
        if not isinstance(descs, list):
            raise CorpusError(f"{path}: descriptions for {name!r} must be a list")
    return DescriptionCorpus(version=int(raw.get("version", 1)), activities=activities)


def save_corpus(corpus: DescriptionCorpus, path: str | Path) -> None:
    payload = {"version": corpus.version, "activities": corpus.activities}
    Path(path).write_text(
        json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def validate_corpus(corpus: DescriptionCorpus, known_classes: list[str]) -> list[str]:
    """Return a list of problems (empty means valid): classes without descriptions
    and activity names that are not known classes."""
    errors = []
    for cls in known_classes:
        if cls not in corpus.activities:
            errors.append(f"no descriptions for class {cls!r}")
    for name in corpus.activities:
        if name not in known_classes:
            errors.append(f"unknown activity name {name!r}")
    return errors


def _projection(d_text: int, seed: int) -> np.ndarray:
    key = (d_text, seed)
    if key not in _PROJECTION_CACHE:
        rng = np.random.default_rng(seed)
        signs = rng.integers(0, 2, size=(_N_BUCKETS, d_text)).astype(np.float64) * 2.0 - 1.0
        _PROJECTION_CACHE[key] = signs
    return _PROJECTION_CACHE[key]


def fallback_text_encode(text: str, d_text: int = D_TEXT_DEFAULT, seed: int = 0) -> TextEmbedding:
    """Deterministic text embedding: lowercase, hash character trigrams into
    4096 buckets, project the count vector by a fixed +-1 matrix, L2-normalize."""
    if not text:
        raise CorpusError("cannot encode empty text")
    lowered = text.lower()
    grams = (
        [lowered[i : i + 3] for i in range(len(lowered) - 2)]
        if len(lowered) >= 3
        else [lowered]
    )
    counts = np.zeros(_N_BUCKETS, dtype=np.float64)
    for g in grams:
        counts[zlib.crc32(g.encode("utf-8")) % _N_BUCKETS] += 1.0
    vec = counts @ _projection(d_text, seed)
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise CorpusError(f"text {text!r} produced a zero embedding")
    return TextEmbedding(
        vector=vec / norm,
        source_hash=hashlib.sha256(text.encode("utf-8")).hexdigest(),
    )


@runtime_checkable
class TextEncoder(Protocol):
    """Pluggable text-encoder slot; implementations must be deterministic."""

    encoder_id: str
    d_text: int

    def encode(self, text: str) -> np.ndarray: ...


class FallbackTextEncoder:
    """The built-in trigram-hash encoder (stand-in for a pretrained encoder)."""

    def __init__(self, d_text: int = D_TEXT_DEFAULT, seed: int = 0):
        self.d_text = d_text
        self.seed = seed
        self.encoder_id = f"trigram-proj-v1:d{d_text}:s{seed}"

    def encode(self, text: str) -> np.ndarray:
        return fallback_text_encode(text, self.d_text, self.seed).vector


def encoder_from_id(encoder_id: str) -> FallbackTextEncoder:
    """Reconstruct the built-in encoder from its id; other ids must be supplied
    by the caller as an encoder instance."""
    import re

    m = re.fullmatch(r"trigram-proj-v1:d(\d+):s(\d+)", encoder_id)
    if not m:
        raise CorpusError(
            f"no built-in encoder for id {encoder_id!r}; pass a matching encoder instance"
        )
    return FallbackTextEncoder(d_text=int(m.group(1)), seed=int(m.group(2)))


# Paraphrase scaffolding for the templated corpus. The first description of
# each class is the bare class name, so truncating to one description is the
# label-only setting.
_TEMPLATES = [
    "a person {name} at a steady pace",
    "someone {name} repeatedly",
    "a user {name} with their right hand",
    "the wearer is {name} slowly",
    "a subject {name} in quick bursts",
    "an individual {name} while standing",
    "a person {name} with small pauses",
    "someone {name} energetically",
    "the wearer keeps {name} without stopping",
    "a person {name} in a relaxed manner",
    "someone {name} using both arms",
    "a volunteer {name} during the session",
]

_SUFFIXES = [
    "",
    " in the morning",
    " at the workbench",
    " for a little while",
    " as part of a routine",
    " near the table",
    " with a steady rhythm",
    " during the recording",
    " at moderate intensity",
    " one more time",
]


def templated_corpus(class_names: list[str], n_per_class: int = 25) -> DescriptionCorpus:
    """Deterministic offline corpus: class name first, then templated paraphrases."""
    max_available = 1 + len(_TEMPLATES) * len(_SUFFIXES)
    if n_per_class < 1 or n_per_class > max_available:
        raise CorpusError(f"n_per_class must be in [1, {max_available}]")
    activities = {}
    for name in class_names:
        descs = [name]
        for suffix in _SUFFIXES:
            for template in _TEMPLATES:
                if len(descs) >= n_per_class:
                    break
                descs.append(template.format(name=name) + suffix)
            if len(descs) >= n_per_class:
                break
        activities[name] = descs
    return DescriptionCorpus(version=1, activities=activities)


@dataclass
class LLMClientConfig:
    """Offline corpus-generation endpoint; the API key comes from the environment."""

    endpoint: str
    model: str
    api_key_env: str = "PRIVIMU_API_KEY"
    timeout_s: float = 60.0


def _build_prompt(activities: list[str], n_per_class: int) -> list[dict]:
    activity_list = ", ".join(f'"{a}"' for a in activities)
    return [
        {
            "role": "system",
            "content": (
                "You are a prompt generator designed to generate textual "
                "description inputs for activities as a Python dictionary. "
                "Do not provide anything other than a prompt."
            ),
        },
        {
            "role": "user",
            "content": (
                f"Generate a dictionary of {n_per_class} descriptions for each "
                f"activity in the list of activities = [ {activity_list} ]."
            ),
        },
    ]


def _parse_reply(content: str) -> dict:
    import ast

    content = content.strip()
    if content.startswith("```"):
        content = content.strip("`")
        if content.startswith("json") or content.startswith("python"):
            content = content.split("\n", 1)[1]
    try:
        parsed = json.loads(content)
    except json.JSONDecodeError:
        try:
            parsed = ast.literal_eval(content)
        except (ValueError, SyntaxError) as e:
            raise CorpusError(f"unparseable endpoint reply: {e}") from e
    if not isinstance(parsed, dict):
        raise CorpusError("endpoint reply is not a name -> descriptions map")
    return parsed


def generate_corpus_via_llm(
    activities: list[str],
    n_per_class: int,
    client: LLMClientConfig,
    out_path: str | Path,
    transport=None,
) -> DescriptionCorpus:
    """Offline tool: ask a language-model endpoint for descriptions and write a
    corpus file. Aborts without writing on transport failure, unparseable
    replies, or incomplete activity coverage. `transport(url, headers, payload)
    -> reply text` is injectable for testing."""
    if transport is None:
        import requests

        api_key = os.environ.get(client.api_key_env)
        if not api_key:
            raise CorpusError(f"API key environment variable {client.api_key_env} not set")

        def transport(url, headers, payload):
            resp = requests.post(url, headers=headers, json=payload, timeout=client.timeout_s)
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"]

        headers = {"Authorization": f"Bearer {api_key}"}
    else:
        headers = {}

    payload = {"model": client.model, "messages": _build_prompt(activities, n_per_class)}
    try:
        content = transport(client.endpoint, headers, payload)
    except CorpusError:
        raise
    except Exception as e:
        raise CorpusError(f"endpoint transport failed: {e}") from e

    parsed = _parse_reply(content)
    missing = [a for a in activities if a not in parsed]
    if missing:
        raise CorpusError(f"endpoint reply missing activities: {missing}")
    cleaned = {}
    for a in activities:
        descs = parsed[a]
        if not isinstance(descs, list) or not all(isinstance(d, str) and d for d in descs):
            raise CorpusError(f"endpoint reply for {a!r} is not a list of descriptions")
        cleaned[a] = descs

    corpus = DescriptionCorpus(version=1, activities=cleaned)
    save_corpus(corpus, out_path)
    return corpus
