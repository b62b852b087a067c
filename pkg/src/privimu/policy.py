"""User privacy preferences: white/black/gray activity sets with atomic,
versioned runtime updates.

Wire/file form is canonical JSON with lexicographically sorted arrays:

    {"black": [...], "gray": [...], "version": n, "white": [...]}
"""

from __future__ import annotations

import enum
import json
import os
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path


class PolicyError(ValueError):
    """Invalid policy content or rejected update."""

    def __init__(self, errors):
        self.errors = list(errors) if isinstance(errors, (list, tuple)) else [errors]
        super().__init__("; ".join(str(e) for e in self.errors))


class Category(enum.Enum):
    WHITE = "white"
    BLACK = "black"
    GRAY = "gray"
    UNLISTED = "unlisted"


@dataclass(frozen=True)
class PrivacyPolicy:
    white: frozenset[str] = frozenset()
    black: frozenset[str] = frozenset()
    gray: frozenset[str] = frozenset()
    version: int = 0
    updated_at: float = field(default=0.0, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "white", frozenset(self.white))
        object.__setattr__(self, "black", frozenset(self.black))
        object.__setattr__(self, "gray", frozenset(self.gray))


def validate_policy(policy: PrivacyPolicy, known_classes: list[str] | set[str]) -> list[str]:
    """Return problems (empty means valid): overlaps, unknown classes, and a
    non-empty black list without any gray replacement candidates."""
    errors = []
    known = set(known_classes)
    pairs = [("white", policy.white), ("black", policy.black), ("gray", policy.gray)]
    for i in range(len(pairs)):
        for j in range(i + 1, len(pairs)):
            overlap = pairs[i][1] & pairs[j][1]
            if overlap:
                errors.append(
                    f"classes in both {pairs[i][0]} and {pairs[j][0]}: "
                    + ", ".join(sorted(overlap))
                )
    unknown = (policy.white | policy.black | policy.gray) - known
    if unknown:
        errors.append("unknown classes: " + ", ".join(sorted(unknown)))
    if policy.black and not policy.gray:
        errors.append("gray required: black-listed classes need replacement candidates")
    return errors


def categorize(label: str, policy: PrivacyPolicy) -> Category:
    if label in policy.white:
        return Category.WHITE
    if label in policy.black:
        return Category.BLACK
    if label in policy.gray:
        return Category.GRAY
    return Category.UNLISTED


def serialize_policy(policy: PrivacyPolicy) -> str:
    """Canonical, byte-stable form: sorted keys, sorted arrays, compact separators."""
    payload = {
        "black": sorted(policy.black),
        "gray": sorted(policy.gray),
        "version": policy.version,
        "white": sorted(policy.white),
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def parse_policy(text: str) -> PrivacyPolicy:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise PolicyError(f"malformed policy JSON: {e}") from e
    if not isinstance(raw, dict):
        raise PolicyError("policy JSON must be an object")
    for key in ("white", "black", "gray"):
        if key not in raw:
            raise PolicyError(f"missing {key!r} key")
        if not isinstance(raw[key], list) or not all(isinstance(x, str) for x in raw[key]):
            raise PolicyError(f"{key!r} must be a list of class names")
    version = raw.get("version", 0)
    if not isinstance(version, int):
        raise PolicyError("'version' must be an integer")
    return PrivacyPolicy(
        white=frozenset(raw["white"]),
        black=frozenset(raw["black"]),
        gray=frozenset(raw["gray"]),
        version=version,
    )


def load_policy(path: str | Path) -> PrivacyPolicy:
    return parse_policy(Path(path).read_text(encoding="utf-8"))


def save_policy(policy: PrivacyPolicy, path: str | Path) -> None:
    _atomic_write(Path(path), serialize_policy(policy) + "\n")


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


class PolicyStore:
    """Single-writer/many-reader policy holder.

    Readers take wait-free snapshots (`current` is one immutable reference
    swap); writers serialize on a lock. Every accepted update appends to the
    in-memory history and mirrors the current policy to `mirror_path`.
    """

    def __init__(
        self,
        initial: PrivacyPolicy,
        known_classes: list[str] | set[str],
        mirror_path: str | Path | None = None,
    ):
        errors = validate_policy(initial, known_classes)
        if errors:
            raise PolicyError(errors)
        self._known_classes = set(known_classes)
        self._lock = threading.Lock()
        self._mirror_path = Path(mirror_path) if mirror_path else None
        self._current = replace(initial, updated_at=time.time())
        self._history: list[tuple[int, PrivacyPolicy, float]] = [
            (self._current.version, self._current, self._current.updated_at)
        ]
        self.dirty = False

    @property
    def current(self) -> PrivacyPolicy:
        return self._current

    @property
    def known_classes(self) -> set[str]:
        return set(self._known_classes)

    def history(self) -> list[tuple[int, PrivacyPolicy, float]]:
        with self._lock:
            return list(self._history)

    def update(self, new_policy: PrivacyPolicy) -> int:
        """Validate and atomically install a policy; returns the new version.
        A failed validation leaves the store (and its mirror file) unchanged."""
        errors = validate_policy(new_policy, self._known_classes)
        if errors:
            raise PolicyError(errors)
        with self._lock:
            version = self._current.version + 1
            installed = replace(new_policy, version=version, updated_at=time.time())
            self._history.append((version, installed, installed.updated_at))
            self._current = installed  # single reference swap: readers see old or new
            self.dirty = True
            if self._mirror_path is not None:
                _atomic_write(self._mirror_path, serialize_policy(installed) + "\n")
        return version

    def flush(self) -> None:
        """Write the current policy to the mirror file if any update occurred."""
        with self._lock:
            if self.dirty and self._mirror_path is not None:
                _atomic_write(self._mirror_path, serialize_policy(self._current) + "\n")
