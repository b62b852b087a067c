"""Per-class and policy-grouped F1 scores plus the experiment report container.

Report JSON schema:

    {"experiment": "...", "config": {...},
     "groups": {"white": f, "black": f, "gray": f},
     "per_class": {...}, "confusion": [[...]], "runtime_s": t}

F1 values are on a [0, 1] scale (the metadata notes this since published tables
use 0-100 for some rows).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..policy import PrivacyPolicy


class MetricsError(ValueError):
    pass


def confusion_matrix(true_labels: np.ndarray, predictions: np.ndarray, n_classes: int) -> np.ndarray:
    true_labels = np.asarray(true_labels, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    if true_labels.shape != predictions.shape:
        raise MetricsError("prediction and label vectors must have equal length")
    matrix = np.zeros((n_classes, n_classes), dtype=np.int64)
    for t, p in zip(true_labels, predictions):
        matrix[t, p] += 1
    return matrix


def per_class_f1(true_labels: np.ndarray, predictions: np.ndarray, n_classes: int) -> np.ndarray:
    """One-vs-rest F1 per class; classes with no support and no predictions get 0."""
    cm = confusion_matrix(true_labels, predictions, n_classes)
    tp = np.diag(cm).astype(np.float64)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    denom = 2 * tp + fp + fn
    with np.errstate(invalid="ignore", divide="ignore"):
        f1 = np.where(denom > 0, 2 * tp / np.where(denom > 0, denom, 1.0), 0.0)
    return f1


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    groups: dict  # {"white": f|None, "black": f|None, "gray": f|None}
    per_class: dict  # class name -> f1
    confusion: list  # n x n counts, rows = true labels
    runtime_s: float = 0.0
    metadata: dict = field(default_factory=lambda: {"f1_scale": "0-1"})

    def to_json(self) -> str:
        return json.dumps(
            {
                "experiment": self.experiment,
                "config": self.config,
                "groups": self.groups,
                "per_class": self.per_class,
                "confusion": self.confusion,
                "runtime_s": self.runtime_s,
                "metadata": self.metadata,
            },
            indent=2,
            sort_keys=True,
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        raw = json.loads(text)
        return cls(
            experiment=raw["experiment"],
            config=raw["config"],
            groups=raw["groups"],
            per_class=raw["per_class"],
            confusion=raw["confusion"],
            runtime_s=raw["runtime_s"],
            metadata=raw.get("metadata", {}),
        )


def grouped_f1(
    predictions: np.ndarray,
    true_labels: np.ndarray,
    policy: PrivacyPolicy,
    class_names: list[str],
    original_labels: np.ndarray | None = None,
    experiment: str = "grouped_f1",
    config: dict | None = None,
    runtime_s: float = 0.0,
) -> ExperimentReport:
    """Per-class F1 averaged (unweighted) within each policy group.

    `true_labels` are the effective labels of the evaluated windows (a replaced
    window carries its replacement class). The black group is always scored
    against `original_labels` (pre-replacement), so a low black score means the
    adversary can no longer recover what was really happening. When
    `original_labels` is omitted the two vectors coincide (untransformed data).
    Empty groups report None rather than zero."""
    n_classes = len(class_names)
    f1 = per_class_f1(true_labels, predictions, n_classes)
    cm = confusion_matrix(true_labels, predictions, n_classes)
    f1_original = (
        f1
        if original_labels is None
        else per_class_f1(original_labels, predictions, n_classes)
    )

    def group_score(members: frozenset[str], scores) -> float | None:
        ids = [i for i, name in enumerate(class_names) if name in members]
        if not ids:
            return None
        return float(np.mean([scores[i] for i in ids]))

    return ExperimentReport(
        experiment=experiment,
        config=config or {},
        groups={
            "white": group_score(policy.white, f1),
            "black": group_score(policy.black, f1_original),
            "gray": group_score(policy.gray, f1),
        },
        per_class={name: float(f1[i]) for i, name in enumerate(class_names)},
        confusion=cm.tolist(),
        runtime_s=runtime_s,
    )
