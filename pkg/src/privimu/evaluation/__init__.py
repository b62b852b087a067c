"""Experiment harness: adversary classifier, RAE baseline, grouped F1 metrics,
and the desk-scale experiment suites."""

from .adversary import AdversaryClassifier, AdversaryConfig, train_adversary
from .experiments import (
    DeskScaleConfig,
    description_ablation,
    few_shot_curve,
    prepare_splits,
    run_dynamic_experiment,
    run_transform_experiment,
    sanitize_windows,
)
from .metrics import ExperimentReport, confusion_matrix, grouped_f1, per_class_f1
from .rae import RAEConfig, RAEModel, rae_train, rae_transform

__all__ = [
    "AdversaryClassifier",
    "AdversaryConfig",
    "DeskScaleConfig",
    "ExperimentReport",
    "RAEConfig",
    "RAEModel",
    "confusion_matrix",
    "description_ablation",
    "few_shot_curve",
    "grouped_f1",
    "per_class_f1",
    "prepare_splits",
    "rae_train",
    "rae_transform",
    "run_dynamic_experiment",
    "run_transform_experiment",
    "sanitize_windows",
    "train_adversary",
]
