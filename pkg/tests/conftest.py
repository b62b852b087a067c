"""Shared fixtures: a small synthetic dataset and a quick trained checkpoint.

The small fixtures keep unit tests fast; full desk-scale runs live in
test_acceptance.py."""

from __future__ import annotations

import pytest

import privimu as p
from privimu.imuclip import TrainConfig


@pytest.fixture(scope="session")
def small_series():
    cfg = p.SyntheticConfig(n_classes=6, samples_per_class=60, channels=4, seed=11)
    return p.generate_synthetic(cfg)


@pytest.fixture(scope="session")
def small_split(small_series):
    windows = p.make_windows(small_series)
    return p.split(windows, 0.8, seed=3)


@pytest.fixture(scope="session")
def encoder():
    return p.FallbackTextEncoder()


@pytest.fixture(scope="session")
def small_corpus(small_series):
    return p.templated_corpus(small_series.class_names, 10)


@pytest.fixture(scope="session")
def small_checkpoint(small_series, small_split, small_corpus, encoder):
    train_w, _ = small_split
    cfg = TrainConfig(epochs=8, seed=5)
    return p.train(train_w, small_corpus, cfg, encoder, small_series.class_names)


@pytest.fixture(scope="session")
def small_library(small_series, small_split, small_checkpoint):
    train_w, _ = small_split
    return p.build_library(
        train_w,
        small_series.class_names,
        small_series.class_names,
        normalizer=small_checkpoint.normalizer,
    )


@pytest.fixture(scope="session")
def small_policy(small_series):
    names = small_series.class_names
    return p.PrivacyPolicy(
        white=frozenset(names[0:2]),
        black=frozenset(names[2:4]),
        gray=frozenset(names[4:6]),
        version=1,
    )


@pytest.fixture(scope="session")
def test_windows_by_class(small_series, small_split):
    _, test_w = small_split
    by_class = {}
    for w in test_w:
        by_class.setdefault(w.label, []).append(w)
    return by_class
