"""Labeled multichannel time series: loading, windowing, normalization, splits,
k-shot subsampling, and a deterministic synthetic dataset generator.

The on-disk format is a small CSV dialect:

    #classes: name0,name1,...
    #channels: C
    label_id,v_0,...,v_{C-1}
    ...

UTF-8, LF line endings, decimal floats. One row per timestep.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

DEFAULT_WINDOW_LENGTH = 32
DEFAULT_OVERLAP = 0.5

# Activity-style names for the built-in synthetic classes, one per waveform
# family (sinusoid, square, chirp, damped burst, drifting walk, AM sinusoid).
DEFAULT_ACTIVITY_NAMES = [
    "waving arms",
    "toggling a switch",
    "spinning up a wheel",
    "hammering a nail",
    "slow strolling",
    "rocking a box",
]

_CONST_EPS = 1e-12


class DatasetError(ValueError):
    """Malformed dataset file or invalid dataset operation."""


@dataclass
class LabeledSeries:
    """A time-major multichannel recording with a per-timestep activity label."""

    name: str
    channels: int
    data: np.ndarray  # (T, C) float64
    labels: np.ndarray  # (T,) int64
    class_names: list[str]

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.data.ndim != 2 or self.data.shape[1] != self.channels:
            raise DatasetError(
                f"data must be (T, {self.channels}), got {self.data.shape}"
            )
        if self.labels.shape != (self.data.shape[0],):
            raise DatasetError("labels length must equal number of timesteps")
        if not np.all(np.isfinite(self.data)):
            raise DatasetError("series contains non-finite values")
        if self.labels.size and (
            self.labels.min() < 0 or self.labels.max() >= len(self.class_names)
        ):
            raise DatasetError("label id out of range for declared classes")

    @property
    def length(self) -> int:
        return self.data.shape[0]


@dataclass
class IMUWindow:
    """A fixed-length window cut from a series; `label` is None for live input."""

    data: np.ndarray  # (L, C)
    label: int | None = None
    source_index: int = 0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise DatasetError(f"window data must be 2-D, got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise DatasetError("window contains non-finite values")

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape  # type: ignore[return-value]


@dataclass
class Normalizer:
    """Per-channel standardization statistics pooled over training windows."""

    mean: np.ndarray  # (C,)
    std: np.ndarray  # (C,), 1.0 on masked channels
    constant_channel_mask: np.ndarray  # (C,) bool

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        self.constant_channel_mask = np.asarray(self.constant_channel_mask, dtype=bool)
        if np.any(self.std[~self.constant_channel_mask] <= 0):
            raise DatasetError("std must be positive on non-constant channels")


@dataclass
class SyntheticConfig:
    n_classes: int = 6
    samples_per_class: int = 500
    channels: int = 6
    window_length: int = DEFAULT_WINDOW_LENGTH
    noise_sigma: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 3:
            raise DatasetError("n_classes must be >= 3 (white/black/gray all need members)")
        if self.samples_per_class < 1 or self.channels < 1 or self.window_length < 2:
            raise DatasetError("invalid synthetic config")
        if self.noise_sigma < 0:
            raise DatasetError("noise_sigma must be >= 0")


def load_labeled_series(path: str | Path, name: str | None = None) -> LabeledSeries:
    """Load a series from the documented CSV layout, reporting line numbers on errors."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if len(lines) < 3:
        raise DatasetError(f"{path}: expected 2 header lines plus data rows")
    if not lines[0].startswith("#classes:"):
        raise DatasetError(f"{path}: line 1 must start with '#classes:'")
    class_names = [c.strip() for c in lines[0][len("#classes:"):].split(",")]
    if not class_names or any(not c for c in class_names):
        raise DatasetError(f"{path}: empty class name in header")
    if not lines[1].startswith("#channels:"):
        raise DatasetError(f"{path}: line 2 must start with '#channels:'")
    try:
        channels = int(lines[1][len("#channels:"):].strip())
    except ValueError as e:
        raise DatasetError(f"{path}: bad channel count on line 2") from e

    rows = []
    labels = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != channels + 1:
            raise DatasetError(
                f"{path}: wrong column count ({len(parts)} != {channels + 1}), line {lineno}"
            )
        try:
            label = int(parts[0])
        except ValueError as e:
            raise DatasetError(f"{path}: non-integer label, line {lineno}") from e
        if not 0 <= label < len(class_names):
            raise DatasetError(f"{path}: label out of range, line {lineno}")
        try:
            values = [float(v) for v in parts[1:]]
        except ValueError as e:
            raise DatasetError(f"{path}: non-numeric value, line {lineno}") from e
        labels.append(label)
        rows.append(values)

    if not rows:
        raise DatasetError(f"{path}: no data rows")
    return LabeledSeries(
        name=name or path.stem,
        channels=channels,
        data=np.asarray(rows, dtype=np.float64),
        labels=np.asarray(labels, dtype=np.int64),
        class_names=class_names,
    )


def save_labeled_series(series: LabeledSeries, path: str | Path) -> None:
    """Write a series in the documented CSV layout (17 significant digits, lossless)."""
    path = Path(path)
    out = [
        "#classes: " + ",".join(series.class_names),
        f"#channels: {series.channels}",
    ]
    for label, row in zip(series.labels, series.data):
        out.append(str(int(label)) + "," + ",".join(f"{v:.17g}" for v in row))
    path.write_text("\n".join(out) + "\n", encoding="utf-8")


def make_windows(
    series: LabeledSeries,
    length: int = DEFAULT_WINDOW_LENGTH,
    overlap_fraction: float = DEFAULT_OVERLAP,
) -> list[IMUWindow]:
    """Cut overlapping windows; each is labeled by the majority timestep label
    (ties go to the lowest label id)."""
    if not 0 <= overlap_fraction < 1:
        raise DatasetError("overlap_fraction must be in [0, 1)")
    if length > series.length:
        raise DatasetError(
            f"window length {length} exceeds series length {series.length}"
        )
    stride = max(1, round(length * (1.0 - overlap_fraction)))
    n_classes = len(series.class_names)
    windows = []
    for start in range(0, series.length - length + 1, stride):
        seg_labels = series.labels[start : start + length]
        label = int(np.bincount(seg_labels, minlength=n_classes).argmax())
        windows.append(
            IMUWindow(
                data=series.data[start : start + length].copy(),
                label=label,
                source_index=start,
            )
        )
    return windows


def fit_normalizer(windows: list[IMUWindow]) -> Normalizer:
    """Pool all timesteps of all windows and fit per-channel mean/std (population std)."""
    if not windows:
        raise DatasetError("cannot fit a normalizer on an empty window list")
    pooled = np.concatenate([w.data for w in windows], axis=0)
    mean = pooled.mean(axis=0)
    std = pooled.std(axis=0)
    mask = std <= _CONST_EPS
    std = np.where(mask, 1.0, std)
    return Normalizer(mean=mean, std=std, constant_channel_mask=mask)


def apply_normalizer(normalizer: Normalizer, window: IMUWindow) -> IMUWindow:
    """Standardize a window; constant channels map to zero."""
    out = (window.data - normalizer.mean) / normalizer.std
    out[:, normalizer.constant_channel_mask] = 0.0
    return IMUWindow(data=out, label=window.label, source_index=window.source_index)


def invert_normalizer(normalizer: Normalizer, window: IMUWindow) -> IMUWindow:
    """Map a normalized window back to raw units; masked channels map to their mean."""
    out = window.data * normalizer.std + normalizer.mean
    out[:, normalizer.constant_channel_mask] = normalizer.mean[
        normalizer.constant_channel_mask
    ]
    return IMUWindow(data=out, label=window.label, source_index=window.source_index)


def split(
    windows: list[IMUWindow], ratio: float = 0.8, seed: int = 0
) -> tuple[list[IMUWindow], list[IMUWindow]]:
    """Deterministic shuffled split: round(ratio*N) windows for training."""
    if not 0 < ratio < 1:
        raise DatasetError("split ratio must be in (0, 1)")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(windows))
    n_train = int(round(ratio * len(windows)))
    train = [windows[i] for i in perm[:n_train]]
    test = [windows[i] for i in perm[n_train:]]
    return train, test


def few_shot_subsample(
    train: list[IMUWindow],
    sensitive_classes: set[int],
    k: int,
    seed: int = 0,
) -> list[IMUWindow]:
    """Keep all non-sensitive windows and exactly min(k, available) windows per
    sensitive class, sampled uniformly; k=0 removes sensitive classes (zero-shot)."""
    if k < 0:
        raise DatasetError("k must be >= 0")
    rng = np.random.default_rng(seed)
    keep = set()
    for cls in sorted(sensitive_classes):
        idx = np.array([i for i, w in enumerate(train) if w.label == cls], dtype=int)
        if k == 0 or idx.size == 0:
            continue
        chosen = rng.choice(idx, size=min(k, idx.size), replace=False)
        keep.update(int(i) for i in chosen)
    return [
        w
        for i, w in enumerate(train)
        if w.label not in sensitive_classes or i in keep
    ]


def _family_waveform(family: int, t: np.ndarray, phase: float, rng: np.random.Generator,
                     cycle: int, drift: np.ndarray) -> np.ndarray:
    """One channel of one waveform family; `t` is time in window-length units.

    Families: 0 sinusoid, 1 square, 2 chirp, 3 damped burst, 4 drifting walk,
    5 amplitude-modulated sinusoid. `cycle` scales frequency for n_classes > 6.
    `drift` is a slow random phase walk (radians, shared across channels) that
    keeps windows from being phase-locked to the windowing grid.
    """
    f = 1.0 + 0.5 * cycle
    if family == 0:
        return 1.0 * np.sin(2 * np.pi * (2.0 * f) * t + phase + drift)
    if family == 1:
        return 0.9 * np.sign(np.sin(2 * np.pi * (3.0 * f) * t + phase + drift))
    if family == 2:
        # Periodic chirp: frequency sweeps 1f..5f within each 2-window period.
        u = np.mod(t + (phase + drift) / (2 * np.pi), 2.0) / 2.0
        return np.sin(2 * np.pi * 2.0 * (1.0 * f * u + 0.5 * 4.0 * f * u**2))
    if family == 3:
        # Repeating damped bursts, one per window length.
        u = np.mod(t + (phase + drift) / (2 * np.pi), 1.0)
        return 1.6 * np.exp(-4.0 * u) * np.sin(2 * np.pi * (6.0 * f) * u)
    if family == 4:
        # Mean-reverting walk: slow drift with bounded variance.
        steps = rng.normal(0.0, 0.1, size=t.shape[0])
        walk = lfilter([1.0], [1.0, -0.995], steps)
        return 0.35 * walk
    if family == 5:
        envelope = 0.55 + 0.45 * np.sin(2 * np.pi * 0.4 * t + phase + 0.4 * drift)
        return envelope * np.sin(2 * np.pi * (2.5 * f) * t + phase + drift)
    raise AssertionError(f"unknown family {family}")


def synthetic_class_names(n_classes: int) -> list[str]:
    names = []
    for c in range(n_classes):
        base = DEFAULT_ACTIVITY_NAMES[c % len(DEFAULT_ACTIVITY_NAMES)]
        names.append(base if c < len(DEFAULT_ACTIVITY_NAMES) else f"{base} style {c // 6 + 1}")
    return names


def generate_synthetic(config: SyntheticConfig) -> LabeledSeries:
    """Deterministic synthetic dataset: one contiguous segment per class, each a
    distinct waveform family plus Gaussian noise, sized so default windowing
    yields `samples_per_class` windows per class."""
    rng = np.random.default_rng(config.seed)
    L = config.window_length
    stride = L // 2  # matches the default 50%-overlap windowing
    t_class = L + (config.samples_per_class - 1) * stride

    segments = []
    labels = []
    for c in range(config.n_classes):
        family = c % 6
        cycle = c // 6
        t = np.arange(t_class, dtype=np.float64) / L
        # Slow phase walk, shared across channels: windows sample all phases
        # instead of repeating the handful aligned with the windowing stride.
        drift = np.cumsum(rng.normal(0.0, 0.08, size=t_class))
        seg = np.empty((t_class, config.channels), dtype=np.float64)
        for ch in range(config.channels):
            phase = 2 * np.pi * ch / config.channels
            # Channel gain varies so channels are correlated but not identical.
            gain = 0.7 + 0.6 * ch / max(1, config.channels - 1)
            seg[:, ch] = gain * _family_waveform(family, t, phase, rng, cycle, drift)
        segments.append(seg)
        labels.append(np.full(t_class, c, dtype=np.int64))

    data = np.concatenate(segments, axis=0)
    if config.noise_sigma > 0:
        data = data + rng.normal(0.0, config.noise_sigma, size=data.shape)
    return LabeledSeries(
        name=f"synthetic{config.n_classes}",
        channels=config.channels,
        data=data,
        labels=np.concatenate(labels),
        class_names=synthetic_class_names(config.n_classes),
    )


def windows_to_array(windows: list[IMUWindow]) -> np.ndarray:
    """Stack windows into an (N, L, C) array; shapes must agree."""
    if not windows:
        raise DatasetError("empty window list")
    shapes = {w.shape for w in windows}
    if len(shapes) != 1:
        raise DatasetError(f"inconsistent window shapes: {sorted(shapes)}")
    return np.stack([w.data for w in windows], axis=0)


def window_labels(windows: list[IMUWindow]) -> np.ndarray:
    labels = [w.label for w in windows]
    if any(l is None for l in labels):
        raise DatasetError("window list contains unlabeled windows")
    return np.asarray(labels, dtype=np.int64)
