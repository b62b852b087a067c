"""The honest-but-curious adversary: a CNN activity classifier trained on
original (untransformed) windows and used to probe transformed data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from ..datasets import (
    IMUWindow,
    apply_normalizer,
    fit_normalizer,
    window_labels,
)


@dataclass
class AdversaryConfig:
    epochs: int = 200
    batch_size: int = 64
    lr: float = 1e-3
    seed: int = 0
    conv_channels: tuple[int, int, int] = (32, 64, 64)
    hidden: int = 128

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


class _ConvNet(nn.Module):
    """Three 1-D conv layers with ReLU, then two fully connected layers."""

    def __init__(self, channels: int, length: int, n_classes: int, cfg: AdversaryConfig):
        super().__init__()
        c1, c2, c3 = cfg.conv_channels
        self.convs = nn.Sequential(
            nn.Conv1d(channels, c1, kernel_size=5, padding=2),
            nn.ReLU(),
            nn.Conv1d(c1, c2, kernel_size=5, padding=2),
            nn.ReLU(),
            nn.Conv1d(c2, c3, kernel_size=3, padding=1),
            nn.ReLU(),
        )
        self.fc1 = nn.Linear(c3 * length, cfg.hidden)
        self.fc2 = nn.Linear(cfg.hidden, n_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        # x: (B, L, C) -> logits (B, n_classes)
        h = self.convs(x.transpose(1, 2))
        h = torch.relu(self.fc1(h.flatten(1)))
        return self.fc2(h)


class AdversaryClassifier:
    """Trained activity classifier over raw windows (normalizes internally)."""

    def __init__(self, net: _ConvNet, normalizer, n_classes: int):
        self.net = net
        self.normalizer = normalizer
        self.n_classes = n_classes

    def _to_tensor(self, windows: list[IMUWindow]) -> torch.Tensor:
        arr = np.stack(
            [apply_normalizer(self.normalizer, w).data for w in windows]
        ).astype(np.float32)
        return torch.from_numpy(arr)

    def predict(self, windows: list[IMUWindow]) -> np.ndarray:
        self.net.eval()
        outputs = []
        with torch.no_grad():
            x = self._to_tensor(windows)
            for s in range(0, x.shape[0], 1024):
                outputs.append(self.net(x[s : s + 1024]).argmax(dim=1).numpy())
        return np.concatenate(outputs)

    def accuracy(self, windows: list[IMUWindow]) -> float:
        return float(np.mean(self.predict(windows) == window_labels(windows)))


def train_adversary(
    train_windows: list[IMUWindow],
    config: AdversaryConfig,
    n_classes: int | None = None,
) -> AdversaryClassifier:
    """Train with Adam + categorical cross-entropy; deterministic per seed."""
    labels = window_labels(train_windows)
    if len(set(labels.tolist())) < 2:
        raise ValueError("adversary training needs at least 2 classes")
    n_classes = n_classes if n_classes is not None else int(labels.max()) + 1
    normalizer = fit_normalizer(train_windows)
    length, channels = train_windows[0].shape

    torch.manual_seed(config.seed)
    net = _ConvNet(channels, length, n_classes, config)
    net.train()
    optimizer = torch.optim.Adam(net.parameters(), lr=config.lr)
    loss_fn = nn.CrossEntropyLoss()

    arr = np.stack(
        [apply_normalizer(normalizer, w).data for w in train_windows]
    ).astype(np.float32)
    x_all = torch.from_numpy(arr)
    y_all = torch.from_numpy(labels)
    rng = np.random.default_rng(config.seed)
    n = len(train_windows)
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        for s in range(0, n, config.batch_size):
            idx = perm[s : s + config.batch_size]
            logits = net(x_all[idx])
            loss = loss_fn(logits, y_all[idx])
            if not torch.isfinite(loss):
                raise RuntimeError(f"non-finite adversary loss at epoch {epoch}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
    net.eval()
    return AdversaryClassifier(net=net, normalizer=normalizer, n_classes=n_classes)
