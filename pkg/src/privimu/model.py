"""Model architecture: IMU window encoder (conv patchify + self-attention) and
the two projection heads into the shared embedding space.

Forward pass for a window of shape (L, C):

    tokens  = Conv2d(1, d_model, kernel=(P, C), stride=(P, C)) over the LxC grid
    x       = tokens + learned positional embedding          # (L/P, d_model)
    x       = LayerNorm(x + SelfAttention(x))  (three blocks)
    pooled  = mean over the token axis
    h       = ReLU(pooled @ W_dense + b)
    z_imu   = normalize(h @ W_proj + b)                      # (d_shared,)

Text side: z_text = normalize(t @ W_text + b) for a frozen encoder vector t.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import torch
import torch.nn.functional as F
from torch import nn


class ModelConfigError(ValueError):
    """Inconsistent architecture hyperparameters."""


@dataclass
class ModelHyperparams:
    window_length: int
    channels: int
    d_model: int = 64
    n_heads: int = 4
    d_text: int = 512
    d_shared: int = 512
    patch_timesteps: int = 4
    temperature: float = 0.07

    def __post_init__(self):
        if self.window_length % self.patch_timesteps != 0:
            raise ModelConfigError(
                f"window_length {self.window_length} must be divisible by "
                f"patch_timesteps {self.patch_timesteps}"
            )
        if self.d_model % self.n_heads != 0:
            raise ModelConfigError("d_model must be divisible by n_heads")
        if self.temperature <= 0:
            raise ModelConfigError("temperature must be positive")

    @property
    def n_tokens(self) -> int:
        return self.window_length // self.patch_timesteps

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelHyperparams":
        return cls(**d)


class SelfAttentionBlock(nn.Module):
    """Multi-head self-attention with residual connection and LayerNorm."""

    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.qkv = nn.Linear(d_model, 3 * d_model)
        self.out = nn.Linear(d_model, d_model)
        self.norm = nn.LayerNorm(d_model)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        # x: (B, T, d_model); attention is softmax(q k^T / sqrt(d_head)) v per head
        b, t, d = x.shape
        qkv = self.qkv(x).reshape(b, t, 3, self.n_heads, self.d_head)
        q, k, v = qkv.permute(2, 0, 3, 1, 4)  # each (B, heads, T, d_head)
        mixed = F.scaled_dot_product_attention(q, k, v).transpose(1, 2).reshape(b, t, d)
        return self.norm(x + self.out(mixed))


class IMUEncoder(nn.Module):
    """Patchifying transformer encoder producing one d_model vector per window."""

    def __init__(self, hp: ModelHyperparams):
        super().__init__()
        self.hp = hp
        self.patch = nn.Conv2d(
            1,
            hp.d_model,
            kernel_size=(hp.patch_timesteps, hp.channels),
            stride=(hp.patch_timesteps, hp.channels),
        )
        self.pos = nn.Parameter(torch.zeros(hp.n_tokens, hp.d_model))
        self.blocks = nn.ModuleList(
            SelfAttentionBlock(hp.d_model, hp.n_heads) for _ in range(3)
        )
        self.dense = nn.Linear(hp.d_model, hp.d_model)

    def forward(self, windows: torch.Tensor) -> torch.Tensor:
        # windows: (B, L, C) -> (B, d_model)
        b, length, channels = windows.shape
        if (length, channels) != (self.hp.window_length, self.hp.channels):
            raise ModelConfigError(
                f"window shape ({length}, {channels}) does not match model "
                f"({self.hp.window_length}, {self.hp.channels})"
            )
        x = self.patch(windows.unsqueeze(1))  # (B, d_model, L/P, 1)
        x = x.squeeze(-1).transpose(1, 2)  # (B, L/P, d_model)
        x = x + self.pos
        for block in self.blocks:
            x = block(x)
        pooled = x.mean(dim=1)
        return torch.relu(self.dense(pooled))


class IMUClipModel(nn.Module):
    """IMU encoder plus the modality projection heads into the shared space."""

    def __init__(self, hp: ModelHyperparams):
        super().__init__()
        self.hp = hp
        self.encoder = IMUEncoder(hp)
        self.imu_proj = nn.Linear(hp.d_model, hp.d_shared)
        self.text_proj = nn.Linear(hp.d_text, hp.d_shared)

    def embed_imu(self, windows: torch.Tensor) -> torch.Tensor:
        z = self.imu_proj(self.encoder(windows))
        return z / z.norm(dim=-1, keepdim=True)

    def embed_text(self, text_vectors: torch.Tensor) -> torch.Tensor:
        z = self.text_proj(text_vectors)
        return z / z.norm(dim=-1, keepdim=True)

    def imu_side_parameters(self):
        """Parameters updated at the IMU learning rate (encoder + IMU head)."""
        yield from self.encoder.parameters()
        yield from self.imu_proj.parameters()


def build_model(hp: ModelHyperparams, seed: int = 0) -> IMUClipModel:
    """Deterministically initialized model (bit-identical for a fixed seed)."""
    torch.manual_seed(seed)
    model = IMUClipModel(hp)
    model.eval()
    return model
