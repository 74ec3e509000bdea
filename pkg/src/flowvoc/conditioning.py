"""Conditioning networks: variational reference encoder and mel conditioner.

The reference encoder maps a waveform to a 48-dimensional Gaussian posterior
over an utterance-level audio embedding. The mel conditioner turns
standardized log-mel frames into frame-rate features, which are concatenated
with the (tiled) embedding and repeated per hop span to sample rate.
"""

from __future__ import annotations

import dataclasses

import torch
import torch.nn as nn
from torch.nn.utils.parametrizations import weight_norm

from .errors import ValidationError

EMBEDDING_DIM = 48

# Channels the waveform models consume: 2 * 128 BiLSTM features + embedding.
CONDITIONING_CHANNELS = 256 + EMBEDDING_DIM

LOGVAR_CLAMP = 14.0


@dataclasses.dataclass
class AudioEmbeddingPosterior:
    """Diagonal Gaussian over the utterance embedding.

    Attributes:
        mean: (B, 48) tensor.
        logvar: (B, 48) tensor, clamped to [-LOGVAR_CLAMP, LOGVAR_CLAMP].
    """

    mean: torch.Tensor
    logvar: torch.Tensor


def _wn_conv(in_ch, out_ch, kernel, stride=1, groups=1):
    return weight_norm(
        nn.Conv1d(in_ch, out_ch, kernel, stride=stride, padding=kernel // 2, groups=groups)
    )


class _ScaleEncoder(nn.Module):
    """One discriminator-style tower; emits a (16 mean, 16 logvar) chunk."""

    def __init__(self):
        super().__init__()
        self.convs = nn.ModuleList(
            [
                _wn_conv(1, 16, 15),
                _wn_conv(16, 64, 41, stride=4, groups=4),
                _wn_conv(64, 256, 41, stride=4, groups=4),
                _wn_conv(256, 512, 41, stride=4, groups=4),
                _wn_conv(512, 512, 41, stride=4, groups=4),
                _wn_conv(512, 512, 5),
            ]
        )
        self.proj = _wn_conv(512, 16, 3)
        self.dense = nn.Linear(16, 32)
        self.act = nn.LeakyReLU(0.2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = x
        for conv in self.convs:
            h = self.act(conv(h))
        h = self.proj(h)
        h = torch.amax(h, dim=2)  # global max pool over time
        return self.dense(h)


class AudioEncoder(nn.Module):
    """Waveform -> 48-dim variational embedding posterior.

    Three identical towers look at the waveform and its 2x / 4x average-pooled
    copies; each contributes 16 of the 48 posterior dimensions. Global max
    pooling over time makes the encoding invariant to shifts by whole periods
    of a stationary input (up to pooling-grid effects).
    """

    # Two avg-poolings quarter the length and the deepest tower's stride
    # product is 256, so below 4 * 256 samples that tower has no analysis
    # position fed entirely by real signal.
    MIN_INPUT_LENGTH = 1024

    def __init__(self):
        super().__init__()
        self.scales = nn.ModuleList([_ScaleEncoder() for _ in range(3)])
        self.pool = nn.AvgPool1d(kernel_size=4, stride=2, padding=1, count_include_pad=False)

    def forward(self, wave: torch.Tensor) -> AudioEmbeddingPosterior:
        """Args: wave of shape (B, L) or (L,). Returns the posterior."""
        if wave.dim() == 1:
            wave = wave[None]
        if wave.dim() != 2:
            raise ValidationError(f"encoder expects (B, L) or (L,), got {tuple(wave.shape)}")
        if wave.shape[-1] < self.MIN_INPUT_LENGTH:
            raise ValidationError(
                f"encoder input of {wave.shape[-1]} samples is below the "
                f"minimum of {self.MIN_INPUT_LENGTH}"
            )
        x = wave[:, None, :]
        means, logvars = [], []
        for scale in self.scales:
            out = scale(x)
            means.append(out[:, :16])
            logvars.append(out[:, 16:])
            x = self.pool(x)
        mean = torch.cat(means, dim=1)
        logvar = torch.cat(logvars, dim=1).clamp(-LOGVAR_CLAMP, LOGVAR_CLAMP)
        return AudioEmbeddingPosterior(mean=mean, logvar=logvar)


def sample_embedding(
    posterior: AudioEmbeddingPosterior, generator: torch.Generator | None = None
) -> torch.Tensor:
    """Reparameterized draw e = mean + exp(logvar / 2) * eps."""
    std = torch.exp(0.5 * posterior.logvar)
    eps = torch.randn(
        posterior.mean.shape,
        generator=generator,
        dtype=posterior.mean.dtype,
        device=posterior.mean.device,
    )
    return posterior.mean + std * eps


def kl_to_standard_prior(posterior: AudioEmbeddingPosterior) -> torch.Tensor:
    """KL(q || N(0, I)) in nats, summed over embedding dims; shape (B,)."""
    var = torch.exp(posterior.logvar)
    return 0.5 * torch.sum(posterior.mean**2 + var - 1.0 - posterior.logvar, dim=-1)


class MelConditioner(nn.Module):
    """Two bidirectional LSTM layers over standardized mel frames.

    Maps (B, T, n_mels) to (B, T, 256): 128 hidden units per direction.
    """

    def __init__(self, n_mels: int = 80, hidden: int = 128, layers: int = 2):
        super().__init__()
        self.lstm = nn.LSTM(
            input_size=n_mels,
            hidden_size=hidden,
            num_layers=layers,
            batch_first=True,
            bidirectional=True,
        )

    def forward(self, mel: torch.Tensor) -> torch.Tensor:
        if mel.dim() == 2:
            mel = mel[None]
        if mel.dim() != 3:
            raise ValidationError(f"conditioner expects (B, T, C) or (T, C), got {tuple(mel.shape)}")
        out, _ = self.lstm(mel)
        return out


def combine_and_upsample(
    frame_features: torch.Tensor, embedding: torch.Tensor, upsample_factor: int
) -> torch.Tensor:
    """Tile the embedding across frames and repeat rows to sample rate.

    Args:
        frame_features: (B, T, F) frame-rate features.
        embedding: (B, E) or (E,) utterance embedding.
        upsample_factor: samples per frame.

    Returns:
        (B, T * upsample_factor, F + E). Rows within one frame's span are
        exact copies, so conditioning is piecewise constant inside a frame.
    """
    if frame_features.dim() != 3:
        raise ValidationError(f"frame features must be (B, T, F), got {tuple(frame_features.shape)}")
    if upsample_factor < 1:
        raise ValidationError("upsample_factor must be >= 1")
    batch, n_frames, _ = frame_features.shape
    if embedding.dim() == 1:
        embedding = embedding[None].expand(batch, -1)
    if embedding.shape[0] != batch:
        raise ValidationError("embedding batch does not match frame features")
    tiled = embedding[:, None, :].expand(batch, n_frames, embedding.shape[-1])
    combined = torch.cat([frame_features, tiled.to(frame_features.dtype)], dim=2)
    return torch.repeat_interleave(combined, upsample_factor, dim=1)
