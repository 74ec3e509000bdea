"""Autoregressive teacher: gated dilated convolutions over waveform samples.

The teacher factorizes p(x | mel, e) into per-sample discretized
mixture-of-logistics terms. `WaveNetTeacher.forward` is the raw causal stack:
its output at index t is a function of x[0..t] and cond[t] and parameterizes
the distribution of the *next* sample. `predict` shifts the input right by
one so index t is parameterized by x[0..t-1] and cond[t]; likelihood
training, sampling, and distillation consume that view.
"""

from __future__ import annotations

import dataclasses
import math
import os
import time

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .checkpoint import save_checkpoint
from .conditioning import (
    AudioEncoder,
    MelConditioner,
    combine_and_upsample,
    kl_to_standard_prior,
    sample_embedding,
)
from .data import read_manifest
from .errors import DivergenceError, ValidationError
from .signal import standardize_mel
from .training import CorpusCache, MetricsLog, beta_schedule, serialize_configs

# Half-width of one 16-bit amplitude bin on [-1, 1].
HALF_BIN = 1.0 / 65535.0

LOG_SCALE_MIN = -7.0


@dataclasses.dataclass
class TeacherConfig:
    """Teacher hyperparameters.

    Defaults: 24 layers in 4 dilation-doubling cycles (dilation 2^(i % 6),
    so 1..32), kernel 3, 128-channel residual/gate/skip paths, 10 mixture
    components, 304 conditioning channels.
    """

    layers: int = 24
    dilation_cycle: int = 6
    residual_channels: int = 128
    gate_channels: int = 128
    skip_channels: int = 128
    kernel_size: int = 3
    mixture_components: int = 10
    conditioning_channels: int = 304

    def validate(self) -> None:
        for name in (
            "layers",
            "dilation_cycle",
            "residual_channels",
            "gate_channels",
            "skip_channels",
            "kernel_size",
            "mixture_components",
            "conditioning_channels",
        ):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"teacher config field {name} must be >= 1")

    def dilations(self) -> list[int]:
        return [2 ** (i % self.dilation_cycle) for i in range(self.layers)]

    def max_lag(self) -> int:
        """Deepest input lag visible to a raw forward output."""
        return sum((self.kernel_size - 1) * d for d in self.dilations())


@dataclasses.dataclass
class MoLParams:
    """Mixture-of-logistics parameters, each of shape (..., T, K)."""

    logit_weights: torch.Tensor
    means: torch.Tensor
    log_scales: torch.Tensor

    @property
    def n_components(self) -> int:
        return int(self.logit_weights.shape[-1])


class GatedResidualLayer(nn.Module):
    """Causal gated dilated conv with 1x1 conditioning into both halves.

    Left-pads by (kernel - 1) * dilation so output t never sees input beyond
    t. Returns the residual stream and, when skip_channels is set, a skip
    contribution.
    """

    def __init__(
        self,
        residual_channels: int,
        gate_channels: int,
        kernel_size: int,
        dilation: int,
        cond_channels: int,
        skip_channels: int | None = None,
    ):
        super().__init__()
        self.pad = (kernel_size - 1) * dilation
        self.conv = nn.Conv1d(
            residual_channels, 2 * gate_channels, kernel_size, dilation=dilation
        )
        self.cond = nn.Conv1d(cond_channels, 2 * gate_channels, 1)
        self.res = nn.Conv1d(gate_channels, residual_channels, 1)
        self.skip = None if skip_channels is None else nn.Conv1d(gate_channels, skip_channels, 1)

    def forward(self, h: torch.Tensor, cond: torch.Tensor):
        y = self.conv(F.pad(h, (self.pad, 0))) + self.cond(cond)
        a, b = y.chunk(2, dim=1)
        z = torch.tanh(a) * torch.sigmoid(b)
        out = h + self.res(z)
        if self.skip is None:
            return out, None
        return out, self.skip(z)


class WaveNetTeacher(nn.Module):
    """Sample-level autoregressive density with MoL output head."""

    def __init__(self, config: TeacherConfig | None = None):
        super().__init__()
        config = config or TeacherConfig()
        config.validate()
        self.config = config
        self.input_conv = nn.Conv1d(1, config.residual_channels, 1)
        self.layers = nn.ModuleList(
            GatedResidualLayer(
                config.residual_channels,
                config.gate_channels,
                config.kernel_size,
                dilation,
                config.conditioning_channels,
                skip_channels=config.skip_channels,
            )
            for dilation in config.dilations()
        )
        self.post1 = nn.Conv1d(config.skip_channels, config.skip_channels, 1)
        self.post2 = nn.Conv1d(config.skip_channels, 3 * config.mixture_components, 1)

    def _validate(self, x: torch.Tensor, cond: torch.Tensor) -> None:
        if x.dim() != 2:
            raise ValidationError(f"teacher expects audio of shape (B, T), got {tuple(x.shape)}")
        if cond.dim() != 3 or cond.shape[:2] != x.shape:
            raise ValidationError(
                f"conditioning shape {tuple(cond.shape)} does not match audio {tuple(x.shape)}"
            )
        if cond.shape[2] != self.config.conditioning_channels:
            raise ValidationError(
                f"conditioning has {cond.shape[2]} channels, "
                f"expected {self.config.conditioning_channels}"
            )

    def forward(self, x: torch.Tensor, cond: torch.Tensor) -> MoLParams:
        """Raw causal stack: output t is a function of x[0..t] and cond[t]."""
        self._validate(x, cond)
        batch, length = x.shape
        h = self.input_conv(x[:, None, :])
        c = cond.transpose(1, 2).contiguous()
        skip_sum = None
        for layer in self.layers:
            h, skip = layer(h, c)
            skip_sum = skip if skip_sum is None else skip_sum + skip
        out = self.post2(F.relu(self.post1(F.relu(skip_sum))))
        k = self.config.mixture_components
        out = out.view(batch, 3, k, length)
        logit_weights = out[:, 0].transpose(1, 2)
        means = out[:, 1].transpose(1, 2)
        log_scales = out[:, 2].transpose(1, 2).clamp(min=LOG_SCALE_MIN)
        return MoLParams(logit_weights=logit_weights, means=means, log_scales=log_scales)

    def predict(self, x: torch.Tensor, cond: torch.Tensor) -> MoLParams:
        """Per-sample predictive parameters: output t sees x[0..t-1], cond[t]."""
        self._validate(x, cond)
        shifted = F.pad(x, (1, 0))[:, :-1]
        return self.forward(shifted, cond)


def mol_log_likelihood(params: MoLParams, targets: torch.Tensor, reduction: str = "mean"):
    """Discretized MoL negative log-likelihood at 16-bit granularity.

    Bin mass is CDF(x + 1/65535) - CDF(x - 1/65535); the bottom and top bins
    absorb the tails beyond -1 and 1. Targets must lie in [-1, 1].

    Args:
        params: MoL parameters of shape (..., T, K).
        targets: values of shape (...); broadcast against the params batch.
        reduction: "mean" for scalar mean NLL, "none" for per-position NLL.
    """
    x = targets.unsqueeze(-1)
    centered = x - params.means
    inv_s = torch.exp(-params.log_scales)
    plus_in = inv_s * (centered + HALF_BIN)
    minus_in = inv_s * (centered - HALF_BIN)
    log_cdf_plus = F.logsigmoid(plus_in)
    log_one_minus_cdf_minus = -F.softplus(minus_in)
    cdf_delta = torch.sigmoid(plus_in) - torch.sigmoid(minus_in)
    mid_in = inv_s * centered
    log_pdf_mid = mid_in - params.log_scales - 2.0 * F.softplus(mid_in)
    interior = torch.where(
        cdf_delta > 1e-5,
        torch.log(torch.clamp(cdf_delta, min=1e-12)),
        log_pdf_mid + math.log(2.0 * HALF_BIN),
    )
    per_component = torch.where(
        x < -1.0 + HALF_BIN,
        log_cdf_plus,
        torch.where(x > 1.0 - HALF_BIN, log_one_minus_cdf_minus, interior),
    )
    log_prob = torch.logsumexp(
        F.log_softmax(params.logit_weights, dim=-1) + per_component, dim=-1
    )
    if reduction == "mean":
        return -log_prob.mean()
    if reduction == "none":
        return -log_prob
    raise ValidationError(f"unknown reduction {reduction!r}")


def mol_log_density(params: MoLParams, x: torch.Tensor) -> torch.Tensor:
    """Continuous mixture log-density at x (nats); x broadcasts against params."""
    z = (x.unsqueeze(-1) - params.means) * torch.exp(-params.log_scales)
    log_pdf = -z - params.log_scales - 2.0 * F.softplus(-z)
    return torch.logsumexp(F.log_softmax(params.logit_weights, dim=-1) + log_pdf, dim=-1)


def mol_sample(params: MoLParams, generator: torch.Generator | None = None) -> torch.Tensor:
    """One draw per position: Gumbel-max component choice, logistic inverse CDF."""
    logits = params.logit_weights
    u = torch.rand(logits.shape, generator=generator, dtype=logits.dtype, device=logits.device)
    gumbel = -torch.log(torch.clamp(-torch.log(u.clamp_min(1e-12)), min=1e-12))
    component = torch.argmax(logits + gumbel, dim=-1, keepdim=True)
    means = params.means.gather(-1, component).squeeze(-1)
    log_scales = params.log_scales.gather(-1, component).squeeze(-1)
    v = torch.rand(means.shape, generator=generator, dtype=logits.dtype, device=logits.device)
    v = v.clamp(1e-7, 1.0 - 1e-7)
    x = means + torch.exp(log_scales) * (torch.log(v) - torch.log1p(-v))
    return x.clamp(-1.0, 1.0)


def teacher_nll(model: WaveNetTeacher, audio: torch.Tensor, cond: torch.Tensor):
    """Mean predictive NLL of audio under the teacher."""
    return mol_log_likelihood(model.predict(audio, cond), audio)


@dataclasses.dataclass
class TeacherTrainConfig:
    """Teacher training loop settings."""

    steps: int = 200000
    batch_size: int = 64
    clip_seconds: float = 0.3625
    learning_rate: float = 1e-4
    kl_warmup_steps: int = 20000
    kl_weight: float = 1.0
    log_interval: int = 50
    checkpoint_interval: int = 0
    validation_fraction: float = 0.0
    early_stop_patience: int = 50000
    seed: int = 0

    def validate(self) -> None:
        if self.steps < 1 or self.batch_size < 1 or self.log_interval < 1:
            raise ValidationError("steps, batch_size, and log_interval must be >= 1")
        if self.clip_seconds <= 0 or self.learning_rate <= 0:
            raise ValidationError("clip_seconds and learning_rate must be positive")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValidationError("validation_fraction must be in [0, 1)")
        if self.kl_warmup_steps < 0 or self.kl_weight < 0:
            raise ValidationError("kl_warmup_steps and kl_weight must be non-negative")


def train_teacher(manifest_path, config, out_dir, seed: int | None = None) -> str:
    """Train the teacher jointly with its conditioning networks.

    Loss is the mean predictive MoL NLL plus the warmed-up KL of the
    embedding posterior against the unit Gaussian prior. Writes
    metrics.jsonl and teacher.ckpt (plus periodic checkpoints when
    checkpoint_interval is set) under out_dir; returns the final checkpoint
    path. Runs are reproducible per seed up to the hardware determinism of
    the BLAS/conv kernels in use; the wallclock metric field is excluded
    from that guarantee.

    Raises:
        DivergenceError: the loss became non-finite.
    """
    tc = config.teacher_train
    tc.validate()
    config.mel.validate()
    config.teacher.validate()
    out_dir = str(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    seed = tc.seed if seed is None else int(seed)
    rng = np.random.default_rng(seed)
    generator = torch.Generator().manual_seed(seed + 1)
    torch.manual_seed(seed)

    records = read_manifest(manifest_path)
    val_records = []
    if tc.validation_fraction > 0 and len(records) > 1:
        order = np.random.default_rng(seed).permutation(len(records))
        n_val = max(1, int(round(tc.validation_fraction * len(records))))
        val_records = [records[i] for i in order[:n_val]]
        records = [records[i] for i in order[n_val:]]
    corpus = CorpusCache(manifest_path, records, config.mel)
    val_corpus = CorpusCache(manifest_path, val_records, config.mel) if val_records else None
    stats = corpus.mel_stats()

    teacher = WaveNetTeacher(config.teacher)
    conditioner = MelConditioner(config.mel.n_mels)
    encoder = AudioEncoder()
    parameters = (
        list(teacher.parameters()) + list(conditioner.parameters()) + list(encoder.parameters())
    )
    optimizer = torch.optim.Adam(parameters, lr=tc.learning_rate)

    metrics = MetricsLog(os.path.join(out_dir, "metrics.jsonl"))
    loss_curve = []
    val_rng = np.random.default_rng(seed + 2)
    val_every = tc.log_interval * 10
    smoothed_val = None
    best_val = math.inf
    best_step = 0

    def _forward_nll(batch, sample_posterior: bool):
        audio = torch.from_numpy(batch.audio)
        mel = torch.from_numpy(standardize_mel(batch.mel, stats))
        posterior = encoder(audio)
        if sample_posterior:
            e = sample_embedding(posterior, generator)
        else:
            e = posterior.mean
        cond = combine_and_upsample(conditioner(mel), e, config.mel.hop_length)
        nll = teacher_nll(teacher, audio, cond)
        return nll, kl_to_standard_prior(posterior).mean()

    def _snapshot(tag: str, step: int) -> str:
        return save_checkpoint(
            os.path.join(out_dir, tag),
            step=step,
            components={
                "teacher": teacher.state_dict(),
                "mel_conditioner": conditioner.state_dict(),
                "audio_encoder": encoder.state_dict(),
            },
            configs=serialize_configs(config),
            mel_stats=stats,
            loss_curve=loss_curve,
        )

    step = 0
    for step in range(tc.steps):
        batch = corpus.sample_batch(tc.batch_size, tc.clip_seconds, rng)
        nll, kl = _forward_nll(batch, sample_posterior=True)
        beta = beta_schedule(step, tc.kl_warmup_steps, tc.kl_weight)
        loss = nll + beta * kl
        if not torch.isfinite(loss):
            raise DivergenceError(
                f"non-finite loss at step {step}: nll={nll.detach()}, kl={kl.detach()}, beta={beta}"
            )
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        if step % tc.log_interval == 0 or step == tc.steps - 1:
            metrics.append(step, nll=float(nll.detach()), kl=float(kl.detach()), beta=beta)
            loss_curve.append((step, float(nll.detach())))
        if tc.checkpoint_interval and (step + 1) % tc.checkpoint_interval == 0:
            _snapshot(f"teacher_{step + 1:08d}.ckpt", step + 1)
        if val_corpus is not None and (step + 1) % val_every == 0:
            with torch.no_grad():
                val_batch = val_corpus.sample_batch(tc.batch_size, tc.clip_seconds, val_rng)
                val_nll, _ = _forward_nll(val_batch, sample_posterior=False)
            val_nll = float(val_nll)
            smoothed_val = val_nll if smoothed_val is None else 0.8 * smoothed_val + 0.2 * val_nll
            metrics.append(step, val_nll=val_nll, val_nll_smoothed=smoothed_val)
            if smoothed_val < best_val - 1e-4:
                best_val = smoothed_val
                best_step = step
            elif step - best_step >= tc.early_stop_patience:
                break

    path = _snapshot("teacher.ckpt", step + 1)
    metrics.close()
    return path
