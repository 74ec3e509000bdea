"""Probability-density distillation of the student against a frozen teacher.

The student minimizes KL(student || teacher) per sample, computed as
cross-entropy minus the closed-form student entropy, plus an auxiliary power
loss that matches time-averaged power spectra. The cross-entropy integrates
the teacher's log-density over the student's per-sample output logistic with
a fixed quantile quadrature; the teacher is forced with the student's own
draw, so gradients reach the student both through the quadrature points and
through the teacher-forced context.
"""

from __future__ import annotations

import dataclasses
import os

import numpy as np
import torch
import torch.nn.functional as F

from .checkpoint import load_checkpoint, load_module_state, save_checkpoint
from .conditioning import (
    AudioEncoder,
    MelConditioner,
    combine_and_upsample,
    sample_embedding,
)
from .data import read_manifest
from .errors import DivergenceError, ValidationError
from .signal import MelConfig, standardize_mel
from .student import FlowConfig, FlowOutput, FlowStack, sample_noise
from .teacher import MoLParams, TeacherConfig, WaveNetTeacher, mol_log_density
from .training import CorpusCache, MetricsLog, serialize_configs


@dataclasses.dataclass
class DistillConfig:
    """Distillation loop settings."""

    steps: int = 200000
    batch_size: int = 16
    clip_seconds: float = 0.85
    learning_rate: float = 1e-4
    mc_samples: int = 1
    quadrature_points: int = 8
    power_loss_weight: float = 1.0
    power_window_length: int = 1200
    power_hop_length: int = 300
    freeze_conditioning: bool = True
    log_interval: int = 50
    checkpoint_interval: int = 0
    seed: int = 0

    def validate(self) -> None:
        if self.steps < 1 or self.batch_size < 1 or self.log_interval < 1:
            raise ValidationError("steps, batch_size, and log_interval must be >= 1")
        if self.clip_seconds <= 0 or self.learning_rate <= 0:
            raise ValidationError("clip_seconds and learning_rate must be positive")
        if self.mc_samples < 1 or self.quadrature_points < 1:
            raise ValidationError("mc_samples and quadrature_points must be >= 1")
        if self.power_loss_weight < 0:
            raise ValidationError("power_loss_weight must be non-negative")
        if self.power_hop_length < 1 or self.power_window_length < self.power_hop_length:
            raise ValidationError("power window must be >= power hop >= 1")


@dataclasses.dataclass
class DistillLossReport:
    """Scalar loss terms; total = cross_entropy - entropy + weight * power."""

    total: torch.Tensor
    cross_entropy: torch.Tensor
    entropy: torch.Tensor
    power: torch.Tensor

    def as_floats(self) -> dict:
        return {
            "total": float(self.total.detach()),
            "cross_entropy": float(self.cross_entropy.detach()),
            "entropy": float(self.entropy.detach()),
            "power": float(self.power.detach()),
        }


def student_entropy(log_s_total: torch.Tensor) -> torch.Tensor:
    """Mean per-sample entropy of the student's output logistic: log s + 2."""
    return log_s_total.mean() + 2.0


def _expected_teacher_nll(
    out: FlowOutput, cond: torch.Tensor, teacher: WaveNetTeacher, quadrature_points: int
) -> torch.Tensor:
    """E_{x_t ~ logistic(mu_t, s_t)}[-log p_teacher(x_t | draw_{<t})], averaged.

    Midpoint quantile rule: the student inverse CDF is evaluated at
    (i + 0.5) / Q and the teacher density averaged over those points.
    """
    params = teacher.predict(out.x, cond)
    dtype = out.x.dtype
    q = (torch.arange(quadrature_points, dtype=dtype) + 0.5) / quadrature_points
    offsets = torch.log(q) - torch.log1p(-q)
    points = out.mu_total[..., None] + torch.exp(out.log_s_total)[..., None] * offsets
    expanded = MoLParams(
        logit_weights=params.logit_weights[:, :, None, :],
        means=params.means[:, :, None, :],
        log_scales=params.log_scales[:, :, None, :],
    )
    return -mol_log_density(expanded, points).mean()


def cross_entropy_vs_teacher(
    z: torch.Tensor,
    cond: torch.Tensor,
    student: FlowStack,
    teacher: WaveNetTeacher,
    quadrature_points: int = 8,
) -> torch.Tensor:
    """Monte-Carlo cross-entropy over noise draws.

    Args:
        z: (M, B, T) stack of noise draws, or (B, T) for a single draw.
        cond: (B, T, C) sample-rate conditioning.
    """
    if z.dim() == 2:
        z = z[None]
    terms = [
        _expected_teacher_nll(student(z[m], cond), cond, teacher, quadrature_points)
        for m in range(z.shape[0])
    ]
    return torch.stack(terms).mean()


def _mean_power_spectrum(
    x: torch.Tensor, window_length: int, hop_length: int, n_fft: int
) -> torch.Tensor:
    """Time-averaged Hann power spectrum, framed exactly like signal.stft_power."""
    if x.shape[-1] < window_length:
        raise ValidationError(
            f"power loss input of {x.shape[-1]} samples is shorter than one window"
        )
    pad_total = window_length - hop_length
    pad_left = pad_total // 2
    pad_right = pad_total - pad_left
    padded = F.pad(x[:, None, :], (pad_left, pad_right), mode="reflect")[:, 0]
    frames = padded.unfold(1, window_length, hop_length)
    frames = frames[:, : x.shape[-1] // hop_length]
    win = torch.hann_window(window_length, periodic=True, dtype=x.dtype, device=x.device)
    spectrum = torch.fft.rfft(frames * win, n=n_fft)
    power = spectrum.real**2 + spectrum.imag**2
    return power.mean(dim=1)


def power_loss(
    generated: torch.Tensor,
    reference: torch.Tensor,
    window_length: int = 1200,
    hop_length: int = 300,
    n_fft: int | None = None,
) -> torch.Tensor:
    """Squared error between time-averaged power spectra, mean over bins.

    Sign-blind by construction: |STFT(-x)|^2 == |STFT(x)|^2.
    """
    if generated.dim() == 1:
        generated = generated[None]
    if reference.dim() == 1:
        reference = reference[None]
    if generated.shape != reference.shape:
        raise ValidationError(
            f"power loss inputs disagree: {tuple(generated.shape)} vs {tuple(reference.shape)}"
        )
    if n_fft is None:
        n_fft = 1 << (window_length - 1).bit_length()
    pg = _mean_power_spectrum(generated, window_length, hop_length, n_fft)
    pr = _mean_power_spectrum(reference, window_length, hop_length, n_fft)
    return ((pg - pr) ** 2).mean()


def distill_loss(
    z: torch.Tensor,
    reference: torch.Tensor,
    cond: torch.Tensor,
    student: FlowStack,
    teacher: WaveNetTeacher,
    config: DistillConfig,
) -> DistillLossReport:
    """Full distillation objective for one batch.

    Args:
        z: (M, B, T) noise draws ((B, T) accepted for M = 1).
        reference: (B, T) target audio for the power term.
    """
    if z.dim() == 2:
        z = z[None]
    ce_terms, ent_terms, power_terms = [], [], []
    for m in range(z.shape[0]):
        out = student(z[m], cond)
        ce_terms.append(
            _expected_teacher_nll(out, cond, teacher, config.quadrature_points)
        )
        ent_terms.append(student_entropy(out.log_s_total))
        power_terms.append(
            power_loss(out.x, reference, config.power_window_length, config.power_hop_length)
        )
    cross_entropy = torch.stack(ce_terms).mean()
    entropy = torch.stack(ent_terms).mean()
    power = torch.stack(power_terms).mean()
    total = cross_entropy - entropy + config.power_loss_weight * power
    return DistillLossReport(
        total=total, cross_entropy=cross_entropy, entropy=entropy, power=power
    )


def distill_student(
    teacher_checkpoint, manifest_path, config, out_dir, seed: int | None = None
) -> str:
    """Distill a student from a trained teacher checkpoint.

    The teacher checkpoint must contain the teacher, mel_conditioner, and
    audio_encoder components plus mel stats; the conditioning networks are
    reused and, by default, frozen. Writes metrics.jsonl and student.ckpt
    under out_dir; returns the checkpoint path.
    """
    dc = config.distill
    dc.validate()
    config.student.validate()
    out_dir = str(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    seed = dc.seed if seed is None else int(seed)
    rng = np.random.default_rng(seed)
    generator = torch.Generator().manual_seed(seed + 1)
    torch.manual_seed(seed)

    ckpt = load_checkpoint(
        teacher_checkpoint, components=("teacher", "mel_conditioner", "audio_encoder")
    )
    mel_config = MelConfig(**ckpt.config("mel"))
    teacher = load_module_state(WaveNetTeacher(TeacherConfig(**ckpt.config("teacher"))), ckpt, "teacher")
    conditioner = load_module_state(MelConditioner(mel_config.n_mels), ckpt, "mel_conditioner")
    encoder = load_module_state(AudioEncoder(), ckpt, "audio_encoder")
    stats = ckpt.mel_stats()
    teacher.requires_grad_(False)

    student = FlowStack(config.student)
    trainable = list(student.parameters())
    if dc.freeze_conditioning:
        conditioner.requires_grad_(False)
        encoder.requires_grad_(False)
    else:
        trainable += list(conditioner.parameters()) + list(encoder.parameters())
    optimizer = torch.optim.Adam(trainable, lr=dc.learning_rate)

    records = read_manifest(manifest_path)
    corpus = CorpusCache(manifest_path, records, mel_config)
    metrics = MetricsLog(os.path.join(out_dir, "metrics.jsonl"))
    loss_curve = []

    def _snapshot(tag: str, step: int) -> str:
        return save_checkpoint(
            os.path.join(out_dir, tag),
            step=step,
            components={
                "student": student.state_dict(),
                "mel_conditioner": conditioner.state_dict(),
                "audio_encoder": encoder.state_dict(),
            },
            configs=serialize_configs(config),
            mel_stats=stats,
            loss_curve=loss_curve,
        )

    step = 0
    for step in range(dc.steps):
        batch = corpus.sample_batch(dc.batch_size, dc.clip_seconds, rng)
        audio = torch.from_numpy(batch.audio)
        mel = torch.from_numpy(standardize_mel(batch.mel, stats))
        posterior = encoder(audio)
        e = sample_embedding(posterior, generator)
        cond = combine_and_upsample(conditioner(mel), e, mel_config.hop_length)
        z = sample_noise((dc.mc_samples,) + tuple(audio.shape), generator)
        report = distill_loss(z, audio, cond, student, teacher, dc)
        if not torch.isfinite(report.total):
            raise DivergenceError(
                f"non-finite distillation loss at step {step}: {report.as_floats()}"
            )
        optimizer.zero_grad()
        report.total.backward()
        optimizer.step()
        if step % dc.log_interval == 0 or step == dc.steps - 1:
            metrics.append(step, **report.as_floats())
            loss_curve.append((step, float(report.total.detach())))
        if dc.checkpoint_interval and (step + 1) % dc.checkpoint_interval == 0:
            _snapshot(f"student_{step + 1:08d}.ckpt", step + 1)

    path = _snapshot("student.ckpt", step + 1)
    metrics.close()
    return path
