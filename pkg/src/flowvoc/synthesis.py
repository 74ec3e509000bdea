"""Waveform generation from a distilled checkpoint.

Synthesis is one parallel pass: standardize the mel input with the
checkpoint's corpus stats, run the conditioner, pick an utterance embedding,
upsample, and push logistic noise through the flow stack. The embedding
comes from one of three modes: an all-zero vector (the average-voice
rendering), an explicit 48-dim vector, or the encoder posterior mean of a
reference waveform. Only the last mode touches the audio_encoder component,
so zero/explicit synthesis works even when that component is corrupt or
absent.
"""

from __future__ import annotations

import dataclasses
import statistics
import time

import numpy as np
import torch

from .checkpoint import load_checkpoint, load_module_state
from .conditioning import (
    EMBEDDING_DIM,
    AudioEncoder,
    MelConditioner,
    combine_and_upsample,
)
from .errors import ValidationError
from .signal import MelConfig, MelSpectrogram, Waveform, extract_mel, standardize_mel
from .student import FlowConfig, FlowStack, sample_noise


@dataclasses.dataclass
class SynthesisRequest:
    """One rendering job.

    Attributes:
        mel: raw (unstandardized) log-mel frames, (T, n_mels) array or
            MelSpectrogram.
        embedding_mode: "zero", "explicit", or "from_reference".
        embedding: 48-dim vector for explicit mode.
        reference: reference Waveform for from_reference mode.
        seed: noise seed; identical requests with identical seeds render
            bit-identical waveforms.
    """

    mel: object
    embedding_mode: str = "zero"
    embedding: np.ndarray | None = None
    reference: Waveform | None = None
    seed: int = 0


@dataclasses.dataclass
class RtfReport:
    """Real-time-factor measurement (wall time / audio duration)."""

    audio_seconds: float
    trials: int
    wall_times: list
    rtf_values: list
    median_rtf: float


class Synthesizer:
    """Holds the student and conditioning networks of one checkpoint."""

    def __init__(self, checkpoint_path):
        self.path = str(checkpoint_path)
        ckpt = load_checkpoint(self.path, components=("student", "mel_conditioner"))
        configs = ckpt.manifest.get("configs", {})
        if "student" not in configs or "mel" not in configs:
            raise ValidationError(f"checkpoint {self.path} lacks student/mel configs")
        self.mel_config = MelConfig(**configs["mel"])
        student_cfg = dict(configs["student"])
        student_cfg["flow_layers"] = tuple(int(n) for n in student_cfg["flow_layers"])
        self.student = load_module_state(FlowStack(FlowConfig(**student_cfg)), ckpt, "student")
        self.conditioner = load_module_state(
            MelConditioner(self.mel_config.n_mels), ckpt, "mel_conditioner"
        )
        self.student.requires_grad_(False).eval()
        self.conditioner.requires_grad_(False).eval()
        self.stats = ckpt.mel_stats()
        self._encoder = None

    def _encoder_module(self) -> AudioEncoder:
        # Loaded on first use so the zero/explicit modes never validate or
        # deserialize the encoder blobs.
        if self._encoder is None:
            ckpt = load_checkpoint(self.path, components=("audio_encoder",))
            encoder = load_module_state(AudioEncoder(), ckpt, "audio_encoder")
            self._encoder = encoder.requires_grad_(False).eval()
        return self._encoder

    def _embedding(self, request: SynthesisRequest) -> torch.Tensor:
        mode = request.embedding_mode
        if mode == "zero":
            return torch.zeros(1, EMBEDDING_DIM)
        if mode == "explicit":
            if request.embedding is None:
                raise ValidationError("explicit embedding mode needs an embedding vector")
            e = np.asarray(request.embedding, dtype=np.float32).reshape(-1)
            if e.shape[0] != EMBEDDING_DIM:
                raise ValidationError(
                    f"embedding must have {EMBEDDING_DIM} dimensions, got {e.shape[0]}"
                )
            return torch.from_numpy(e)[None]
        if mode == "from_reference":
            if request.reference is None:
                raise ValidationError("from_reference embedding mode needs reference audio")
            with torch.no_grad():
                posterior = self._encoder_module()(
                    torch.from_numpy(request.reference.samples)[None]
                )
            return posterior.mean
        raise ValidationError(
            f"unknown embedding mode {mode!r}; expected zero, explicit, or from_reference"
        )

    @torch.no_grad()
    def synthesize(self, request: SynthesisRequest) -> Waveform:
        """Render one waveform; output length is n_frames * hop samples."""
        mel = request.mel
        frames = mel.frames if isinstance(mel, MelSpectrogram) else np.asarray(mel)
        if frames.ndim != 2 or frames.shape[1] != self.mel_config.n_mels:
            raise ValidationError(
                f"mel input must be (T, {self.mel_config.n_mels}), got {tuple(frames.shape)}"
            )
        if frames.shape[0] < 1:
            raise ValidationError("mel input has no frames")
        embedding = self._embedding(request)
        standardized = standardize_mel(frames.astype(np.float32), self.stats)
        features = self.conditioner(torch.from_numpy(standardized)[None])
        cond = combine_and_upsample(features, embedding, self.mel_config.hop_length)
        generator = torch.Generator().manual_seed(int(request.seed))
        z = sample_noise((1, cond.shape[1]), generator)
        out = self.student(z, cond)
        samples = out.x[0].clamp(-1.0, 1.0).numpy().astype(np.float32)
        return Waveform(samples)

    def resynthesize(
        self, waveform: Waveform, embedding_mode: str = "from_reference", seed: int = 0
    ) -> Waveform:
        """Copy synthesis: analyze a waveform and render it back.

        The output has len(waveform) // hop * hop samples, i.e. within one
        hop of the input length.
        """
        mel = extract_mel(waveform, self.mel_config)
        request = SynthesisRequest(
            mel=mel,
            embedding_mode=embedding_mode,
            reference=waveform if embedding_mode == "from_reference" else None,
            seed=seed,
        )
        return self.synthesize(request)

    def measure_rtf(
        self, mel, trials: int = 5, embedding_mode: str = "zero", seed: int = 0
    ) -> RtfReport:
        """Median real-time factor over timed runs (after one warm-up run)."""
        if trials < 1:
            raise ValidationError("trials must be >= 1")
        request = SynthesisRequest(mel=mel, embedding_mode=embedding_mode, seed=seed)
        rendered = self.synthesize(request)  # warm-up
        audio_seconds = rendered.duration
        wall_times = []
        for _ in range(trials):
            start = time.perf_counter()
            self.synthesize(request)
            wall_times.append(time.perf_counter() - start)
        rtf_values = [t / audio_seconds for t in wall_times]
        return RtfReport(
            audio_seconds=audio_seconds,
            trials=trials,
            wall_times=wall_times,
            rtf_values=rtf_values,
            median_rtf=statistics.median(rtf_values),
        )
