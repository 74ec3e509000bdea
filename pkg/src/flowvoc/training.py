"""Shared training plumbing: in-memory corpus, batch assembly, metric logs.

The corpus cache keeps every utterance's audio and mel features in memory,
which suits the corpus sizes this package trains on; a streaming producer
feeding a bounded queue would implement the same records -> clips -> batches
protocol for corpora that do not fit.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time

import numpy as np

from .data import UtteranceRecord, resolve_audio_path
from .errors import ValidationError
from .signal import (
    MelConfig,
    MelStats,
    compute_mel_stats,
    extract_mel,
    load_waveform,
    slice_clip,
)


@dataclasses.dataclass
class ClipBatch:
    """Stacked frame-aligned clips.

    Attributes:
        audio: (B, n_samples) float32.
        mel: (B, n_frames, n_mels) float32, raw (unstandardized) log-mel.
        utterance_ids: length-B list.
    """

    audio: np.ndarray
    mel: np.ndarray
    utterance_ids: list


class CorpusCache:
    """Loads manifest utterances with their mel features, serves random clips."""

    def __init__(self, manifest_path, records: list[UtteranceRecord], mel_config: MelConfig):
        if not records:
            raise ValidationError("corpus has no records")
        self.records = records
        self.mel_config = mel_config
        self.waveforms = []
        self.mels = []
        for record in records:
            wave = load_waveform(resolve_audio_path(manifest_path, record))
            self.waveforms.append(wave)
            self.mels.append(extract_mel(wave, mel_config))

    def __len__(self) -> int:
        return len(self.records)

    def mel_stats(self) -> MelStats:
        return compute_mel_stats(self.mels)

    def clip(self, index: int, clip_seconds: float, rng: np.random.Generator):
        return slice_clip(
            self.waveforms[index],
            self.mels[index],
            clip_seconds,
            rng,
            utterance_id=self.records[index].utterance_id,
        )

    def sample_batch(
        self, batch_size: int, clip_seconds: float, rng: np.random.Generator
    ) -> ClipBatch:
        """Uniformly sample utterances (with replacement) and slice one clip each."""
        if batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        indices = rng.integers(0, len(self.records), size=batch_size)
        clips = [self.clip(int(i), clip_seconds, rng) for i in indices]
        return ClipBatch(
            audio=np.stack([c.audio for c in clips]),
            mel=np.stack([c.mel for c in clips]),
            utterance_ids=[c.utterance_id for c in clips],
        )


class MetricsLog:
    """JSON-lines metrics writer; one flushed line per append."""

    def __init__(self, path):
        self.path = str(path)
        os.makedirs(os.path.dirname(os.path.abspath(self.path)), exist_ok=True)
        self._file = open(self.path, "w", encoding="utf-8")
        self._start = time.monotonic()

    def append(self, step: int, **fields) -> dict:
        row = {"step": int(step)}
        row.update({k: (float(v) if isinstance(v, (int, float)) else v) for k, v in fields.items()})
        row["wallclock"] = time.monotonic() - self._start
        self._file.write(json.dumps(row, sort_keys=True) + "\n")
        self._file.flush()
        return row

    def close(self) -> None:
        self._file.close()


def serialize_configs(config) -> dict:
    """Dataclass sections of a run config as plain dicts, for checkpoints."""
    out = {}
    for name in ("mel", "teacher", "student", "teacher_train", "distill"):
        sub = getattr(config, name, None)
        if sub is not None:
            out[name] = dataclasses.asdict(sub)
    return out


def beta_schedule(step: int, warmup_steps: int, target: float = 1.0) -> float:
    """Linear warm-up from 0 to the target KL weight."""
    if warmup_steps <= 0:
        return target
    return target * min(1.0, step / warmup_steps)


def block_means(values, n_blocks: int) -> list:
    """Means of n_blocks equal consecutive chunks (tail chunk absorbs remainder)."""
    values = np.asarray(values, dtype=np.float64)
    if n_blocks < 1 or values.size < n_blocks:
        raise ValidationError("need at least one value per block")
    edges = np.linspace(0, values.size, n_blocks + 1).astype(int)
    return [float(values[a:b].mean()) for a, b in zip(edges[:-1], edges[1:])]
