"""Dataset manifests and synthetic corpora.

A manifest is JSON-lines, one record per utterance with the fields
utterance_id, audio_path, speaker_id, style, language. Audio paths are
resolved relative to the manifest file.
"""

from __future__ import annotations

import dataclasses
import json
import os

import numpy as np

from .errors import ValidationError
from .signal import SAMPLE_RATE, Waveform, save_waveform

MANIFEST_FIELDS = ("utterance_id", "audio_path", "speaker_id", "style", "language")


@dataclasses.dataclass
class UtteranceRecord:
    utterance_id: str
    audio_path: str
    speaker_id: str
    style: str
    language: str


def read_manifest(path) -> list[UtteranceRecord]:
    """Parse a JSON-lines manifest, validating fields and id uniqueness."""
    records = []
    seen = set()
    try:
        lines = open(path, encoding="utf-8").read().splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read manifest {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"manifest {path} line {lineno}: invalid JSON ({exc})") from None
        if not isinstance(obj, dict):
            raise ValidationError(f"manifest {path} line {lineno}: expected an object")
        missing = [f for f in MANIFEST_FIELDS if f not in obj]
        if missing:
            raise ValidationError(
                f"manifest {path} line {lineno}: missing fields {', '.join(missing)}"
            )
        record = UtteranceRecord(**{f: str(obj[f]) for f in MANIFEST_FIELDS})
        if record.utterance_id in seen:
            raise ValidationError(
                f"manifest {path} line {lineno}: duplicate utterance_id {record.utterance_id!r}"
            )
        seen.add(record.utterance_id)
        records.append(record)
    if not records:
        raise ValidationError(f"manifest {path} contains no records")
    return records


def write_manifest(path, records) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(dataclasses.asdict(r), sort_keys=True) + "\n")


def resolve_audio_path(manifest_path, record: UtteranceRecord) -> str:
    if os.path.isabs(record.audio_path):
        return record.audio_path
    return os.path.join(os.path.dirname(os.path.abspath(str(manifest_path))), record.audio_path)


def generate_tone_corpus(
    out_dir,
    clips_per_class: int = 25,
    duration: float = 0.25,
    pitches=(440.0, 587.0, 784.0, 988.0),
    timbres=("sine", "sawtooth"),
    seed: int = 0,
) -> str:
    """Write a small corpus of steady tones and its manifest; returns the manifest path.

    Classes are (pitch, timbre) pairs, encoded in the style field. Sawtooth
    clips are band-limited additive (harmonics kept below 11 kHz) so their
    spectra contain no aliasing products. Phase and level vary per clip; clips
    are RMS-normalized so every class draws from the same loudness range and
    cross-class comparisons are not confounded by energy differences. A
    broadband noise floor 25 dB below each tone keeps the references inside
    the dynamic range a stochastic generator can actually reach; without it,
    spectral distances to digitally pure tones are dominated by the gap
    between any generative noise floor and numerical leakage.
    """
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    n = int(round(duration * SAMPLE_RATE))
    t = np.arange(n) / SAMPLE_RATE
    records = []
    for pitch in pitches:
        for timbre in timbres:
            for i in range(clips_per_class):
                phase = rng.uniform(0.0, 2.0 * np.pi)
                rms = rng.uniform(0.25, 0.39)
                if timbre == "sine":
                    x = np.sin(2.0 * np.pi * pitch * t + phase)
                elif timbre == "sawtooth":
                    max_harmonic = int(11000.0 // pitch)
                    x = np.zeros(n)
                    for k in range(1, max_harmonic + 1):
                        x += np.sin(2.0 * np.pi * k * pitch * t + k * phase) / k
                else:
                    raise ValidationError(f"unknown timbre {timbre!r}")
                x = rms * x / np.sqrt(np.mean(np.square(x)))
                x += rng.normal(0.0, rms * 10.0 ** (-25.0 / 20.0), size=n)
                uid = f"{timbre}_{int(pitch)}hz_{i:03d}"
                filename = uid + ".wav"
                save_waveform(os.path.join(out_dir, filename), Waveform(x.astype(np.float32)))
                records.append(
                    UtteranceRecord(
                        utterance_id=uid,
                        audio_path=filename,
                        speaker_id="tonegen",
                        style=f"{timbre}-{int(pitch)}",
                        language="none",
                    )
                )
    manifest_path = os.path.join(out_dir, "manifest.jsonl")
    write_manifest(manifest_path, records)
    return manifest_path
