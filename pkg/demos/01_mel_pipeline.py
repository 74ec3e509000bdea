"""
Feature extraction: waveform in, log-mel frames out
===================================================

Walks the analysis half of the vocoder: resampling/validation, the exact
sample-to-frame alignment, the mel filterbank, and corpus-level feature
standardization.
"""

import numpy as np

from flowvoc.signal import (
    MelConfig,
    Waveform,
    compute_mel_stats,
    extract_mel,
    standardize_mel,
)

# A quarter second of A4 at the model rate. Waveform validates the range
# and dtype; everything downstream assumes 24 kHz mono float32 in [-1, 1].
rate = 24000
t = np.arange(int(0.3625 * rate)) / rate
wave = Waveform(np.asarray(0.5 * np.sin(2 * np.pi * 440.0 * t), dtype=np.float32))
print(f"waveform: {wave.samples.shape[0]} samples at {wave.sample_rate} Hz "
      f"({wave.duration:.4f} s)")

# The frame grid is floor(n_samples / hop): 8700 samples / hop 300 -> 29
# frames, so frame f covers samples [f*300, (f+1)*300) and a synthesized
# waveform of n_frames * 300 samples lines up exactly.
config = MelConfig()
mel = extract_mel(wave, config)
print(f"mel: {mel.frames.shape} (frames x bands), hop {config.hop_length}, "
      f"window {config.window_length}, {config.n_mels} mel bands")
assert mel.frames.shape == (8700 // config.hop_length, config.n_mels)

# Values are log(power + floor); silence bottoms out at log(floor).
print(f"log-energy range: [{mel.frames.min():.2f}, {mel.frames.max():.2f}]")

# Training standardizes features with corpus statistics. Stats are raw
# per-band moments; the floor on std is applied at standardization time.
stats = compute_mel_stats([mel])
z = standardize_mel(mel.frames, stats)
print(f"standardized: mean {z.mean():+.3f}, std {z.std():.3f}")

# The 440 Hz partial lands in a single mel band: the filterbank is a set of
# triangles on the HTK mel scale, so argmax over time-averaged energy finds it.
band = int(np.argmax(mel.frames.mean(axis=0)))
print(f"dominant mel band for 440 Hz: {band}")
