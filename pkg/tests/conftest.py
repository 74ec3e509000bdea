"""Shared fixtures: tiny model configs, a small tone corpus, seeded helpers.

Module tests use deliberately small networks (a few layers, narrow channels)
so the whole suite stays fast on one CPU core; the end-to-end sizes live in
test_acceptance.py only.
"""

import numpy as np
import pytest
import torch

from flowvoc.data import generate_tone_corpus
from flowvoc.signal import SAMPLE_RATE, MelConfig, Waveform
from flowvoc.student import FlowConfig
from flowvoc.teacher import TeacherConfig


def sine_wave(freq_hz, seconds, amplitude=0.5, phase=0.0, rate=SAMPLE_RATE):
    t = np.arange(int(round(seconds * rate)), dtype=np.float64) / rate
    return Waveform(
        np.asarray(amplitude * np.sin(2.0 * np.pi * freq_hz * t + phase), dtype=np.float32),
        sample_rate=rate,
    )


def noise_wave(n_samples, seed=0, amplitude=0.3, rate=SAMPLE_RATE):
    rng = np.random.default_rng(seed)
    return Waveform(
        np.asarray(amplitude * rng.standard_normal(n_samples), dtype=np.float32).clip(-1, 1),
        sample_rate=rate,
    )


def randomize_parameters(module, seed, scale=0.05):
    """Overwrite every parameter with N(0, scale^2) draws.

    Flow heads are zero-initialized by design; tests that need a non-identity
    flow (or a non-degenerate encoder) randomize explicitly so the behaviour
    under test does not depend on torch's default init.
    """
    g = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for p in module.parameters():
            p.copy_(torch.randn(p.shape, generator=g, dtype=p.dtype) * scale)
    return module


@pytest.fixture
def tiny_teacher_config():
    return TeacherConfig(
        layers=4,
        dilation_cycle=2,
        residual_channels=12,
        gate_channels=12,
        skip_channels=12,
        kernel_size=3,
        mixture_components=3,
        conditioning_channels=7,
    )


@pytest.fixture
def tiny_flow_config():
    return FlowConfig(
        flow_layers=(2, 2),
        residual_channels=8,
        kernel_size=3,
        dilation_cycle=3,
        conditioning_channels=7,
    )


@pytest.fixture
def fast_mel_config():
    # Full band layout but a cheap transform; used where only shapes matter.
    return MelConfig()


@pytest.fixture(scope="session")
def tone_corpus(tmp_path_factory):
    """24 quarter-second tone clips (4 pitches x 2 timbres x 3 takes)."""
    root = tmp_path_factory.mktemp("tones")
    manifest = generate_tone_corpus(root, clips_per_class=3, duration=0.25, seed=7)
    return manifest
