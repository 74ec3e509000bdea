"""Audio ingestion and spectral features.

Everything downstream of ingestion runs at a fixed internal rate of 24 kHz
mono. Mel analysis uses an 80-band filterbank between 50 Hz and 12 kHz with a
1200-sample window and a 300-sample hop; the hop doubles as the conditioning
upsampling factor, so frame t always covers samples [t*300, (t+1)*300).
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import scipy.io.wavfile
import scipy.signal

from .errors import AudioIOError, ValidationError

SAMPLE_RATE = 24000

# Floor applied to per-channel std before standardizing, so constant mel
# channels map to zero instead of blowing up.
STD_FLOOR = 1e-3


@dataclasses.dataclass
class Waveform:
    """Mono audio at the internal rate.

    Attributes:
        samples: 1-D float32 array with values in [-1, 1].
        sample_rate: always 24000 once ingested; other rates are rejected.
    """

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 1:
            raise ValidationError(f"waveform must be 1-D, got shape {samples.shape}")
        if samples.size == 0:
            raise ValidationError("waveform has no samples")
        if not np.all(np.isfinite(samples)):
            raise ValidationError("waveform contains non-finite samples")
        if self.sample_rate != SAMPLE_RATE:
            raise ValidationError(
                f"waveform must be at {SAMPLE_RATE} Hz after ingestion, got {self.sample_rate}"
            )
        self.samples = samples.astype(np.float32, copy=False)

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


@dataclasses.dataclass
class MelConfig:
    """Mel analysis settings."""

    sample_rate: int = SAMPLE_RATE
    n_mels: int = 80
    fmin: float = 50.0
    fmax: float = 12000.0
    window_length: int = 1200
    hop_length: int = 300
    n_fft: int = 2048
    log_floor: float = 1e-5

    def validate(self) -> None:
        if self.sample_rate <= 0:
            raise ValidationError("sample_rate must be positive")
        if self.n_mels < 1:
            raise ValidationError("n_mels must be at least 1")
        if not 0.0 <= self.fmin < self.fmax:
            raise ValidationError("need 0 <= fmin < fmax")
        if self.fmax > self.sample_rate / 2:
            raise ValidationError("fmax exceeds the Nyquist frequency")
        if self.hop_length < 1 or self.window_length < self.hop_length:
            raise ValidationError("window_length must be >= hop_length >= 1")
        if self.n_fft < self.window_length:
            raise ValidationError("n_fft must be >= window_length")
        if self.log_floor <= 0.0:
            raise ValidationError("log_floor must be positive")


@dataclasses.dataclass
class MelSpectrogram:
    """Log mel features.

    Attributes:
        frames: (T, n_mels) float32 natural-log mel energies.
        frame_rate: frames per second (sample_rate / hop_length).
        channel_stats: optional standardization stats attached by a trainer.
    """

    frames: np.ndarray
    frame_rate: float
    channel_stats: "MelStats | None" = None

    @property
    def n_frames(self) -> int:
        return int(self.frames.shape[0])


@dataclasses.dataclass
class PowerSpectrogram:
    """Squared-magnitude STFT.

    Attributes:
        power: (T, n_fft // 2 + 1) float64 array of |STFT|^2 values.
        bin_hz: frequency spacing between adjacent bins.
        hop_length: hop used for framing.
    """

    power: np.ndarray
    bin_hz: float
    hop_length: int

    @property
    def n_frames(self) -> int:
        return int(self.power.shape[0])


@dataclasses.dataclass
class MelStats:
    """Per-channel mean/std over a training corpus."""

    mean: np.ndarray
    std: np.ndarray

    def validate(self) -> None:
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValidationError("mel stats must be matching 1-D arrays")
        if not (np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.std))):
            raise ValidationError("mel stats contain non-finite values")
        if np.any(self.std < 0):
            raise ValidationError("mel std must be non-negative")


@dataclasses.dataclass
class TrainingClip:
    """A frame-aligned slice of an utterance.

    The mel rows are the exact analysis frames whose 300-sample spans make up
    the audio slice, not a re-analysis of the excerpt.
    """

    audio: np.ndarray
    mel: np.ndarray
    utterance_id: str = ""


def resample(samples: np.ndarray, orig_rate: int, target_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Windowed-sinc (polyphase) resampling to the target rate."""
    if orig_rate <= 0 or target_rate <= 0:
        raise ValidationError("sample rates must be positive")
    if orig_rate == target_rate:
        return np.asarray(samples, dtype=np.float64)
    g = math.gcd(int(orig_rate), int(target_rate))
    return scipy.signal.resample_poly(
        np.asarray(samples, dtype=np.float64), target_rate // g, orig_rate // g
    )


def load_waveform(path) -> Waveform:
    """Read a WAV file, downmix to mono, and resample to 24 kHz.

    Accepts 16-bit integer PCM (mapped to [-1, 1) by dividing by 32768) and
    32-bit float encodings. Anything else, an empty file, or non-finite float
    data raises AudioIOError.
    """
    try:
        rate, data = scipy.io.wavfile.read(path)
    except FileNotFoundError:
        raise AudioIOError(f"cannot read audio file {path}: file not found") from None
    except Exception as exc:
        raise AudioIOError(f"cannot read audio file {path}: {exc}") from exc

    if data.size == 0:
        raise AudioIOError(f"audio file {path} contains no samples")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise AudioIOError(
            f"unsupported sample encoding {data.dtype} in {path}; "
            "expected 16-bit PCM or 32-bit float"
        )
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if not np.all(np.isfinite(samples)):
        raise AudioIOError(f"audio file {path} contains non-finite samples")
    if rate != SAMPLE_RATE:
        samples = resample(samples, rate, SAMPLE_RATE)
    samples = np.clip(samples, -1.0, 1.0)
    return Waveform(samples.astype(np.float32))


def save_waveform(path, waveform: Waveform) -> None:
    """Write 16-bit PCM."""
    scaled = np.round(waveform.samples.astype(np.float64) * 32768.0)
    pcm = np.clip(scaled, -32768, 32767).astype(np.int16)
    scipy.io.wavfile.write(path, waveform.sample_rate, pcm)


def _frame(samples: np.ndarray, window_length: int, hop_length: int) -> np.ndarray:
    """Frames centered on successive hop spans.

    Reflection padding of (window_length - hop_length) / 2 at each end makes
    frame t cover [t*hop - pad, t*hop - pad + window) of the padded signal,
    which yields exactly len(samples) // hop_length frames.
    """
    n = samples.shape[0]
    if n < window_length:
        raise ValidationError(
            f"waveform of {n} samples is shorter than one {window_length}-sample window"
        )
    n_frames = n // hop_length
    pad_total = window_length - hop_length
    pad_left = pad_total // 2
    pad_right = pad_total - pad_left
    padded = np.pad(samples.astype(np.float64), (pad_left, pad_right), mode="reflect")
    frames = np.lib.stride_tricks.sliding_window_view(padded, window_length)[::hop_length]
    return np.ascontiguousarray(frames[:n_frames])


def stft_power(
    waveform,
    window_length: int = 1200,
    hop_length: int = 300,
    n_fft: int | None = None,
    window: str = "hann",
) -> PowerSpectrogram:
    """Power spectrogram |STFT|^2 with floor(len / hop) frames.

    Args:
        waveform: Waveform or 1-D sample array.
        window_length: analysis window in samples.
        hop_length: frame advance in samples.
        n_fft: FFT size; defaults to the next power of two >= window_length.
        window: "hann" (periodic) or "rect".

    Returns:
        PowerSpectrogram with a (T, n_fft // 2 + 1) float64 power array.
    """
    if isinstance(waveform, Waveform):
        samples = waveform.samples
        sample_rate = waveform.sample_rate
    else:
        samples = np.asarray(waveform)
        sample_rate = SAMPLE_RATE
    if hop_length < 1 or window_length < hop_length:
        raise ValidationError("window_length must be >= hop_length >= 1")
    if n_fft is None:
        n_fft = 1 << (window_length - 1).bit_length()
    if n_fft < window_length:
        raise ValidationError("n_fft must be >= window_length")
    if window == "hann":
        win = scipy.signal.get_window("hann", window_length, fftbins=True)
    elif window == "rect":
        win = np.ones(window_length)
    else:
        raise ValidationError(f"unknown window {window!r}; expected 'hann' or 'rect'")
    frames = _frame(samples, window_length, hop_length)
    spectrum = np.fft.rfft(frames * win, n=n_fft, axis=1)
    power = spectrum.real**2 + spectrum.imag**2
    return PowerSpectrogram(power=power, bin_hz=sample_rate / n_fft, hop_length=hop_length)


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(config: MelConfig) -> np.ndarray:
    """Triangular mel filterbank sampled at the FFT bin centers.

    Returns:
        (n_mels, n_fft // 2 + 1) float64 matrix. Triangle centers are strictly
        increasing within [fmin, fmax] and every row has positive sum.
    """
    config.validate()
    n_bins = config.n_fft // 2 + 1
    fft_hz = np.arange(n_bins) * (config.sample_rate / config.n_fft)
    edges_hz = mel_to_hz(
        np.linspace(hz_to_mel(config.fmin), hz_to_mel(config.fmax), config.n_mels + 2)
    )
    bank = np.zeros((config.n_mels, n_bins))
    for i in range(config.n_mels):
        lo, center, hi = edges_hz[i], edges_hz[i + 1], edges_hz[i + 2]
        rising = (fft_hz - lo) / (center - lo)
        falling = (hi - fft_hz) / (hi - center)
        bank[i] = np.maximum(0.0, np.minimum(rising, falling))
    return bank


def mel_band_edges(config: MelConfig) -> np.ndarray:
    """The n_mels + 2 triangle edge frequencies in Hz."""
    return mel_to_hz(np.linspace(hz_to_mel(config.fmin), hz_to_mel(config.fmax), config.n_mels + 2))


def extract_mel(waveform: Waveform, config: MelConfig | None = None) -> MelSpectrogram:
    """Log mel spectrogram with exactly len(waveform) // hop frames.

    Mel energies are floored at config.log_floor before the natural log, so
    digital silence maps to the constant log(log_floor).
    """
    config = config or MelConfig()
    config.validate()
    if waveform.sample_rate != config.sample_rate:
        raise ValidationError(
            f"waveform rate {waveform.sample_rate} does not match config rate {config.sample_rate}"
        )
    spec = stft_power(
        waveform, config.window_length, config.hop_length, config.n_fft, window="hann"
    )
    energies = spec.power @ mel_filterbank(config).T
    frames = np.log(np.maximum(energies, config.log_floor))
    return MelSpectrogram(
        frames=frames.astype(np.float32),
        frame_rate=config.sample_rate / config.hop_length,
    )


def compute_mel_stats(spectrograms) -> MelStats:
    """Per-channel mean/std over all frames of the given spectrograms."""
    stacked = np.concatenate(
        [s.frames if isinstance(s, MelSpectrogram) else np.asarray(s) for s in spectrograms]
    )
    if stacked.shape[0] < 2:
        raise ValidationError("need at least two frames to compute mel stats")
    return MelStats(
        mean=stacked.mean(axis=0).astype(np.float32),
        std=stacked.std(axis=0).astype(np.float32),
    )


def standardize_mel(frames: np.ndarray, stats: MelStats) -> np.ndarray:
    """(frames - mean) / std with the std floored at STD_FLOOR."""
    stats.validate()
    scale = np.maximum(stats.std, STD_FLOOR)
    return ((frames - stats.mean) / scale).astype(np.float32)


def slice_clip(
    waveform: Waveform,
    mel: MelSpectrogram,
    clip_seconds: float,
    rng: np.random.Generator,
    utterance_id: str = "",
) -> TrainingClip:
    """Cut a frame-aligned training clip at a uniformly random frame offset.

    The clip duration must be a whole number of hop spans. An utterance of
    exactly the clip length yields the whole utterance at offset zero.
    """
    hop = int(round(waveform.sample_rate / mel.frame_rate))
    n_samples = int(round(clip_seconds * waveform.sample_rate))
    if n_samples <= 0:
        raise ValidationError("clip duration must be positive")
    if n_samples % hop != 0:
        raise ValidationError(
            f"clip of {n_samples} samples is not a whole number of {hop}-sample frames"
        )
    n_frames = n_samples // hop
    total_frames = mel.n_frames
    if n_frames > total_frames:
        raise ValidationError(
            f"utterance has {total_frames} frames, shorter than the {n_frames}-frame clip"
        )
    start = int(rng.integers(0, total_frames - n_frames + 1))
    a = start * hop
    return TrainingClip(
        audio=waveform.samples[a : a + n_samples].copy(),
        mel=mel.frames[start : start + n_frames].copy(),
        utterance_id=utterance_id,
    )
