"""Audio front end: framing, log-mel filterbanks, and energy-based VAD.

The feature pipeline is deliberately plain: 25 ms frames every 10 ms,
per-frame pre-emphasis, a Hamming window, a 512-point magnitude spectrum,
40 triangular mel filters between 20 Hz and 7.6 kHz, and a natural log
with floor ``1e-10``. Voice activity detection thresholds per-frame log
energy against the utterance mean; frames sitting exactly at the energy
floor are always dropped.

All transforms are deterministic and per-utterance.
"""

from __future__ import annotations

import contextlib
import wave as wavefile
from dataclasses import dataclass, replace

import numpy as np

from . import config as cfgmod
from .errors import AllFramesRemoved, AudioFormatError, InvalidConfig, TooShort

PCM_SCALE = 32768.0


@dataclass
class Waveform:
    """Mono audio samples in [-1, 1] at a known sample rate."""

    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise InvalidConfig(f"sample rate must be positive, got {self.sample_rate}")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class FeatureMatrix:
    """T x D matrix of log-mel frames for one utterance."""

    frames: np.ndarray
    frame_shift: float
    vad_mask_applied: bool = False

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate: int = 16000
    frame_len: float = 0.025
    frame_shift: float = 0.010
    fft_size: int = 512
    num_filters: int = 40
    low_freq: float = 20.0
    high_freq: float = 7600.0
    preemphasis: float = 0.97
    floor: float = 1e-10

    def validate(self):
        if self.sample_rate <= 0 or self.frame_len <= 0 or self.frame_shift <= 0:
            raise InvalidConfig("sample rate, frame length and shift must be positive")
        if self.frame_len_samples > self.fft_size:
            raise InvalidConfig(
                f"frame of {self.frame_len_samples} samples exceeds FFT size {self.fft_size}"
            )
        if not 0 < self.low_freq < self.high_freq <= self.sample_rate / 2:
            raise InvalidConfig("mel range must satisfy 0 < low < high <= Nyquist")
        if self.num_filters < 1:
            raise InvalidConfig("need at least one mel filter")
        if self.floor <= 0:
            raise InvalidConfig("log floor must be positive")

    @property
    def frame_len_samples(self) -> int:
        return int(round(self.frame_len * self.sample_rate))

    @property
    def frame_shift_samples(self) -> int:
        return int(round(self.frame_shift * self.sample_rate))

    @classmethod
    def from_config(cls, cfg: dict[str, str]) -> "FeatureConfig":
        base = cls()
        return cls(
            sample_rate=cfgmod.get_int(cfg, "feat.sample_rate", base.sample_rate),
            frame_len=cfgmod.get_float(cfg, "feat.frame_len", base.frame_len),
            frame_shift=cfgmod.get_float(cfg, "feat.frame_shift", base.frame_shift),
            fft_size=cfgmod.get_int(cfg, "feat.fft_size", base.fft_size),
            num_filters=cfgmod.get_int(cfg, "feat.num_filters", base.num_filters),
            low_freq=cfgmod.get_float(cfg, "feat.low_freq", base.low_freq),
            high_freq=cfgmod.get_float(cfg, "feat.high_freq", base.high_freq),
            preemphasis=cfgmod.get_float(cfg, "feat.preemphasis", base.preemphasis),
            floor=cfgmod.get_float(cfg, "feat.floor", base.floor),
        )


@dataclass(frozen=True)
class VadConfig:
    offset: float = -1.0  # nats relative to the mean log energy
    floor: float = 1e-10  # frames at the energy floor are always dropped

    @classmethod
    def from_config(cls, cfg: dict[str, str]) -> "VadConfig":
        base = cls()
        return cls(
            offset=cfgmod.get_float(cfg, "vad.offset", base.offset),
            floor=cfgmod.get_float(cfg, "vad.floor", base.floor),
        )


# ---------------------------------------------------------------------------
# WAV I/O (16 kHz, 16-bit, mono PCM only)

def read_wav(path, expected_rate: int = 16000) -> Waveform:
    """Load a RIFF WAV file, rejecting anything but 16-bit mono PCM."""
    try:
        handle = wavefile.open(str(path), "rb")
    except (wavefile.Error, EOFError) as exc:
        raise AudioFormatError(f"{path}: not a readable WAV file ({exc})") from None
    with contextlib.closing(handle) as fh:
        if fh.getcomptype() != "NONE":
            raise AudioFormatError(f"{path}: compressed WAV not supported")
        if fh.getnchannels() != 1:
            raise AudioFormatError(f"{path}: expected mono, got {fh.getnchannels()} channels")
        if fh.getsampwidth() != 2:
            raise AudioFormatError(
                f"{path}: expected 16-bit samples, got {8 * fh.getsampwidth()}-bit"
            )
        rate = fh.getframerate()
        if expected_rate and rate != expected_rate:
            raise AudioFormatError(f"{path}: expected {expected_rate} Hz, got {rate} Hz")
        raw = fh.readframes(fh.getnframes())
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / PCM_SCALE
    return Waveform(samples, rate)


def write_wav(path, wave: Waveform) -> None:
    ints = np.clip(np.rint(wave.samples * PCM_SCALE), -32768, 32767).astype("<i2")
    with contextlib.closing(wavefile.open(str(path), "wb")) as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(wave.sample_rate)
        fh.writeframes(ints.tobytes())


# ---------------------------------------------------------------------------
# framing and mel filterbank

def frame_signal(samples: np.ndarray, frame_len: int, frame_shift: int) -> np.ndarray:
    """Slice a signal into overlapping frames (T x frame_len)."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size < frame_len:
        raise TooShort(
            f"signal of {samples.size} samples is shorter than one {frame_len}-sample frame"
        )
    num_frames = 1 + (samples.size - frame_len) // frame_shift
    idx = np.arange(frame_len)[None, :] + frame_shift * np.arange(num_frames)[:, None]
    return samples[idx]


def hz_to_mel(freq):
    return 2595.0 * np.log10(1.0 + np.asarray(freq, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_edge_frequencies(config: FeatureConfig) -> np.ndarray:
    """num_filters + 2 mel-spaced hertz points from low_freq to high_freq."""
    edges_mel = np.linspace(
        hz_to_mel(config.low_freq), hz_to_mel(config.high_freq), config.num_filters + 2
    )
    return mel_to_hz(edges_mel)


def mel_center_frequencies(config: FeatureConfig) -> np.ndarray:
    return mel_edge_frequencies(config)[1:-1]


def mel_filterbank(config: FeatureConfig) -> np.ndarray:
    """Triangular filters as a (num_filters x num_bins) weight matrix.

    Filters are built on a shared mel grid, so their responses form a
    partition of unity between the first and last center frequency.
    """
    edges = mel_edge_frequencies(config)
    bin_freqs = np.arange(config.fft_size // 2 + 1) * config.sample_rate / config.fft_size
    weights = np.zeros((config.num_filters, bin_freqs.size))
    for j in range(config.num_filters):
        lo, center, hi = edges[j], edges[j + 1], edges[j + 2]
        rising = (bin_freqs - lo) / (center - lo)
        falling = (hi - bin_freqs) / (hi - center)
        weights[j] = np.clip(np.minimum(rising, falling), 0.0, None)
    return weights


def extract_filterbanks(wave: Waveform, config: FeatureConfig | None = None) -> FeatureMatrix:
    """Log-mel features, one row per frame.

    T = 1 + floor((num_samples - frame_len) / frame_shift); each frame is
    pre-emphasized, windowed, and projected through the mel filterbank,
    then floored and logged.
    """
    if config is None:
        config = FeatureConfig()
    config.validate()
    if wave.sample_rate != config.sample_rate:
        raise InvalidConfig(
            f"waveform at {wave.sample_rate} Hz, config expects {config.sample_rate} Hz"
        )
    frames = frame_signal(
        wave.samples, config.frame_len_samples, config.frame_shift_samples
    )
    emphasized = frames.copy()
    emphasized[:, 1:] -= config.preemphasis * frames[:, :-1]
    emphasized[:, 0] -= config.preemphasis * frames[:, 0]
    window = np.hamming(config.frame_len_samples)
    spectrum = np.abs(np.fft.rfft(emphasized * window, n=config.fft_size, axis=1))
    energies = spectrum @ mel_filterbank(config).T
    feats = np.log(np.maximum(energies, config.floor))
    return FeatureMatrix(feats, config.frame_shift, vad_mask_applied=False)


# ---------------------------------------------------------------------------
# energy VAD

def frame_log_energy(wave: Waveform, config: FeatureConfig | None = None) -> np.ndarray:
    """Per-frame log of mean squared amplitude, floored, aligned with features."""
    if config is None:
        config = FeatureConfig()
    frames = frame_signal(
        wave.samples, config.frame_len_samples, config.frame_shift_samples
    )
    return np.log(np.maximum(np.mean(frames**2, axis=1), config.floor))


def energy_vad(log_energy: np.ndarray, config: VadConfig | None = None) -> np.ndarray:
    """Boolean keep-mask: above the mean-relative threshold and off the floor."""
    if config is None:
        config = VadConfig()
    log_energy = np.asarray(log_energy, dtype=np.float64)
    relative = log_energy > log_energy.mean() + config.offset
    off_floor = log_energy > np.log(config.floor)
    return relative & off_floor


def apply_vad(features: FeatureMatrix, mask: np.ndarray) -> FeatureMatrix:
    """Drop masked-out rows, preserving order."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (features.num_frames,):
        raise InvalidConfig(
            f"mask length {mask.size} does not match {features.num_frames} frames"
        )
    if not mask.any():
        raise AllFramesRemoved("energy VAD removed every frame")
    return replace(features, frames=features.frames[mask], vad_mask_applied=True)


def features_from_waveform(
    wave: Waveform,
    feat_config: FeatureConfig | None = None,
    vad_config: VadConfig | None = None,
) -> FeatureMatrix:
    """Full front end: filterbanks, energy VAD, row filtering."""
    feats = extract_filterbanks(wave, feat_config)
    mask = energy_vad(frame_log_energy(wave, feat_config), vad_config)
    return apply_vad(feats, mask)


def features_from_wav(
    path,
    feat_config: FeatureConfig | None = None,
    vad_config: VadConfig | None = None,
) -> FeatureMatrix:
    expected = feat_config.sample_rate if feat_config else 16000
    return features_from_waveform(read_wav(path, expected), feat_config, vad_config)
