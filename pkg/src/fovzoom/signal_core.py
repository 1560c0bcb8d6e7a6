"""STFT analysis/synthesis, log power spectrum and WAV I/O."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

LPS_FLOOR = 1e-12
DEFAULT_SAMPLE_RATE = 16000


@dataclass(frozen=True)
class StftConfig:
    fft_size: int = 512
    hop: int = 256
    window: str = "sqrt_hann"

    def __post_init__(self):
        if self.fft_size <= 0 or self.fft_size % 2:
            raise ValueError(f"fft_size must be a positive even integer, got {self.fft_size}")
        if self.hop <= 0 or self.fft_size < 2 * self.hop:
            raise ValueError(f"fft_size ({self.fft_size}) must be >= 2 * hop ({self.hop})")
        if self.window not in ("hann", "sqrt_hann"):
            raise ValueError(f"unknown window {self.window!r}")
        wa, ws = self.windows()
        ola = overlap_add_sum(wa * ws, self.hop)
        if np.ptp(ola) > 1e-9 * np.max(ola):
            raise ValueError(f"{self.window} window is not COLA at hop {self.hop}")

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1

    def windows(self) -> tuple[np.ndarray, np.ndarray]:
        """(analysis, synthesis) window pair."""
        n = np.arange(self.fft_size)
        hann = 0.5 - 0.5 * np.cos(2 * np.pi * n / self.fft_size)  # periodic
        if self.window == "sqrt_hann":
            w = np.sqrt(hann)
            return w, w
        return hann, np.ones(self.fft_size)


def overlap_add_sum(w: np.ndarray, hop: int) -> np.ndarray:
    """Steady-state sum of ``w`` shifted by multiples of ``hop`` (one period)."""
    n = len(w)
    acc = np.zeros(hop)
    for start in range(0, n, hop):
        seg = w[start:start + hop]
        acc[:len(seg)] += seg
    return acc


@dataclass(frozen=True)
class MultichannelWave:
    channels: np.ndarray  # (M, N)
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.float64)
        if ch.ndim == 1:
            ch = ch[None, :]
        if ch.ndim != 2 or ch.shape[0] < 1:
            raise ValueError("wave needs at least one channel of samples")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "channels", ch)

    @property
    def num_channels(self) -> int:
        return self.channels.shape[0]

    @property
    def num_samples(self) -> int:
        return self.channels.shape[1]


@dataclass(frozen=True)
class Spectrogram:
    data: np.ndarray  # (T, F) complex
    hop: int
    fft_size: int
    sample_rate: int = DEFAULT_SAMPLE_RATE

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def num_frames(self) -> int:
        return self.data.shape[0]

    def bin_freqs(self) -> np.ndarray:
        return np.arange(self.data.shape[1]) * self.sample_rate / self.fft_size


def num_frames(length: int, cfg: StftConfig) -> int:
    return 1 + (length - cfg.fft_size) // cfg.hop


def stft(x, cfg: StftConfig = StftConfig(), sample_rate: int = DEFAULT_SAMPLE_RATE) -> Spectrogram:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("stft expects a single channel")
    if len(x) < cfg.fft_size:
        raise ValueError(f"signal of {len(x)} samples is shorter than one frame ({cfg.fft_size})")
    wa, _ = cfg.windows()
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.fft_size)[::cfg.hop]
    data = np.fft.rfft(frames * wa, axis=-1)
    return Spectrogram(data, cfg.hop, cfg.fft_size, sample_rate)


def stft_multi(wave: MultichannelWave, cfg: StftConfig = StftConfig()) -> list[Spectrogram]:
    return [stft(ch, cfg, wave.sample_rate) for ch in wave.channels]


def istft(spec: Spectrogram, cfg: StftConfig = StftConfig(), length: int | None = None) -> np.ndarray:
    """Weighted overlap-add; samples with no window support come back as zero."""
    if spec.fft_size != cfg.fft_size or spec.hop != cfg.hop:
        raise ValueError(
            f"spectrogram (fft {spec.fft_size}, hop {spec.hop}) does not match "
            f"config (fft {cfg.fft_size}, hop {cfg.hop})")
    if spec.data.shape[1] != cfg.num_bins:
        raise ValueError(f"expected {cfg.num_bins} bins, got {spec.data.shape[1]}")
    wa, ws = cfg.windows()
    T = spec.data.shape[0]
    n_out = (T - 1) * cfg.hop + cfg.fft_size
    frames = np.fft.irfft(spec.data, n=cfg.fft_size, axis=-1) * ws
    out = np.zeros(n_out)
    norm = np.zeros(n_out)
    for t in range(T):
        s = t * cfg.hop
        out[s:s + cfg.fft_size] += frames[t]
        norm[s:s + cfg.fft_size] += wa * ws
    nz = norm > 1e-8
    out[nz] /= norm[nz]
    out[~nz] = 0.0
    if length is not None:
        out = out[:length] if length <= n_out else np.pad(out, (0, length - n_out))
    return out


def lps(spec: Spectrogram) -> np.ndarray:
    return np.log(np.abs(spec.data) ** 2 + LPS_FLOOR)


# ---------------------------------------------------------------- WAV I/O

def read_wav(path) -> MultichannelWave:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(12)
    if len(head) < 12 or head[:4] != b"RIFF" or head[8:12] != b"WAVE":
        raise ValueError(f"{path}: not a RIFF/WAVE file")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", wavfile.WavFileWarning)
            sr, data = wavfile.read(path)
    except Exception as exc:  # scipy raises ValueError/struct.error on junk
        raise ValueError(f"{path}: malformed WAV ({exc})") from exc
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise ValueError(f"{path}: unsupported sample encoding {data.dtype}")
    samples = samples.T if samples.ndim == 2 else samples[None, :]
    return MultichannelWave(samples, int(sr))


def write_wav(path, wave: MultichannelWave, encoding: str = "float32") -> None:
    ch = wave.channels
    if encoding == "float32":
        data = ch.T.astype(np.float32)
    elif encoding == "pcm16":
        data = np.clip(np.round(ch.T * 32768.0), -32768, 32767).astype(np.int16)
    else:
        raise ValueError(f"unsupported encoding {encoding!r}")
    if data.shape[1] == 1:
        data = data[:, 0]
    wavfile.write(Path(path), wave.sample_rate, np.ascontiguousarray(data))

