"""Mask- and beamformer-based zoom pipelines."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .array_model import ArrayGeometry, FieldOfView, build_look_grid, steering_vector
from .fov_features import feature_bank, fov_features, fuse_concat
from .signal_core import MultichannelWave, Spectrogram, StftConfig, istft, lps, stft

PIPELINES = ("identity", "feature_mask_hard", "feature_mask_soft", "oracle_irm", "oracle_mvdr", "model")
EPS = 1e-12


@dataclass(frozen=True)
class ZoomConfig:
    stft: StftConfig = field(default_factory=StftConfig)
    h_res_deg: float = 20.0
    v_res_deg: float | None = 10.0
    elevation_span: tuple | None = (0.0, 90.0)
    g_min: float = 0.01
    gamma: float = 5.0
    ref_mic: int = 0
    diag_loading: float = 1e-6

    def grid(self):
        return build_look_grid(self.h_res_deg, self.v_res_deg, self.elevation_span)


def _arr(x):
    return x.data if isinstance(x, Spectrogram) else np.asarray(x)


def _check_same(a, b):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def feature_mask(d_in, d_out, mode: str = "hard", g_min: float = 0.01, gamma: float = 5.0) -> np.ndarray:
    """Real T-F gain in [g_min, 1] from inside/outside FOV features."""
    a = getattr(d_in, "values", d_in)
    b = getattr(d_out, "values", d_out)
    _check_same(np.asarray(a), np.asarray(b))
    if not 0.0 <= g_min <= 1.0:
        raise ValueError("g_min must lie in [0, 1]")
    diff = np.asarray(a) - np.asarray(b)
    if mode == "hard":
        return np.where(diff > 0, 1.0, g_min)
    if mode == "soft":
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        return np.maximum(expit(gamma * diff), g_min)
    raise ValueError(f"unknown mask mode {mode!r}")


def apply_mask(spec: Spectrogram, mask) -> Spectrogram:
    mask = np.asarray(mask)
    _check_same(spec.data, mask)
    return Spectrogram(spec.data * mask, spec.hop, spec.fft_size, spec.sample_rate)


def ideal_ratio_mask(target_spec, mixture_spec) -> np.ndarray:
    s, y = _arr(target_spec), _arr(mixture_spec)
    _check_same(s, y)
    mag_s = np.abs(s)
    mag_v = np.abs(y - s)
    den = mag_s + mag_v
    irm = np.where(den > EPS, mag_s / np.maximum(den, EPS), 0.0)
    return np.clip(irm, 0.0, 1.0)


def _stack(specs) -> np.ndarray:
    arrs = [_arr(s) for s in specs]
    for a in arrs[1:]:
        _check_same(arrs[0], a)
    return np.stack(arrs)  # (M, T, F)


def noise_covariance(specs, irm, loading: float = 1e-6) -> np.ndarray:
    """(1 - IRM)^2-weighted spatial covariance per frequency, shape (F, M, M)."""
    Y = _stack(specs)
    irm = np.asarray(irm, dtype=np.float64)
    _check_same(Y[0], irm)
    M = Y.shape[0]
    w = (1.0 - irm) ** 2  # (T, F)
    norm = w.sum(axis=0)  # (F,)
    R = np.einsum("tf,atf,btf->fab", w, Y, Y.conj())
    empty = norm <= EPS
    if np.any(empty):
        warnings.warn(f"zero noise weight at {int(empty.sum())} frequencies; using identity covariance",
                      RuntimeWarning, stacklevel=2)
    R[~empty] /= norm[~empty, None, None]
    R[empty] = np.eye(M)
    R = 0.5 * (R + R.conj().transpose(0, 2, 1))
    tr = np.real(np.trace(R, axis1=1, axis2=2))
    R += (loading * tr / M)[:, None, None] * np.eye(M)
    return R


def mvdr_weights(noise_cov, steering) -> np.ndarray:
    """w(f) = R^-1 d / (d^H R^-1 d), shape (F, M)."""
    R = np.asarray(noise_cov)
    d = np.asarray(steering)
    if R.ndim == 2:
        R, d = R[None], d[None]
    try:
        Rinv_d = np.linalg.solve(R, d[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise ValueError("noise covariance is singular after diagonal loading") from exc
    den = np.einsum("fm,fm->f", d.conj(), Rinv_d)
    if np.any(np.abs(den) < EPS) or not np.all(np.isfinite(Rinv_d)):
        raise ValueError("noise covariance is singular after diagonal loading")
    return Rinv_d / den[:, None]


def beamform(specs, weights) -> Spectrogram:
    """Per-bin w(f)^H y(t, f)."""
    Y = _stack(specs)
    W = np.asarray(weights)
    if W.shape != (Y.shape[2], Y.shape[0]):
        raise ValueError(f"weights of shape {W.shape} do not match {Y.shape[0]} channels x {Y.shape[2]} bins")
    out = np.einsum("fm,mtf->tf", W.conj(), Y)
    s0 = specs[0]
    return Spectrogram(out, s0.hop, s0.fft_size, s0.sample_rate)


# ---------------------------------------------------------------- end to end

def _pad(x: np.ndarray, cfg: StftConfig) -> np.ndarray:
    # One hop of zeros on each side puts every original sample under two full frames.
    n = len(x) + 2 * cfg.hop
    extra = (-(n - cfg.fft_size)) % cfg.hop if n >= cfg.fft_size else cfg.fft_size - n
    return np.pad(x, (cfg.hop, cfg.hop + extra))


def synthesise(spec: Spectrogram, cfg: StftConfig, length: int) -> np.ndarray:
    """Inverse of ``analyse`` for one channel: drop the padding, keep ``length`` samples."""
    y = istft(spec, cfg)
    return y[cfg.hop:cfg.hop + length]


def analyse(wave: MultichannelWave, cfg: StftConfig) -> list[Spectrogram]:
    return [stft(_pad(ch, cfg), cfg, wave.sample_rate) for ch in wave.channels]


def fov_feature_pair(specs, geometry: ArrayGeometry, fov: FieldOfView, cfg: ZoomConfig):
    return fov_features(feature_bank(specs, geometry, cfg.grid()), fov)


def model_input(specs, geometry: ArrayGeometry, fov: FieldOfView, cfg: ZoomConfig) -> np.ndarray:
    """LPS of the reference channel stacked with the concatenated FOV features, (T, 3F)."""
    d_in, d_out = fov_feature_pair(specs, geometry, fov, cfg)
    return np.concatenate([lps(specs[cfg.ref_mic]), fuse_concat(d_in, d_out).values], axis=1)


def zoom(wave: MultichannelWave, geometry: ArrayGeometry, fov: FieldOfView, pipeline: str = "feature_mask_soft",
         cfg: ZoomConfig = ZoomConfig(), target=None, weights=None) -> np.ndarray:
    """Single-channel zoomed output with the same length as ``wave``.

    ``target`` (reference-mic clean in-FOV signal) is needed by the oracle
    pipelines; ``weights`` (ModelWeights) by the model pipeline.
    """
    if pipeline not in PIPELINES:
        raise ValueError(f"unknown pipeline {pipeline!r}; choose from {PIPELINES}")
    N = wave.num_samples
    ref = cfg.ref_mic
    if pipeline == "identity":
        return wave.channels[ref].copy()
    if pipeline != "oracle_irm" and wave.num_channels < 2:
        raise ValueError(f"{pipeline} needs at least two channels")
    if wave.num_channels != geometry.num_mics:
        raise ValueError(f"{wave.num_channels}-channel input for a {geometry.num_mics}-mic geometry")
    specs = analyse(wave, cfg.stft)

    if pipeline in ("feature_mask_hard", "feature_mask_soft"):
        d_in, d_out = fov_feature_pair(specs, geometry, fov, cfg)
        mode = pipeline.rsplit("_", 1)[1]
        mask = feature_mask(d_in, d_out, mode, cfg.g_min, cfg.gamma)
        return synthesise(apply_mask(specs[ref], mask), cfg.stft, N)

    if pipeline in ("oracle_irm", "oracle_mvdr"):
        if target is None:
            raise ValueError(f"{pipeline} needs the clean target signal")
        t_spec = stft(_pad(np.asarray(target, dtype=np.float64), cfg.stft), cfg.stft, wave.sample_rate)
        irm = ideal_ratio_mask(t_spec, specs[ref])
        if pipeline == "oracle_irm":
            return synthesise(apply_mask(specs[ref], irm), cfg.stft, N)
        Rn = noise_covariance(specs, irm, cfg.diag_loading)
        d = steering_vector(geometry, fov.center(), specs[0].bin_freqs(), ref_mic=ref)
        return synthesise(beamform(specs, mvdr_weights(Rn, d)), cfg.stft, N)

    from .subband_net import forward

    if weights is None:
        raise ValueError("model pipeline needs model weights")
    out = forward(specs, model_input(specs, geometry, fov, cfg), weights)
    return synthesise(Spectrogram(out.output, cfg.stft.hop, cfg.stft.fft_size, wave.sample_rate), cfg.stft, N)
