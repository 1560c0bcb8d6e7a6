"""Seeded scene families used by the experiment scripts and the acceptance suite."""
from __future__ import annotations

import numpy as np

from .array_model import ArrayGeometry, Direction, FieldOfView, default_geometry
from .scene_sim import SceneSpec, Source, circular_distance, synth_source
from .signal_core import DEFAULT_SAMPLE_RATE

DURATION_S = 2.0


def energetic_bins(spec_data: np.ndarray, within_db: float = 40.0, floor: float = 1e-20) -> np.ndarray:
    """Bins within ``within_db`` of their frame peak, in frames within ``within_db`` of the loudest frame."""
    p = np.abs(spec_data) ** 2
    ratio = 10 ** (-within_db / 10)
    frame_e = p.sum(axis=1)
    return (p >= p.max(axis=1, keepdims=True) * ratio) & (p > floor) & (frame_e >= frame_e.max() * ratio)[:, None]


def _source(rng, az, el, fs, n):
    return Source(Direction(az, el), float(rng.uniform(1.0, 3.0)), synth_source(rng, n, fs))


def _fov_around(center_az, width, el_lo, el_hi):
    return FieldOfView((center_az - width / 2) % 360.0, (center_az + width / 2) % 360.0,
                       max(-90.0, el_lo), min(90.0, el_hi))


def out_of_fov_scene(seed: int, geometry: ArrayGeometry | None = None, min_gap_deg: float = 40.0,
                     snr_db: float = 40.0, fs: int = DEFAULT_SAMPLE_RATE) -> tuple[SceneSpec, FieldOfView]:
    """One source whose azimuth lies at least ``min_gap_deg`` outside a random FOV."""
    rng = np.random.default_rng(seed)
    n = int(DURATION_S * fs)
    az = rng.uniform(0, 360)
    el = rng.uniform(0, 30)
    width = rng.uniform(30, 90)
    offset = rng.uniform(width / 2 + min_gap_deg, 360 - width / 2 - min_gap_deg)
    fov = _fov_around(az + offset, width, 0.0, 40.0)
    spec = SceneSpec((_source(rng, az, el, fs, n),), snr_db=snr_db, geometry=geometry or default_geometry(),
                     sample_rate=fs, noise_seed=seed, fov=fov)
    return spec, fov


def two_source_scene(seed: int, geometry: ArrayGeometry | None = None, min_sep_deg: float = 40.0,
                     snr_db: float = 20.0, fs: int = DEFAULT_SAMPLE_RATE) -> tuple[SceneSpec, FieldOfView]:
    """Target inside a FOV centred on it, interferer at least ``min_sep_deg`` away and outside."""
    rng = np.random.default_rng(seed)
    n = int(DURATION_S * fs)
    az_t = rng.uniform(0, 360)
    az_i = az_t + rng.choice([-1, 1]) * rng.uniform(min_sep_deg, 180)
    el_t, el_i = rng.uniform(0, 30, size=2)
    width = rng.uniform(20, min_sep_deg)
    fov = _fov_around(az_t, width, el_t - 15, el_t + 15)
    target = _source(rng, az_t, el_t, fs, n)
    interferer = _source(rng, az_i, el_i, fs, n)
    assert fov.contains(target.direction) and not fov.contains(interferer.direction)
    spec = SceneSpec((target, interferer), snr_db=snr_db, geometry=geometry or default_geometry(),
                     sample_rate=fs, noise_seed=seed, fov=fov)
    return spec, fov


def noisy_single_scene(seed: int, geometry: ArrayGeometry | None = None, snr_range=(5.0, 15.0),
                       fs: int = DEFAULT_SAMPLE_RATE) -> tuple[SceneSpec, FieldOfView]:
    """One source in white sensor noise, FOV centred on it."""
    rng = np.random.default_rng(seed)
    n = int(DURATION_S * fs)
    az = rng.uniform(0, 360)
    el = rng.uniform(0, 30)
    fov = _fov_around(az, rng.uniform(20, 60), el - 10, el + 10)
    spec = SceneSpec((_source(rng, az, el, fs, n),), snr_db=float(rng.uniform(*snr_range)),
                     geometry=geometry or default_geometry(), sample_rate=fs, noise_seed=seed, fov=fov)
    return spec, fov


def min_separation(spec: SceneSpec) -> float:
    az = [s.direction.azimuth_deg for s in spec.sources]
    return min((circular_distance(a, b) for i, a in enumerate(az) for b in az[i + 1:]), default=360.0)
