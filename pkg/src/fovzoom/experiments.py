"""Seeded measurement runs shared by the acceptance suite and scripts/.

Each function returns per-scene numbers so callers can aggregate or
threshold them as they see fit.
"""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from .array_model import ArrayGeometry, default_geometry
from .fov_features import feature_bank, fov_features
from .metrics import attenuation, si_sdr
from .scenarios import energetic_bins, noisy_single_scene, out_of_fov_scene, two_source_scene
from .scene_sim import fov_reference, render, render_plane_wave, synth_source
from .signal_core import DEFAULT_SAMPLE_RATE, MultichannelWave, stft_multi
from .zoom_engine import ZoomConfig, analyse, apply_mask, ideal_ratio_mask, synthesise, zoom


def look_direction_scores(seeds, geometry: ArrayGeometry | None = None, cfg: ZoomConfig = ZoomConfig(),
                          duration_s: float = 1.0):
    """Plane wave from a random look direction of the grid, one per seed.

    Returns (true sector, argmax sector, mean feature of the true sector on energetic bins) per seed.
    """
    g = geometry or default_geometry()
    grid = cfg.grid()
    fs = DEFAULT_SAMPLE_RATE
    rows = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        k = int(rng.integers(grid.num_sectors))
        x = synth_source(rng, int(duration_s * fs), fs)
        specs = stft_multi(MultichannelWave(render_plane_wave(x, g, grid.look_directions[k], fs), fs), cfg.stft)
        bank = feature_bank(specs, g, grid)
        en = energetic_bins(specs[0].data)
        scores = bank.maps[:, en].mean(axis=1)
        rows.append((k, int(np.argmax(scores)), float(scores[k])))
    return rows


def target_dominated_bins(target_spec, rest_spec) -> np.ndarray:
    """Energetic bins of the target where it carries more energy than everything else."""
    return energetic_bins(target_spec) & (np.abs(target_spec) > np.abs(rest_spec))


def fov_prominence(seeds, cfg: ZoomConfig, geometry: ArrayGeometry | None = None):
    """Mean inside-FOV feature on target-dominated bins of two-source scenes, one value per seed."""
    g = geometry or default_geometry()
    grid = cfg.grid()
    out = []
    for seed in seeds:
        spec, fov = two_source_scene(seed, g)
        truth = render(spec)
        specs = analyse(truth.mixture_wave(), cfg.stft)
        d_in, _ = fov_features(feature_bank(specs, g, grid), fov)
        tgt = analyse(MultichannelWave(truth.images[0, :1], truth.sample_rate), cfg.stft)[0].data
        rest = specs[cfg.ref_mic].data - tgt
        out.append(float(d_in.values[target_dominated_bins(tgt, rest)].mean()))
    return np.array(out)


def out_of_fov_attenuation(seeds, pipeline: str = "feature_mask_hard", cfg: ZoomConfig = ZoomConfig(),
                           geometry: ArrayGeometry | None = None):
    g = geometry or default_geometry()
    vals = []
    for seed in seeds:
        spec, fov = out_of_fov_scene(seed, g)
        wave = render(spec).mixture_wave()
        vals.append(attenuation(zoom(wave, g, fov, pipeline, cfg), wave.channels[cfg.ref_mic]))
    return np.array(vals)


def _improvement(truth, fov, pipeline, cfg, g):
    wave = truth.mixture_wave()
    ref = fov_reference(truth, fov, cfg.ref_mic)
    out = zoom(wave, g, fov, pipeline, cfg, target=ref)
    return si_sdr(out, ref) - si_sdr(wave.channels[cfg.ref_mic], ref)


def separation_improvement(seeds, pipeline: str = "feature_mask_soft", cfg: ZoomConfig = ZoomConfig(),
                           geometry: ArrayGeometry | None = None):
    g = geometry or default_geometry()
    vals = []
    for seed in seeds:
        spec, fov = two_source_scene(seed, g)
        vals.append(_improvement(render(spec), fov, pipeline, cfg, g))
    return np.array(vals)


def mvdr_improvement(seeds, cfg: ZoomConfig = ZoomConfig(), geometry: ArrayGeometry | None = None):
    g = geometry or default_geometry()
    vals = []
    for seed in seeds:
        spec, fov = noisy_single_scene(seed, g)
        vals.append(_improvement(render(spec), fov, "oracle_mvdr", cfg, g))
    return np.array(vals)


def ideal_binary_mask_bounds(seeds, cfg: ZoomConfig = ZoomConfig(), geometry: ArrayGeometry | None = None):
    """Brute-force ideal binary mask (1 where the in-FOV reference dominates, else g_min).

    Returns (attenuation on out-of-FOV scenes, SI-SDR improvement on two-source scenes) per seed.
    """
    g = geometry or default_geometry()
    att, imp = [], []
    for seed in seeds:
        for kind in ("out", "two"):
            spec, fov = out_of_fov_scene(seed, g) if kind == "out" else two_source_scene(seed, g)
            truth = render(spec)
            wave = truth.mixture_wave()
            mix = wave.channels[cfg.ref_mic]
            ref = fov_reference(truth, fov, cfg.ref_mic)
            Y, S = analyse(MultichannelWave(np.stack([mix, ref]), wave.sample_rate), cfg.stft)
            mask = np.where(ideal_ratio_mask(S, Y) > 0.5, 1.0, cfg.g_min)
            out = synthesise(apply_mask(Y, mask), cfg.stft, len(mix))
            if kind == "out":
                att.append(attenuation(out, mix))
            else:
                imp.append(si_sdr(out, ref) - si_sdr(mix, ref))
    return np.array(att), np.array(imp)


def coarse(cfg: ZoomConfig = ZoomConfig()) -> ZoomConfig:
    """The coarse grid compared against the default one."""
    return replace(cfg, h_res_deg=60.0, v_res_deg=15.0)

