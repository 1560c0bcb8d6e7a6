import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fovzoom.array_model import Direction, FieldOfView, steering_vector
from fovzoom.fov_features import FeatureMap
from fovzoom.scenarios import noisy_single_scene, out_of_fov_scene, two_source_scene
from fovzoom.scene_sim import render, render_plane_wave, synth_source
from fovzoom.signal_core import MultichannelWave, Spectrogram, stft_multi
from fovzoom.metrics import si_sdr
from fovzoom.zoom_engine import (ZoomConfig, analyse, apply_mask, beamform, feature_mask, fov_feature_pair,
                                 ideal_ratio_mask, mvdr_weights, noise_covariance, zoom)

FS = 16000


def cspec(rng, T=6, F=9):
    return rng.standard_normal((T, F)) + 1j * rng.standard_normal((T, F))


def wrap(data):
    return Spectrogram(np.asarray(data), 256, 512, FS)


def random_pd(rng, M):
    A = rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))
    return A @ A.conj().T + 0.1 * np.eye(M)


# ---------------------------------------------------------------- masks

def test_mask_examples():
    one, minus = np.ones((1, 1)), -np.ones((1, 1))
    assert feature_mask(one, minus, "hard")[0, 0] == 1.0
    assert feature_mask(one, one, "hard")[0, 0] == 0.01
    assert feature_mask(one, one, "soft", gamma=5.0)[0, 0] == pytest.approx(0.5)
    assert feature_mask(FeatureMap(minus, "fov_in"), FeatureMap(one, "fov_out"), "hard", g_min=0.2)[0, 0] == 0.2


def test_mask_errors():
    a = np.zeros((2, 3))
    with pytest.raises(ValueError):
        feature_mask(a, a, "soft", gamma=0.0)
    with pytest.raises(ValueError):
        feature_mask(a, np.zeros((3, 2)))
    with pytest.raises(ValueError):
        feature_mask(a, a, "fuzzy")


@settings(max_examples=50, deadline=None)
@given(d_in=arrays(float, (4, 5), elements=st.floats(-1, 1)), d_out=arrays(float, (4, 5), elements=st.floats(-1, 1)),
       mode=st.sampled_from(["hard", "soft"]), g_min=st.floats(0, 0.5))
def test_mask_bounds_and_monotone(d_in, d_out, mode, g_min):
    m = feature_mask(d_in, d_out, mode, g_min)
    assert np.all(m >= g_min) and np.all(m <= 1)
    # raising d_in can only raise the gain
    assert np.all(feature_mask(np.minimum(d_in + 0.3, 1), d_out, mode, g_min) >= m)


def test_apply_mask_examples(rng):
    s = wrap(cspec(rng))
    assert np.array_equal(apply_mask(s, np.ones(s.data.shape)).data, s.data)
    assert not np.any(apply_mask(s, np.zeros(s.data.shape)).data)
    np.testing.assert_allclose(np.abs(apply_mask(s, np.full(s.data.shape, 0.5)).data), 0.5 * np.abs(s.data))
    with pytest.raises(ValueError):
        apply_mask(s, np.ones((2, 2)))


# ---------------------------------------------------------------- IRM and covariance

def test_irm_examples(rng):
    s = cspec(rng)
    np.testing.assert_allclose(ideal_ratio_mask(s, s), 1.0)
    assert not np.any(ideal_ratio_mask(np.zeros_like(s), s))
    np.testing.assert_allclose(ideal_ratio_mask(s, s + 1j * s), 0.5)
    with pytest.raises(ValueError):
        ideal_ratio_mask(s, s[:, :3])
    z = np.zeros((2, 2))
    assert not np.any(ideal_ratio_mask(z, z))


def test_covariance_with_zero_irm_is_sample_covariance(rng):
    Y = [cspec(rng, T=20, F=3) for _ in range(4)]
    R = noise_covariance(Y, np.zeros((20, 3)), loading=0.0)
    stack = np.stack(Y)
    for f in range(3):
        y = stack[:, :, f]
        oracle = sum(np.outer(y[:, t], y[:, t].conj()) for t in range(20)) / 20
        np.testing.assert_allclose(R[f], oracle, atol=1e-12)


def test_covariance_loading_and_hermitian(rng):
    Y = [cspec(rng, T=10, F=4) for _ in range(3)]
    irm = rng.uniform(0, 1, (10, 4))
    R0 = noise_covariance(Y, irm, loading=0.0)
    R = noise_covariance(Y, irm)
    np.testing.assert_allclose(R, R.conj().transpose(0, 2, 1))
    for f in range(4):
        tr = np.trace(R0[f]).real
        np.testing.assert_allclose(R[f] - R0[f], 1e-6 * tr / 3 * np.eye(3), atol=1e-15)
        assert np.all(np.linalg.eigvalsh(R[f]) > 0)


def test_covariance_identity_fallback_warns(rng):
    Y = [cspec(rng) for _ in range(3)]
    with pytest.warns(RuntimeWarning, match="identity"):
        R = noise_covariance(Y, np.ones((6, 9)), loading=0.0)
    np.testing.assert_allclose(R, np.broadcast_to(np.eye(3), (9, 3, 3)))


def test_covariance_principal_eigenvector_is_steering(geometry):
    d = Direction(75.0, 10.0)
    x = synth_source(np.random.default_rng(2), FS, FS)
    specs = stft_multi(MultichannelWave(render_plane_wave(x, geometry, d, FS), FS))
    R = noise_covariance(specs, np.zeros(specs[0].data.shape))
    freqs = specs[0].bin_freqs()
    a = steering_vector(geometry, d, freqs)
    for f in (20, 60, 120):
        vals, vecs = np.linalg.eigh(R[f])
        assert vals[-1] > 50 * vals[-2]
        v = vecs[:, -1]
        cos = np.abs(v.conj() @ a[f]) / (np.linalg.norm(v) * np.linalg.norm(a[f]))
        assert cos > 0.99


# ---------------------------------------------------------------- MVDR

def test_mvdr_identity_closed_form(geometry):
    d = steering_vector(geometry, Direction(30), np.array([500.0, 2000.0]))
    w = mvdr_weights(np.broadcast_to(np.eye(8), (2, 8, 8)), d)
    np.testing.assert_allclose(w, d / 8, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), M=st.integers(2, 8))
def test_mvdr_distortionless(seed, M):
    rng = np.random.default_rng(seed)
    R = np.stack([random_pd(rng, M) for _ in range(5)])
    d = np.exp(1j * rng.uniform(-np.pi, np.pi, (5, M)))
    w = mvdr_weights(R, d)
    assert np.max(np.abs(np.einsum("fm,fm->f", w.conj(), d) - 1)) <= 1e-8


def test_mvdr_nulls_interferer(geometry):
    freqs = np.array([800.0, 1500.0, 3000.0])
    d = steering_vector(geometry, Direction(0), freqs)
    v = steering_vector(geometry, Direction(120), freqs)
    R = np.eye(8) + 100 * np.einsum("fa,fb->fab", v, v.conj())
    w = mvdr_weights(R, d)
    w0 = mvdr_weights(np.broadcast_to(np.eye(8), R.shape), d)
    p = np.abs(np.einsum("fm,fm->f", w.conj(), v)) ** 2
    p0 = np.abs(np.einsum("fm,fm->f", w0.conj(), v)) ** 2
    assert np.all(p < p0)


def test_mvdr_singular_rejected():
    with pytest.raises(ValueError, match="singular"):
        mvdr_weights(np.zeros((1, 3, 3)), np.ones((1, 3)))


def test_beamform_selection_and_zero(rng):
    specs = [wrap(cspec(rng)) for _ in range(3)]
    sel = np.zeros((9, 3), complex)
    sel[:, 0] = 1
    np.testing.assert_allclose(beamform(specs, sel).data, specs[0].data)
    assert not np.any(beamform(specs, np.zeros((9, 3))).data)
    with pytest.raises(ValueError):
        beamform(specs, np.zeros((9, 4)))


# ---------------------------------------------------------------- end to end

def scene_wave(spec):
    truth = render(spec)
    return truth, truth.mixture_wave()


def test_full_fov_hard_mask_passes_through(geometry):
    truth, wave = scene_wave(noisy_single_scene(3)[0])
    out = zoom(wave, geometry, FieldOfView(0, 360, -90, 90), "feature_mask_hard")
    assert out.shape == (wave.num_samples,)
    ref = wave.channels[0]
    assert np.linalg.norm(out - ref) / np.linalg.norm(ref) <= 1e-6


@pytest.mark.parametrize("pipeline", ["identity", "feature_mask_hard", "feature_mask_soft", "oracle_irm",
                                      "oracle_mvdr"])
def test_output_length_matches_input(geometry, pipeline):
    x = synth_source(np.random.default_rng(0), 5001, FS)
    wave = MultichannelWave(render_plane_wave(x, geometry, Direction(10), FS), FS)
    out = zoom(wave, geometry, FieldOfView(0, 40, 0, 40), pipeline, target=wave.channels[0] * 0.5)
    assert out.shape == (5001,)
    assert np.all(np.isfinite(out))


def test_out_of_fov_source_is_attenuated(geometry):
    for seed in range(3):
        spec, fov = out_of_fov_scene(seed)
        _, wave = scene_wave(spec)
        out = zoom(wave, geometry, fov, "feature_mask_hard")
        ref = wave.channels[0]
        assert 10 * np.log10(ref @ ref / (out @ out)) >= 20


def test_in_fov_source_improves(geometry):
    spec, fov = two_source_scene(4)
    truth, wave = scene_wave(spec)
    target = truth.images[0, 0]
    base = si_sdr(wave.channels[0], target)
    for pipeline in ("feature_mask_hard", "feature_mask_soft", "oracle_irm", "oracle_mvdr"):
        assert si_sdr(zoom(wave, geometry, fov, pipeline, target=target), target) > base


def test_masking_never_increases_magnitude(geometry):
    spec, fov = two_source_scene(1)
    _, wave = scene_wave(spec)
    cfg = ZoomConfig()
    specs = analyse(wave, cfg.stft)
    d_in, d_out = fov_feature_pair(specs, geometry, fov, cfg)
    out = apply_mask(specs[0], feature_mask(d_in, d_out, "soft"))
    assert np.all(np.abs(out.data) <= np.abs(specs[0].data))


@pytest.mark.parametrize("pipeline", ["feature_mask_hard", "feature_mask_soft"])
@pytest.mark.parametrize("alpha", [0.25, 3.0])
def test_masking_is_scale_equivariant(geometry, pipeline, alpha):
    _, wave = scene_wave(two_source_scene(2)[0])
    fov = FieldOfView(0, 90, 0, 40)
    a = zoom(wave, geometry, fov, pipeline)
    b = zoom(MultichannelWave(alpha * wave.channels, FS), geometry, fov, pipeline)
    np.testing.assert_allclose(b, alpha * a, atol=1e-12 * max(1, alpha))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_enlarging_fov_never_loses_the_source(geometry, seed):
    spec, small = out_of_fov_scene(seed)
    _, wave = scene_wave(spec)
    az = spec.sources[0].direction.azimuth_deg
    # grow the FOV from its low edge until it swallows the source
    grown = FieldOfView(small.theta_low_deg, (az + 15) % 360, small.alpha_down_deg, small.alpha_up_deg)
    assert grown.contains(spec.sources[0].direction)
    e_small = np.sum(zoom(wave, geometry, small, "feature_mask_hard") ** 2)
    e_grown = np.sum(zoom(wave, geometry, grown, "feature_mask_hard") ** 2)
    assert e_grown >= e_small


def test_zoom_errors(geometry):
    wave = MultichannelWave(np.zeros((8, 2000)), FS)
    fov = FieldOfView(0, 90)
    with pytest.raises(ValueError, match="unknown pipeline"):
        zoom(wave, geometry, fov, "magic")
    with pytest.raises(ValueError, match="target"):
        zoom(wave, geometry, fov, "oracle_mvdr")
    with pytest.raises(ValueError, match="two channels"):
        zoom(MultichannelWave(np.zeros(2000), FS), geometry, fov, "feature_mask_soft")
    with pytest.raises(ValueError, match="geometry"):
        zoom(MultichannelWave(np.zeros((3, 2000)), FS), geometry, fov, "feature_mask_soft")
    with pytest.raises(ValueError, match="weights"):
        zoom(wave, geometry, fov, "model")


def test_mvdr_improves_on_noisy_scene(geometry):
    spec, fov = noisy_single_scene(5)
    truth, wave = scene_wave(spec)
    target = truth.images[0, 0]
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        out = zoom(wave, geometry, fov, "oracle_mvdr", target=target)
    assert si_sdr(out, target) > si_sdr(wave.channels[0], target)
