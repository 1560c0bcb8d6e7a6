import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fovzoom.array_model import FieldOfView
from fovzoom.metrics import EvalReport, UtteranceResult, attenuation, evaluate, evaluate_scene, si_sdr
from fovzoom.scenarios import noisy_single_scene
from fovzoom.scene_sim import read_scene, render, write_scene


def orthogonal_pair(rng, n=1000):
    s = rng.standard_normal(n)
    v = rng.standard_normal(n)
    v -= (v @ s) / (s @ s) * s
    return s, v * np.linalg.norm(s) / np.linalg.norm(v)


def test_si_sdr_examples(rng):
    s, v = orthogonal_pair(rng)
    assert si_sdr(s, s) == 60.0
    assert si_sdr(2 * s, s) == 60.0
    assert si_sdr(s + v, s) == pytest.approx(0.0, abs=1e-9)
    assert si_sdr(s + 0.1 * v, s) == pytest.approx(20.0, abs=1e-9)
    assert si_sdr(v, s) == -60.0


def test_si_sdr_by_hand():
    s = np.array([1.0, 0.0, 0.0, 0.0])
    e = np.array([1.0, 1.0, 0.0, 0.0])
    # projection of e on s is s, residual has energy 1
    assert si_sdr(e, s) == pytest.approx(0.0)
    e = np.array([3.0, 1.0, 0.0, 0.0])
    assert si_sdr(e, s) == pytest.approx(10 * np.log10(9.0))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), beta=st.floats(1e-3, 1e3))
def test_si_sdr_scale_invariant(seed, beta):
    rng = np.random.default_rng(seed)
    s, n = rng.standard_normal((2, 200))
    e = s + 0.5 * n
    assert si_sdr(beta * e, s) == pytest.approx(si_sdr(e, s), abs=1e-9)


def test_si_sdr_swap_depends_only_on_correlation(rng):
    # SI-SDR reduces to 10 log10(rho^2 / (1 - rho^2)) with rho the normalised correlation,
    # so swapping the arguments leaves it unchanged
    s, n = rng.standard_normal((2, 300))
    e = s + 0.7 * n
    rho = e @ s / np.linalg.norm(e) / np.linalg.norm(s)
    assert si_sdr(e, s) == pytest.approx(10 * np.log10(rho ** 2 / (1 - rho ** 2)), abs=1e-9)
    assert si_sdr(s, e) == pytest.approx(si_sdr(e, s), abs=1e-9)


def test_si_sdr_errors():
    with pytest.raises(ValueError, match="zero reference"):
        si_sdr(np.ones(5), np.zeros(5))
    with pytest.raises(ValueError):
        si_sdr(np.ones(5), np.ones(6))


def test_attenuation_examples(rng):
    x = rng.standard_normal(500)
    assert attenuation(x, x) == 0.0
    assert attenuation(x / 10, x) == pytest.approx(20.0)
    assert attenuation(np.zeros(500), x) == 120.0
    with pytest.raises(ValueError, match="zero input"):
        attenuation(x, np.zeros(500))
    with pytest.raises(ValueError):
        attenuation(x, x[:-1])


def test_report_bookkeeping():
    rows = [UtteranceResult(f"s{i}", i, 10.0 + i, 4.0, 6.0 + i, 3.0) for i in range(20)]
    rows.append(UtteranceResult("empty", 99, None, None, None, 30.0))
    rep = EvalReport("feature_mask_soft", "0:90,0:40", rows)
    agg = rep.aggregate()
    assert agg["num_scenes"] == 21
    assert agg["si_sdr_improvement"] == pytest.approx(np.mean([6.0 + i for i in range(20)]))
    assert agg["attenuation"] == pytest.approx((20 * 3.0 + 30.0) / 21)
    lines = rep.to_jsonl().splitlines()
    assert len(lines) == 22
    assert json.loads(lines[0])["seed"] == 0
    assert json.loads(lines[-1])["aggregate"]["num_scenes"] == 21
    table = rep.summary_table()
    assert "mean (21)" in table and table.count("\n") == 22


@pytest.fixture(scope="module")
def scene_dirs(tmp_path_factory):
    root = tmp_path_factory.mktemp("scenes")
    dirs = []
    for seed in range(3):
        spec, _ = noisy_single_scene(seed)
        dirs.append(write_scene(root / f"scene_{seed}", render(spec), seed=seed))
    return dirs


def test_identity_gives_zero_improvement(scene_dirs):
    rep = evaluate(scene_dirs, "identity")
    for u in rep.utterances:
        assert u.si_sdr_improvement == pytest.approx(0.0, abs=1e-9)
        assert u.attenuation == pytest.approx(0.0, abs=1e-9)


def test_evaluate_is_deterministic(scene_dirs):
    a = evaluate(scene_dirs, "feature_mask_soft").to_jsonl()
    b = evaluate(scene_dirs, "feature_mask_soft").to_jsonl()
    assert a == b


def test_oracle_irm_beats_unprocessed(scene_dirs):
    for u in evaluate(scene_dirs, "oracle_irm").utterances:
        assert u.si_sdr >= u.si_sdr_unprocessed


def test_fov_without_sources_reports_attenuation_only(scene_dirs):
    scene = read_scene(scene_dirs[0])
    az = scene.directions[0].azimuth_deg
    empty = FieldOfView((az + 120) % 360, (az + 180) % 360, 0, 40)
    u = evaluate_scene(scene, "feature_mask_hard", empty)
    assert u.si_sdr is None and u.attenuation > 10


def test_missing_fov_and_truth(tmp_path, scene_dirs):
    scene = read_scene(scene_dirs[0])
    with pytest.raises(ValueError, match="no FOV"):
        evaluate_scene(replace(scene, fov=None), "identity")
    with pytest.raises(FileNotFoundError):
        evaluate([tmp_path], "identity")
