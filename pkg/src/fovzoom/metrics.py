"""SI-SDR, attenuation and scene-directory evaluation."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .scene_sim import read_scene
from .zoom_engine import ZoomConfig, zoom

SI_SDR_CAP = 60.0
ATTENUATION_CAP = 120.0


def si_sdr(est, ref) -> float:
    est = np.asarray(est, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if est.shape != ref.shape:
        raise ValueError(f"length mismatch: {est.shape} vs {ref.shape}")
    ref_energy = np.dot(ref, ref)
    if ref_energy <= 0:
        raise ValueError("SI-SDR is undefined for a zero reference")
    alpha = np.dot(est, ref) / ref_energy
    target = alpha * ref
    residual = target - est
    num = np.dot(target, target)
    den = np.dot(residual, residual)
    if den <= num * 10 ** (-SI_SDR_CAP / 10):
        return SI_SDR_CAP
    if num <= den * 10 ** (-SI_SDR_CAP / 10):
        return -SI_SDR_CAP
    return float(10 * np.log10(num / den))


def attenuation(out, in_ref) -> float:
    out = np.asarray(out, dtype=np.float64)
    in_ref = np.asarray(in_ref, dtype=np.float64)
    if out.shape != in_ref.shape:
        raise ValueError(f"length mismatch: {out.shape} vs {in_ref.shape}")
    e_in = np.dot(in_ref, in_ref)
    if e_in <= 0:
        raise ValueError("attenuation is undefined for a zero input")
    e_out = np.dot(out, out)
    if e_out <= e_in * 10 ** (-ATTENUATION_CAP / 10):
        return ATTENUATION_CAP
    return float(10 * np.log10(e_in / e_out))


@dataclass
class UtteranceResult:
    scene: str
    seed: int | None
    si_sdr: float | None
    si_sdr_unprocessed: float | None
    si_sdr_improvement: float | None
    attenuation: float


@dataclass
class EvalReport:
    pipeline: str
    fov: str | None
    utterances: list = field(default_factory=list)

    def aggregate(self) -> dict:
        def mean(key):
            vals = [getattr(u, key) for u in self.utterances if getattr(u, key) is not None]
            return float(np.mean(vals)) if vals else None
        return {
            "pipeline": self.pipeline,
            "fov": self.fov,
            "num_scenes": len(self.utterances),
            "si_sdr": mean("si_sdr"),
            "si_sdr_unprocessed": mean("si_sdr_unprocessed"),
            "si_sdr_improvement": mean("si_sdr_improvement"),
            "attenuation": mean("attenuation"),
        }

    def to_jsonl(self) -> str:
        lines = [json.dumps({"pipeline": self.pipeline, "fov": self.fov, **asdict(u)}, sort_keys=True)
                 for u in self.utterances]
        lines.append(json.dumps({"aggregate": self.aggregate()}, sort_keys=True))
        return "\n".join(lines) + "\n"

    def summary_table(self) -> str:
        rows = [f"{'scene':<24}{'SI-SDR':>10}{'unproc':>10}{'improv':>10}{'atten':>10}"]
        fmt = lambda v: f"{v:10.2f}" if v is not None else f"{'-':>10}"  # noqa: E731
        for u in self.utterances:
            rows.append(f"{u.scene:<24}{fmt(u.si_sdr)}{fmt(u.si_sdr_unprocessed)}"
                        f"{fmt(u.si_sdr_improvement)}{fmt(u.attenuation)}")
        a = self.aggregate()
        rows.append(f"{'mean (' + str(a['num_scenes']) + ')':<24}{fmt(a['si_sdr'])}"
                    f"{fmt(a['si_sdr_unprocessed'])}{fmt(a['si_sdr_improvement'])}{fmt(a['attenuation'])}")
        return "\n".join(rows)


def evaluate_scene(scene, pipeline: str, fov=None, cfg=None, name: str = "scene", **zoom_kwargs) -> UtteranceResult:
    """Score one loaded scene; ``fov`` defaults to the FOV stored with the scene."""
    fov = fov or scene.fov
    if fov is None:
        raise ValueError(f"{name}: no FOV given and none stored with the scene")
    cfg = cfg or ZoomConfig()
    ref = scene.fov_reference(fov, cfg.ref_mic)
    mix_ref = scene.mixture.channels[cfg.ref_mic]
    out = zoom(scene.mixture, scene.geometry, fov, pipeline, cfg, target=ref, **zoom_kwargs)
    att = attenuation(out, mix_ref)
    if np.dot(ref, ref) > 0:
        proc = si_sdr(out, ref)
        unproc = si_sdr(mix_ref, ref)
        return UtteranceResult(name, scene.seed, proc, unproc, proc - unproc, att)
    return UtteranceResult(name, scene.seed, None, None, None, att)


def evaluate(scene_dirs, pipeline: str, fov=None, cfg=None, **zoom_kwargs) -> EvalReport:
    report = EvalReport(pipeline, str(fov) if fov is not None else None)
    for d in scene_dirs:
        scene = read_scene(d)
        report.utterances.append(evaluate_scene(scene, pipeline, fov, cfg, name=Path(d).name, **zoom_kwargs))
    return report
