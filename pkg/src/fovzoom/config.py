"""Global YAML run configuration; CLI flags override file values."""
from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .array_model import ArrayGeometry, default_geometry, load_geometry
from .signal_core import StftConfig
from .zoom_engine import ZoomConfig

CONFIG_ENV = "FOVZOOM_CONFIG"


@dataclass(frozen=True)
class RunConfig:
    geometry_path: Path | None = None
    zoom: ZoomConfig = field(default_factory=ZoomConfig)
    pipeline: str = "feature_mask_soft"
    seed: int = 0
    output_dir: Path | None = None

    def geometry(self) -> ArrayGeometry:
        return load_geometry(self.geometry_path) if self.geometry_path else default_geometry()


def load_run_config(path=None) -> RunConfig:
    """Load ``path``, else $FOVZOOM_CONFIG, else built-in defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return RunConfig()
    path = Path(path)
    with open(path) as fh:
        doc = yaml.safe_load(fh) or {}
    stft = StftConfig(**doc.get("stft", {}))
    grid = doc.get("grid", {})
    mask = doc.get("mask", {})
    span = grid.get("elevation_span", (0.0, 90.0))
    zc = ZoomConfig(
        stft=stft,
        h_res_deg=float(grid.get("h_res_deg", 20.0)),
        v_res_deg=grid.get("v_res_deg", 10.0),
        elevation_span=tuple(span) if span is not None else None,
        g_min=float(mask.get("g_min", 0.01)),
        gamma=float(mask.get("gamma", 5.0)),
        ref_mic=int(doc.get("ref_mic", 1)) - 1,
    )
    geom = doc.get("geometry")
    return RunConfig(
        geometry_path=(path.parent / geom) if geom else None,
        zoom=zc,
        pipeline=doc.get("pipeline", "feature_mask_soft"),
        seed=int(doc.get("seed", 0)),
        output_dir=Path(doc["output_dir"]) if doc.get("output_dir") else None,
    )


def with_overrides(cfg: RunConfig, **kw) -> RunConfig:
    """Apply non-None overrides; zoom-level keys are routed into ZoomConfig."""
    zoom_keys = {"h_res_deg", "v_res_deg", "g_min", "gamma"}
    zkw = {k: v for k, v in kw.items() if k in zoom_keys and v is not None}
    rkw = {k: v for k, v in kw.items() if k not in zoom_keys and v is not None}
    if zkw:
        rkw["zoom"] = replace(cfg.zoom, **zkw)
    return replace(cfg, **rkw)
