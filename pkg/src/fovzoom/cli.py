"""Command line: simulate, extract, zoom, evaluate.

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .array_model import FieldOfView
from .config import load_run_config, with_overrides
from .fov_features import FeatureMap, fuse_concat, fuse_postprocess, write_feature_map
from .metrics import evaluate
from .scene_sim import SceneConstraints, atomic_write, load_scene_spec, render, sample_scene, write_scene
from .signal_core import MultichannelWave, lps, read_wav, stft_multi, write_wav
from .zoom_engine import PIPELINES, fov_feature_pair, zoom


def _fov(text: str) -> FieldOfView:
    try:
        return FieldOfView.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _common(p):
    p.add_argument("--config", help="YAML run config (default: $FOVZOOM_CONFIG)")
    p.add_argument("--geometry", help="YAML array geometry file")
    p.add_argument("--h-res", type=float, dest="h_res_deg", help="horizontal sector width, degrees")
    p.add_argument("--v-res", type=float, dest="v_res_deg", help="vertical sector width, degrees")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fovzoom", description="Field-of-view audio zooming toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="render synthetic multichannel scenes")
    _common(p)
    p.add_argument("--scene", help="YAML scene description")
    p.add_argument("--num-scenes", type=int, help="sample this many random scenes instead")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("extract", help="write FOV feature maps for a recording")
    _common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--fov", type=_fov, required=True, help="tl:th,ad:au in degrees")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("zoom", help="zoom a multichannel recording to a FOV")
    _common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--fov", type=_fov, required=True, help="tl:th,ad:au in degrees")
    p.add_argument("--pipeline", choices=PIPELINES)
    p.add_argument("--weights", help="model weight file (model pipeline)")
    p.add_argument("--target", help="clean reference WAV (oracle pipelines)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="score a pipeline on simulated scenes")
    _common(p)
    p.add_argument("--scenes", required=True, help="scene directory or a directory of scene directories")
    p.add_argument("--pipeline", choices=PIPELINES)
    p.add_argument("--fov", type=_fov, help="override the FOV stored with each scene")
    p.add_argument("--weights")
    p.add_argument("--out", help="JSONL report path (default: <scenes>/report_<pipeline>.jsonl)")
    return parser


def _run_config(args):
    cfg = load_run_config(args.config)
    return with_overrides(cfg, geometry_path=Path(args.geometry) if args.geometry else None,
                          h_res_deg=args.h_res_deg, v_res_deg=args.v_res_deg,
                          pipeline=getattr(args, "pipeline", None), seed=getattr(args, "seed", None))


def cmd_simulate(args) -> int:
    cfg = _run_config(args)
    out = Path(args.out_dir)
    geometry = cfg.geometry()
    if args.scene:
        spec = load_scene_spec(args.scene, geometry if args.geometry else None)
        if args.seed is not None:
            spec = replace(spec, noise_seed=args.seed)
        write_scene(out, render(spec), seed=args.seed)
        print(f"wrote {out}")
        return 0
    n = args.num_scenes or 1
    for i in range(n):
        seed = cfg.seed + i
        spec = sample_scene(seed, SceneConstraints(), geometry)
        write_scene(out / f"scene_{i:03d}", render(spec), seed=seed)
    print(f"wrote {n} scenes under {out}")
    return 0


def cmd_extract(args) -> int:
    cfg = _run_config(args)
    wave = read_wav(args.input)
    specs = stft_multi(wave, cfg.zoom.stft)
    d_in, d_out = fov_feature_pair(specs, cfg.geometry(), args.fov, cfg.zoom)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    maps = {
        "d_in": d_in,
        "d_out": d_out,
        "fused_concat": fuse_concat(d_in, d_out),
        "fused_post": fuse_postprocess(d_in, d_out),
        "lps": FeatureMap(lps(specs[cfg.zoom.ref_mic]), "lps"),
    }
    for name, fmap in maps.items():
        atomic_write(out / f"{name}.fmap", lambda p, fmap=fmap: write_feature_map(p, fmap))
    print(f"wrote {len(maps)} feature maps ({d_in.shape[0]} frames x {d_in.shape[1]} bins) to {out}")
    return 0


def _weights(path):
    if not path:
        return None
    from .subband_net import load_weights
    return load_weights(path)


def cmd_zoom(args) -> int:
    cfg = _run_config(args)
    wave = read_wav(args.input)
    target = read_wav(args.target).channels[0] if args.target else None
    out = zoom(wave, cfg.geometry(), args.fov, cfg.pipeline, cfg.zoom, target=target, weights=_weights(args.weights))
    path = Path(args.out)
    atomic_write(path, lambda p: write_wav(p, MultichannelWave(out[None, :], wave.sample_rate)))
    print(f"wrote {path} ({len(out)} samples, pipeline {cfg.pipeline})")
    return 0


def _scene_dirs(root: Path):
    if (root / "truth.json").exists():
        return [root]
    dirs = sorted(d for d in root.iterdir() if (d / "truth.json").exists())
    if not dirs:
        raise FileNotFoundError(f"{root}: no scene directories with truth.json")
    return dirs


def cmd_evaluate(args) -> int:
    cfg = _run_config(args)
    root = Path(args.scenes)
    report = evaluate(_scene_dirs(root), cfg.pipeline, args.fov, cfg.zoom, weights=_weights(args.weights))
    out = Path(args.out) if args.out else root / f"report_{cfg.pipeline}.jsonl"
    text = report.to_jsonl()
    atomic_write(out, lambda p: Path(p).write_text(text))
    print(report.summary_table())
    print(f"report: {out}")
    return 0


COMMANDS = {"simulate": cmd_simulate, "extract": cmd_extract, "zoom": cmd_zoom, "evaluate": cmd_evaluate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate" and not (args.scene or args.num_scenes):
        parser.error("simulate needs --scene or --num-scenes")
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"fovzoom {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
