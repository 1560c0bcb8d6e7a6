"""IPD, directional features over a look grid, and FOV / counter-FOV aggregation."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .array_model import ArrayGeometry, Direction, FieldOfView, LookGrid, classify_sectors, steering_phases
from .signal_core import Spectrogram

SILENT_MAG = 1e-10
LABELS = ("ipd", "d_theta", "fov_in", "fov_out", "fused", "fused_concat", "lps", "mask")


@dataclass(frozen=True)
class FeatureMap:
    values: np.ndarray  # (T, F) real
    label: str

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class FeatureBank:
    maps: np.ndarray  # (K, T, F)
    grid: LookGrid

    def __post_init__(self):
        if self.maps.shape[0] != self.grid.num_sectors:
            raise ValueError("one feature map per grid sector required")

    def __getitem__(self, k) -> FeatureMap:
        return FeatureMap(self.maps[k], "d_theta")

    def __len__(self):
        return self.maps.shape[0]


def _data(spec):
    return spec.data if isinstance(spec, Spectrogram) else np.asarray(spec)


def _check_same(a, b):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def ipd(spec_m1, spec_m2) -> FeatureMap:
    """Phase of m1 minus phase of m2, wrapped to (-pi, pi]; bins silent in either channel give 0."""
    y1, y2 = _data(spec_m1), _data(spec_m2)
    _check_same(y1, y2)
    diff = np.angle(y1) - np.angle(y2)
    phase = np.pi - np.mod(np.pi - diff, 2 * np.pi)  # wrap to (-pi, pi]
    phase[phase <= -np.pi] = np.pi  # mod can round up to exactly 2*pi
    silent = np.minimum(np.abs(y1), np.abs(y2)) < SILENT_MAG
    phase[silent] = 0.0
    return FeatureMap(phase, "ipd")


def _pair_ipds(specs, geometry: ArrayGeometry) -> np.ndarray:
    if not geometry.pairs:
        raise ValueError("geometry has no microphone pairs configured")
    if len(specs) != geometry.num_mics:
        raise ValueError(f"{len(specs)} spectrograms for a {geometry.num_mics}-mic array")
    return np.stack([ipd(specs[a], specs[b]).values for a, b in geometry.pairs])


def _bin_freqs(specs) -> np.ndarray:
    s = specs[0]
    return np.arange(_data(s).shape[1]) * s.sample_rate / s.fft_size


def _features(ipds: np.ndarray, steer: np.ndarray) -> np.ndarray:
    # mean_m cos(steer - ipd) = mean_m [cos s cos i + sin s sin i]; steer (K,P,F), ipds (P,T,F)
    P = ipds.shape[0]
    ci, si = np.cos(ipds), np.sin(ipds)
    cs, ss = np.cos(steer), np.sin(steer)
    out = np.einsum("kpf,ptf->ktf", cs, ci) + np.einsum("kpf,ptf->ktf", ss, si)
    return np.clip(out / P, -1.0, 1.0)


def directional_feature(specs, geometry: ArrayGeometry, direction: Direction) -> FeatureMap:
    """Average over pairs of cos(steering phase - IPD) for one look direction."""
    ipds = _pair_ipds(specs, geometry)
    steer = steering_phases(geometry, [direction], _bin_freqs(specs))
    return FeatureMap(_features(ipds, steer)[0], "d_theta")


def feature_bank(specs, geometry: ArrayGeometry, grid: LookGrid) -> FeatureBank:
    ipds = _pair_ipds(specs, geometry)
    steer = steering_phases(geometry, grid.look_directions, _bin_freqs(specs))
    return FeatureBank(_features(ipds, steer), grid)


def fov_aggregate(bank: FeatureBank, sector_set) -> FeatureMap:
    idx = np.asarray(sector_set, dtype=int).ravel()
    if idx.size == 0:
        raise ValueError("empty sector set: the FOV selects no sectors")
    return FeatureMap(bank.maps[idx].max(axis=0), "fov_in")


def fov_features(bank: FeatureBank, fov: FieldOfView) -> tuple[FeatureMap, FeatureMap]:
    """(inside, outside) aggregates; an empty outside set yields the constant -1 map."""
    f_in, f_out = classify_sectors(bank.grid, fov)
    d_in = fov_aggregate(bank, f_in)
    if f_out.size:
        d_out = FeatureMap(fov_aggregate(bank, f_out).values, "fov_out")
    else:
        d_out = FeatureMap(-np.ones_like(d_in.values), "fov_out")
    return d_in, d_out


def fuse_concat(d_in: FeatureMap, d_out: FeatureMap) -> FeatureMap:
    _check_same(d_in.values, d_out.values)
    return FeatureMap(np.concatenate([d_in.values, d_out.values], axis=1), "fused_concat")


def fuse_postprocess(d_in: FeatureMap, d_out: FeatureMap) -> FeatureMap:
    """Keep the inside feature where it beats the outside one, else -1 (ties suppressed)."""
    _check_same(d_in.values, d_out.values)
    return FeatureMap(np.where(d_in.values <= d_out.values, -1.0, d_in.values), "fused")


# ---------------------------------------------------------------- binary export
# Layout (little-endian): b"FMAP", uint32 version, uint32 rows, uint32 cols,
# uint16 label length, label bytes (utf-8), then rows*cols float32 row-major.

_MAGIC = b"FMAP"
_VERSION = 1


def write_feature_map(path, fmap: FeatureMap) -> None:
    vals = np.ascontiguousarray(fmap.values, dtype="<f4")
    if vals.ndim != 2:
        raise ValueError("feature maps are 2-D")
    label = fmap.label.encode()
    header = _MAGIC + struct.pack("<IIIH", _VERSION, vals.shape[0], vals.shape[1], len(label)) + label
    Path(path).write_bytes(header + vals.tobytes())


def read_feature_map(path) -> FeatureMap:
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise ValueError(f"{path}: not a feature map file")
    version, rows, cols, nlab = struct.unpack_from("<IIIH", raw, 4)
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported feature map version {version}")
    off = 4 + struct.calcsize("<IIIH")
    label = raw[off:off + nlab].decode()
    off += nlab
    if len(raw) - off != rows * cols * 4:
        raise ValueError(f"{path}: payload size does not match header {rows}x{cols}")
    vals = np.frombuffer(raw, dtype="<f4", offset=off).reshape(rows, cols)
    return FeatureMap(vals.astype(np.float64), label)
