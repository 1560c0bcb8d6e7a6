"""Inference-only forward pass of the mask + subband filter model, and its training loss.

Tensor names and GRU gate ordering (reset, update, new) follow the common
``weight_ih / weight_hh / bias_ih / bias_hh`` convention, so weights can be
exported from a deep-learning framework without reshuffling.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .metrics import si_sdr

LEAKY_SLOPE = 0.01
NORM_EPS = 1e-5
MASK_HEADS = ("mask_in_re", "mask_in_im", "mask_out_re", "mask_out_im")


@dataclass(frozen=True)
class ModelWeights:
    manifest: dict
    tensors: dict

    def __post_init__(self):
        m = self.manifest
        F, M = m["num_bins"], m["num_mics"]
        H1, E, H2 = m["mask_hidden"], m["embed_dim"], m["sub_hidden"]
        expected = expected_shapes(F, M, H1, E, H2)
        for name, shape in expected.items():
            if name not in self.tensors:
                raise ValueError(f"missing tensor {name}")
            if tuple(self.tensors[name].shape) != shape:
                raise ValueError(f"tensor {name} has shape {self.tensors[name].shape}, manifest implies {shape}")
        extra = set(self.tensors) - set(expected)
        if extra:
            raise ValueError(f"unexpected tensors {sorted(extra)}")

    def num_parameters(self) -> int:
        return int(sum(t.size for t in self.tensors.values()))


def expected_shapes(F, M, H1, E, H2) -> dict:
    shapes = {
        "mask_gru.weight_ih": (3 * H1, 3 * F),
        "mask_gru.weight_hh": (3 * H1, H1),
        "mask_gru.bias_ih": (3 * H1,),
        "mask_gru.bias_hh": (3 * H1,),
    }
    for head in MASK_HEADS:
        shapes[f"{head}.weight"] = (F, H1)
        shapes[f"{head}.bias"] = (F,)
    shapes.update({
        "norm.weight": (4 * M,),
        "norm.bias": (4 * M,),
        "proj.weight": (E, 4 * M),
        "proj.bias": (E,),
        "sub_gru.weight_ih": (3 * H2, E),
        "sub_gru.weight_hh": (3 * H2, H2),
        "sub_gru.bias_ih": (3 * H2,),
        "sub_gru.bias_hh": (3 * H2,),
        "filter_head.weight": (2 * M, H2),
        "filter_head.bias": (2 * M,),
    })
    return shapes


def init_weights(seed: int = 0, num_bins: int = 257, num_mics: int = 8, mask_hidden: int = 256,
                 embed_dim: int = 32, sub_hidden: int = 64) -> ModelWeights:
    """Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init via numpy's PCG64 generator.

    Linear layers use their input width as fan_in; GRU tensors use the hidden
    width. Values are rounded to float32 so saved files reload bit-exactly.
    """
    rng = np.random.default_rng(seed)
    manifest = {"version": 1, "num_bins": num_bins, "num_mics": num_mics, "mask_hidden": mask_hidden,
                "embed_dim": embed_dim, "sub_hidden": sub_hidden, "seed": seed}
    tensors = {}
    for name, shape in expected_shapes(num_bins, num_mics, mask_hidden, embed_dim, sub_hidden).items():
        if name == "norm.weight":
            t = np.ones(shape)
        elif name == "norm.bias":
            t = np.zeros(shape)
        else:
            if name.startswith("mask_gru"):
                fan_in = mask_hidden
            elif name.startswith("sub_gru"):
                fan_in = sub_hidden
            else:
                fan_in = expected_shapes(num_bins, num_mics, mask_hidden, embed_dim, sub_hidden)[
                    name.rsplit(".", 1)[0] + ".weight"][1]
            bound = 1.0 / np.sqrt(fan_in)
            t = rng.uniform(-bound, bound, size=shape)
        tensors[name] = t.astype(np.float32).astype(np.float64)
    return ModelWeights(manifest, tensors)


# ---------------------------------------------------------------- weight files
# Little-endian: b"FZNW", uint32 format version, uint32 manifest byte length,
# manifest JSON (utf-8) listing {name, shape, offset} per tensor, then the
# float32 tensor payload; offsets are relative to the payload start.

_MAGIC = b"FZNW"
_FORMAT_VERSION = 1


def save_weights(path, weights: ModelWeights) -> None:
    entries, blobs, offset = [], [], 0
    for name in sorted(weights.tensors):
        arr = np.ascontiguousarray(weights.tensors[name], dtype="<f4")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    manifest = dict(weights.manifest, tensors=entries, dtype="float32")
    mbytes = json.dumps(manifest, sort_keys=True).encode()
    Path(path).write_bytes(_MAGIC + struct.pack("<II", _FORMAT_VERSION, len(mbytes)) + mbytes + b"".join(blobs))


def load_weights(path) -> ModelWeights:
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise ValueError(f"{path}: not a model weight file")
    version, mlen = struct.unpack_from("<II", raw, 4)
    if version != _FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported weight format version {version}")
    manifest = json.loads(raw[12:12 + mlen].decode())
    payload = 12 + mlen
    tensors = {}
    for e in manifest.pop("tensors"):
        count = int(np.prod(e["shape"])) if e["shape"] else 1
        start = payload + e["offset"]
        if start + 4 * count > len(raw):
            raise ValueError(f"{path}: truncated tensor {e['name']}")
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=start)
        tensors[e["name"]] = arr.reshape(e["shape"]).astype(np.float64)
    manifest.pop("dtype", None)
    return ModelWeights(manifest, tensors)


# ---------------------------------------------------------------- layers

def gru(x: np.ndarray, w_ih, w_hh, b_ih, b_hh, h0=None) -> np.ndarray:
    """Unidirectional GRU over axis -2 of ``x`` (..., T, I); returns (..., T, H)."""
    H = w_hh.shape[1]
    gi = _linear(x, w_ih, b_ih)  # (..., T, 3H)
    h = np.zeros(x.shape[:-2] + (H,)) if h0 is None else h0
    out = np.empty(x.shape[:-1] + (H,))
    for t in range(x.shape[-2]):
        gh = h @ w_hh.T + b_hh
        i_r, i_z, i_n = np.split(gi[..., t, :], 3, axis=-1)
        h_r, h_z, h_n = np.split(gh, 3, axis=-1)
        r = expit(i_r + h_r)
        z = expit(i_z + h_z)
        n = np.tanh(i_n + r * h_n)
        h = (1.0 - z) * n + z * h
        out[..., t, :] = h
    return out


def _linear(x, weight, bias):
    # einsum keeps each output row's rounding independent of how many frames are
    # batched, so truncating the input reproduces a prefix of the output bit-exactly
    return np.einsum("...i,oi->...o", x, weight) + bias


def layer_norm(x, weight, bias, eps=NORM_EPS):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * weight + bias


def leaky_relu(x, slope=LEAKY_SLOPE):
    return np.where(x >= 0, x, slope * x)


@dataclass(frozen=True)
class ModelOutput:
    mask_in: np.ndarray  # (T, F) complex
    mask_out: np.ndarray  # (T, F) complex
    phi: np.ndarray  # (F, T, 4M) real
    embedding: np.ndarray  # (F, T, E)
    filters: np.ndarray  # (F, T, M) complex
    output: np.ndarray  # (T, F) complex


def _spec_stack(specs) -> np.ndarray:
    return np.stack([getattr(s, "data", s) for s in specs])  # (M, T, F)


def forward(specs, features: np.ndarray, weights: ModelWeights) -> ModelOutput:
    w = weights.tensors
    m = weights.manifest
    Y = _spec_stack(specs)
    M, T, F = Y.shape
    if M != m["num_mics"] or F != m["num_bins"]:
        raise ValueError(f"input has {M} mics x {F} bins; weights expect {m['num_mics']} x {m['num_bins']}")
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (T, 3 * F):
        raise ValueError(f"features must be (T, 3F) = ({T}, {3 * F}), got {features.shape}")

    # mask stage: GRU over frames, four linear heads
    h = gru(features, w["mask_gru.weight_ih"], w["mask_gru.weight_hh"], w["mask_gru.bias_ih"], w["mask_gru.bias_hh"])
    heads = {k: _linear(h, w[f"{k}.weight"], w[f"{k}.bias"]) for k in MASK_HEADS}
    mask_in = heads["mask_in_re"] + 1j * heads["mask_in_im"]
    mask_out = heads["mask_out_re"] + 1j * heads["mask_out_im"]
    y_in = mask_in[None] * Y
    y_out = mask_out[None] * Y

    # subband stage: per-frequency sequences share one GRU
    phi = np.concatenate([y_in.real, y_in.imag, y_out.real, y_out.imag], axis=0)  # (4M, T, F)
    phi = phi.transpose(2, 1, 0)  # (F, T, 4M)
    emb, W = subband_filters(phi, weights)
    out = np.einsum("ftm,mtf->tf", W.conj(), Y)
    return ModelOutput(mask_in, mask_out, phi, emb, W, out)


def subband_filters(phi: np.ndarray, weights: ModelWeights):
    """Embed each band's (T, 4M) sequence and run the shared cell; returns (embedding, W) with W (F, T, M)."""
    w = weights.tensors
    M = phi.shape[-1] // 4
    emb = leaky_relu(layer_norm(phi, w["norm.weight"], w["norm.bias"]) @ w["proj.weight"].T + w["proj.bias"])
    hs = gru(emb, w["sub_gru.weight_ih"], w["sub_gru.weight_hh"], w["sub_gru.bias_ih"], w["sub_gru.bias_hh"])
    filt = hs @ w["filter_head.weight"].T + w["filter_head.bias"]  # (F, T, 2M)
    return emb, filt[..., :M] + 1j * filt[..., M:]


def loss(est_wave, ref_wave, est_spec, ref_spec, lam: float = 1.0) -> float:
    """Negative SI-SDR plus lam times the mean absolute magnitude difference."""
    es = np.asarray(getattr(est_spec, "data", est_spec))
    rs = np.asarray(getattr(ref_spec, "data", ref_spec))
    if es.shape != rs.shape:
        raise ValueError(f"spectrum shape mismatch: {es.shape} vs {rs.shape}")
    return -si_sdr(est_wave, ref_wave) + lam * float(np.mean(np.abs(np.abs(es) - np.abs(rs))))
