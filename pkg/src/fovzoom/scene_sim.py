"""Desk-scale scene renderer: point sources, fractional delays, optional first-order room."""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .array_model import ArrayGeometry, Direction, FieldOfView, default_geometry, dump_geometry, load_geometry
from .signal_core import DEFAULT_SAMPLE_RATE, MultichannelWave, read_wav, write_wav

FD_TAPS = 64
SNR_RANGE = (-20.0, 60.0)
MAX_SOURCES = 5


@dataclass(frozen=True)
class Source:
    direction: Direction
    distance: float
    wave: np.ndarray = field(repr=False)
    gain_db: float = 0.0


@dataclass(frozen=True)
class Room:
    dimensions: tuple  # (Lx, Ly, Lz) metres
    beta: float  # first-order reflection coefficient
    array_center: tuple  # array origin inside the room

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("reflection coefficient must lie in [0, 1)")
        if any(d <= 0 for d in self.dimensions):
            raise ValueError("room dimensions must be positive")


@dataclass(frozen=True)
class SceneSpec:
    sources: tuple
    snr_db: float = 30.0
    noise_kind: str = "white"
    noise_wave: np.ndarray | None = field(default=None, repr=False)
    geometry: ArrayGeometry = field(default_factory=default_geometry)
    room: Room | None = None
    sample_rate: int = DEFAULT_SAMPLE_RATE
    noise_seed: int = 0
    fov: FieldOfView | None = None

    def __post_init__(self):
        if not 1 <= len(self.sources) <= MAX_SOURCES:
            raise ValueError(f"need 1 to {MAX_SOURCES} sources, got {len(self.sources)}")
        if not SNR_RANGE[0] <= self.snr_db <= SNR_RANGE[1]:
            raise ValueError(f"SNR {self.snr_db} dB outside {SNR_RANGE}")
        if self.noise_kind not in ("white", "wave"):
            raise ValueError(f"unknown noise kind {self.noise_kind!r}")
        if self.noise_kind == "wave" and self.noise_wave is None:
            raise ValueError("noise_kind 'wave' needs noise_wave")
        lengths = {len(s.wave) for s in self.sources}
        if len(lengths) != 1:
            raise ValueError("all source waves must share one length")
        r = self.geometry.radius
        for s in self.sources:
            if s.distance <= r:
                raise ValueError(f"source at {s.distance} m lies inside the array (radius {r:.3f} m)")

    @property
    def num_samples(self) -> int:
        return len(self.sources[0].wave)


@dataclass(frozen=True)
class SceneTruth:
    images: np.ndarray  # (S, M, N) per-source multichannel images
    noise: np.ndarray  # (M, N)
    mixture: np.ndarray  # (M, N)
    spec: SceneSpec

    @property
    def sample_rate(self) -> int:
        return self.spec.sample_rate

    def mixture_wave(self) -> MultichannelWave:
        return MultichannelWave(self.mixture, self.sample_rate)


# ---------------------------------------------------------------- rendering

def fractional_delay(x: np.ndarray, delay: float, taps: int = FD_TAPS) -> np.ndarray:
    """Delay ``x`` by ``delay`` samples with a Hann-windowed sinc; output keeps len(x)."""
    n0 = int(np.floor(delay))
    frac = delay - n0
    half = taps // 2
    k = np.arange(-half + 1, half + 1)  # taps centred on the fractional part
    arg = k - frac
    h = np.sinc(arg) * (0.5 + 0.5 * np.cos(np.pi * arg / half))
    conv = np.convolve(x, h)
    y = np.zeros(len(x))
    # y[n] = conv[n - n0 - k[0]]
    start = n0 + k[0]
    lo = max(0, start)
    hi = min(len(x), start + len(conv))
    if hi > lo:
        y[lo:hi] = conv[lo - start:hi - start]
    return y


def _point_image(wave, src_pos, mic_pos, c, fs, amp_scale=1.0):
    out = np.empty((len(mic_pos), len(wave)))
    for m, p in enumerate(mic_pos):
        r = np.linalg.norm(src_pos - p)
        out[m] = amp_scale / r * fractional_delay(wave, r / c * fs)
    return out


def _image_positions(src, room: Room):
    L = np.asarray(room.dimensions, dtype=np.float64)
    imgs = []
    for axis in range(3):
        lo = src.copy()
        lo[axis] = -src[axis]
        hi = src.copy()
        hi[axis] = 2 * L[axis] - src[axis]
        imgs += [lo, hi]
    return imgs


def render_source(source: Source, geometry: ArrayGeometry, sample_rate: int, room: Room | None = None) -> np.ndarray:
    gain = 10 ** (source.gain_db / 20)
    c = geometry.sound_speed
    u = source.direction.unit_vector()
    if room is None:
        src = source.distance * u
        return gain * _point_image(source.wave, src, geometry.mic_positions, c, sample_rate)
    centre = np.asarray(room.array_center, dtype=np.float64)
    L = np.asarray(room.dimensions, dtype=np.float64)
    mics = geometry.mic_positions + centre
    src = centre + source.distance * u
    if np.any(src <= 0) or np.any(src >= L) or np.any(mics <= 0) or np.any(mics >= L):
        raise ValueError("source or array lies outside the room")
    out = _point_image(source.wave, src, mics, c, sample_rate)
    for img in _image_positions(src, room):
        out += _point_image(source.wave, img, mics, c, sample_rate, room.beta)
    return gain * out


def render_plane_wave(signal, geometry: ArrayGeometry, direction: Direction, sample_rate: int,
                      bulk_delay: float = FD_TAPS) -> np.ndarray:
    """Far-field rendering: per-mic delay -u.r/c plus a common ``bulk_delay`` (samples)."""
    rel = -(geometry.mic_positions @ direction.unit_vector()) / geometry.sound_speed * sample_rate
    return np.stack([fractional_delay(np.asarray(signal, float), bulk_delay + d) for d in rel])


def render(spec: SceneSpec) -> SceneTruth:
    g = spec.geometry
    images = np.stack([render_source(s, g, spec.sample_rate, spec.room) for s in spec.sources])
    speech = images.sum(axis=0)
    M, N = speech.shape
    if spec.noise_kind == "white":
        raw = np.random.default_rng(spec.noise_seed).standard_normal((M, N))
    else:
        raw = np.asarray(spec.noise_wave, dtype=np.float64)
        if raw.ndim == 1:
            raw = np.broadcast_to(raw, (M, len(raw)))
        if raw.shape[0] != M or raw.shape[1] < N:
            raise ValueError(f"noise wave of shape {raw.shape} cannot cover {M}x{N}")
        raw = raw[:, :N].copy()
    e_sig = np.sum(speech[0] ** 2)
    e_noise = np.sum(raw[0] ** 2)
    if e_sig <= 0 or e_noise <= 0:
        raise ValueError("cannot set SNR with a silent source or silent noise at the reference mic")
    noise = raw * np.sqrt(e_sig / (e_noise * 10 ** (spec.snr_db / 10)))
    return SceneTruth(images, noise, speech + noise, spec)


def fov_reference(truth: SceneTruth, fov: FieldOfView, ref_mic: int = 0) -> np.ndarray:
    """Reference-mic sum of the images of sources inside the (closed) FOV box."""
    ref = np.zeros(truth.mixture.shape[1])
    for s, img in zip(truth.spec.sources, truth.images):
        if fov.contains(s.direction):
            ref = ref + img[ref_mic]
    return ref


# ---------------------------------------------------------------- sources & sampling

def synth_source(rng: np.random.Generator, num_samples: int, sample_rate: int = DEFAULT_SAMPLE_RATE,
                 rms: float = 0.05) -> np.ndarray:
    """Voiced, syllable-modulated harmonic signal standing in for speech."""
    t = np.arange(num_samples) / sample_rate
    f0_base = rng.uniform(90.0, 240.0)
    f0 = f0_base * (1 + 0.08 * np.sin(2 * np.pi * rng.uniform(0.3, 1.2) * t + rng.uniform(0, 2 * np.pi)))
    phase = 2 * np.pi * np.cumsum(f0) / sample_rate
    n_harm = int(min(5000.0, 0.45 * sample_rate) / (f0_base * 1.1))
    formants = rng.uniform([400, 1000, 2200], [900, 2000, 3200])
    x = np.zeros(num_samples)
    for h in range(1, n_harm + 1):
        fh = h * f0_base
        amp = sum(np.exp(-0.5 * ((fh - fc) / 180.0) ** 2) for fc in formants) + 0.3 / h
        x += amp * np.sin(h * phase + rng.uniform(0, 2 * np.pi))
    rate = rng.uniform(2.5, 5.0)
    env = np.clip(np.sin(2 * np.pi * rate * t + rng.uniform(0, 2 * np.pi)), 0, None) ** 0.7
    x = x * env + 0.02 * rng.standard_normal(num_samples) * env
    level = np.sqrt(np.mean(x ** 2))
    return x * (rms / level) if level > 0 else x  # a clip shorter than one envelope gap stays silent


@dataclass(frozen=True)
class SceneConstraints:
    num_sources: tuple = (1, 5)
    min_separation_deg: float = 40.0
    elevation_span: tuple = (0.0, 30.0)
    distance_range: tuple = (1.0, 3.0)
    snr_range: tuple = (10.0, 40.0)
    fov_width_range: tuple = (30.0, 90.0)
    fov_height_range: tuple = (20.0, 60.0)
    duration_s: float = 2.0
    sample_rate: int = DEFAULT_SAMPLE_RATE
    max_retries: int = 1000


def circular_distance(a, b):
    d = np.abs((np.asarray(a) - np.asarray(b)) % 360.0)
    return np.minimum(d, 360.0 - d)


def _sample_azimuths(rng, n, min_sep, retries):
    for _ in range(retries):
        az = rng.uniform(0.0, 360.0, size=n)
        if n < 2 or all(circular_distance(az[i], az[j]) >= min_sep
                        for i in range(n) for j in range(i + 1, n)):
            return az
    raise ValueError(f"could not place {n} sources {min_sep} deg apart in {retries} tries")


def sample_scene(rng_seed: int, constraints: SceneConstraints = SceneConstraints(),
                 geometry: ArrayGeometry | None = None) -> SceneSpec:
    """Random scene with a FOV centred on the first source and random width."""
    c = constraints
    rng = np.random.default_rng(rng_seed)
    n = int(rng.integers(c.num_sources[0], c.num_sources[1] + 1))
    az = _sample_azimuths(rng, n, c.min_separation_deg, c.max_retries)
    el = rng.uniform(*c.elevation_span, size=n)
    dist = rng.uniform(*c.distance_range, size=n)
    num_samples = int(round(c.duration_s * c.sample_rate))
    sources = tuple(
        Source(Direction(az[i], el[i]), float(dist[i]), synth_source(rng, num_samples, c.sample_rate))
        for i in range(n))
    snr = float(rng.uniform(*c.snr_range))
    width = rng.uniform(*c.fov_width_range)
    height = rng.uniform(*c.fov_height_range)
    lo_el = max(-90.0, el[0] - height / 2)
    hi_el = min(90.0, el[0] + height / 2)
    fov = FieldOfView((az[0] - width / 2) % 360.0, (az[0] + width / 2) % 360.0, lo_el, hi_el)
    return SceneSpec(sources, snr_db=snr, geometry=geometry or default_geometry(),
                     sample_rate=c.sample_rate, noise_seed=int(rng.integers(2 ** 31)), fov=fov)


# ---------------------------------------------------------------- files

def load_scene_spec(path, geometry: ArrayGeometry | None = None) -> SceneSpec:
    """Read a YAML scene description.

    Sources give ``azimuth``, ``elevation``, ``distance``, ``gain_db`` and either
    ``wav`` (mono file, relative to the scene file) or ``synth_seed``.
    """
    path = Path(path)
    with open(path) as fh:
        doc = yaml.safe_load(fh) or {}
    base = path.parent
    fs = int(doc.get("sample_rate", DEFAULT_SAMPLE_RATE))
    if geometry is None:
        geometry = load_geometry(base / doc["geometry"]) if "geometry" in doc else default_geometry()
    num_samples = int(round(float(doc.get("duration_s", 2.0)) * fs))
    sources = []
    for i, s in enumerate(doc.get("sources", [])):
        if "wav" in s:
            w = read_wav(base / s["wav"])
            wave = w.channels[0]
        else:
            wave = synth_source(np.random.default_rng(int(s.get("synth_seed", i))), num_samples, fs)
        sources.append(Source(Direction(float(s["azimuth"]), float(s.get("elevation", 0.0))),
                              float(s.get("distance", 2.0)), wave, float(s.get("gain_db", 0.0))))
    room = None
    if "room" in doc:
        r = doc["room"]
        room = Room(tuple(r["dimensions"]), float(r.get("beta", 0.5)), tuple(r["array_center"]))
    noise_kind = doc.get("noise", "white")
    noise_wave = None
    if noise_kind not in ("white",):
        noise_wave = read_wav(base / noise_kind).channels
        noise_kind = "wave"
    fov = FieldOfView.parse(doc["fov"]) if "fov" in doc else None
    return SceneSpec(tuple(sources), snr_db=float(doc.get("snr_db", 30.0)), noise_kind=noise_kind,
                     noise_wave=noise_wave, geometry=geometry, room=room, sample_rate=fs,
                     noise_seed=int(doc.get("noise_seed", 0)), fov=fov)


def atomic_write(path: Path, writer):
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=path.suffix + ".tmp")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_scene(out_dir, truth: SceneTruth, seed: int | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fs = truth.sample_rate
    atomic_write(out / "mixture.wav", lambda p: write_wav(p, MultichannelWave(truth.mixture, fs)))
    for k, img in enumerate(truth.images):
        atomic_write(out / f"src_{k}.wav", lambda p, img=img: write_wav(p, MultichannelWave(img, fs)))
    atomic_write(out / "noise.wav", lambda p: write_wav(p, MultichannelWave(truth.noise, fs)))
    spec = truth.spec
    manifest = {
        "sample_rate": fs,
        "seed": seed,
        "snr_db": spec.snr_db,
        "fov": str(spec.fov) if spec.fov is not None else None,
        "geometry": dump_geometry(spec.geometry),
        "sources": [
            {"file": f"src_{k}.wav", "azimuth": s.direction.azimuth_deg,
             "elevation": s.direction.elevation_deg, "distance": s.distance, "gain_db": s.gain_db}
            for k, s in enumerate(spec.sources)
        ],
    }
    text = json.dumps(manifest, indent=2, sort_keys=True)
    atomic_write(out / "truth.json", lambda p: Path(p).write_text(text))
    return out


@dataclass(frozen=True)
class LoadedScene:
    mixture: MultichannelWave
    images: np.ndarray  # (S, M, N)
    directions: tuple
    geometry: ArrayGeometry
    fov: FieldOfView | None
    seed: int | None

    def fov_reference(self, fov: FieldOfView, ref_mic: int = 0) -> np.ndarray:
        ref = np.zeros(self.mixture.num_samples)
        for d, img in zip(self.directions, self.images):
            if fov.contains(d):
                ref = ref + img[ref_mic]
        return ref


def read_scene(scene_dir) -> LoadedScene:
    d = Path(scene_dir)
    manifest_path = d / "truth.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"{d}: missing truth.json")
    man = json.loads(manifest_path.read_text())
    mixture = read_wav(d / "mixture.wav")
    imgs, dirs = [], []
    for s in man["sources"]:
        f = d / s["file"]
        if not f.exists():
            raise FileNotFoundError(f"{d}: missing {s['file']}")
        imgs.append(read_wav(f).channels)
        dirs.append(Direction(s["azimuth"], s["elevation"]))
    g = man["geometry"]
    geometry = ArrayGeometry(np.asarray(g["positions"]), tuple((a - 1, b - 1) for a, b in g["pairs"]),
                             g["sound_speed"])
    fov = FieldOfView.parse(man["fov"]) if man.get("fov") else None
    return LoadedScene(mixture, np.stack(imgs), tuple(dirs), geometry, fov, man.get("seed"))
