"""Array geometry, far-field steering phases, look-direction grid and FOV sector split."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

SOUND_SPEED = 343.0

# Mic numbering in these tables is 1-based, as in the paper's figures.
PAIRS_8MIC = ((1, 4), (2, 6), (1, 7), (2, 7), (4, 6), (3, 7))
MICS_3MIC = (1, 2, 7)
PAIRS_3MIC = ((1, 2), (1, 7), (2, 7))


def _unit(azimuth_deg, elevation_deg):
    az = np.deg2rad(azimuth_deg)
    el = np.deg2rad(elevation_deg)
    return np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=-1)


@dataclass(frozen=True)
class Direction:
    azimuth_deg: float
    elevation_deg: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.elevation_deg <= 90.0:
            raise ValueError(f"elevation {self.elevation_deg} outside [-90, 90]")
        object.__setattr__(self, "azimuth_deg", float(self.azimuth_deg) % 360.0)

    def unit_vector(self) -> np.ndarray:
        """Unit vector pointing from the array towards the source."""
        return _unit(self.azimuth_deg, self.elevation_deg)

    def reversed(self) -> "Direction":
        return Direction(self.azimuth_deg + 180.0, -self.elevation_deg)


@dataclass(frozen=True)
class ArrayGeometry:
    mic_positions: np.ndarray  # (M, 3), metres
    pairs: tuple  # 0-based (m1, m2) tuples
    sound_speed: float = SOUND_SPEED

    def __post_init__(self):
        pos = np.asarray(self.mic_positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] not in (2, 3):
            raise ValueError("mic_positions must be (M, 3)")
        if pos.shape[1] == 2:
            pos = np.hstack([pos, np.zeros((len(pos), 1))])
        pairs = tuple((int(a), int(b)) for a, b in self.pairs)
        for a, b in pairs:
            if not (0 <= a < len(pos) and 0 <= b < len(pos)) or a == b:
                raise ValueError(f"invalid mic pair ({a}, {b}) for {len(pos)} mics")
            if np.linalg.norm(pos[a] - pos[b]) <= 0:
                raise ValueError(f"mics {a} and {b} coincide")
        if self.sound_speed <= 0:
            raise ValueError("sound_speed must be positive")
        object.__setattr__(self, "mic_positions", pos)
        object.__setattr__(self, "pairs", pairs)

    @property
    def num_mics(self) -> int:
        return len(self.mic_positions)

    @property
    def radius(self) -> float:
        centre = self.mic_positions.mean(axis=0)
        return float(np.max(np.linalg.norm(self.mic_positions - centre, axis=1)))

    def pair_vectors(self) -> np.ndarray:
        """(P, 3) vectors pointing from m2 to m1 (spacing times unit axis)."""
        pos = self.mic_positions
        return np.array([pos[a] - pos[b] for a, b in self.pairs])

    def pair_spacing(self) -> np.ndarray:
        return np.linalg.norm(self.pair_vectors(), axis=1)

    def subset(self, mics, pairs) -> "ArrayGeometry":
        """Keep the 0-based ``mics``; ``pairs`` refer to the original numbering."""
        mics = list(mics)
        remap = {m: i for i, m in enumerate(mics)}
        return ArrayGeometry(self.mic_positions[mics],
                             tuple((remap[a], remap[b]) for a, b in pairs),
                             self.sound_speed)


def circular_array(num_mics=8, radius=0.05, pairs=PAIRS_8MIC, sound_speed=SOUND_SPEED) -> ArrayGeometry:
    """Uniform circular array in the horizontal plane, mic 1 at azimuth 0.

    ``pairs`` use 1-based numbering.
    """
    az = 2 * np.pi * np.arange(num_mics) / num_mics
    pos = np.stack([radius * np.cos(az), radius * np.sin(az), np.zeros(num_mics)], axis=1)
    return ArrayGeometry(pos, tuple((a - 1, b - 1) for a, b in pairs), sound_speed)


def default_geometry(mode: str = "8mic") -> ArrayGeometry:
    uca = circular_array()
    if mode == "8mic":
        return uca
    if mode == "3mic":
        return uca.subset([m - 1 for m in MICS_3MIC], [(a - 1, b - 1) for a, b in PAIRS_3MIC])
    raise ValueError(f"unknown array mode {mode!r}")


def load_geometry(path) -> ArrayGeometry:
    """Read a YAML geometry file (positions in metres, 1-based pairs)."""
    with open(Path(path)) as fh:
        doc = yaml.safe_load(fh)
    try:
        pos = doc["positions"]
        pairs = [(int(a) - 1, int(b) - 1) for a, b in doc["pairs"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: bad geometry file ({exc})") from exc
    return ArrayGeometry(np.asarray(pos, dtype=np.float64), tuple(pairs),
                         float(doc.get("sound_speed", SOUND_SPEED)))


def dump_geometry(geometry: ArrayGeometry) -> dict:
    return {
        "sound_speed": geometry.sound_speed,
        "positions": geometry.mic_positions.tolist(),
        "pairs": [[a + 1, b + 1] for a, b in geometry.pairs],
    }


# ---------------------------------------------------------------- steering

def steering_phases(geometry: ArrayGeometry, directions, freqs_hz) -> np.ndarray:
    """Vectorised steering phases, shape (D, P, F).

    ``directions`` is a sequence of Direction; ``freqs_hz`` an array of F frequencies.
    """
    u = np.array([d.unit_vector() for d in directions]).reshape(-1, 3)
    proj = u @ geometry.pair_vectors().T  # (D, P) = spacing * cos(angle to pair axis)
    freqs = np.asarray(freqs_hz, dtype=np.float64)
    return 2 * np.pi * proj[:, :, None] * freqs[None, None, :] / geometry.sound_speed


def steering_phase(geometry: ArrayGeometry, pair_index: int, direction: Direction, freq_hz: float) -> float:
    if not 0 <= pair_index < len(geometry.pairs):
        raise IndexError(f"pair index {pair_index} out of range ({len(geometry.pairs)} pairs)")
    if freq_hz < 0:
        raise ValueError("freq_hz must be non-negative")
    a, b = geometry.pairs[pair_index]
    p = geometry.mic_positions[a] - geometry.mic_positions[b]
    return float(2 * np.pi * freq_hz * np.dot(direction.unit_vector(), p) / geometry.sound_speed)


def steering_vector(geometry: ArrayGeometry, direction: Direction, freqs_hz, ref_mic: int = 0) -> np.ndarray:
    """Per-mic plane-wave response relative to ``ref_mic``, shape (F, M)."""
    u = direction.unit_vector()
    rel = (geometry.mic_positions - geometry.mic_positions[ref_mic]) @ u  # metres
    freqs = np.asarray(freqs_hz, dtype=np.float64)
    return np.exp(2j * np.pi * freqs[:, None] * rel[None, :] / geometry.sound_speed)


# ---------------------------------------------------------------- look grid

@dataclass(frozen=True)
class LookGrid:
    horizontal_resolution_deg: float
    vertical_resolution_deg: float | None
    az_bounds: np.ndarray  # (K, 2) half-open [lo, hi)
    el_bounds: np.ndarray  # (K, 2)
    el_span: tuple | None
    look_directions: tuple = field(repr=False)

    @property
    def num_sectors(self) -> int:
        return len(self.look_directions)

    def permuted(self, order) -> "LookGrid":
        order = np.asarray(order)
        return LookGrid(self.horizontal_resolution_deg, self.vertical_resolution_deg,
                        self.az_bounds[order], self.el_bounds[order], self.el_span,
                        tuple(self.look_directions[i] for i in order))


def _divides(span, res):
    n = span / res
    return abs(n - round(n)) < 1e-9 and round(n) >= 1


def build_look_grid(h_res_deg: float, v_res_deg: float | None = None, elevation_span=None) -> LookGrid:
    """Partition azimuth (and optionally elevation) into sectors with bisector look directions.

    Without ``elevation_span`` the grid is azimuth-only: every sector spans all
    elevations and its look direction sits in the horizontal plane.
    """
    if h_res_deg <= 0 or not _divides(360.0, h_res_deg):
        raise ValueError(f"horizontal resolution {h_res_deg} does not divide 360")
    n_az = round(360.0 / h_res_deg)
    az_lo = np.arange(n_az) * h_res_deg
    if elevation_span is None:
        el_intervals = [(-90.0, 90.0)]
        el_looks = [0.0]
        v_res_deg = None
    else:
        lo, hi = map(float, elevation_span)
        if not -90.0 <= lo < hi <= 90.0:
            raise ValueError(f"bad elevation span {elevation_span}")
        if v_res_deg is None or v_res_deg <= 0 or not _divides(hi - lo, v_res_deg):
            raise ValueError(f"vertical resolution {v_res_deg} does not divide span {hi - lo}")
        n_el = round((hi - lo) / v_res_deg)
        el_intervals = [(lo + i * v_res_deg, lo + (i + 1) * v_res_deg) for i in range(n_el)]
        el_looks = [lo + (i + 0.5) * v_res_deg for i in range(n_el)]
        elevation_span = (lo, hi)
    az_b, el_b, looks = [], [], []
    for (elo, ehi), el in zip(el_intervals, el_looks):
        for a in az_lo:
            az_b.append((a, a + h_res_deg))
            el_b.append((elo, ehi))
            looks.append(Direction(a + h_res_deg / 2, el))
    return LookGrid(float(h_res_deg), v_res_deg, np.array(az_b), np.array(el_b),
                    elevation_span, tuple(looks))


@dataclass(frozen=True)
class FieldOfView:
    theta_low_deg: float
    theta_high_deg: float
    alpha_down_deg: float = -90.0
    alpha_up_deg: float = 90.0

    def __post_init__(self):
        if not -90.0 <= self.alpha_down_deg <= self.alpha_up_deg <= 90.0:
            raise ValueError(f"bad vertical FOV [{self.alpha_down_deg}, {self.alpha_up_deg}]")

    @property
    def azimuth_span(self) -> float:
        """Width in (0, 360]; equal endpoints mean the full circle."""
        span = (self.theta_high_deg - self.theta_low_deg) % 360.0
        return 360.0 if span == 0 else span

    @property
    def full_circle(self) -> bool:
        return self.azimuth_span >= 360.0

    def center(self) -> Direction:
        az = self.theta_low_deg + self.azimuth_span / 2
        return Direction(az, (self.alpha_down_deg + self.alpha_up_deg) / 2)

    def contains(self, direction: Direction) -> bool:
        """Closed-box membership for point directions (boundaries included)."""
        if not self.alpha_down_deg <= direction.elevation_deg <= self.alpha_up_deg:
            return False
        if self.full_circle:
            return True
        offset = (direction.azimuth_deg - self.theta_low_deg) % 360.0
        return offset <= self.azimuth_span + 1e-9

    @classmethod
    def parse(cls, text: str) -> "FieldOfView":
        """Parse ``"tl:th,ad:au"`` (degrees); the elevation part is optional."""
        try:
            parts = text.split(",")
            if len(parts) > 2:
                raise ValueError
            tl, th = (float(v) for v in parts[0].split(":"))
            if len(parts) == 2:
                ad, au = (float(v) for v in parts[1].split(":"))
            else:
                ad, au = -90.0, 90.0
        except ValueError:
            raise ValueError(f"malformed FOV {text!r}; expected 'tl:th,ad:au' in degrees") from None
        return cls(tl, th, ad, au)

    def __str__(self):
        return f"{self.theta_low_deg:g}:{self.theta_high_deg:g},{self.alpha_down_deg:g}:{self.alpha_up_deg:g}"


def _az_overlap(lo, hi, fov: FieldOfView) -> bool:
    # Both intervals half-open; rotate so the FOV starts at 0.
    if fov.full_circle:
        return True
    s = (lo - fov.theta_low_deg) % 360.0
    width = hi - lo
    return s < fov.azimuth_span or s + width > 360.0


def _el_overlap(lo, hi, fov: FieldOfView, top: float) -> bool:
    a, b = fov.alpha_down_deg, fov.alpha_up_deg
    hi_closed = hi >= top
    if a == b:
        return lo <= a < hi or (hi_closed and a == hi)
    return a < hi and lo < b


def classify_sectors(grid: LookGrid, fov: FieldOfView) -> tuple[np.ndarray, np.ndarray]:
    """Split sector indices into (inside, outside) the FOV box."""
    top = grid.el_bounds[:, 1].max()
    inside = np.array([
        _az_overlap(az[0], az[1], fov) and _el_overlap(el[0], el[1], fov, top)
        for az, el in zip(grid.az_bounds, grid.el_bounds)
    ], dtype=bool)
    idx = np.arange(grid.num_sectors)
    return idx[inside], idx[~inside]
