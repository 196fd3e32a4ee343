"""Room acoustics: scenario sampling, image-source RIR synthesis, ATF probing.

Geometry conventions: rooms are shoebox-shaped with one corner at the
origin; the microphone array is linear, centered at `mic_center`, and its
axis is rotated by `tilt_phi` degrees in the horizontal plane. Source and
probe angles are measured relative to the (tilted) array axis; a source at
angle theta and radius R sits at mic_center + R*(cos, sin) in the plane of
the array, at the array's height.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from beamlab.errors import ConfigError
from beamlab.stft import StftConfig

SPEED_OF_SOUND = 343.0
KERNEL_HALF_WIDTH = 32  # fractional-delay windowed-sinc support, samples

NOISE_TYPES = ("stationary", "time_varying_noise", "speaker_switch", "babble_noise", "babble_voice")

# Reverberant tails are synthesized out to this multiple of T60 past the
# direct path; the truncated energy sits ~15 dB under the -60 dB decay point.
FULL_ORDER_TAIL_FACTOR = 1.25


@dataclass(frozen=True)
class ArrayGeometry:
    """Microphone positions (meters) relative to the array center."""

    mic_positions: np.ndarray
    reference_index: int = 0

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.mic_positions, dtype=np.float64))
        if pos.shape[0] < 2 or pos.shape[1] != 3:
            raise ValueError(f"need at least 2 microphones with 3-D positions, got {pos.shape}")
        if len(np.unique(pos, axis=0)) != len(pos):
            raise ValueError("microphone positions must be distinct")
        if not 0 <= self.reference_index < pos.shape[0]:
            raise ValueError(f"reference index {self.reference_index} out of range")
        object.__setattr__(self, "mic_positions", pos)

    @property
    def num_mics(self) -> int:
        return self.mic_positions.shape[0]

    @classmethod
    def default_linear(cls) -> "ArrayGeometry":
        # Non-uniform linear array, inter-mic spacings 3/5/7 cm, centered.
        along = np.array([0.0, 0.03, 0.08, 0.15])
        along -= along.mean()
        pos = np.zeros((4, 3))
        pos[:, 0] = along
        return cls(pos)

    def to_dict(self) -> dict:
        return {
            "mic_positions": self.mic_positions.tolist(),
            "reference_index": self.reference_index,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArrayGeometry":
        return cls(np.asarray(d["mic_positions"]), int(d["reference_index"]))


@dataclass(frozen=True)
class Scenario:
    """Room, array pose, and source/noise placement for one utterance."""

    Lx: float
    Ly: float
    Lz: float
    T60: float
    mic_center: tuple
    tilt_phi: float
    source_theta: float
    noise_theta: float
    source_R: float
    noise_R: float
    seed: int
    noise_type: str = "stationary"

    def __post_init__(self):
        if min(self.Lx, self.Ly, self.Lz) <= 0:
            raise ValueError("room dimensions must be positive")
        if self.T60 < 0:
            raise ValueError("reverberation time must be nonnegative")
        if min(self.source_R, self.noise_R) <= 0:
            raise ValueError("source radii must be positive")
        if self.noise_type not in NOISE_TYPES:
            raise ValueError(f"unknown noise type {self.noise_type!r}")
        object.__setattr__(self, "mic_center", tuple(float(v) for v in self.mic_center))

    def position_at(self, theta_deg: float, radius: float) -> np.ndarray:
        """Absolute position at an angle (degrees, relative to the array axis)."""
        ang = math.radians(self.tilt_phi + theta_deg)
        cx, cy, cz = self.mic_center
        return np.array([cx + radius * math.cos(ang), cy + radius * math.sin(ang), cz])

    def source_position(self) -> np.ndarray:
        return self.position_at(self.source_theta, self.source_R)

    def noise_position(self) -> np.ndarray:
        return self.position_at(self.noise_theta, self.noise_R)

    def mic_positions_abs(self, geometry: ArrayGeometry) -> np.ndarray:
        """Microphone positions in room coordinates, (M, 3)."""
        phi = math.radians(self.tilt_phi)
        rot = np.array(
            [
                [math.cos(phi), -math.sin(phi), 0.0],
                [math.sin(phi), math.cos(phi), 0.0],
                [0.0, 0.0, 1.0],
            ]
        )
        return np.asarray(self.mic_center) + geometry.mic_positions @ rot.T

    def contains(self, point: np.ndarray, margin: float = 0.0) -> bool:
        dims = np.array([self.Lx, self.Ly, self.Lz])
        p = np.asarray(point)
        return bool(np.all(p > margin) and np.all(p < dims - margin))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mic_center"] = list(self.mic_center)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ScenarioRanges:
    """Sampling ranges for random scenarios (meters/seconds/degrees)."""

    room_x: tuple = (6.0, 9.0)
    room_y: tuple = (6.0, 9.0)
    room_z: float = 3.0
    t60: tuple = (0.3, 0.5)
    anechoic: bool = False
    mic_wall_margin_x: float = 2.5
    mic_y_min: float = 0.5
    mic_y_margin: float = 2.5
    mic_z: float = 1.0
    tilt: tuple = (-45.0, 45.0)
    theta: tuple = (0.0, 180.0)
    min_angle_sep: float = 20.0
    radius_min: float = 1.8
    radius_cap: float = 2.2
    source_wall_margin: float = 0.5


@dataclass(frozen=True)
class RirSet:
    """Impulse responses from one source to every microphone, (M, T)."""

    filters: np.ndarray
    sample_rate: int
    reflection_order: object  # int or "full"

    def __post_init__(self):
        arr = np.atleast_2d(np.asarray(self.filters, dtype=np.float64))
        if not np.all(np.isfinite(arr)):
            raise ValueError("impulse responses contain non-finite values")
        object.__setattr__(self, "filters", arr)

    @property
    def num_mics(self) -> int:
        return self.filters.shape[0]


def sample_scenario(rng: np.random.Generator, ranges: ScenarioRanges | None = None,
                    noise_type: str = "stationary", max_tries: int = 10000) -> Scenario:
    """Draw a scenario satisfying all placement constraints.

    Draws are rejected and fully resampled until the radius interval is
    nonempty, source/noise angles are separated by at least
    `min_angle_sep`, and both positions lie strictly inside the room.
    Deterministic given the generator state.
    """
    ranges = ranges or ScenarioRanges()
    if ranges.radius_min > ranges.radius_cap:
        raise ConfigError(
            f"radius range empty: min {ranges.radius_min} exceeds cap {ranges.radius_cap}"
        )
    for _ in range(max_tries):
        lx = rng.uniform(*ranges.room_x)
        ly = rng.uniform(*ranges.room_y)
        t60 = 0.0 if ranges.anechoic else rng.uniform(*ranges.t60)
        x_lo, x_hi = ranges.mic_wall_margin_x, lx - ranges.mic_wall_margin_x
        y_lo, y_hi = ranges.mic_y_min, ly - ranges.mic_y_margin
        if x_lo >= x_hi or y_lo >= y_hi:
            continue
        cx = rng.uniform(x_lo, x_hi)
        cy = rng.uniform(y_lo, y_hi)
        tilt = rng.uniform(*ranges.tilt)
        m = ranges.source_wall_margin
        r_hi = min(cx - m, lx - cx - m, ly - cy - m, ranges.radius_cap)
        if r_hi < ranges.radius_min:
            continue
        radius = rng.uniform(ranges.radius_min, r_hi)
        th_s = rng.uniform(*ranges.theta)
        th_n = rng.uniform(*ranges.theta)
        if abs(th_s - th_n) < ranges.min_angle_sep:
            continue
        scenario = Scenario(
            Lx=lx, Ly=ly, Lz=ranges.room_z, T60=t60,
            mic_center=(cx, cy, ranges.mic_z), tilt_phi=tilt,
            source_theta=th_s, noise_theta=th_n,
            source_R=radius, noise_R=radius,
            seed=int(rng.integers(0, 2**63)), noise_type=noise_type,
        )
        if scenario.contains(scenario.source_position()) and scenario.contains(
            scenario.noise_position()
        ):
            return scenario
    raise ConfigError(f"no feasible scenario found in {max_tries} draws; ranges look infeasible")


def _delay_kernel_taps():
    return np.arange(-KERNEL_HALF_WIDTH + 1, KERNEL_HALF_WIDTH + 1)


def _reflection_coefficient(scenario: Scenario) -> float:
    """Uniform wall reflection coefficient from T60 via Sabine's formula."""
    if scenario.T60 == 0.0:
        return 0.0
    volume = scenario.Lx * scenario.Ly * scenario.Lz
    surface = 2.0 * (
        scenario.Lx * scenario.Ly + scenario.Lx * scenario.Lz + scenario.Ly * scenario.Lz
    )
    sabine = 24.0 * math.log(10.0) / SPEED_OF_SOUND
    absorption = sabine * volume / (surface * scenario.T60)
    if absorption > 1.0:
        raise ConfigError(
            f"T60={scenario.T60}s is unattainably short for this room "
            f"(Sabine absorption {absorption:.3f} > 1)"
        )
    return math.sqrt(1.0 - absorption)


def _axis_images(src_coord: float, room_len: float, m_range: np.ndarray):
    """Mirror coordinates and per-axis reflection counts for one axis."""
    coords = []
    counts = []
    for parity in (0, 1):
        base = (1 - 2 * parity) * src_coord
        coords.append(base + 2.0 * m_range * room_len)
        counts.append(np.abs(m_range - parity) + np.abs(m_range))
    return np.concatenate(coords), np.concatenate(counts)


def simulate_rir(scenario: Scenario, geometry: ArrayGeometry, src_position=None,
                 order="full", sample_rate: int | None = None) -> RirSet:
    """Image-source room impulse responses from a source to all microphones.

    order 0 keeps the direct path only; an integer keeps images with at
    most that many wall reflections; "full" keeps every image arriving
    within FULL_ORDER_TAIL_FACTOR * T60 of the direct sound. Fractional
    delays use a Hann-windowed sinc of half-width KERNEL_HALF_WIDTH.
    """
    fs = sample_rate or 16000
    if not (order == "full" or (isinstance(order, (int, np.integer)) and order >= 0)):
        raise ValueError(f"order must be 0, a positive integer, or 'full'; got {order!r}")
    src = np.asarray(
        scenario.source_position() if src_position is None else src_position, dtype=np.float64
    )
    mics = scenario.mic_positions_abs(geometry)
    if not scenario.contains(src):
        raise ValueError(f"source position {src} lies outside the room")
    for p in mics:
        if not scenario.contains(p):
            raise ValueError(f"microphone position {p} lies outside the room")

    beta = _reflection_coefficient(scenario)
    room = np.array([scenario.Lx, scenario.Ly, scenario.Lz])
    center = mics.mean(axis=0)
    direct = np.linalg.norm(src - mics, axis=1)
    aperture = np.linalg.norm(mics - center, axis=1).max()

    if order == 0 or beta == 0.0:
        positions = src[np.newaxis, :]
        counts = np.zeros(1)
        max_dist = direct.max()
    elif order == "full":
        max_dist = direct.max() + SPEED_OF_SOUND * FULL_ORDER_TAIL_FACTOR * scenario.T60
        reach = max_dist + aperture
        per_axis = [
            _axis_images(src[a], room[a], np.arange(-(int(reach // (2 * room[a])) + 1),
                                                    int(reach // (2 * room[a])) + 2))
            for a in range(3)
        ]
        (xs, ncx), (ys, ncy), (zs, ncz) = per_axis
        dist2 = (
            (xs[:, None, None] - center[0]) ** 2
            + (ys[None, :, None] - center[1]) ** 2
            + (zs[None, None, :] - center[2]) ** 2
        )
        keep = dist2 <= reach**2
        ix, iy, iz = np.nonzero(keep)
        positions = np.stack([xs[ix], ys[iy], zs[iz]], axis=1)
        counts = ncx[ix] + ncy[iy] + ncz[iz]
    elif isinstance(order, (int, np.integer)) and order > 0:
        half = int(order) // 2 + 1
        m_range = np.arange(-half, half + 1)
        per_axis = [_axis_images(src[a], room[a], m_range) for a in range(3)]
        (xs, ncx), (ys, ncy), (zs, ncz) = per_axis
        n = ncx[:, None, None] + ncy[None, :, None] + ncz[None, None, :]
        keep = n <= order
        ix, iy, iz = np.nonzero(keep)
        positions = np.stack([xs[ix], ys[iy], zs[iz]], axis=1)
        counts = ncx[ix] + ncy[iy] + ncz[iz]
        max_dist = np.linalg.norm(positions - center, axis=1).max()
    else:
        raise ValueError(f"order must be 0, a positive integer, or 'full'; got {order!r}")

    length = int(math.ceil((max_dist + 2 * aperture) / SPEED_OF_SOUND * fs)) + KERNEL_HALF_WIDTH + 2
    taps = _delay_kernel_taps()
    filters = np.zeros((geometry.num_mics, length))
    gains = beta**counts
    for mi in range(geometry.num_mics):
        d = np.linalg.norm(positions - mics[mi], axis=1)
        amp = gains / (4.0 * np.pi * d)
        delays = d / SPEED_OF_SOUND * fs
        idx0 = np.floor(delays).astype(np.int64)
        frac = delays - idx0
        for j in taps:
            t = j - frac
            kern = np.sinc(t) * 0.5 * (1.0 + np.cos(np.pi * t / KERNEL_HALF_WIDTH))
            kern[np.abs(t) >= KERNEL_HALF_WIDTH] = 0.0
            pos = idx0 + j
            valid = (pos >= 0) & (pos < length)
            filters[mi] += np.bincount(pos[valid], weights=(amp * kern)[valid], minlength=length)
    return RirSet(filters, fs, order)


def atf_grid(scenario: Scenario, geometry: ArrayGeometry, thetas, order=0,
             cfg: StftConfig | None = None, radius: float | None = None) -> np.ndarray:
    """Acoustic transfer functions for probe sources on the array's contour.

    Probes are placed at the scenario's source radius (override with
    `radius`), one per angle in `thetas` (degrees relative to the array
    axis). Returns a complex (M, K, len(thetas)) array where each column
    is the STFT-grid frequency response of the simulated impulse response.
    """
    cfg = cfg or StftConfig()
    r = scenario.source_R if radius is None else radius
    thetas = np.atleast_1d(np.asarray(thetas, dtype=np.float64))
    out = np.empty((geometry.num_mics, cfg.num_bins, thetas.size), dtype=np.complex128)
    for i, th in enumerate(thetas):
        probe = scenario.position_at(float(th), r)
        if not scenario.contains(probe):
            raise ValueError(f"probe at theta={th:.1f} deg, radius {r:.2f} m is outside the room")
        rir = simulate_rir(scenario, geometry, probe, order=order, sample_rate=cfg.sample_rate)
        out[:, :, i] = _folded_response(rir.filters, cfg.frame_len)
    return out


def _folded_response(filters: np.ndarray, frame_len: int) -> np.ndarray:
    """One-sided frequency response of (M, T) filters on the STFT bin grid."""
    m, t = filters.shape
    pad = (-t) % frame_len
    folded = np.pad(filters, ((0, 0), (0, pad))).reshape(m, -1, frame_len).sum(axis=1)
    return np.fft.rfft(folded, axis=-1)


def export_rir(rir: RirSet, path) -> None:
    """Write impulse responses for cross-checking against external tools.

    .wav paths get a float32 WAV (one channel per microphone); anything
    else is raw little-endian float32, channel-major.
    """
    from beamlab.audio import TimeSignal, write_wav

    path = str(path)
    if path.endswith(".wav"):
        write_wav(path, TimeSignal(rir.filters, rir.sample_rate), dtype="float32")
    else:
        with open(path, "wb") as f:
            f.write(np.ascontiguousarray(rir.filters.astype("<f4")).tobytes())
