"""Short-time Fourier analysis/synthesis and the real/imag packing convention.

Layout convention used everywhere downstream: spectrogram arrays are
(M, K, L) = (channels, frequency bins, frames), one-sided spectra with
K = frame_len/2 + 1. Only frames fully inside the signal are produced;
reconstruction is exact wherever the window lattice has support.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from beamlab.audio import TimeSignal
from beamlab.errors import ConstraintError, ShapeError

# Imaginary parts at DC/Nyquist above this are treated as invariant violations.
REALNESS_TOL = 1e-9

_WINDOWS = ("sqrt_hann", "hann")


def _periodic_hann(n: int) -> np.ndarray:
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(n) / n))


@dataclass(frozen=True)
class StftConfig:
    """Frame/hop/window settings shared by analysis and synthesis."""

    frame_len: int = 512
    hop: int = 128
    window: str = "sqrt_hann"
    sample_rate: int = 16000

    def __post_init__(self):
        if self.hop <= 0 or self.frame_len <= 0:
            raise ValueError("frame_len and hop must be positive")
        if self.hop > self.frame_len:
            raise ValueError(f"hop {self.hop} exceeds frame length {self.frame_len}")
        if self.frame_len % self.hop != 0:
            raise ValueError(f"hop {self.hop} must divide frame length {self.frame_len}")
        if self.window not in _WINDOWS:
            raise ValueError(f"unknown window {self.window!r}; choose from {_WINDOWS}")
        dev = cola_deviation(self)
        if dev > 1e-12:
            raise ValueError(f"window pair violates constant overlap-add (deviation {dev:.3e})")

    @property
    def num_bins(self) -> int:
        return self.frame_len // 2 + 1

    def analysis_window(self) -> np.ndarray:
        h = _periodic_hann(self.frame_len)
        return np.sqrt(h) if self.window == "sqrt_hann" else h

    def synthesis_window(self) -> np.ndarray:
        # Both supported pairs are self-paired.
        return self.analysis_window()

    def num_frames(self, num_samples: int) -> int:
        if num_samples < self.frame_len:
            return 0
        return (num_samples - self.frame_len) // self.hop + 1


def cola_deviation(cfg: StftConfig) -> float:
    """Max relative deviation of the overlap-added window product from constant."""
    h = _periodic_hann(cfg.frame_len)
    prod = np.sqrt(h) * np.sqrt(h) if cfg.window == "sqrt_hann" else h * h
    folded = prod.reshape(cfg.frame_len // cfg.hop, cfg.hop).sum(axis=0)
    mean = folded.mean()
    return float(np.abs(folded - mean).max() / mean)


@dataclass(frozen=True)
class Spectrogram:
    """Complex (channels, bins, frames) STFT data plus its config."""

    data: np.ndarray
    config: StftConfig = field(default_factory=StftConfig)

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.complex128)
        if arr.ndim != 3:
            raise ShapeError(f"spectrogram data must be (M, K, L), got shape {arr.shape}")
        if arr.shape[1] != self.config.num_bins:
            raise ShapeError(
                f"spectrogram has {arr.shape[1]} bins, config implies {self.config.num_bins}"
            )
        object.__setattr__(self, "data", arr)

    @property
    def num_channels(self) -> int:
        return self.data.shape[0]

    @property
    def num_bins(self) -> int:
        return self.data.shape[1]

    @property
    def num_frames(self) -> int:
        return self.data.shape[2]


def analyze(signal: TimeSignal, cfg: StftConfig | None = None) -> Spectrogram:
    """Forward STFT of a (possibly multichannel) signal.

    Only frames that lie fully inside the signal are produced, so
    L = (T - frame_len) // hop + 1. DC and Nyquist bins of real input are
    exactly real by construction of the one-sided transform.
    """
    cfg = cfg or StftConfig()
    if signal.sample_rate != cfg.sample_rate:
        raise ValueError(
            f"signal rate {signal.sample_rate} does not match config rate {cfg.sample_rate}"
        )
    t = signal.num_samples
    if t < cfg.frame_len:
        raise ValueError(f"signal of {t} samples is shorter than one frame ({cfg.frame_len})")
    win = cfg.analysis_window()
    frames = np.lib.stride_tricks.sliding_window_view(signal.data, cfg.frame_len, axis=1)
    frames = frames[:, :: cfg.hop, :]  # (M, L, N)
    spec = np.fft.rfft(frames * win, axis=-1)  # (M, L, K)
    return Spectrogram(np.ascontiguousarray(spec.transpose(0, 2, 1)), cfg)


def synthesize(spec: Spectrogram) -> TimeSignal:
    """Inverse STFT via windowed overlap-add.

    DC and Nyquist bins must be real within REALNESS_TOL (their imaginary
    parts are zeroed); larger violations signal a malformed mask or weight
    set and raise ConstraintError.
    """
    cfg = spec.config
    data = spec.data
    worst = max(np.abs(data[:, 0, :].imag).max(initial=0.0),
                np.abs(data[:, -1, :].imag).max(initial=0.0))
    if worst > REALNESS_TOL:
        raise ConstraintError(
            f"DC/Nyquist bins have imaginary parts up to {worst:.3e} (tolerance {REALNESS_TOL})"
        )
    data = data.copy()
    data[:, 0, :] = data[:, 0, :].real
    data[:, -1, :] = data[:, -1, :].real

    m, _, l = data.shape
    n, hop = cfg.frame_len, cfg.hop
    w_s = cfg.synthesis_window()
    w_prod = cfg.analysis_window() * w_s
    frames = np.fft.irfft(data.transpose(0, 2, 1), n=n, axis=-1) * w_s  # (M, L, N)

    total = (l - 1) * hop + n
    out = np.zeros((m, total))
    den = np.zeros(total)
    for i in range(l):
        out[:, i * hop : i * hop + n] += frames[:, i, :]
        den[i * hop : i * hop + n] += w_prod
    # Samples with (near-)zero window support cannot be recovered; interior
    # samples divide by the exact overlap-add constant.
    floor = 1e-12 * den.max()
    out /= np.maximum(den, floor)
    out[:, den <= floor] = 0.0
    return TimeSignal(out, cfg.sample_rate)


def pack_real_imag(spec: Spectrogram) -> np.ndarray:
    """Stack real parts over imaginary parts along the frequency axis.

    Returns a real (M, 2K, L) array: rows [0, K) are real parts, rows
    [K, 2K) imaginary parts.
    """
    return np.concatenate([spec.data.real, spec.data.imag], axis=1)


def unpack_real_imag(packed: np.ndarray, cfg: StftConfig | None = None) -> Spectrogram:
    """Inverse of pack_real_imag; exact on any valid packed array."""
    packed = np.asarray(packed)
    if packed.ndim != 3:
        raise ShapeError(f"packed array must be (M, 2K, L), got shape {packed.shape}")
    if packed.shape[1] % 2 != 0:
        raise ShapeError(f"packed frequency axis must be even, got {packed.shape[1]}")
    k = packed.shape[1] // 2
    if cfg is None:
        frame_len = 2 * (k - 1)
        hop = frame_len // 4 if frame_len % 4 == 0 else frame_len // 2
        cfg = StftConfig(frame_len=frame_len, hop=hop)
    return Spectrogram(packed[:, :k, :] + 1j * packed[:, k:, :], cfg)
