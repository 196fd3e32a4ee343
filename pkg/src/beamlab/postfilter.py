"""Single-channel log-spectral-amplitude postfilter.

Gain per TF cell: G = xi/(1+xi) * exp(E1(xi)/2), with xi the
decision-directed a-priori SNR. Evaluating the exponential-integral
correction at xi (the estimator's operating point) keeps G a strictly
increasing function of xi alone, so raising the noise PSD can never raise
a gain; the data enters through the a-posteriori SNR in the
decision-directed recursion. Gains are clamped to [floor, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import exp1

from beamlab.stft import Spectrogram

XI_FLOOR = 1e-12  # keeps E1 finite; maps to a gain around 7e-7, far below any floor

NOISE_PSD_SOURCES = ("oracle_head", "external")


@dataclass(frozen=True)
class PostfilterConfig:
    alpha_dd: float = 0.98
    gain_floor_db: float = -18.0
    noise_psd_source: str = "oracle_head"

    def __post_init__(self):
        if not 0.0 <= self.alpha_dd < 1.0:
            raise ValueError(f"decision-directed smoothing must be in [0, 1), got {self.alpha_dd}")
        if self.gain_floor_db >= 0.0:
            raise ValueError(f"gain floor must be below 0 dB, got {self.gain_floor_db}")
        if self.noise_psd_source not in NOISE_PSD_SOURCES:
            raise ValueError(f"unknown noise PSD source {self.noise_psd_source!r}")

    @property
    def gain_floor(self) -> float:
        return 10.0 ** (self.gain_floor_db / 20.0)


def _gain_of_xi(xi: np.ndarray) -> np.ndarray:
    xi = np.maximum(xi, XI_FLOOR)
    return xi / (1.0 + xi) * np.exp(0.5 * exp1(xi))


def compute_gains(power: np.ndarray, noise_psd: np.ndarray, cfg: PostfilterConfig) -> np.ndarray:
    """Per-TF gains in [floor, 1] for a (K, L) power spectrogram.

    Bins with zero noise PSD get unit gain (infinite a-priori SNR limit).
    The decision-directed recursion runs forward over frames; state is
    local to this call.
    """
    power = np.asarray(power, dtype=np.float64)
    noise_psd = np.asarray(noise_psd, dtype=np.float64).reshape(-1)
    if noise_psd.shape[0] != power.shape[0]:
        raise ValueError(f"noise PSD has {noise_psd.shape[0]} bins, power has {power.shape[0]}")
    if np.any(noise_psd < 0):
        raise ValueError("noise PSD must be nonnegative")

    k, l = power.shape
    gains = np.ones((k, l))
    active = noise_psd > 0
    if not np.any(active):
        return gains
    psd = noise_psd[active]
    alpha = cfg.alpha_dd
    floor = cfg.gain_floor
    prev_snr = None  # G^2 * gamma of the previous frame
    for i in range(l):
        gamma = power[active, i] / psd
        excess = np.maximum(gamma - 1.0, 0.0)
        if prev_snr is None:
            xi = alpha + (1.0 - alpha) * excess
        else:
            xi = alpha * prev_snr + (1.0 - alpha) * excess
        g = np.clip(_gain_of_xi(xi), floor, 1.0)
        gains[active, i] = g
        prev_snr = g * g * gamma
    return gains


def lsa_enhance(spec: Spectrogram, noise_psd: np.ndarray,
                cfg: PostfilterConfig | None = None) -> Spectrogram:
    """Apply the postfilter to a single-channel spectrogram.

    noise_psd: per-bin noise power, shape (K,). DC/Nyquist bins stay real
    because the gains are real.
    """
    cfg = cfg or PostfilterConfig()
    if spec.num_channels != 1:
        raise ValueError(f"postfilter input must be single-channel, got {spec.num_channels}")
    x = spec.data[0]
    gains = compute_gains(np.abs(x) ** 2, noise_psd, cfg)
    return Spectrogram((gains * x)[np.newaxis], spec.config)


def head_noise_psd(spec: Spectrogram, noise_frames: int) -> np.ndarray:
    """Per-bin noise power from the noise-only head of a 1-channel spectrogram."""
    if not 1 <= noise_frames <= spec.num_frames:
        raise ValueError(f"noise frame count {noise_frames} out of range")
    return np.mean(np.abs(spec.data[0, :, :noise_frames]) ** 2, axis=1)
