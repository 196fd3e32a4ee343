"""Second-order statistics and steering-vector (RTF) estimation.

Covariances are per-bin Hermitian matrices stacked as (K, M, M). The RTF
estimate whitens the noisy covariance with the noise covariance's inverse
square root, takes the principal eigenvector, colors it back with the
square root, and normalizes by the reference microphone's entry.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from beamlab.stft import Spectrogram

# Relative eigenvalue floor applied before inverting the noise covariance.
EIG_FLOOR = 1e-10
HERMITIAN_TOL = 1e-10
DEGENERATE_REF_TOL = 1e-12


def _hermitian(mats: np.ndarray) -> np.ndarray:
    return mats.conj().swapaxes(-1, -2)


def _check_hermitian(mats: np.ndarray, what: str) -> np.ndarray:
    mats = np.asarray(mats, dtype=np.complex128)
    if mats.shape[-1] != mats.shape[-2]:
        raise ValueError(f"{what} must be square, got shape {mats.shape}")
    scale = max(np.abs(mats).max(), 1e-300)
    dev = np.abs(mats - _hermitian(mats)).max() / scale
    if dev > HERMITIAN_TOL:
        raise ValueError(f"{what} is not Hermitian (relative asymmetry {dev:.3e})")
    return 0.5 * (mats + _hermitian(mats))


@dataclass(frozen=True)
class CovarianceSet:
    """Noise and noisy per-bin covariances with their frame bookkeeping."""

    phi_nn: np.ndarray
    phi_yy: np.ndarray
    noise_frames: int
    total_frames: int

    def __post_init__(self):
        object.__setattr__(self, "phi_nn", _check_hermitian(self.phi_nn, "phi_nn"))
        object.__setattr__(self, "phi_yy", _check_hermitian(self.phi_yy, "phi_yy"))
        if not 0 < self.noise_frames < self.total_frames:
            raise ValueError(
                f"need 0 < noise frames ({self.noise_frames}) < total ({self.total_frames})"
            )


@dataclass(frozen=True)
class RtfVector:
    """Relative transfer functions, (K, M), reference entry exactly one.

    `degenerate` flags bins whose reference entry vanished; those bins
    carry the unit vector at the reference microphone instead.
    """

    h: np.ndarray
    reference_index: int
    degenerate: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.complex128)
        if not np.all(h[:, self.reference_index] == 1.0):
            raise ValueError("reference entries of the RTF must all equal 1")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "degenerate", np.asarray(self.degenerate, dtype=bool))


def _frame_average(data: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """Average of y y^H over frames [lo, hi) per bin; (K, M, M) Hermitian."""
    seg = data[:, :, lo:hi]
    cov = np.einsum("mkl,nkl->kmn", seg, seg.conj()) / (hi - lo)
    return 0.5 * (cov + _hermitian(cov))


def noise_covariance(spec: Spectrogram, noise_frames: int) -> np.ndarray:
    """Per-bin covariance of the noise-only head, frames [0, noise_frames)."""
    if not 1 <= noise_frames <= spec.num_frames:
        raise ValueError(
            f"noise frame count {noise_frames} must lie in [1, {spec.num_frames}]"
        )
    return _frame_average(spec.data, 0, noise_frames)


def noisy_covariance(spec: Spectrogram, noise_frames: int) -> np.ndarray:
    """Per-bin covariance over the speech-active frames [noise_frames, L)."""
    if not 0 <= noise_frames < spec.num_frames:
        raise ValueError(
            f"need noise frame count in [0, {spec.num_frames}), got {noise_frames}"
        )
    return _frame_average(spec.data, noise_frames, spec.num_frames)


def _eig_power(mats: np.ndarray, power: float, floor_rel: float) -> np.ndarray:
    mats = _check_hermitian(mats, "covariance")
    w, v = np.linalg.eigh(mats)
    top = w[..., -1]
    if np.any(top <= 0):
        raise ValueError("covariance has no positive eigenvalue; cannot take matrix power")
    w = np.maximum(w, floor_rel * top[..., None])
    return (v * (w**power)[..., None, :]) @ _hermitian(v)


def matrix_sqrt(phi: np.ndarray) -> np.ndarray:
    """Hermitian PSD square root via eigendecomposition."""
    return _eig_power(phi, 0.5, 0.0)


def matrix_inverse_sqrt(phi: np.ndarray) -> np.ndarray:
    """Hermitian inverse square root; eigenvalues are floored at
    EIG_FLOOR times the largest eigenvalue before inversion."""
    return _eig_power(phi, -0.5, EIG_FLOOR)


def whitened_covariance(phi_yy: np.ndarray, phi_nn: np.ndarray) -> np.ndarray:
    """Covariance of the noise-whitened signals, Hermitian PSD per bin."""
    inv_sqrt = matrix_inverse_sqrt(phi_nn)
    out = inv_sqrt @ np.asarray(phi_yy, dtype=np.complex128) @ _hermitian(inv_sqrt)
    return 0.5 * (out + _hermitian(out))


def estimate_rtf(phi_yy: np.ndarray, phi_nn: np.ndarray, reference_index: int = 0) -> RtfVector:
    """Steering-vector estimate from whitened-covariance eigenanalysis.

    Per bin: take the principal eigenvector of the whitened noisy
    covariance, color it back with the noise covariance's square root,
    and normalize by the reference entry. Bins with a vanishing reference
    entry are flagged and fall back to the unit vector at the reference.
    """
    phi_yy = np.asarray(phi_yy, dtype=np.complex128)
    phi_nn = np.asarray(phi_nn, dtype=np.complex128)
    squeeze = phi_yy.ndim == 2
    if squeeze:
        phi_yy = phi_yy[np.newaxis]
        phi_nn = phi_nn[np.newaxis]
    m = phi_yy.shape[-1]
    if m < 2:
        raise ValueError("RTF estimation needs at least 2 microphones")
    if not 0 <= reference_index < m:
        raise ValueError(f"reference index {reference_index} out of range for M={m}")

    whitened = whitened_covariance(phi_yy, phi_nn)
    _, vecs = np.linalg.eigh(whitened)
    principal = vecs[..., -1]  # (K, M)
    colored = (matrix_sqrt(phi_nn) @ principal[..., None])[..., 0]
    ref_vals = colored[:, reference_index]
    degenerate = np.abs(ref_vals) < DEGENERATE_REF_TOL
    safe = np.where(degenerate, 1.0, ref_vals)
    h = colored / safe[:, None]
    if np.any(degenerate):
        warnings.warn(
            f"{int(degenerate.sum())} bin(s) had a vanishing reference entry; "
            "falling back to the unit reference vector there"
        )
        h[degenerate] = 0.0
    h[:, reference_index] = 1.0
    return RtfVector(h, reference_index, degenerate)


def covariances_to_json(phi: np.ndarray) -> list:
    """Per-bin complex matrices as nested [re, im] pairs (debug export)."""
    phi = np.asarray(phi)
    return np.stack([phi.real, phi.imag], axis=-1).tolist()


def covariances_from_json(payload) -> np.ndarray:
    arr = np.asarray(payload, dtype=np.float64)
    return arr[..., 0] + 1j * arr[..., 1]
