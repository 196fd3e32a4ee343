"""Beamformer weight solvers, two-stage application, and weight interchange.

Weights are (K, M) complex arrays, one M-vector per frequency bin. The
interchange file format (binary, little-endian) is:

    magic "EXBF" | u32 version=1 | u32 M | u32 K | u32 L | u32 flags
    w1: M*K complex64 (re, im) pairs, bin-major (k outer, m inner)
    w2 (if flags bit 0): K*L complex64 pairs, frame-major (l outer, k inner)

A JSON mirror with the same field names is accepted for debugging.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from beamlab.errors import ConstraintError, ShapeError
from beamlab.stft import Spectrogram

MAGIC = b"EXBF"
VERSION = 1
FLAG_HAS_MASK = 1

# Solver outputs carry O(eps) imaginary dust at DC/Nyquist; anything beyond
# this is a malformed weight set. Files are allowed a looser 1e-6.
W1_REALNESS_TOL = 1e-9
FILE_REALNESS_TOL = 1e-6
MASK_MAGNITUDE_TOL = 1e-6

PROVENANCES = ("mvdr", "mpdr", "learned")


@dataclass(frozen=True)
class StageWeights:
    """Time-invariant weights w1 (K, M) plus an optional mask w2 (K, L)."""

    w1: np.ndarray
    w2: np.ndarray | None = None
    sample_rate: int = 16000
    provenance: str = "learned"
    realness_tol: float = field(default=W1_REALNESS_TOL, repr=False)

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        w1 = np.asarray(self.w1, dtype=np.complex128)
        if w1.ndim != 2:
            raise ShapeError(f"w1 must be (K, M), got shape {w1.shape}")
        w1 = _project_edge_bins(w1, self.realness_tol)
        object.__setattr__(self, "w1", w1)
        if self.w2 is not None:
            w2 = np.asarray(self.w2, dtype=np.complex128)
            if w2.ndim != 2 or w2.shape[0] != w1.shape[0]:
                raise ShapeError(
                    f"w2 must be (K, L) with K={w1.shape[0]}, got shape {w2.shape}"
                )
            if self.provenance == "learned":
                worst = np.abs(w2).max(initial=0.0)
                if worst > 1.0 + MASK_MAGNITUDE_TOL:
                    raise ConstraintError(
                        f"learned mask magnitude {worst:.6f} exceeds the unit bound"
                    )
            object.__setattr__(self, "w2", w2)

    @property
    def num_bins(self) -> int:
        return self.w1.shape[0]

    @property
    def num_mics(self) -> int:
        return self.w1.shape[1]

    @property
    def num_frames(self) -> int:
        return 0 if self.w2 is None else self.w2.shape[1]


def _project_edge_bins(w1: np.ndarray, tol: float) -> np.ndarray:
    """Zero the DC/Nyquist imaginary parts, rejecting violations beyond tol."""
    worst = max(np.abs(w1[0].imag).max(initial=0.0), np.abs(w1[-1].imag).max(initial=0.0))
    if worst > tol:
        raise ConstraintError(
            f"DC/Nyquist weights must be real: imaginary part {worst:.3e} exceeds {tol}"
        )
    out = w1.copy()
    out[0] = out[0].real
    out[-1] = out[-1].real
    return out


def _hermitian_solve(mats: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """Solve phi @ x = v per bin via Cholesky factorization."""
    try:
        chol = np.linalg.cholesky(mats)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"covariance is singular or indefinite: {exc}") from exc
    z = np.linalg.solve(chol, vecs[..., None])
    return np.linalg.solve(chol.conj().swapaxes(-1, -2), z)[..., 0]


def _solve_distortionless(phi: np.ndarray, rtf) -> np.ndarray:
    from beamlab.covariance import RtfVector  # local import to avoid a cycle

    h = rtf.h if isinstance(rtf, RtfVector) else np.asarray(rtf, dtype=np.complex128)
    phi = np.asarray(phi, dtype=np.complex128)
    squeeze = h.ndim == 1
    if squeeze:
        h = h[np.newaxis]
        phi = phi[np.newaxis]
    if phi.shape[:-1] != h.shape or phi.shape[-1] != h.shape[-1]:
        raise ShapeError(f"covariance {phi.shape} does not match steering vectors {h.shape}")
    num = _hermitian_solve(phi, h)
    denom = np.einsum("km,km->k", h.conj(), num)
    # Keeping the complex denominator makes w^H h equal one identically.
    w = num / denom[:, None]
    return w[0] if squeeze else w


def mvdr_weights(phi_nn: np.ndarray, rtf) -> np.ndarray:
    """Distortionless weights minimizing output noise power per bin."""
    return _solve_distortionless(phi_nn, rtf)


def mpdr_weights(phi_yy: np.ndarray, rtf) -> np.ndarray:
    """Distortionless weights minimizing total output power per bin."""
    return _solve_distortionless(phi_yy, rtf)


def apply_stage1(w1, spec: Spectrogram) -> Spectrogram:
    """Beamform: single-channel output with x(l,k) = w1(k)^H y(l,k)."""
    if isinstance(w1, StageWeights):
        w1 = w1.w1
    w1 = np.asarray(w1, dtype=np.complex128)
    m, k, _ = spec.data.shape
    if w1.shape != (k, m):
        raise ShapeError(f"w1 shape {w1.shape} does not match spectrogram (K={k}, M={m})")
    _project_edge_bins(w1, W1_REALNESS_TOL)
    out = np.einsum("km,mkl->kl", w1.conj(), spec.data)
    return Spectrogram(out[np.newaxis], spec.config)


def apply_stage2(w2: np.ndarray, spec: Spectrogram) -> Spectrogram:
    """Mask: elementwise conjugate multiply on a single-channel spectrogram."""
    w2 = np.asarray(w2, dtype=np.complex128)
    if spec.num_channels != 1:
        raise ShapeError(f"stage-2 input must be single-channel, got {spec.num_channels}")
    if w2.shape != spec.data.shape[1:]:
        raise ShapeError(f"mask shape {w2.shape} does not match spectrogram {spec.data.shape[1:]}")
    return Spectrogram(w2.conj()[np.newaxis] * spec.data, spec.config)


def save_weights(weights: StageWeights, path) -> None:
    """Write the binary interchange file (a JSON mirror for .json paths)."""
    path = str(path)
    if path.endswith(".json"):
        _save_json(weights, path)
        return
    flags = FLAG_HAS_MASK if weights.w2 is not None else 0
    header = MAGIC + struct.pack(
        "<IIIII", VERSION, weights.num_mics, weights.num_bins, weights.num_frames, flags
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(weights.w1.astype(np.complex64)).tobytes())
        if weights.w2 is not None:
            f.write(np.ascontiguousarray(weights.w2.T.astype(np.complex64)).tobytes())


def load_weights(path, sample_rate: int = 16000) -> StageWeights:
    """Read and validate an interchange file (binary or JSON mirror)."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:1] == b"{":
        return _load_json(blob, sample_rate)
    if blob[:4] != MAGIC:
        raise ValueError(f"{path}: bad magic {blob[:4]!r}, expected {MAGIC!r}")
    if len(blob) < 24:
        raise ValueError(f"{path}: truncated header")
    version, m, k, l, flags = struct.unpack("<IIIII", blob[4:24])
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    expected = 24 + 8 * m * k + (8 * k * l if flags & FLAG_HAS_MASK else 0)
    if len(blob) != expected:
        raise ValueError(
            f"{path}: file size {len(blob)} does not match header (expected {expected})"
        )
    w1 = np.frombuffer(blob, dtype="<c8", count=m * k, offset=24).reshape(k, m)
    w2 = None
    if flags & FLAG_HAS_MASK:
        w2 = np.frombuffer(blob, dtype="<c8", count=k * l, offset=24 + 8 * m * k)
        w2 = w2.reshape(l, k).T
    return StageWeights(
        w1=w1.astype(np.complex128), w2=None if w2 is None else w2.astype(np.complex128),
        sample_rate=sample_rate, provenance="learned", realness_tol=FILE_REALNESS_TOL,
    )


def _save_json(weights: StageWeights, path: str) -> None:
    def pairs(arr):
        return np.stack([arr.real, arr.imag], axis=-1).astype(np.float32).tolist()

    doc = {
        "magic": "EXBF",
        "version": VERSION,
        "M": weights.num_mics,
        "K": weights.num_bins,
        "L": weights.num_frames,
        "flags": FLAG_HAS_MASK if weights.w2 is not None else 0,
        "w1": pairs(weights.w1),
    }
    if weights.w2 is not None:
        doc["w2"] = pairs(weights.w2.T)
    with open(path, "w") as f:
        json.dump(doc, f)


def _load_json(blob: bytes, sample_rate: int) -> StageWeights:
    doc = json.loads(blob.decode())
    if doc.get("magic") != "EXBF" or doc.get("version") != VERSION:
        raise ValueError("JSON weight file has a bad magic/version")
    w1 = np.asarray(doc["w1"], dtype=np.float64)
    if w1.shape != (doc["K"], doc["M"], 2):
        raise ValueError(f"w1 shape {w1.shape} disagrees with header K/M")
    w1 = w1[..., 0] + 1j * w1[..., 1]
    w2 = None
    if doc.get("flags", 0) & FLAG_HAS_MASK:
        w2 = np.asarray(doc["w2"], dtype=np.float64)
        if w2.shape != (doc["L"], doc["K"], 2):
            raise ValueError(f"w2 shape {w2.shape} disagrees with header L/K")
        w2 = (w2[..., 0] + 1j * w2[..., 1]).T
    return StageWeights(w1=w1, w2=w2, sample_rate=sample_rate, provenance="learned",
                        realness_tol=FILE_REALNESS_TOL)
