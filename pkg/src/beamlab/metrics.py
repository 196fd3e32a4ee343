"""Evaluation quantities: SI-SDR, noise reduction, and training-style losses."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from beamlab.audio import TimeSignal
from beamlab.stft import StftConfig, analyze, synthesize
from beamlab.beamforming import apply_stage1

CLAMP_DB = 60.0

DEFAULT_BETA_MAE = 0.9
DEFAULT_BETA_REG = 0.1


def _as_mono(x) -> np.ndarray:
    if isinstance(x, TimeSignal):
        if x.num_channels != 1:
            raise ValueError(f"expected a mono signal, got {x.num_channels} channels")
        return x.channel(0)
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D array, got shape {arr.shape}")
    return arr


def si_sdr(ref, est, clamp_db: float = CLAMP_DB) -> float:
    """Scale-invariant SDR in dB: project est onto ref, compare energies.

    The estimate is decomposed into a scaled copy of the reference plus a
    residual; the returned ratio is invariant to any nonzero gain on the
    estimate. Clamped to +-clamp_db for finite reporting.
    """
    ref = _as_mono(ref)
    est = _as_mono(est)
    if ref.shape != est.shape:
        raise ValueError(f"length mismatch: ref {ref.shape} vs est {est.shape}")
    ref_pow = float(np.dot(ref, ref))
    if ref_pow == 0.0:
        raise ValueError("reference signal is zero; SI-SDR is undefined")
    alpha = float(np.dot(est, ref)) / ref_pow
    target = alpha * ref
    residual = est - target
    p_target = float(np.dot(target, target))
    p_residual = float(np.dot(residual, residual))
    if p_target == 0.0:
        return -clamp_db
    if p_residual == 0.0:
        return clamp_db
    return float(np.clip(10.0 * np.log10(p_target / p_residual), -clamp_db, clamp_db))


def nr(est, head_s: float = 0.5, tail_s: float = 3.5, sample_rate: int | None = None,
       clamp_db: float = CLAMP_DB) -> float:
    """Noise reduction in dB: variance of the speech segment over the head.

    The head (first `head_s` seconds) contains only noise; the speech
    segment is the subsequent `tail_s` seconds. A silent head clamps to
    +clamp_db with a warning.
    """
    if isinstance(est, TimeSignal):
        rate = est.sample_rate
        data = _as_mono(est)
    else:
        if sample_rate is None:
            raise ValueError("sample_rate is required for raw arrays")
        rate = sample_rate
        data = _as_mono(est)
    head = int(round(head_s * rate))
    tail = int(round(tail_s * rate))
    if data.size < head + tail:
        raise ValueError(f"signal of {data.size} samples is shorter than head+tail ({head + tail})")
    v_noise = float(np.var(data[:head]))
    v_speech = float(np.var(data[head : head + tail]))
    if v_noise == 0.0:
        warnings.warn("noise head has zero variance; clamping NR to +60 dB")
        return clamp_db
    if v_speech == 0.0:
        return -clamp_db
    return float(np.clip(10.0 * np.log10(v_speech / v_noise), -clamp_db, clamp_db))


def losses(x_ref, x_hat, w1=None, x_clean=None, cfg: StftConfig | None = None,
           beta_mae: float = DEFAULT_BETA_MAE, beta_reg: float = DEFAULT_BETA_REG):
    """Time-domain MAE plus the distortionless regularization term.

    mae = mean |x_ref - x_hat|. When `w1` (K, M weights) and `x_clean`
    (multichannel clean TimeSignal) are given, reg is the MAE between
    x_ref and the resynthesized beamformed clean signal; otherwise reg and
    the combined loss are None. The weights must sum to one.
    """
    if abs(beta_mae + beta_reg - 1.0) > 1e-12:
        raise ValueError(f"loss weights must sum to 1, got {beta_mae} + {beta_reg}")
    ref = _as_mono(x_ref)
    est = _as_mono(x_hat)
    if ref.shape != est.shape:
        raise ValueError(f"length mismatch: ref {ref.shape} vs estimate {est.shape}")
    mae = float(np.mean(np.abs(ref - est)))
    if w1 is None or x_clean is None:
        return mae, None, None
    cfg = cfg or StftConfig(sample_rate=x_clean.sample_rate)
    x_d = synthesize(apply_stage1(w1, analyze(x_clean, cfg))).channel(0)
    n = min(ref.size, x_d.size)
    reg = float(np.mean(np.abs(ref[:n] - x_d[:n])))
    return mae, reg, beta_mae * mae + beta_reg * reg


@dataclass
class EvalReport:
    """Per-utterance metric records plus mean/median aggregates."""

    utterances: list
    config: dict

    METRICS = ("si_sdr_db", "nr_db", "delta_si_sdr_db", "delta_nr_db", "mae", "reg",
               "combined_loss")

    def aggregates(self) -> dict:
        out = {}
        for key in self.METRICS:
            vals = [u[key] for u in self.utterances if u.get(key) is not None]
            if vals:
                out[key] = {"mean": float(np.mean(vals)), "median": float(np.median(vals))}
        return out

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "utterances": self.utterances,
            "aggregate": self.aggregates(),
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as f:
                f.write(text)
        return text
