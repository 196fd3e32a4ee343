"""End-to-end orchestration: manifest in, enhanced WAVs and reports out."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from beamlab.audio import TimeSignal, write_wav
from beamlab.beamforming import StageWeights, apply_stage1, apply_stage2, load_weights, \
    mpdr_weights, mvdr_weights
from beamlab.covariance import estimate_rtf, noise_covariance, noisy_covariance
from beamlab.errors import ConfigError
from beamlab.metrics import EvalReport, losses, nr, si_sdr
from beamlab.mixer import Mixture, load_mixture, read_manifest
from beamlab.postfilter import PostfilterConfig, head_noise_psd, lsa_enhance
from beamlab.stft import StftConfig, analyze, synthesize

METHODS = ("mvdr", "mvdr+pf", "mpdr", "learned", "passthrough")


@dataclass(frozen=True)
class RunConfig:
    """Batch-enhancement settings."""

    manifest: str
    method: str = "mvdr"
    postfilter: str = "none"  # "none" or "lsa"
    out_dir: str = "out"
    weights_dir: str | None = None
    noise_head_s: float | None = None  # None: use each mixture's own head
    seed: int = 0
    beta_mae: float = 0.9
    beta_reg: float = 0.1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.postfilter not in ("none", "lsa"):
            raise ConfigError(f"postfilter must be 'none' or 'lsa', got {self.postfilter!r}")
        if self.method == "learned" and not self.weights_dir:
            raise ConfigError("learned method requires a weights directory")

    @property
    def base_method(self) -> str:
        return "mvdr" if self.method == "mvdr+pf" else self.method

    @property
    def use_postfilter(self) -> bool:
        return self.method == "mvdr+pf" or self.postfilter == "lsa"


def noise_frame_count(cfg: StftConfig, head_s: float) -> int:
    """Frames whose analysis window lies entirely within the noise head."""
    head = int(round(head_s * cfg.sample_rate))
    if head < cfg.frame_len:
        return 0
    return (head - cfg.frame_len) // cfg.hop + 1


def solve_weights(mixture: Mixture, method: str, cfg: StftConfig | None = None,
                  head_s: float | None = None) -> StageWeights:
    """Derive time-invariant weights from one mixture.

    mvdr estimates the noise covariance from the noise-only head and the
    steering vector from whitened-covariance eigenanalysis; mpdr uses the
    noisy covariance and replaces the whitening matrix with (spatially
    white) identity, so it needs no noise-only prior.
    """
    cfg = cfg or StftConfig(sample_rate=mixture.sample_rate)
    head_s = mixture.spec.noise_head_s if head_s is None else head_s
    spec = analyze(mixture.y, cfg)
    ln = noise_frame_count(cfg, head_s)
    if not 1 <= ln < spec.num_frames:
        raise ValueError(
            f"noise head of {head_s}s yields {ln} frames; need at least 1 and fewer than "
            f"{spec.num_frames}"
        )
    ref = mixture.reference_index
    phi_yy = noisy_covariance(spec, ln)
    if method == "mvdr":
        phi_nn = noise_covariance(spec, ln)
        rtf = estimate_rtf(phi_yy, phi_nn, ref)
        w1 = mvdr_weights(phi_nn, rtf)
    elif method == "mpdr":
        eye = np.broadcast_to(np.eye(spec.num_channels, dtype=np.complex128), phi_yy.shape)
        rtf = estimate_rtf(phi_yy, eye, ref)
        w1 = mpdr_weights(phi_yy, rtf)
    else:
        raise ValueError(f"no weight solver for method {method!r}")
    return StageWeights(w1=w1, sample_rate=cfg.sample_rate, provenance=method)


def _fit_length(data: np.ndarray, total: int) -> np.ndarray:
    out = np.zeros(total)
    n = min(total, data.size)
    out[:n] = data[:n]
    return out


def enhance_utterance(mixture: Mixture, cfg: RunConfig, utt_id: str = "",
                      weights: StageWeights | None = None):
    """Enhance one mixture; returns (estimate, metrics record).

    The processing chain is STFT, covariance estimation, steering-vector
    estimation, weight solve (or weight-file load), stage-1 beamforming,
    optional mask/postfilter, inverse STFT.
    """
    stft_cfg = StftConfig(sample_rate=mixture.sample_rate)
    total = mixture.y.num_samples
    ref = mixture.reference_index
    head_s = cfg.noise_head_s if cfg.noise_head_s is not None else mixture.spec.noise_head_s
    sw = None

    if cfg.base_method == "passthrough":
        est = mixture.y.channel(ref).copy()
    else:
        if cfg.base_method == "learned":
            if weights is None:
                path = Path(cfg.weights_dir) / f"{utt_id}.exbf"
                if not path.exists():
                    raise ConfigError(f"no weight file for utterance {utt_id!r} at {path}")
                sw = load_weights(path, sample_rate=mixture.sample_rate)
            else:
                sw = weights
        else:
            sw = solve_weights(mixture, cfg.base_method, stft_cfg, head_s)
        spec = analyze(mixture.y, stft_cfg)
        staged = apply_stage1(sw.w1, spec)
        if cfg.base_method == "learned" and sw.w2 is not None:
            staged = apply_stage2(sw.w2, staged)
        elif cfg.use_postfilter:
            ln = noise_frame_count(stft_cfg, head_s)
            staged = lsa_enhance(staged, head_noise_psd(staged, ln), PostfilterConfig())
        est = _fit_length(synthesize(staged).channel(0), total)

    estimate = TimeSignal(est, mixture.sample_rate)
    record = _metrics_record(mixture, estimate, sw, cfg, utt_id, stft_cfg)
    return estimate, record


def _metrics_record(mixture: Mixture, estimate: TimeSignal, sw, cfg: RunConfig,
                    utt_id: str, stft_cfg: StftConfig) -> dict:
    ref = mixture.reference_index
    x_ref = mixture.x.channel(ref)
    y_ref = mixture.y.channel(ref)
    est = estimate.channel(0)
    head_s = mixture.spec.noise_head_s
    tail_s = mixture.spec.duration_s - head_s
    rate = mixture.sample_rate

    base = dict(
        si_sdr_db=si_sdr(x_ref, est),
        nr_db=nr(est, head_s, tail_s, sample_rate=rate),
        noisy_si_sdr_db=si_sdr(x_ref, y_ref),
        noisy_nr_db=nr(y_ref, head_s, tail_s, sample_rate=rate),
    )
    base["delta_si_sdr_db"] = base["si_sdr_db"] - base["noisy_si_sdr_db"]
    base["delta_nr_db"] = base["nr_db"] - base["noisy_nr_db"]
    w1 = sw.w1 if sw is not None else None
    mae, reg, combined = losses(x_ref, est, w1=w1, x_clean=mixture.x if w1 is not None else None,
                                cfg=stft_cfg, beta_mae=cfg.beta_mae, beta_reg=cfg.beta_reg)
    record = {"id": utt_id, "method": cfg.method, "mae": mae, "reg": reg,
              "combined_loss": combined}
    record.update(base)
    return record


def run_batch(cfg: RunConfig):
    """Enhance every manifest entry; resumable and failure-tolerant.

    Completed utterances (estimate WAV plus record JSON present) are not
    recomputed. Returns (EvalReport, failures); per-utterance failures are
    recorded and the batch continues.
    """
    manifest_path = Path(cfg.manifest)
    entries = read_manifest(manifest_path)
    if not entries:
        raise ConfigError(f"manifest {manifest_path} is empty")
    out_dir = Path(cfg.out_dir)
    est_dir = out_dir / "est"
    rec_dir = out_dir / "records"
    est_dir.mkdir(parents=True, exist_ok=True)
    rec_dir.mkdir(parents=True, exist_ok=True)

    records, failures = [], []
    for entry in entries:
        uid = entry["id"]
        wav_path = est_dir / f"{uid}.wav"
        rec_path = rec_dir / f"{uid}.json"
        if wav_path.exists() and rec_path.exists():
            with open(rec_path) as f:
                records.append(json.load(f))
            continue
        try:
            mixture = load_mixture(entry, manifest_path.parent)
            estimate, record = enhance_utterance(mixture, cfg, utt_id=uid)
        except Exception as exc:  # noqa: BLE001 - recorded, batch continues
            failures.append({"id": uid, "error": f"{type(exc).__name__}: {exc}"})
            continue
        write_wav(wav_path, estimate)
        with open(rec_path, "w") as f:
            json.dump(record, f, sort_keys=True)
        records.append(record)

    report = EvalReport(
        utterances=records,
        config={
            "manifest": str(cfg.manifest), "method": cfg.method,
            "postfilter": cfg.postfilter, "noise_head_s": cfg.noise_head_s,
            "beta_mae": cfg.beta_mae, "beta_reg": cfg.beta_reg, "seed": cfg.seed,
            "failures": failures,
        },
    )
    report.to_json(out_dir / "report.json")
    return report, failures
