"""Noisy multichannel mixture synthesis.

A mixture is target speech convolved with its room responses plus
directional colored noise, white sensor noise, and optional variants:
a noise-direction switch, a speaker switch, or 10-source babble. The
target starts after a noise-only head so that noise statistics can be
estimated from the first frames.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
from scipy import signal as sps

from beamlab.audio import TimeSignal, read_wav, write_wav
from beamlab.rooms import ArrayGeometry, Scenario, ScenarioRanges, sample_scenario, simulate_rir

AR1_COEFF = -0.7

# Pink-noise shaping filter (IIR approximation of a 1/f magnitude response).
_PINK_B = (0.049922035, -0.095993537, 0.050612699, -0.004408786)
_PINK_A = (1.0, -2.494956002, 2.017265875, -0.522189400)


@dataclass(frozen=True)
class MixtureSpec:
    """Mixing parameters; durations in seconds, SNRs in dB."""

    directional_snr_db: float = 3.0
    sensor_snr_db: float = 30.0
    duration_s: float = 4.0
    noise_head_s: float = 0.5
    switch_time_s: float = 2.0
    babble_count: int = 10

    def __post_init__(self):
        if self.duration_s <= self.noise_head_s:
            raise ValueError("duration must exceed the noise-only head")
        if not self.noise_head_s < self.switch_time_s < self.duration_s:
            raise ValueError("switch time must lie between the noise head and the end")
        if self.babble_count < 1:
            raise ValueError("babble_count must be at least 1")


@dataclass(frozen=True)
class Mixture:
    """Mixture y plus its stored components x (speech) and n (total noise)."""

    y: TimeSignal
    x: TimeSignal
    n: TimeSignal
    scenario: Scenario
    geometry: ArrayGeometry
    spec: MixtureSpec

    @property
    def sample_rate(self) -> int:
        return self.y.sample_rate

    @property
    def reference_index(self) -> int:
        return self.geometry.reference_index


def ar1_noise(length: int, coeff: float = AR1_COEFF, rng: np.random.Generator | None = None,
              sample_rate: int = 16000) -> TimeSignal:
    """Stationary first-order autoregressive Gaussian noise, unit innovation."""
    if abs(coeff) >= 1.0:
        raise ValueError(f"AR(1) coefficient must satisfy |coeff| < 1, got {coeff}")
    rng = rng or np.random.default_rng()
    e = rng.standard_normal(length)
    # Start from the stationary distribution so the process has no transient.
    init = rng.standard_normal() / np.sqrt(1.0 - coeff**2)
    out, _ = sps.lfilter([1.0], [1.0, -coeff], e, zi=np.array([coeff * init]))
    return TimeSignal(out, sample_rate)


def synth_speech(duration_s: float, rng: np.random.Generator,
                 sample_rate: int = 16000) -> TimeSignal:
    """Self-contained stand-in for speech: pink noise under a syllabic envelope."""
    n = int(round(duration_s * sample_rate))
    white = rng.standard_normal(n + sample_rate)
    pink = sps.lfilter(_PINK_B, _PINK_A, white)[sample_rate:]
    b, a = sps.butter(2, 4.0 / (sample_rate / 2.0))
    env = sps.lfilter(b, a, np.abs(rng.standard_normal(n)))
    env = 0.2 + np.abs(env) / max(np.abs(env).max(), 1e-12)
    sig = pink * env
    sig *= 0.1 / np.sqrt(np.mean(sig**2))
    return TimeSignal(sig, sample_rate)


def _convolve_at(wave: np.ndarray, filters: np.ndarray, total: int, offset: int) -> np.ndarray:
    """Convolve a mono wave with (M, T) filters, writing from `offset` on.

    Samples before `offset` stay exactly zero (the convolution never
    touches them), which keeps the noise-only head of the target clean.
    """
    out = np.zeros((filters.shape[0], total))
    span = total - offset
    for m in range(filters.shape[0]):
        full = sps.fftconvolve(wave, filters[m])
        out[m, offset:] = full[:span] if full.size >= span else np.pad(full, (0, span - full.size))
    return out


def _segment_var(data: np.ndarray, start: int, stop: int) -> float:
    return float(np.var(data[start:stop]))


def mix(scenario: Scenario, geometry: ArrayGeometry, spec: MixtureSpec,
        target_wave: TimeSignal, noise_wave: TimeSignal,
        rng: np.random.Generator | None = None, order="full") -> Mixture:
    """Assemble one mixture from a target and a directional-noise waveform.

    The target is convolved with its room responses and delayed to start
    after the noise-only head; the directional noise runs for the full
    duration and is scaled so the reference-mic SNR over the speech-active
    segment matches the spec; white sensor noise is added per channel.
    """
    rng = rng or np.random.default_rng(scenario.seed)
    fs = target_wave.sample_rate
    if noise_wave.sample_rate != fs:
        raise ValueError("target and noise sample rates differ")
    total = int(round(spec.duration_s * fs))
    head = int(round(spec.noise_head_s * fs))
    need = total - head
    if target_wave.num_samples < need:
        raise ValueError(
            f"target must cover the speech-active span: {target_wave.num_samples} < {need} samples"
        )
    if noise_wave.num_samples < total:
        raise ValueError(f"noise must cover the full duration: {noise_wave.num_samples} < {total}")

    d = target_wave.channel(0)[:need]
    if np.var(d) == 0.0:
        raise ValueError("target is silent; SNR is undefined")

    rir_src = simulate_rir(scenario, geometry, scenario.source_position(), order, fs)
    rir_noise = simulate_rir(scenario, geometry, scenario.noise_position(), order, fs)
    x = _convolve_at(d, rir_src.filters, total, head)
    n_dir = _convolve_at(noise_wave.channel(0)[:total], rir_noise.filters, total, 0)
    return _assemble(x, [n_dir], scenario, geometry, spec, rng, fs)


def _assemble(x: np.ndarray, directional_parts, scenario, geometry, spec,
              rng: np.random.Generator, fs: int) -> Mixture:
    """Scale noise components to the spec SNRs and sum; y = x + n exactly."""
    total = x.shape[1]
    head = int(round(spec.noise_head_s * fs))
    ref = geometry.reference_index
    var_x = _segment_var(x[ref], head, total)
    if var_x == 0.0:
        raise ValueError("speech-active segment of the target is silent; SNR is undefined")

    n_dir = np.sum(directional_parts, axis=0)
    var_n = _segment_var(n_dir[ref], head, total)
    if var_n == 0.0:
        raise ValueError("directional noise is silent over the speech segment")
    n_dir = n_dir * np.sqrt(var_x / (10.0 ** (spec.directional_snr_db / 10.0) * var_n))

    sensor_std = np.sqrt(var_x / 10.0 ** (spec.sensor_snr_db / 10.0))
    sensor = sensor_std * rng.standard_normal(x.shape)

    n = n_dir + sensor
    y = x + n
    return Mixture(
        y=TimeSignal(y, fs), x=TimeSignal(x, fs), n=TimeSignal(n, fs),
        scenario=scenario, geometry=geometry, spec=spec,
    )


def _sample_extra_angle(rng, avoid_theta: float, scenario: Scenario, radius: float,
                        min_sep: float = 20.0, max_tries: int = 1000) -> float:
    for _ in range(max_tries):
        th = rng.uniform(0.0, 180.0)
        if abs(th - avoid_theta) < min_sep:
            continue
        if scenario.contains(scenario.position_at(th, radius)):
            return th
    raise ValueError("could not place an extra source inside the room")


def _sample_babble_position(rng, scenario: Scenario, max_tries: int = 1000):
    r_max = max(scenario.source_R + 0.4, 1.0)
    for _ in range(max_tries):
        th = rng.uniform(0.0, 180.0)
        r = rng.uniform(min(1.0, r_max), r_max)
        if scenario.contains(scenario.position_at(th, r)):
            return th, r
    raise ValueError("could not place a babble source inside the room")


def make_variant(noise_type: str, scenario: Scenario, geometry: ArrayGeometry,
                 spec: MixtureSpec, targets, rng: np.random.Generator | None = None,
                 second_noise_theta: float | None = None,
                 second_source_theta: float | None = None,
                 order="full") -> Mixture:
    """Build a mixture of the requested noise type.

    targets: list of mono TimeSignals. One suffices for `stationary`,
    `time_varying_noise`, and `babble_noise`; `speaker_switch` uses two;
    `babble_voice` uses 1 + spec.babble_count (target first).
    Switches are hard cuts of the convolved streams at the switch time.
    """
    rng = rng or np.random.default_rng(scenario.seed)
    if not targets:
        raise ValueError("at least one target waveform is required")
    fs = targets[0].sample_rate
    total = int(round(spec.duration_s * fs))
    head = int(round(spec.noise_head_s * fs))
    sw = int(round(spec.switch_time_s * fs))
    need = total - head

    if noise_type == "stationary":
        noise = ar1_noise(total, rng=rng, sample_rate=fs)
        return mix(scenario, geometry, spec, targets[0], noise, rng=rng, order=order)

    if noise_type == "time_varying_noise":
        theta2 = second_noise_theta
        if theta2 is None:
            theta2 = _sample_extra_angle(rng, scenario.source_theta, scenario, scenario.noise_R)
        noise = ar1_noise(total, rng=rng, sample_rate=fs).channel(0)
        rir_a = simulate_rir(scenario, geometry, scenario.noise_position(), order, fs)
        rir_b = simulate_rir(
            scenario, geometry, scenario.position_at(theta2, scenario.noise_R), order, fs
        )
        n_dir = _convolve_at(noise, rir_a.filters, total, 0)
        n_dir[:, sw:] = _convolve_at(noise, rir_b.filters, total, 0)[:, sw:]
        d = targets[0].channel(0)[:need]
        if np.var(d) == 0.0:
            raise ValueError("target is silent; SNR is undefined")
        rir_src = simulate_rir(scenario, geometry, scenario.source_position(), order, fs)
        x = _convolve_at(d, rir_src.filters, total, head)
        return _assemble(x, [n_dir], scenario, geometry, spec, rng, fs)

    if noise_type == "speaker_switch":
        if len(targets) < 2:
            raise ValueError("speaker_switch needs two target waveforms")
        theta2 = second_source_theta
        if theta2 is None:
            theta2 = _sample_extra_angle(rng, scenario.noise_theta, scenario, scenario.source_R)
        d1 = targets[0].channel(0)[:need]
        d2 = targets[1].channel(0)[:need]
        if np.var(d1) == 0.0 or np.var(d2) == 0.0:
            raise ValueError("target is silent; SNR is undefined")
        rir_a = simulate_rir(scenario, geometry, scenario.source_position(), order, fs)
        rir_b = simulate_rir(
            scenario, geometry, scenario.position_at(theta2, scenario.source_R), order, fs
        )
        x = _convolve_at(d1, rir_a.filters, total, head)
        x[:, sw:] = _convolve_at(d2, rir_b.filters, total, head)[:, sw:]
        noise = ar1_noise(total, rng=rng, sample_rate=fs)
        n_dir = _convolve_at(
            noise.channel(0),
            simulate_rir(scenario, geometry, scenario.noise_position(), order, fs).filters,
            total, 0,
        )
        return _assemble(x, [n_dir], scenario, geometry, spec, rng, fs)

    if noise_type in ("babble_noise", "babble_voice"):
        if noise_type == "babble_voice" and len(targets) < 1 + spec.babble_count:
            raise ValueError(
                f"babble_voice needs {1 + spec.babble_count} waveforms, got {len(targets)}"
            )
        d = targets[0].channel(0)[:need]
        if np.var(d) == 0.0:
            raise ValueError("target is silent; SNR is undefined")
        rir_src = simulate_rir(scenario, geometry, scenario.source_position(), order, fs)
        x = _convolve_at(d, rir_src.filters, total, head)
        parts = []
        for i in range(spec.babble_count):
            th, r = _sample_babble_position(rng, scenario)
            rir = simulate_rir(scenario, geometry, scenario.position_at(th, r), order, fs)
            if noise_type == "babble_noise":
                src = ar1_noise(total, rng=rng, sample_rate=fs).channel(0)
            else:
                wave = targets[1 + i]
                if wave.num_samples < total:
                    raise ValueError(f"babble voice {i} shorter than the mixture duration")
                src = wave.channel(0)[:total]
            parts.append(_convolve_at(src, rir.filters, total, 0))
        return _assemble(x, parts, scenario, geometry, spec, rng, fs)

    raise ValueError(f"unknown noise type {noise_type!r}")


def build_mixture(scenario: Scenario, geometry: ArrayGeometry, spec: MixtureSpec,
                  targets=None, order="full") -> Mixture:
    """Deterministically build the scenario's mixture from its seed."""
    rng = np.random.default_rng(scenario.seed)
    if targets is None:
        count = {"speaker_switch": 2, "babble_voice": 1 + spec.babble_count}.get(
            scenario.noise_type, 1
        )
        targets = [synth_speech(spec.duration_s, rng, 16000) for _ in range(count)]
    return make_variant(scenario.noise_type, scenario, geometry, spec, targets, rng=rng,
                        order=order)


def generate_dataset(out_dir, count: int, seed: int, reverb: bool = False,
                     noise_type: str = "stationary", geometry: ArrayGeometry | None = None,
                     spec: MixtureSpec | None = None,
                     ranges: ScenarioRanges | None = None) -> Path:
    """Write `count` mixtures plus a JSON-lines manifest; returns its path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    geometry = geometry or ArrayGeometry.default_linear()
    spec = spec or MixtureSpec()
    if ranges is None:
        ranges = ScenarioRanges(anechoic=not reverb)
    master = np.random.default_rng(seed)
    entries = []
    for i in range(count):
        scenario = sample_scenario(master, ranges, noise_type=noise_type)
        mixture = build_mixture(scenario, geometry, spec, order="full" if reverb else 0)
        uid = f"utt_{i:04d}"
        paths = {}
        for tag, sig in (("y", mixture.y), ("x", mixture.x), ("n", mixture.n)):
            name = f"{uid}_{tag}.wav"
            write_wav(out_dir / name, sig)
            paths[tag] = name
        entries.append(
            {
                "id": uid,
                "seed": scenario.seed,
                "noise_type": noise_type,
                "scenario": scenario.to_dict(),
                "geometry": geometry.to_dict(),
                "sample_rate": mixture.sample_rate,
                "spec": asdict(spec),
                "paths": paths,
            }
        )
    manifest = out_dir / "manifest.jsonl"
    with open(manifest, "w") as f:
        for e in entries:
            f.write(json.dumps(e, sort_keys=True) + "\n")
    return manifest


def read_manifest(path) -> list:
    path = Path(path)
    entries = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                entries.append(json.loads(line))
    return entries


def load_mixture(entry: dict, base_dir) -> Mixture:
    """Rehydrate a Mixture from a manifest entry and its WAV files."""
    base = Path(base_dir)
    scenario = Scenario.from_dict(entry["scenario"])
    geometry = ArrayGeometry.from_dict(entry["geometry"])
    spec = MixtureSpec(**entry["spec"])
    sigs = {tag: read_wav(base / rel) for tag, rel in entry["paths"].items()}
    return Mixture(y=sigs["y"], x=sigs["x"], n=sigs["n"],
                   scenario=scenario, geometry=geometry, spec=spec)
