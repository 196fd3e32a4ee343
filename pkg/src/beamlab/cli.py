"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 batch completed with
partial failures.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np

from beamlab.audio import read_wav
from beamlab.beampattern import analyze_example
from beamlab.errors import ConfigError
from beamlab.metrics import EvalReport, nr, si_sdr
from beamlab.mixer import MixtureSpec, build_mixture, generate_dataset
from beamlab.pipeline import RunConfig, run_batch
from beamlab.rooms import ArrayGeometry, Scenario, NOISE_TYPES


@click.group()
def main():
    """Multichannel beamforming laboratory."""


def _fail_config(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(2)


@main.command("dataset-gen")
@click.option("--count", type=int, required=True, help="number of utterances")
@click.option("--reverb", type=click.Choice(["on", "off"]), default="off")
@click.option("--noise-type", type=click.Choice(NOISE_TYPES), default="stationary")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--seed", type=int, default=0)
@click.option("--duration", type=float, default=4.0, help="utterance length in seconds")
def dataset_gen(count, reverb, noise_type, out_dir, seed, duration):
    """Simulate mixtures and write WAVs plus a JSON-lines manifest."""
    if count <= 0:
        _fail_config("--count must be positive")
    spec = MixtureSpec(duration_s=duration)
    try:
        manifest = generate_dataset(out_dir, count, seed, reverb == "on", noise_type, spec=spec)
    except ConfigError as exc:
        _fail_config(str(exc))
    click.echo(f"wrote {count} utterances; manifest at {manifest}")


@main.command("enhance")
@click.option("--manifest", type=click.Path(exists=True), required=True)
@click.option("--method", type=click.Choice(["mvdr", "mvdr+pf", "mpdr", "learned", "passthrough"]),
              default="mvdr")
@click.option("--postfilter", type=click.Choice(["none", "lsa"]), default="none")
@click.option("--weights-dir", type=click.Path(), default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def enhance(manifest, method, postfilter, weights_dir, out_dir):
    """Run batch enhancement over a dataset manifest."""
    try:
        cfg = RunConfig(manifest=manifest, method=method, postfilter=postfilter,
                        weights_dir=weights_dir, out_dir=out_dir)
        report, failures = run_batch(cfg)
    except ConfigError as exc:
        _fail_config(str(exc))
    agg = report.aggregates()
    for key in ("delta_si_sdr_db", "delta_nr_db"):
        if key in agg:
            click.echo(f"{key}: median {agg[key]['median']:+.2f} dB")
    click.echo(f"report written to {Path(out_dir) / 'report.json'}")
    if failures:
        click.echo(f"{len(failures)} utterance(s) failed", err=True)
        sys.exit(3)


@main.command("evaluate")
@click.option("--ref-dir", type=click.Path(exists=True), required=True,
              help="reference (clean) WAVs")
@click.option("--est-dir", type=click.Path(exists=True), required=True, help="estimate WAVs")
@click.option("--noisy-dir", type=click.Path(exists=True), default=None,
              help="unprocessed WAVs for delta metrics")
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--head", type=float, default=0.5, help="noise-only head seconds")
@click.option("--tail", type=float, default=3.5, help="speech segment seconds")
def evaluate(ref_dir, est_dir, noisy_dir, out_path, head, tail):
    """Score estimate WAVs against references matched by file stem."""
    ests = {p.stem: p for p in sorted(Path(est_dir).glob("*.wav"))}
    refs = {p.stem: p for p in sorted(Path(ref_dir).glob("*.wav"))}
    if not ests:
        _fail_config(f"no WAV files in {est_dir}")
    noisy = {p.stem: p for p in sorted(Path(noisy_dir).glob("*.wav"))} if noisy_dir else {}
    records, failures = [], []
    for stem, est_path in ests.items():
        if stem not in refs:
            failures.append({"id": stem, "error": "no matching reference"})
            continue
        try:
            est = read_wav(est_path).channel(0)
            ref = read_wav(refs[stem]).channel(0)
            rate = read_wav(est_path).sample_rate
            rec = {
                "id": stem,
                "si_sdr_db": si_sdr(ref[: est.size], est[: ref.size]),
                "nr_db": nr(est, head, tail, sample_rate=rate),
            }
            if stem in noisy:
                noisy_ref = read_wav(noisy[stem]).channel(0)
                rec["delta_si_sdr_db"] = rec["si_sdr_db"] - si_sdr(
                    ref[: noisy_ref.size], noisy_ref[: ref.size]
                )
                rec["delta_nr_db"] = rec["nr_db"] - nr(noisy_ref, head, tail, sample_rate=rate)
            records.append(rec)
        except Exception as exc:  # noqa: BLE001
            failures.append({"id": stem, "error": f"{type(exc).__name__}: {exc}"})
    report = EvalReport(utterances=records, config={"ref_dir": str(ref_dir),
                                                    "est_dir": str(est_dir),
                                                    "failures": failures})
    report.to_json(out_path)
    click.echo(f"scored {len(records)} utterance(s); report at {out_path}")
    if failures:
        sys.exit(3)


@main.command("beampattern")
@click.option("--method", type=click.Choice(["mvdr", "mpdr", "learned-w1"]), default="mvdr")
@click.option("--weights", type=click.Path(exists=True), default=None,
              help="interchange file for learned-w1")
@click.option("--scenario", "scenario_path", type=click.Path(exists=True), required=True,
              help="scenario JSON")
@click.option("--order", type=str, default="0", help="'0' for direct path only, or 'full'")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--theta-start", type=float, default=0.0)
@click.option("--theta-stop", type=float, default=180.0)
@click.option("--theta-step", type=float, default=1.0)
def beampattern(method, weights, scenario_path, order, out_dir, theta_start, theta_stop,
                theta_step):
    """Beampattern CSVs and a polar SVG for one scenario."""
    if method == "learned-w1" and weights is None:
        _fail_config("learned-w1 requires --weights")
    if order not in ("0", "full"):
        _fail_config("--order must be '0' or 'full'")
    scenario = Scenario.from_json(Path(scenario_path).read_text())
    mixture = build_mixture(scenario, ArrayGeometry.default_linear(), MixtureSpec())
    thetas = np.arange(theta_start, theta_stop + 1e-9, theta_step)
    grid = analyze_example(mixture, method, theta_grid=thetas,
                           order=0 if order == "0" else "full",
                           weights=weights, out_dir=out_dir)
    peak = grid.thetas[int(np.argmax(grid.p))]
    click.echo(f"beampower peak at {peak:.1f} deg; artifacts in {out_dir}")


if __name__ == "__main__":
    main()
