"""Acceptance criteria for the trainer component, one test per criterion.

Run with `pytest tests/test_acceptance.py -v -s` for the verdict lines.
"""

import numpy as np
import pytest
import torch

from beamlab.beamforming import load_weights
from beamlab.mixer import MixtureSpec, generate_dataset
from beamlab.pipeline import RunConfig, enhance_utterance
from beamlab.mixer import load_mixture, read_manifest

from exnet_trainer import TwoStageEnhancer, ManifestDataset, TrainSettings, train, two_step_protocol
from exnet_trainer.export import export_weights
from exnet_trainer.model import StageTwo
from exnet_trainer.stft import StftSettings
from tests.conftest import TOY_STFT
from tests.test_training import _state_bytes


def _verdict(name, ok, detail):
    print(f"[acceptance] {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


def test_structural_invariants(toy_model, toy_dataset, tmp_path):
    y, _, _ = toy_dataset[0]
    path = tmp_path / "utt.exbf"
    w1, w2 = export_weights(toy_model, y, path)

    no_frame_axis = w1.ndim == 2
    realness = bool(np.all(w1[0].imag == 0.0) and np.all(w1[-1].imag == 0.0))

    from exnet_trainer.stft import pack, stft

    toy_model(pack(stft(y.unsqueeze(0), TOY_STFT)))
    masks_ok = all(
        bool(((m > 0) & (m < 1)).all())
        for unet in (toy_model.stage1.unet, toy_model.stage2.unet)
        for m in unet.attention_masks
    )

    loaded = load_weights(path)  # primary-side validation
    validated = loaded.w1.shape == (TOY_STFT.num_bins, 4) and loaded.w2 is not None

    ok = no_frame_axis and realness and masks_ok and validated
    _verdict(
        "structural invariants",
        ok,
        f"frame-axis-free={no_frame_axis}, edge realness={realness}, "
        f"attention in (0,1)={masks_ok}, primary validation={validated}",
    )


def test_toy_convergence_and_freezing(toy_dataset, toy_reverb_manifest, tmp_path):
    torch.manual_seed(0)
    model = TwoStageEnhancer(num_mics=4, cfg=TOY_STFT)
    history = train(model, toy_dataset, TrainSettings(steps=200, batch_size=5, seed=1))
    first = float(np.mean([h["loss"] for h in history[:5]]))
    last = float(np.mean([h["loss"] for h in history[-5:]]))
    halved = last <= 0.5 * first

    ckpt = tmp_path / "stage1.pt"
    torch.save(model.stage1.state_dict(), ckpt)
    before = _state_bytes(model.stage1)
    two_step_protocol(model, ckpt, ManifestDataset(toy_reverb_manifest),
                      TrainSettings(steps=5, batch_size=5, seed=2))
    frozen = _state_bytes(model.stage1) == before

    _verdict(
        "toy convergence and stage-1 freezing",
        halved and frozen,
        f"loss {first:.5f} -> {last:.5f} (ratio {last / first:.3f}), "
        f"stage-1 bit-identical={frozen}",
    )


def test_cross_component_fidelity(tmp_path):
    # full-size model; the pipeline applies the exported file to the same input
    spec = MixtureSpec(duration_s=1.2, noise_head_s=0.1, switch_time_s=0.6)
    manifest = generate_dataset(tmp_path / "data", count=1, seed=31, reverb=False, spec=spec)
    entry = read_manifest(manifest)[0]
    mixture = load_mixture(entry, manifest.parent)

    torch.manual_seed(7)
    model = TwoStageEnhancer(num_mics=4, cfg=StftSettings())
    model.eval()
    y = torch.from_numpy(mixture.y.data.astype(np.float32))
    wdir = tmp_path / "weights"
    wdir.mkdir()
    export_weights(model, y, wdir / f"{entry['id']}.exbf")
    with torch.no_grad():
        own = model.enhance_waveform(y).numpy()

    cfg = RunConfig(manifest=str(manifest), method="learned", weights_dir=str(wdir))
    estimate, _ = enhance_utterance(mixture, cfg, utt_id=entry["id"])
    n = min(own.size, estimate.num_samples)
    rel = np.linalg.norm(estimate.data[0, :n] - own[:n]) / np.linalg.norm(own[:n])
    _verdict("cross-component fidelity", rel < 1e-4, f"relative L2 deviation {rel:.3e}")
