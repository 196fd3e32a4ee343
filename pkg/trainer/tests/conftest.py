import numpy as np
import pytest
import torch

from beamlab.mixer import MixtureSpec, generate_dataset
from exnet_trainer import TwoStageEnhancer, ManifestDataset
from exnet_trainer.stft import StftSettings

TOY_SPEC = MixtureSpec(duration_s=0.15, noise_head_s=0.02, switch_time_s=0.08)
TOY_STFT = StftSettings(frame_len=64, hop=16)


@pytest.fixture(scope="session")
def toy_manifest(tmp_path_factory):
    d = tmp_path_factory.mktemp("toy_data")
    return generate_dataset(d, count=5, seed=13, reverb=False, spec=TOY_SPEC)


@pytest.fixture(scope="session")
def toy_reverb_manifest(tmp_path_factory):
    d = tmp_path_factory.mktemp("toy_reverb")
    return generate_dataset(d, count=5, seed=14, reverb=True, spec=TOY_SPEC)


@pytest.fixture(scope="session")
def toy_dataset(toy_manifest):
    return ManifestDataset(toy_manifest)


@pytest.fixture()
def toy_model():
    torch.manual_seed(0)
    return TwoStageEnhancer(num_mics=4, cfg=TOY_STFT)


@pytest.fixture()
def rng():
    return np.random.default_rng(99)
