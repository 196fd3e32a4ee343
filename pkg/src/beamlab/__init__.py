"""Multichannel beamforming laboratory.

Simulates reverberant noisy scenes, derives MVDR/MPDR beamformers with
GEVD-based steering-vector estimation, applies learned two-stage weights,
and produces beampattern analyses and evaluation metrics.
"""

from beamlab.audio import TimeSignal, read_wav, write_wav
from beamlab.stft import StftConfig, Spectrogram, analyze, synthesize, pack_real_imag, unpack_real_imag
from beamlab.rooms import Scenario, ArrayGeometry, RirSet, sample_scenario, simulate_rir, atf_grid
from beamlab.mixer import MixtureSpec, Mixture, ar1_noise, mix, make_variant
from beamlab.covariance import (
    CovarianceSet,
    RtfVector,
    noise_covariance,
    noisy_covariance,
    matrix_sqrt,
    matrix_inverse_sqrt,
    whitened_covariance,
    estimate_rtf,
)
from beamlab.beamforming import (
    StageWeights,
    mvdr_weights,
    mpdr_weights,
    apply_stage1,
    apply_stage2,
    save_weights,
    load_weights,
)
from beamlab.postfilter import PostfilterConfig, lsa_enhance
from beamlab.beampattern import BeampatternGrid, narrowband, wideband, to_polar_db, analyze_example
from beamlab.metrics import si_sdr, nr, losses, EvalReport
from beamlab.pipeline import RunConfig, enhance_utterance, run_batch

__version__ = "0.1.0"
