"""Two-stage neural beamformer + postfilter trainer.

Stage 1 is a multichannel attention U-Net that emits time-invariant
beamformer weights; stage 2 is a single-channel U-Net that emits a
time-varying complex mask. Trained with a time-domain MAE objective plus
a distortionless regularizer, and exported per utterance to the binary
weight-interchange format consumed by the enhancement pipeline.
"""

from exnet_trainer.stft import StftSettings, stft, istft, pack, unpack
from exnet_trainer.model import TwoStageEnhancer, MIN_FRAMES
from exnet_trainer.data import ManifestDataset
from exnet_trainer.training import TrainSettings, train, two_step_protocol, combined_loss
from exnet_trainer.export import export_weights, save_interchange

__version__ = "0.1.0"
