"""The two-stage network: time-invariant beamformer weights + complex mask.

Stage 1 maps the packed multichannel spectrogram (B, M, 2K, L) to weights
(B, M, 2K, 1): U-Net, a linear layer along the frequency axis, Tanh, a
time-average collapsing the frame axis, and a projection zeroing the
DC/Nyquist imaginary rows so the beamformed signal can be real.

Stage 2 maps the packed beamformer output (B, 1, 2K, L) through the same
backbone with a Sigmoid head (no averaging); the (0,1) outputs are mapped
affinely to (-1/sqrt2, 1/sqrt2) and combined into a complex mask of
magnitude strictly below one, with DC/Nyquist rows kept real.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from exnet_trainer.stft import StftSettings, istft, pack, stft, unpack
from exnet_trainer.unet import AttentionUNet

# Seven stride-2 time reductions: shorter inputs are mostly padding at the
# deepest levels, so they are rejected outright.
MIN_FRAMES = 128

MASK_SCALE = 1.0 / math.sqrt(2.0)


def _edge_projection(packed: torch.Tensor) -> torch.Tensor:
    """Zero the imaginary rows of bins 0 and K-1 of a packed tensor."""
    k = packed.shape[-2] // 2
    keep = torch.ones(2 * k, dtype=packed.dtype, device=packed.device)
    keep[k] = 0.0
    keep[-1] = 0.0
    return packed * keep[:, None]


class FrequencyLinear(nn.Module):
    """Dense layer acting along the packed frequency axis."""

    def __init__(self, bins: int):
        super().__init__()
        self.linear = nn.Linear(bins, bins)

    def forward(self, x):  # (B, C, F, L)
        return self.linear(x.transpose(2, 3)).transpose(2, 3)


class StageOne(nn.Module):
    def __init__(self, num_mics: int, num_bins: int):
        super().__init__()
        self.num_mics = num_mics
        self.unet = AttentionUNet(num_mics, num_mics)
        self.freq = FrequencyLinear(2 * num_bins)

    def forward(self, packed: torch.Tensor) -> torch.Tensor:
        if packed.shape[-1] < MIN_FRAMES:
            raise ValueError(
                f"stage 1 needs at least {MIN_FRAMES} frames for its stride stack, "
                f"got {packed.shape[-1]}"
            )
        y = torch.tanh(self.freq(self.unet(packed)))
        w1 = y.mean(dim=-1, keepdim=True)  # time-invariant by construction
        return _edge_projection(w1)


class StageTwo(nn.Module):
    def __init__(self, num_bins: int):
        super().__init__()
        self.unet = AttentionUNet(1, 1)
        self.freq = FrequencyLinear(2 * num_bins)

    def forward(self, packed: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.freq(self.unet(packed)))

    @staticmethod
    def assemble_mask(packed: torch.Tensor) -> torch.Tensor:
        """(B, 1, 2K, L) sigmoid outputs -> (B, K, L) complex mask, |mask| < 1."""
        scaled = MASK_SCALE * (2.0 * packed - 1.0)
        return unpack(_edge_projection(scaled))[:, 0]


class TwoStageEnhancer(nn.Module):
    """Complete two-stage enhancer operating on packed spectrogram tensors."""

    def __init__(self, num_mics: int = 4, cfg: StftSettings | None = None):
        super().__init__()
        self.cfg = cfg or StftSettings()
        self.num_mics = num_mics
        self.stage1 = StageOne(num_mics, self.cfg.num_bins)
        self.stage2 = StageTwo(self.cfg.num_bins)

    def beamformer_weights(self, packed: torch.Tensor) -> torch.Tensor:
        """Complex (B, M, K) weights from the packed input."""
        w1 = self.stage1(packed)  # (B, M, 2K, 1)
        return unpack(w1)[..., 0]

    def forward(self, packed: torch.Tensor):
        """Returns (w1, w2, stage1 output, stage2 output), complex tensors."""
        y = unpack(packed)  # (B, M, K, L)
        w1 = self.beamformer_weights(packed)
        beamformed = (w1.conj().unsqueeze(-1) * y).sum(dim=1)  # (B, K, L)
        mask_packed = self.stage2(pack(beamformed).unsqueeze(1))
        w2 = StageTwo.assemble_mask(mask_packed)
        enhanced = w2.conj() * beamformed
        return w1, w2, beamformed, enhanced

    def enhance_waveform(self, waveform: torch.Tensor) -> torch.Tensor:
        """(M, T) noisy multichannel audio -> (T',) enhanced time signal."""
        spec = stft(waveform.unsqueeze(0), self.cfg)  # (1, M, K, L)
        _, _, _, enhanced = self(pack(spec))
        return istft(enhanced, self.cfg)[0]
