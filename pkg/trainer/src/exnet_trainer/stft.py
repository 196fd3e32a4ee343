"""Differentiable STFT/ISTFT matching the enhancement pipeline's convention.

Square-root periodic Hann analysis/synthesis pair, 512-sample frames with
128-sample hop by default, one-sided spectra, and only frames fully inside
the signal. The inverse divides by the accumulated window product, so
reconstruction is exact wherever the lattice has support.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F


@dataclass(frozen=True)
class StftSettings:
    frame_len: int = 512
    hop: int = 128
    sample_rate: int = 16000

    def __post_init__(self):
        if self.frame_len % self.hop != 0 or self.hop > self.frame_len:
            raise ValueError("hop must divide the frame length")

    @property
    def num_bins(self) -> int:
        return self.frame_len // 2 + 1

    def window(self, dtype=torch.float32, device=None) -> torch.Tensor:
        n = torch.arange(self.frame_len, dtype=torch.float64, device=device)
        hann = 0.5 * (1.0 - torch.cos(2.0 * torch.pi * n / self.frame_len))
        return torch.sqrt(hann).to(dtype)

    def num_frames(self, samples: int) -> int:
        if samples < self.frame_len:
            return 0
        return (samples - self.frame_len) // self.hop + 1


def stft(x: torch.Tensor, cfg: StftSettings) -> torch.Tensor:
    """(..., T) real -> (..., K, L) complex."""
    if x.shape[-1] < cfg.frame_len:
        raise ValueError(f"signal of {x.shape[-1]} samples is shorter than one frame")
    win = cfg.window(dtype=x.dtype, device=x.device)
    frames = x.unfold(-1, cfg.frame_len, cfg.hop)  # (..., L, N)
    return torch.fft.rfft(frames * win, dim=-1).transpose(-1, -2)


def istft(spec: torch.Tensor, cfg: StftSettings) -> torch.Tensor:
    """(..., K, L) complex -> (..., T) real via normalized overlap-add."""
    frames = torch.fft.irfft(spec.transpose(-1, -2), n=cfg.frame_len, dim=-1)
    win = cfg.window(dtype=frames.dtype, device=frames.device)
    frames = frames * win

    lead = frames.shape[:-2]
    l = frames.shape[-2]
    total = (l - 1) * cfg.hop + cfg.frame_len
    flat = frames.reshape(-1, l, cfg.frame_len).transpose(1, 2)  # (B', N, L)
    out = F.fold(flat, output_size=(1, total), kernel_size=(1, cfg.frame_len),
                 stride=(1, cfg.hop))[:, 0, 0, :]
    ones = (win * win).expand(1, l, cfg.frame_len).transpose(1, 2)
    den = F.fold(ones, output_size=(1, total), kernel_size=(1, cfg.frame_len),
                 stride=(1, cfg.hop))[0, 0, 0, :]
    floor = 1e-12 * den.max()
    out = out / torch.clamp(den, min=floor)
    out = torch.where(den > floor, out, torch.zeros_like(out))
    return out.reshape(*lead, total)


def pack(spec: torch.Tensor) -> torch.Tensor:
    """(..., K, L) complex -> (..., 2K, L) real: real rows then imaginary rows."""
    return torch.cat([spec.real, spec.imag], dim=-2)


def unpack(packed: torch.Tensor) -> torch.Tensor:
    """Inverse of pack."""
    if packed.shape[-2] % 2 != 0:
        raise ValueError(f"packed frequency axis must be even, got {packed.shape[-2]}")
    k = packed.shape[-2] // 2
    return torch.complex(packed[..., :k, :], packed[..., k:, :])
