"""Attention U-Net backbone shared by both processing stages.

Encoder: eight Conv2d layers (filters/kernel/stride below), each followed
by batch normalization, dropout, and LeakyReLU. Decoder mirrors the stack
with transposed convolutions. Skip connections pass through attention
gates: the encoder feature is scaled by a learned (0,1) mask before being
concatenated with the decoder feature of the same level; the level-0 gate
uses the network input as the encoder feature.

Inputs are zero-padded per layer so any (frequency, time) size survives
the stride stack (ceil-mode "same" padding; decoder outputs are cropped
back to the mirrored encoder sizes).
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

# (filters, kernel, stride) per encoder layer
ENCODER_SPEC = (
    (32, (6, 3), (2, 2)),
    (32, (7, 4), (2, 2)),
    (64, (7, 5), (2, 2)),
    (64, (6, 6), (2, 2)),
    (96, (6, 6), (2, 2)),
    (96, (6, 6), (2, 2)),
    (128, (2, 2), (2, 2)),
    (256, (2, 2), (1, 1)),
)

DROPOUT = 0.2
LEAKY_SLOPE = 0.01


def _same_pad(x: torch.Tensor, kernel, stride) -> torch.Tensor:
    """Zero-pad so conv output size is ceil(input/stride) per axis."""
    pads = []
    for axis, (k, s) in enumerate(zip(kernel, stride)):
        size = x.shape[2 + axis]
        out = -(-size // s)
        total = max((out - 1) * s + k - size, 0)
        pads.append((total // 2, total - total // 2))
    (top, bottom), (left, right) = pads
    return F.pad(x, (left, right, top, bottom))


class EncoderBlock(nn.Module):
    def __init__(self, in_ch, out_ch, kernel, stride):
        super().__init__()
        self.kernel = kernel
        self.stride = stride
        self.conv = nn.Conv2d(in_ch, out_ch, kernel, stride)
        self.norm = nn.BatchNorm2d(out_ch)
        self.drop = nn.Dropout2d(DROPOUT)
        self.act = nn.LeakyReLU(LEAKY_SLOPE)

    def forward(self, x):
        return self.act(self.drop(self.norm(self.conv(_same_pad(x, self.kernel, self.stride)))))


class DecoderBlock(nn.Module):
    """Transposed-convolution mirror of an encoder layer; output cropped to
    the recorded size of the mirrored encoder feature."""

    def __init__(self, in_ch, out_ch, kernel, stride):
        super().__init__()
        self.conv = nn.ConvTranspose2d(in_ch, out_ch, kernel, stride)
        self.norm = nn.BatchNorm2d(out_ch)
        self.drop = nn.Dropout2d(DROPOUT)
        self.act = nn.LeakyReLU(LEAKY_SLOPE)

    def forward(self, x, target_size):
        y = self.conv(x)
        y = y[:, :, : target_size[0], : target_size[1]]
        if y.shape[2] < target_size[0] or y.shape[3] < target_size[1]:
            y = F.pad(y, (0, target_size[1] - y.shape[3], 0, target_size[0] - y.shape[2]))
        return self.act(self.drop(self.norm(y)))


class AttentionGate(nn.Module):
    """Mask in (0,1) combining an encoder feature with its decoder peer."""

    def __init__(self, enc_ch, dec_ch):
        super().__init__()
        mid = max(enc_ch // 2, 1)
        self.proj_enc = nn.Conv2d(enc_ch, mid, 1)
        self.proj_dec = nn.Conv2d(dec_ch, mid, 1)
        self.collapse = nn.Conv2d(mid, 1, 1)

    def forward(self, enc, dec):
        mixed = torch.sigmoid(self.proj_enc(enc) + self.proj_dec(dec))
        return torch.sigmoid(self.collapse(mixed))


class AttentionUNet(nn.Module):
    """Encoder/decoder with attention-gated skips; returns a feature map
    with `out_channels` channels at the input's (frequency, time) size."""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        chans = [in_channels] + [c for c, _, _ in ENCODER_SPEC]
        self.encoders = nn.ModuleList(
            EncoderBlock(chans[i], chans[i + 1], ENCODER_SPEC[i][1], ENCODER_SPEC[i][2])
            for i in range(len(ENCODER_SPEC))
        )
        decoders = []
        gates = []
        in_ch = chans[-1]
        for i in reversed(range(len(ENCODER_SPEC))):
            out_ch = chans[i] if i > 0 else max(in_channels, chans[1] // 2)
            _, kernel, stride = ENCODER_SPEC[i]
            decoders.append(DecoderBlock(in_ch, out_ch, kernel, stride))
            enc_ch = chans[i]
            gates.append(AttentionGate(enc_ch, out_ch))
            in_ch = enc_ch + out_ch
        self.decoders = nn.ModuleList(decoders)
        self.gates = nn.ModuleList(gates)
        self.head = nn.Conv2d(in_ch, out_channels, 1)
        self.attention_masks = None  # most recent forward's masks, level-major

    def forward(self, x):
        feats = [x]
        for enc in self.encoders:
            feats.append(enc(feats[-1]))
        y = feats[-1]
        masks = []
        for step, (dec, gate) in enumerate(zip(self.decoders, self.gates)):
            level = len(self.encoders) - 1 - step
            skip = feats[level]
            y = dec(y, skip.shape[2:])
            mask = gate(skip, y)
            masks.append(mask)
            y = torch.cat([mask * skip, y], dim=1)
        self.attention_masks = masks
        return self.head(y)
