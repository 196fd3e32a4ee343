"""Per-utterance weight export in the binary interchange format.

Layout (little-endian): magic "EXBF", u32 version=1, u32 M, u32 K, u32 L,
u32 flags (bit 0: mask present); then w1 as M*K complex64 pairs bin-major
(k outer, m inner); then, if flagged, w2 as K*L complex64 pairs
frame-major (l outer, k inner). A JSON mirror with the same field names is
written for paths ending in .json.

Export metadata note: the stage-2 mask is assembled from sigmoid outputs
s via (2s - 1)/sqrt(2) per packed real/imag channel, so |w2| < 1.
"""

from __future__ import annotations

import json
import struct

import numpy as np
import torch

from exnet_trainer.model import TwoStageEnhancer
from exnet_trainer.stft import pack, stft

MAGIC = b"EXBF"
VERSION = 1
FLAG_HAS_MASK = 1


def save_interchange(w1: np.ndarray, w2: np.ndarray | None, path) -> None:
    """w1: (K, M) complex; w2: optional (K, L) complex."""
    w1 = np.ascontiguousarray(np.asarray(w1, dtype=np.complex64))
    k, m = w1.shape
    l = 0
    flags = 0
    payload = w1.tobytes()
    if w2 is not None:
        w2 = np.asarray(w2, dtype=np.complex64)
        if w2.shape[0] != k:
            raise ValueError(f"mask has {w2.shape[0]} bins, weights have {k}")
        l = w2.shape[1]
        flags |= FLAG_HAS_MASK
        payload += np.ascontiguousarray(w2.T).tobytes()
    path = str(path)
    if path.endswith(".json"):
        doc = {
            "magic": "EXBF", "version": VERSION, "M": m, "K": k, "L": l, "flags": flags,
            "w1": np.stack([w1.real, w1.imag], axis=-1).tolist(),
        }
        if w2 is not None:
            doc["w2"] = np.stack([w2.T.real, w2.T.imag], axis=-1).tolist()
        with open(path, "w") as f:
            json.dump(doc, f)
        return
    header = MAGIC + struct.pack("<IIIII", VERSION, m, k, l, flags)
    with open(path, "wb") as f:
        f.write(header)
        f.write(payload)


@torch.no_grad()
def export_weights(model: TwoStageEnhancer, waveform: torch.Tensor, path,
                   include_mask: bool = True):
    """Run the model on one (M, T) waveform and export its weights.

    Returns (w1, w2) as numpy arrays in the file's (K, M) / (K, L) layout;
    w2 is None when include_mask is False (stage-1-only analysis files).
    """
    model.eval()
    spec = stft(waveform.unsqueeze(0), model.cfg)
    w1, w2, _, _ = model(pack(spec))
    w1_np = w1[0].numpy().T  # (K, M)
    w2_np = w2[0].numpy() if include_mask else None
    save_interchange(w1_np, w2_np, path)
    return w1_np, w2_np
