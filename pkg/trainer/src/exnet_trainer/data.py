"""Dataset access through the enhancement pipeline's manifest interface.

Each JSON-lines entry names the noisy (y) and clean (x) multichannel WAVs;
the training target is the clean signal at the reference microphone.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch
from scipy.io import wavfile
from torch.utils.data import Dataset


def _read_wav(path) -> np.ndarray:
    _, data = wavfile.read(path)
    if data.dtype == np.int16:
        data = data.astype(np.float32) / 32768.0
    else:
        data = data.astype(np.float32)
    return data.T if data.ndim == 2 else data[np.newaxis, :]


class ManifestDataset(Dataset):
    """Yields (y, x, x_ref) float32 tensors for each manifest entry."""

    def __init__(self, manifest_path):
        self.base = Path(manifest_path).parent
        with open(manifest_path) as f:
            self.entries = [json.loads(line) for line in f if line.strip()]
        if not self.entries:
            raise ValueError(f"manifest {manifest_path} is empty")

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, idx):
        entry = self.entries[idx]
        y = torch.from_numpy(_read_wav(self.base / entry["paths"]["y"]))
        x = torch.from_numpy(_read_wav(self.base / entry["paths"]["x"]))
        ref = int(entry.get("geometry", {}).get("reference_index", 0))
        return y, x, x[ref]

    def utterance_id(self, idx) -> str:
        return self.entries[idx]["id"]

    @property
    def num_mics(self) -> int:
        return _read_wav(self.base / self.entries[0]["paths"]["y"]).shape[0]
