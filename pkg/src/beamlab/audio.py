"""Time-domain signals and WAV file I/O.

Signals are stored channel-major as float64 arrays of shape (M, T). WAV
files are read/written as 16-bit PCM or 32-bit float, mono or
multichannel, with the sample rate carried through.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile


@dataclass(frozen=True)
class TimeSignal:
    """Sampled real-valued waveform with sample-rate metadata.

    data: (M, T) float64, one row per channel.
    """

    data: np.ndarray
    sample_rate: int

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[np.newaxis, :]
        if arr.ndim != 2:
            raise ValueError(f"signal data must be 1-D or 2-D, got ndim={arr.ndim}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("signal contains non-finite samples")
        if self.sample_rate <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "data", arr)

    @property
    def num_channels(self) -> int:
        return self.data.shape[0]

    @property
    def num_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.num_samples / self.sample_rate

    def channel(self, m: int) -> np.ndarray:
        """Return channel m as a 1-D array view."""
        return self.data[m]


def read_wav(path) -> TimeSignal:
    """Read a 16-bit PCM or 32-bit float WAV file.

    PCM samples are scaled to [-1, 1); float samples are kept as-is.
    Returns a TimeSignal with shape (channels, samples).
    """
    rate, data = wavfile.read(path)
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise ValueError(f"unsupported WAV sample format {data.dtype} in {path}")
    if samples.ndim == 1:
        samples = samples[np.newaxis, :]
    else:
        samples = samples.T  # wavfile uses (samples, channels)
    return TimeSignal(samples, int(rate))


def write_wav(path, signal: TimeSignal, dtype: str = "float32") -> None:
    """Write a TimeSignal as WAV; dtype is 'float32' or 'int16'."""
    data = signal.data.T  # (samples, channels) on disk
    if data.shape[1] == 1:
        data = data[:, 0]
    if dtype == "float32":
        wavfile.write(path, signal.sample_rate, data.astype(np.float32))
    elif dtype == "int16":
        clipped = np.clip(data, -1.0, 32767.0 / 32768.0)
        wavfile.write(path, signal.sample_rate, np.round(clipped * 32768.0).astype(np.int16))
    else:
        raise ValueError(f"unsupported output dtype {dtype!r}")
