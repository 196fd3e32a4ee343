import numpy as np
import pytest

from beamlab.audio import TimeSignal
from beamlab.errors import ConstraintError, ShapeError
from beamlab.stft import (
    REALNESS_TOL,
    Spectrogram,
    StftConfig,
    analyze,
    cola_deviation,
    pack_real_imag,
    synthesize,
    unpack_real_imag,
)


def _interior(total, cfg):
    return slice(cfg.frame_len, total - cfg.frame_len)


class TestConfig:
    def test_defaults(self):
        cfg = StftConfig()
        assert cfg.frame_len == 512 and cfg.hop == 128
        assert cfg.num_bins == 257

    @pytest.mark.parametrize("window", ["sqrt_hann", "hann"])
    def test_cola_constant(self, window):
        cfg = StftConfig(window=window)
        assert cola_deviation(cfg) <= 1e-12

    def test_hop_must_divide(self):
        with pytest.raises(ValueError):
            StftConfig(frame_len=512, hop=100)

    def test_hop_exceeds_frame(self):
        with pytest.raises(ValueError):
            StftConfig(frame_len=128, hop=256)

    def test_unknown_window(self):
        with pytest.raises(ValueError):
            StftConfig(window="boxcar")


class TestAnalyze:
    def test_default_shape_4s(self, rng):
        sig = TimeSignal(rng.standard_normal((4, 64000)), 16000)
        spec = analyze(sig)
        assert spec.data.shape == (4, 257, 497)

    def test_zero_signal(self):
        spec = analyze(TimeSignal(np.zeros((2, 4096)), 16000))
        assert np.all(spec.data == 0)

    def test_sinusoid_peak_bin(self):
        # oracle: windowed DFT of the sinusoid, computed directly per frame
        cfg = StftConfig()
        t = np.arange(16000) / 16000.0
        x = np.sin(2 * np.pi * 1000.0 * t)
        win = cfg.analysis_window()
        frame0 = x[: cfg.frame_len] * win
        oracle = np.abs(np.fft.rfft(frame0))
        assert np.argmax(oracle) == round(1000 * 512 / 16000) == 32

        spec = analyze(TimeSignal(x, 16000), cfg)
        mags = np.abs(spec.data[0])
        assert np.all(np.argmax(mags, axis=0) == 32)
        np.testing.assert_allclose(mags[:, 0], oracle, rtol=0, atol=1e-12)

    def test_edge_bins_real(self, rng):
        spec = analyze(TimeSignal(rng.standard_normal(8000), 16000))
        assert np.all(spec.data[:, 0, :].imag == 0)
        assert np.all(spec.data[:, -1, :].imag == 0)

    def test_too_short(self):
        with pytest.raises(ValueError, match="shorter"):
            analyze(TimeSignal(np.zeros(100), 16000))

    def test_rate_mismatch(self):
        with pytest.raises(ValueError, match="rate"):
            analyze(TimeSignal(np.zeros(4096), 8000), StftConfig(sample_rate=16000))

    def test_linearity(self, rng):
        cfg = StftConfig()
        x = TimeSignal(rng.standard_normal(8000), 16000)
        y = TimeSignal(rng.standard_normal(8000), 16000)
        combo = TimeSignal(2.5 * x.data - 1.3 * y.data, 16000)
        lhs = analyze(combo, cfg).data
        rhs = 2.5 * analyze(x, cfg).data - 1.3 * analyze(y, cfg).data
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-10)


class TestSynthesize:
    def test_roundtrip_interior(self, rng):
        cfg = StftConfig()
        sig = TimeSignal(rng.standard_normal((3, 16000)), 16000)
        rec = synthesize(analyze(sig, cfg))
        sl = _interior(rec.num_samples, cfg)
        err = np.linalg.norm(rec.data[:, sl] - sig.data[:, : rec.num_samples][:, sl])
        assert err / np.linalg.norm(sig.data[:, sl]) < 1e-10

    def test_roundtrip_vs_overlap_add_oracle(self, rng):
        # naive per-frame inverse DFT + overlap-add, written independently
        cfg = StftConfig()
        sig = TimeSignal(rng.standard_normal((8, 16000)), 16000)
        spec = analyze(sig, cfg)
        n, hop, l = cfg.frame_len, cfg.hop, spec.num_frames
        w = cfg.synthesis_window()
        num = np.zeros((8, (l - 1) * hop + n))
        den = np.zeros((l - 1) * hop + n)
        for i in range(l):
            for m in range(8):
                frame = np.fft.irfft(spec.data[m, :, i], n=n)
                num[m, i * hop : i * hop + n] += w * frame
            den[i * hop : i * hop + n] += cfg.analysis_window() * w
        good = den > 1e-9
        oracle = np.zeros_like(num)
        oracle[:, good] = num[:, good] / den[good]

        rec = synthesize(spec)
        np.testing.assert_allclose(rec.data[:, good], oracle[:, good], rtol=0, atol=1e-12)
        sl = _interior(rec.num_samples, cfg)
        rel = np.linalg.norm(rec.data[:, sl] - sig.data[:, sl]) / np.linalg.norm(sig.data[:, sl])
        assert rel < 1e-10

    def test_analyze_synthesize_analyze_identity(self, rng):
        cfg = StftConfig()
        sig = TimeSignal(rng.standard_normal(12000), 16000)
        spec = analyze(sig, cfg)
        again = analyze(synthesize(spec), cfg)
        np.testing.assert_allclose(again.data, spec.data, rtol=0, atol=1e-12)

    def test_nonreal_dc_rejected(self, rng):
        cfg = StftConfig()
        spec = analyze(TimeSignal(rng.standard_normal(4096), 16000), cfg)
        bad = spec.data.copy()
        bad[0, 0, 0] = 0.5j
        with pytest.raises(ConstraintError):
            synthesize(Spectrogram(bad, cfg))

    def test_tolerated_imag_dust(self, rng):
        cfg = StftConfig()
        spec = analyze(TimeSignal(rng.standard_normal(4096), 16000), cfg)
        dusty = spec.data.copy()
        dusty[0, 0, :] += 1j * (REALNESS_TOL / 10)
        out = synthesize(Spectrogram(dusty, cfg))
        assert np.all(np.isfinite(out.data))


class TestPacking:
    def test_shape(self, rng):
        sig = TimeSignal(rng.standard_normal((4, 64000)), 16000)
        packed = pack_real_imag(analyze(sig))
        assert packed.shape == (4, 514, 497)
        assert packed.dtype == np.float64

    def test_real_spectrogram_zero_imag_rows(self):
        cfg = StftConfig(frame_len=16, hop=4, sample_rate=16000)
        data = np.ones((2, 9, 5), dtype=complex)
        packed = pack_real_imag(Spectrogram(data, cfg))
        assert np.all(packed[:, 9:, :] == 0)

    def test_roundtrip_bit_exact(self, rng):
        cfg = StftConfig(frame_len=16, hop=4)
        data = rng.standard_normal((3, 9, 7)) + 1j * rng.standard_normal((3, 9, 7))
        spec = Spectrogram(data, cfg)
        back = unpack_real_imag(pack_real_imag(spec), cfg)
        assert np.array_equal(back.data, spec.data)

    def test_odd_axis_rejected(self):
        with pytest.raises(ShapeError):
            unpack_real_imag(np.zeros((2, 513, 4)))


class TestEnergy:
    def test_parseval_with_window_compensation(self, rng):
        cfg = StftConfig()
        x = rng.standard_normal(20000)
        spec = analyze(TimeSignal(x, 16000), cfg).data[0]
        k = cfg.num_bins
        per_frame = (
            np.abs(spec[0]) ** 2 + np.abs(spec[k - 1]) ** 2
            + 2 * np.sum(np.abs(spec[1 : k - 1]) ** 2, axis=0)
        ) / cfg.frame_len
        spec_energy = per_frame.sum()

        w2 = cfg.analysis_window() ** 2
        comp = np.zeros(x.size)
        for i in range(spec.shape[1]):
            comp[i * cfg.hop : i * cfg.hop + cfg.frame_len] += w2
        time_energy = np.sum(x**2 * comp)
        assert abs(spec_energy - time_energy) / time_energy < 1e-8
