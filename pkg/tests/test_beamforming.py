import numpy as np
import pytest

from beamlab.beamforming import (
    StageWeights,
    apply_stage1,
    apply_stage2,
    load_weights,
    mpdr_weights,
    mvdr_weights,
    save_weights,
)
from beamlab.covariance import noise_covariance, noisy_covariance
from beamlab.errors import ConstraintError, ShapeError
from beamlab.stft import Spectrogram, StftConfig
from tests.test_covariance import CFG, complex_frames, random_spd


def random_rtf(rng, k, m, ref=0):
    h = rng.standard_normal((k, m)) + 1j * rng.standard_normal((k, m))
    h[:, ref] = 1.0
    return h


class TestSolvers:
    def test_delay_and_sum_limit(self):
        phi = np.broadcast_to(np.eye(4, dtype=complex), (3, 4, 4))
        h = np.ones((3, 4), dtype=complex)
        w = mvdr_weights(phi, h)
        np.testing.assert_allclose(w, 0.25, rtol=0, atol=1e-14)

    def test_hand_case_2x2(self):
        phi = np.diag([1.0, 2.0]).astype(complex)
        h = np.array([1.0, 1.0], dtype=complex)
        w = mvdr_weights(phi, h)
        np.testing.assert_allclose(w, [2 / 3, 1 / 3], rtol=0, atol=1e-14)

    def test_distortionless_random(self, rng):
        phi = random_spd(rng, 128, 4)
        h = random_rtf(rng, 128, 4)
        w = mvdr_weights(phi, h)
        gains = np.einsum("km,km->k", w.conj(), h)
        assert np.abs(gains - 1.0).max() < 1e-10

    def test_mvdr_optimality(self, rng):
        # any other distortionless filter has no smaller output variance
        m = 4
        phi = random_spd(rng, 1, m)[0]
        h = random_rtf(rng, 1, m)[0]
        w = mvdr_weights(phi, h)
        base = np.real(w.conj() @ phi @ w)
        proj = np.eye(m) - np.outer(h, h.conj()) / np.vdot(h, h)
        for _ in range(100):
            d = rng.standard_normal(m) + 1j * rng.standard_normal(m)
            w2 = w + proj @ d
            np.testing.assert_allclose(np.vdot(w2, h), 1.0, atol=1e-12)
            assert np.real(w2.conj() @ phi @ w2) >= base - 1e-10

    def test_mpdr_on_noise_only_frames_matches_mvdr(self, rng):
        spec = complex_frames(rng, 3, 9, 200)
        phi_a = noise_covariance(spec, 200)   # all frames via the head estimator
        phi_b = noisy_covariance(spec, 0)     # all frames via the tail estimator
        h = random_rtf(rng, 9, 3)
        np.testing.assert_allclose(mpdr_weights(phi_b, h), mvdr_weights(phi_a, h),
                                   rtol=0, atol=1e-8)

    def test_mpdr_identity_matched_filter(self, rng):
        h = random_rtf(rng, 5, 4)
        eye = np.broadcast_to(np.eye(4, dtype=complex), (5, 4, 4))
        w = mpdr_weights(eye, h)
        expected = h / np.einsum("km,km->k", h.conj(), h)[:, None]
        np.testing.assert_allclose(w, expected, rtol=0, atol=1e-12)

    def test_singular_covariance_raises(self):
        phi = np.zeros((1, 3, 3), dtype=complex)
        with pytest.raises(ValueError, match="singular"):
            mvdr_weights(phi, np.ones((1, 3), dtype=complex))

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeError):
            mvdr_weights(random_spd(rng, 4, 3), np.ones((4, 2), dtype=complex))


class TestApply:
    def test_identity_beamformer(self, rng):
        spec = complex_frames(rng, 4, 9, 20)
        w = np.zeros((9, 4), dtype=complex)
        w[:, 2] = 1.0
        out = apply_stage1(w, spec)
        assert out.data.shape == (1, 9, 20)
        np.testing.assert_array_equal(out.data[0], spec.data[2])

    def test_noise_free_distortionless(self, rng):
        k, m, l = 9, 4, 30
        h = random_rtf(rng, k, m)
        h[0] = h[0].real
        h[-1] = h[-1].real
        d = rng.standard_normal((k, l)) + 1j * rng.standard_normal((k, l))
        y = Spectrogram(np.einsum("km,kl->mkl", h, d), CFG)
        phi = random_spd(rng, k, m)
        phi[0] = phi[0].real  # covariances of real signals are real at DC/Nyquist
        phi[-1] = phi[-1].real
        w = mvdr_weights(phi, h)
        out = apply_stage1(w, y)
        assert np.abs(out.data[0] - d).max() < 1e-9

    def test_linear_in_input(self, rng):
        spec = complex_frames(rng, 3, 9, 10)
        w = random_rtf(rng, 9, 3)
        w[0] = w[0].real
        w[-1] = w[-1].real
        scaled = Spectrogram(3.7 * spec.data, CFG)
        np.testing.assert_allclose(apply_stage1(w, scaled).data,
                                   3.7 * apply_stage1(w, spec).data, rtol=0, atol=1e-12)

    def test_stage2_identity_and_zero(self, rng):
        spec = complex_frames(rng, 1, 9, 12)
        ones = np.ones((9, 12), dtype=complex)
        np.testing.assert_array_equal(apply_stage2(ones, spec).data, spec.data)
        assert np.all(apply_stage2(np.zeros((9, 12), dtype=complex), spec).data == 0)

    def test_stage2_elementwise_oracle(self, rng):
        spec = complex_frames(rng, 1, 9, 12)
        w2 = rng.standard_normal((9, 12)) + 1j * rng.standard_normal((9, 12))
        out = apply_stage2(w2, spec)
        for k in range(9):
            for l in range(12):
                expected = np.conj(w2[k, l]) * spec.data[0, k, l]
                assert abs(out.data[0, k, l] - expected) < 1e-13

    def test_composition_equals_combined_filter(self, rng):
        spec = complex_frames(rng, 4, 9, 15)
        w1 = random_rtf(rng, 9, 4)
        w1[0] = w1[0].real
        w1[-1] = w1[-1].real
        w2 = rng.standard_normal((9, 15)) + 1j * rng.standard_normal((9, 15))
        two_stage = apply_stage2(w2, apply_stage1(w1, spec)).data[0]
        combined = np.zeros((9, 15), dtype=complex)
        for k in range(9):
            for l in range(15):
                w = w1[k] * w2[k, l]
                combined[k, l] = np.vdot(w, spec.data[:, k, l])
        np.testing.assert_allclose(two_stage, combined, rtol=0, atol=1e-12)

    def test_shape_checks(self, rng):
        spec = complex_frames(rng, 3, 9, 10)
        with pytest.raises(ShapeError):
            apply_stage1(np.ones((9, 2), dtype=complex), spec)
        with pytest.raises(ShapeError):
            apply_stage2(np.ones((9, 9), dtype=complex), apply_stage1(
                np.ones((9, 3), dtype=complex), spec))


class TestStageWeights:
    def test_edge_realness_enforced(self, rng):
        w1 = random_rtf(rng, 9, 4)
        w1[0, 1] = 1.0 + 0.5j
        with pytest.raises(ConstraintError, match="real"):
            StageWeights(w1=w1, provenance="mvdr")

    def test_edge_dust_zeroed(self, rng):
        w1 = random_rtf(rng, 9, 4)
        w1[0] = w1[0].real + 1e-12j
        w1[-1] = w1[-1].real
        sw = StageWeights(w1=w1, provenance="mvdr")
        assert np.all(sw.w1[0].imag == 0) and np.all(sw.w1[-1].imag == 0)

    def test_learned_mask_bound(self, rng):
        w1 = np.ones((9, 2), dtype=complex)
        w2 = np.full((9, 5), 1.5, dtype=complex)
        with pytest.raises(ConstraintError, match="magnitude"):
            StageWeights(w1=w1, w2=w2, provenance="learned")

    def test_bad_provenance(self):
        with pytest.raises(ValueError):
            StageWeights(w1=np.ones((4, 2), dtype=complex), provenance="oracle")


class TestInterchange:
    def _weights(self, rng, with_mask=True):
        k, m, l = 257, 4, 31
        w1 = (rng.standard_normal((k, m)) + 1j * rng.standard_normal((k, m))).astype(np.complex64)
        w1[0] = w1[0].real
        w1[-1] = w1[-1].real
        w2 = None
        if with_mask:
            re = rng.uniform(-0.7, 0.7, (k, l))
            im = rng.uniform(-0.7, 0.7, (k, l))
            w2 = ((re + 1j * im) / np.sqrt(2)).astype(np.complex64).astype(np.complex128)
        return StageWeights(w1=w1.astype(np.complex128), w2=w2, provenance="learned")

    def test_binary_roundtrip_exact(self, rng, tmp_path):
        sw = self._weights(rng)
        path = tmp_path / "w.exbf"
        save_weights(sw, path)
        back = load_weights(path)
        assert np.array_equal(back.w1, sw.w1)
        assert np.array_equal(back.w2, sw.w2)
        # a second save must reproduce the file byte for byte
        save_weights(back, tmp_path / "w2.exbf")
        assert (tmp_path / "w.exbf").read_bytes() == (tmp_path / "w2.exbf").read_bytes()

    def test_stage1_only_flags(self, rng, tmp_path):
        sw = self._weights(rng, with_mask=False)
        path = tmp_path / "w1only.exbf"
        save_weights(sw, path)
        blob = path.read_bytes()
        assert blob[:4] == b"EXBF"
        flags = int.from_bytes(blob[20:24], "little")
        assert flags & 1 == 0
        assert load_weights(path).w2 is None

    def test_json_mirror(self, rng, tmp_path):
        sw = self._weights(rng)
        path = tmp_path / "w.json"
        save_weights(sw, path)
        back = load_weights(path)
        np.testing.assert_allclose(back.w1, sw.w1, rtol=0, atol=1e-7)
        np.testing.assert_allclose(back.w2, sw.w2, rtol=0, atol=1e-7)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.exbf"
        path.write_bytes(b"NOPE" + b"\0" * 64)
        with pytest.raises(ValueError, match="magic"):
            load_weights(path)

    def test_size_mismatch(self, rng, tmp_path):
        sw = self._weights(rng)
        path = tmp_path / "w.exbf"
        save_weights(sw, path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValueError, match="size"):
            load_weights(path)

    def test_realness_violation_rejected(self, rng, tmp_path):
        sw = self._weights(rng)
        path = tmp_path / "w.exbf"
        save_weights(sw, path)
        blob = bytearray(path.read_bytes())
        # corrupt the imaginary part of the first DC weight
        imag_offset = 24 + 4
        blob[imag_offset : imag_offset + 4] = np.float32(0.25).tobytes()
        path.write_bytes(bytes(blob))
        with pytest.raises(ConstraintError, match="real"):
            load_weights(path)

    def test_mask_bound_rejected_on_load(self, rng, tmp_path):
        k, m, l = 9, 2, 4
        w1 = np.ones((k, m), dtype=complex)
        w2 = np.full((k, l), 0.5 + 0.0j)
        sw = StageWeights(w1=w1, w2=w2, provenance="learned")
        path = tmp_path / "w.exbf"
        save_weights(sw, path)
        blob = bytearray(path.read_bytes())
        off = 24 + 8 * k * m  # first mask entry, real part
        blob[off : off + 4] = np.float32(1.5).tobytes()
        path.write_bytes(bytes(blob))
        with pytest.raises(ConstraintError, match="magnitude"):
            load_weights(path)
