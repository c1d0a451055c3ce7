import numpy as np
import pytest
import scipy.signal

from phscrn.errors import DegenerateError, ValidationError
from phscrn.metrics import (
    EvaluationReport,
    SpectrumCurve,
    StructureGrid,
    anisotropic_structure,
    evaluate_pair,
    field_tpsd,
    nrmse_stable,
    welch_tpsd,
)

from conftest import DELTA, FS, make_series


class TestWelchTpsd:
    def test_matches_scipy_welch(self, rng):
        x = rng.standard_normal(4096)
        nb = 128
        curve = welch_tpsd(x, FS, nb)
        # same algorithm from an independent implementation: symmetric
        # window passed explicitly (scipy's named window is periodic)
        f, p = scipy.signal.welch(
            x - x.mean(), fs=FS, window=np.hamming(nb), nperseg=nb,
            noverlap=nb // 2, detrend=False, scaling="density",
        )
        np.testing.assert_allclose(curve.freqs, f, atol=1e-12)
        np.testing.assert_allclose(curve.power, p, rtol=1e-10)

    def test_sinusoid_peaks_at_its_frequency(self):
        nb, fs = 256, 1000.0
        t = np.arange(8 * nb) / fs
        f0 = 125.0  # exactly bin 32 of a 256-point block
        curve = welch_tpsd(np.sin(2 * np.pi * f0 * t), fs, nb)
        assert curve.freqs[np.argmax(curve.power)] == pytest.approx(f0)

    def test_white_noise_integral_recovers_variance(self, rng):
        sigma = 2.0
        x = sigma * rng.standard_normal(100_000)
        curve = welch_tpsd(x, FS, 256)
        df = FS / 256
        assert np.sum(curve.power) * df == pytest.approx(sigma**2, rel=0.05)

    def test_mean_removed_before_blocking(self, rng):
        x = rng.standard_normal(2048)
        a = welch_tpsd(x, FS, 128)
        b = welch_tpsd(x + 100.0, FS, 128)
        np.testing.assert_allclose(a.power, b.power, rtol=1e-8)

    def test_validation(self, rng):
        with pytest.raises(ValidationError):
            welch_tpsd(rng.standard_normal((4, 4)), FS, 4)
        with pytest.raises(ValidationError):
            welch_tpsd(rng.standard_normal(100), FS, 2)
        with pytest.raises(ValidationError):
            welch_tpsd(rng.standard_normal(100), FS, 128)


class TestFieldTpsd:
    def test_averages_per_pixel_curves(self, rng):
        frames = rng.standard_normal((300, 3, 4))
        s = make_series(frames)
        curve = field_tpsd(s, 64)
        per_pixel = [
            welch_tpsd(frames[:, y, x], FS, 64).power
            for y in range(3)
            for x in range(4)
        ]
        np.testing.assert_allclose(curve.power, np.mean(per_pixel, axis=0), rtol=1e-10)

    def test_masked_pixels_excluded(self, rng):
        frames = rng.standard_normal((300, 2, 2))
        frames[:, 1, 1] = 1e6 * rng.standard_normal(300)
        mask = np.ones((2, 2), dtype=bool)
        mask[1, 1] = False
        curve = field_tpsd(make_series(frames, mask=mask), 64)
        kept = [welch_tpsd(frames[:, y, x], FS, 64).power for y, x in [(0, 0), (0, 1), (1, 0)]]
        np.testing.assert_allclose(curve.power, np.mean(kept, axis=0), rtol=1e-10)

    def test_too_short(self, rng):
        with pytest.raises(ValidationError):
            field_tpsd(make_series(rng.standard_normal((10, 4, 4))), 64)


def brute_force_structure(frames, mask):
    """Direct pairwise evaluation of the normalized structure function."""
    nt, ny, nx = frames.shape
    mu = frames.mean(axis=0)
    sigma = frames.std(axis=0)
    psi = (frames - mu) / sigma
    vals = np.zeros((ny, 2 * nx - 1))
    cnt = np.zeros((ny, 2 * nx - 1), dtype=int)
    for j in range(ny):
        for i in range(-(nx - 1), nx):
            tot, c = 0.0, 0
            for y in range(ny):
                for x in range(nx):
                    y2, x2 = y + j, x + i
                    if 0 <= y2 < ny and 0 <= x2 < nx and mask[y, x] and mask[y2, x2]:
                        tot += np.mean((psi[:, y2, x2] - psi[:, y, x]) ** 2)
                        c += 1
            vals[j, nx - 1 + i] = tot / c if c else 0.0
            cnt[j, nx - 1 + i] = c
    return vals, cnt


class TestAnisotropicStructure:
    def test_matches_brute_force_oracle(self, rng):
        frames = rng.standard_normal((30, 7, 9))
        grid = anisotropic_structure(make_series(frames))
        vals, cnt = brute_force_structure(frames, np.ones((7, 9), dtype=bool))
        np.testing.assert_array_equal(grid.count, cnt)
        np.testing.assert_allclose(grid.values, vals, atol=1e-10)

    def test_matches_brute_force_with_mask(self, rng):
        frames = rng.standard_normal((20, 6, 8))
        mask = rng.random((6, 8)) > 0.3
        grid = anisotropic_structure(make_series(frames, mask=mask))
        vals, cnt = brute_force_structure(frames, mask)
        np.testing.assert_array_equal(grid.count, cnt)
        np.testing.assert_allclose(grid.values, vals, atol=1e-10)

    def test_zero_separation_is_exactly_zero(self, rng):
        grid = anisotropic_structure(make_series(rng.standard_normal((10, 5, 5))))
        assert grid.values[0, 4] == 0.0

    def test_counts_for_full_aperture(self, rng):
        ny, nx = 5, 7
        grid = anisotropic_structure(make_series(rng.standard_normal((4, ny, nx))))
        i, j = np.abs(grid.x_offsets), grid.y_offsets
        expected = np.outer(ny - j, nx - i)
        np.testing.assert_array_equal(grid.count, expected)

    def test_independent_pixels_approach_two(self, rng):
        frames = rng.standard_normal((4000, 6, 6))
        grid = anisotropic_structure(make_series(frames))
        off = grid.values[grid.count > 0]
        off = off[off > 0]  # drop the zero-separation cell
        assert np.mean(off) == pytest.approx(2.0, abs=0.02)

    def test_full_plane_symmetry(self, rng):
        grid = anisotropic_structure(make_series(rng.standard_normal((8, 4, 5))))
        full = grid.full_plane()
        assert full.shape == (7, 9)
        np.testing.assert_allclose(full, full[::-1, ::-1], atol=1e-12)

    def test_constant_pixel_raises_with_location(self):
        frames = np.random.default_rng(0).standard_normal((6, 4, 4))
        frames[:, 2, 1] = 7.0
        with pytest.raises(DegenerateError, match=r"y=2, x=1"):
            anisotropic_structure(make_series(frames))

    def test_values_bounded(self, rng):
        frames = rng.standard_normal((50, 8, 8))
        grid = anisotropic_structure(make_series(frames))
        assert np.all(grid.values >= 0.0) and np.all(grid.values <= 4.0 + 1e-9)


class TestNrmseStable:
    def test_identical_inputs_zero(self, rng):
        x = rng.standard_normal(100)
        assert nrmse_stable(x, x) == 0.0

    def test_hand_computed_example(self):
        ref = np.arange(101, dtype=float)  # P95 - P5 = 90 exactly
        cand = ref + 9.0
        assert nrmse_stable(ref, cand) == pytest.approx(0.1, rel=1e-12)

    def test_offset_scaling(self, rng):
        ref = rng.standard_normal(1000)
        e1 = nrmse_stable(ref, ref + 1.0)
        e2 = nrmse_stable(ref, ref + 2.0)
        assert e2 == pytest.approx(2 * e1, rel=1e-12)

    def test_constant_reference_raises(self):
        with pytest.raises(DegenerateError):
            nrmse_stable(np.full(10, 3.0), np.arange(10.0))

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            nrmse_stable(np.zeros(4), np.zeros(5))


class TestEvaluatePair:
    def _series(self, rng, nt=400, ny=8, nx=8):
        # temporally smoothed so per-pixel sigma is well defined and the
        # spectra are non-flat
        raw = rng.standard_normal((nt + 20, ny, nx))
        frames = np.cumsum(raw, axis=0)[20:] / 10.0
        return make_series(frames)

    def test_self_comparison_scores_zero(self, rng):
        s = self._series(rng)
        rep = evaluate_pair(s, make_series(s.frames.copy()), nb_phase=64, nb_slope=32)
        for v in rep.scalars().values():
            assert v == pytest.approx(0.0, abs=1e-12)

    def test_ensemble_averaging(self, rng):
        meas = self._series(rng)
        a = self._series(rng)
        b = self._series(rng)
        rep = evaluate_pair(meas, [a, b], nb_phase=64, nb_slope=32)
        mean_phase = (field_tpsd(a, 64).power + field_tpsd(b, 64).power) / 2
        np.testing.assert_allclose(rep.synthetic_phase_tpsd.power, mean_phase, rtol=1e-12)
        ga = anisotropic_structure(a).values
        gb = anisotropic_structure(b).values
        np.testing.assert_allclose(rep.synthetic_structure.values, (ga + gb) / 2, rtol=1e-10)

    def test_oversized_synthetic_cropped(self, rng):
        meas = self._series(rng, ny=6, nx=7)
        syn = self._series(rng, ny=10, nx=10)
        rep = evaluate_pair(meas, syn, nb_phase=64, nb_slope=32)
        cropped = make_series(syn.frames[:, :6, :7])
        np.testing.assert_allclose(
            rep.synthetic_phase_tpsd.power, field_tpsd(cropped, 64).power, rtol=1e-12
        )

    def test_undersized_synthetic_rejected(self, rng):
        meas = self._series(rng, ny=8, nx=8)
        syn = self._series(rng, ny=6, nx=6)
        with pytest.raises(ValidationError):
            evaluate_pair(meas, syn, nb_phase=64, nb_slope=32)

    def test_metadata_mismatch_rejected(self, rng):
        meas = self._series(rng)
        syn = self._series(rng)
        bad = make_series(syn.frames, delta=2 * DELTA)
        with pytest.raises(ValidationError):
            evaluate_pair(meas, bad, nb_phase=64, nb_slope=32)

    def test_empty_ensemble_rejected(self, rng):
        with pytest.raises(ValidationError):
            evaluate_pair(self._series(rng), [], nb_phase=64, nb_slope=32)

    def test_structure_scored_on_square_root(self, rng):
        meas = self._series(rng)
        syn = self._series(rng)
        rep = evaluate_pair(meas, syn, nb_phase=64, nb_slope=32)
        expected = nrmse_stable(
            np.sqrt(rep.measured_structure.values), np.sqrt(rep.synthetic_structure.values)
        )
        assert rep.nrmse_structure == pytest.approx(expected, rel=1e-12)
