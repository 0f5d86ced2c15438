import math

import numpy as np
import pytest

from footcalib import (
    AngularVelocitySeries,
    BasisSpec,
    CalibrationOptions,
    CalibrationResult,
    Frame,
    GroundTruth,
    IllConditionedError,
    NoiseModel,
    OffsetSearch,
    RankDeficiencyError,
    calibrate,
    calibration_geometry,
    covariance_set,
    estimate_rotation,
    estimate_time_offset,
    eval_basis,
    random_ground_truth,
    rotation_error,
    shift_series,
    simulate_imu,
    trace_correlation,
    trajectory_to_foot_velocity,
)
from conftest import brute_force_pair_covariance

RATE = 500.0

# Hand-picked low-condition-number basis amplitudes; calibration tests
# should not depend on optimizer behaviour.
GOOD_SPEC = BasisSpec(hip_rate_coeffs=[1.2, 0.8, 5.3], pitch_rate_coeffs=[3.7, 0.4, 0.3],
                      base_frequency=math.pi, period=2.0)


@pytest.fixture(scope="module")
def foot_series():
    """Two closed periods of the hand-picked calibration motion at 500 Hz."""
    grid = np.arange(2 * int(round(GOOD_SPEC.period * RATE)) + 1) / RATE
    traj = eval_basis(GOOD_SPEC, grid)
    return trajectory_to_foot_velocity(calibration_geometry(), traj)


def options(**kwargs):
    defaults = dict(offset_range=0.25, window_samples=int(round(GOOD_SPEC.period * RATE)))
    defaults.update(kwargs)
    return CalibrationOptions(**defaults)


class TestShiftSeries:
    def test_zero_shift_is_identity(self, foot_series):
        shifted = shift_series(foot_series, 0.0)
        np.testing.assert_allclose(shifted.samples, foot_series.samples, atol=1e-15)
        assert shifted.frame is foot_series.frame

    def test_one_interval_shift_advances_by_one_index(self, foot_series):
        dt = foot_series.uniform_dt()
        shifted = shift_series(foot_series, dt)
        np.testing.assert_allclose(shifted.samples[:-1], foot_series.samples[1:], atol=1e-12)

    @pytest.mark.parametrize("t_d", [0.01, 0.0037])
    def test_sinusoid_matches_analytic_phase(self, t_d):
        # 2 Hz sinusoid at 500 Hz; linear interpolation error is bounded by
        # (w * dt)^2 / 8 of the amplitude
        t = np.arange(2000) / RATE
        w = 2 * math.pi * 2.0
        samples = np.column_stack([np.sin(w * t), np.cos(w * t), 0.5 * np.sin(w * t + 1.0)])
        series = AngularVelocitySeries(t, samples, Frame.FOOT_KINEMATIC)
        shifted = shift_series(series, t_d)
        interior = t + t_d <= t[-1]
        bound = (w / RATE) ** 2 / 8 + 1e-12
        expected = np.column_stack([
            np.sin(w * (t + t_d)), np.cos(w * (t + t_d)), 0.5 * np.sin(w * (t + t_d) + 1.0)])
        assert np.max(np.abs(shifted.samples[interior] - expected[interior])) <= bound

    def test_shift_beyond_span_rejected(self, foot_series):
        with pytest.raises(ValueError):
            shift_series(foot_series, foot_series.span + 1.0)


def series_pair(imu_samples, foot_samples):
    n = len(imu_samples)
    t = np.arange(n) / RATE
    return (AngularVelocitySeries(t, imu_samples, Frame.FOOT_IMU),
            AngularVelocitySeries(t, foot_samples, Frame.FOOT_KINEMATIC))


class TestCovarianceSet:
    def test_identical_series_collapse(self):
        rng = np.random.default_rng(0)
        samples = rng.normal(size=(40, 3))
        imu, foot = series_pair(samples, samples.copy())
        cov = covariance_set(imu, foot)
        np.testing.assert_array_equal(cov.sigma_ii, cov.sigma_ff)
        np.testing.assert_allclose(cov.sigma_if, cov.sigma_ff, atol=1e-15)
        np.testing.assert_allclose(cov.sigma_fi, cov.sigma_ff, atol=1e-15)

    def test_constant_foot_zeroes_foot_blocks(self):
        rng = np.random.default_rng(1)
        imu, foot = series_pair(rng.normal(size=(30, 3)), np.tile([0.2, -0.4, 0.9], (30, 1)))
        cov = covariance_set(imu, foot)
        np.testing.assert_allclose(cov.sigma_ff, np.zeros((3, 3)), atol=1e-30)
        np.testing.assert_allclose(cov.sigma_if, np.zeros((3, 3)), atol=1e-30)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            x = rng.normal(size=(50, 3))
            y = rng.normal(size=(50, 3))
            imu, foot = series_pair(x, y)
            cov = covariance_set(imu, foot)
            scale = np.abs(cov.sigma_if).max()
            np.testing.assert_allclose(cov.sigma_ii, brute_force_pair_covariance(x, x),
                                       rtol=1e-12, atol=1e-12 * scale)
            np.testing.assert_allclose(cov.sigma_ff, brute_force_pair_covariance(y, y),
                                       rtol=1e-12, atol=1e-12 * scale)
            np.testing.assert_allclose(cov.sigma_if, brute_force_pair_covariance(x, y),
                                       rtol=1e-12, atol=1e-12 * scale)

    def test_cross_blocks_are_exact_transposes(self):
        rng = np.random.default_rng(3)
        imu, foot = series_pair(rng.normal(size=(25, 3)), rng.normal(size=(25, 3)))
        cov = covariance_set(imu, foot)
        assert np.array_equal(cov.sigma_fi, cov.sigma_if.T)

    def test_auto_blocks_are_positive_semidefinite(self):
        rng = np.random.default_rng(4)
        imu, foot = series_pair(rng.normal(size=(60, 3)), rng.normal(size=(60, 3)))
        cov = covariance_set(imu, foot)
        for sigma in (cov.sigma_ii, cov.sigma_ff):
            eigenvalues = np.linalg.eigvalsh(sigma)
            assert eigenvalues.min() >= -1e-9 * eigenvalues.max()

    def test_length_mismatch_rejected(self):
        rng = np.random.default_rng(5)
        imu, _ = series_pair(rng.normal(size=(10, 3)), rng.normal(size=(10, 3)))
        _, foot = series_pair(rng.normal(size=(12, 3)), rng.normal(size=(12, 3)))
        with pytest.raises(ValueError):
            covariance_set(imu, foot)


class TestTraceCorrelation:
    def test_exact_rotation_gives_unity(self, foot_series):
        truth = GroundTruth.from_euler_deg(40.0, -30.0, 75.0)
        imu = simulate_imu(foot_series, truth, NoiseModel(0.0, RATE))
        r = trace_correlation(covariance_set(imu, foot_series))
        assert r == pytest.approx(1.0, abs=1e-9)

    def test_independent_noise_is_uncorrelated(self):
        rng = np.random.default_rng(8)
        imu, foot = series_pair(rng.normal(size=(10_000, 3)), rng.normal(size=(10_000, 3)))
        assert trace_correlation(covariance_set(imu, foot)) < 0.05

    def test_singular_auto_covariance_rejected(self):
        rng = np.random.default_rng(9)
        foot_samples = np.zeros((100, 3))
        foot_samples[:, 2] = np.sin(np.arange(100) / 10.0)
        imu, foot = series_pair(rng.normal(size=(100, 3)), foot_samples)
        with pytest.raises(IllConditionedError):
            trace_correlation(covariance_set(imu, foot))

    def test_invariant_under_common_rotation(self, foot_series):
        truth = GroundTruth.from_euler_deg(15.0, 25.0, -60.0)
        imu = simulate_imu(foot_series, truth, NoiseModel(0.02, RATE, seed=12))
        base = trace_correlation(covariance_set(imu, foot_series))
        fixed = GroundTruth.from_euler_deg(-50.0, 20.0, 130.0).rotation
        imu_rot = AngularVelocitySeries(imu.time_grid, imu.samples @ fixed.T, Frame.FOOT_IMU)
        foot_rot = AngularVelocitySeries(foot_series.time_grid,
                                         foot_series.samples @ fixed.T, Frame.FOOT_KINEMATIC)
        rotated = trace_correlation(covariance_set(imu_rot, foot_rot))
        assert rotated == pytest.approx(base, abs=1e-9)


class TestEstimateTimeOffset:
    def test_zero_offset_noiseless(self, foot_series):
        truth = GroundTruth.from_euler_deg(10.0, 20.0, 30.0, time_offset=0.0)
        imu = simulate_imu(foot_series, truth, NoiseModel(0.0, RATE))
        estimate = estimate_time_offset(imu, foot_series,
                                        OffsetSearch(offset_range=0.25, step=1 / RATE))
        assert estimate.time_offset == 0.0

    def test_twenty_ms_offset_within_one_step(self, foot_series):
        truth = GroundTruth.from_euler_deg(10.0, 20.0, 30.0, time_offset=0.020)
        imu = simulate_imu(foot_series, truth, NoiseModel(0.0, RATE))
        estimate = estimate_time_offset(imu, foot_series,
                                        OffsetSearch(offset_range=0.1, step=0.001, refine=False))
        assert abs(estimate.time_offset - 0.020) <= 0.001

    def test_scan_maximum_matches_estimate(self, foot_series):
        truth = GroundTruth.from_euler_deg(5.0, -15.0, 40.0, time_offset=0.016)
        imu = simulate_imu(foot_series, truth, NoiseModel(0.01, RATE, seed=3))
        estimate = estimate_time_offset(imu, foot_series,
                                        OffsetSearch(offset_range=0.25, step=1 / RATE))
        scan = estimate.scan
        best = scan[np.nanargmax(scan[:, 1]), 0]
        assert best == estimate.time_offset

    def test_range_beyond_quarter_span_rejected(self, foot_series):
        with pytest.raises(ValueError):
            estimate_time_offset(foot_series, foot_series,
                                 OffsetSearch(offset_range=foot_series.span / 2, step=0.01))

    def test_bad_step_rejected(self):
        with pytest.raises(ValueError):
            OffsetSearch(offset_range=0.1, step=0.0)


class TestEstimateRotation:
    def test_identical_series_give_identity(self, foot_series):
        imu = AngularVelocitySeries(foot_series.time_grid, foot_series.samples.copy(),
                                    Frame.FOOT_IMU)
        rotation = estimate_rotation(covariance_set(imu, foot_series))
        np.testing.assert_allclose(rotation, np.eye(3), atol=1e-9)

    def test_recovers_injected_rotation(self, foot_series):
        truth = GroundTruth.from_euler_deg(30.0, 45.0, 60.0)
        imu = simulate_imu(foot_series, truth, NoiseModel(0.0, RATE))
        rotation = estimate_rotation(covariance_set(imu, foot_series))
        assert rotation_error(rotation, truth.euler_deg).degrees <= 1e-6

    def test_matrix_inverse_convention_is_transpose(self, foot_series):
        truth = GroundTruth.from_euler_deg(-20.0, 35.0, 80.0)
        imu = simulate_imu(foot_series, truth, NoiseModel(0.01, RATE, seed=7))
        cov = covariance_set(imu, foot_series)
        best_fit = estimate_rotation(cov, convention="best_fit")
        inverse = estimate_rotation(cov, convention="matrix_inverse")
        np.testing.assert_array_equal(inverse, best_fit.T)

    def test_best_fit_minimizes_prediction_residual(self, foot_series):
        # the returned convention is the one mapping IMU samples onto foot
        # samples with the smaller squared residual
        truth = GroundTruth.from_euler_deg(25.0, -50.0, 140.0)
        imu = simulate_imu(foot_series, truth, NoiseModel(0.005, RATE, seed=21))
        cov = covariance_set(imu, foot_series)
        best_fit = estimate_rotation(cov, convention="best_fit")
        inverse = estimate_rotation(cov, convention="matrix_inverse")

        def residual(rotation):
            return float(np.sum((imu.samples @ rotation.T - foot_series.samples) ** 2))

        assert residual(best_fit) < residual(inverse)

    def test_rank_deficiency_names_axis(self):
        t = np.arange(200) / RATE
        samples = np.zeros((200, 3))
        samples[:, 2] = np.sin(2 * math.pi * t)
        imu = AngularVelocitySeries(t, samples, Frame.FOOT_IMU)
        foot = AngularVelocitySeries(t, samples.copy(), Frame.FOOT_KINEMATIC)
        with pytest.raises(RankDeficiencyError) as excinfo:
            estimate_rotation(covariance_set(imu, foot))
        assert excinfo.value.axis in ("x", "y")


class TestCalibrate:
    def test_noiseless_identity_round_trip(self, foot_series):
        truth = GroundTruth(rotation=np.eye(3), time_offset=0.0)
        imu = simulate_imu(foot_series, truth, NoiseModel(0.0, RATE))
        result = calibrate(imu, foot_series, options())
        np.testing.assert_allclose(result.rotation, np.eye(3), atol=1e-9)
        assert result.time_offset == 0.0
        assert result.correlation == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("seed", range(5))
    def test_noiseless_consistency_recovers_injected_truth(self, foot_series, seed):
        # primary oracle-equivalence property: with zero noise and an
        # on-grid offset, calibration reproduces the injected truth exactly
        rng = np.random.default_rng(seed)
        truth = random_ground_truth(rng, offset_range=0.1, grid_step=1 / RATE)
        imu = simulate_imu(foot_series, truth, NoiseModel(0.0, RATE))
        result = calibrate(imu, foot_series, options())
        assert result.time_offset == truth.time_offset
        assert rotation_error(result.rotation, truth.euler_deg).degrees <= 1e-6

    def test_noisy_truth_recovery(self, foot_series):
        truth = GroundTruth.from_euler_deg(33.0, -21.0, 95.0, time_offset=0.042)
        imu = simulate_imu(foot_series, truth, NoiseModel(0.03, RATE, seed=5))
        result = calibrate(imu, foot_series, options())
        assert rotation_error(result.rotation, truth.euler_deg).degrees <= 1.0
        assert abs(result.time_offset - truth.time_offset) <= 0.002
        assert result.correlation >= 0.99

    def test_median_error_degrades_with_noise(self, foot_series):
        truth = GroundTruth.from_euler_deg(20.0, 10.0, -45.0, time_offset=0.01)
        medians = []
        for density in (0.006, 0.03, 0.06):
            errors = []
            for seed in range(20):
                imu = simulate_imu(foot_series, truth,
                                   NoiseModel(density, RATE, seed=1000 + seed))
                result = calibrate(imu, foot_series, options())
                errors.append(rotation_error(result.rotation, truth.euler_deg).degrees)
            medians.append(float(np.median(errors)))
        assert medians[0] <= medians[1] <= medians[2]

    def test_frame_tags_enforced(self, foot_series):
        with pytest.raises(ValueError):
            calibrate(foot_series, foot_series, options())

    def test_result_requires_correlation_at_scan_maximum(self):
        scan = np.array([[0.0, 0.4], [0.001, 0.6]])
        with pytest.raises(ValueError):
            CalibrationResult(rotation=np.eye(3), time_offset=0.0, correlation=0.4,
                              condition_number=1.0, offset_scan=scan)
