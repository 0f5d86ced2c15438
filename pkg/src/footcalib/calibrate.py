"""Spatial-temporal calibration of a foot IMU against leg kinematics.

The time offset is found by scanning candidate shifts of the IMU stream
and maximizing the trace correlation between the shifted stream and the
kinematic foot-end series; the extrinsic rotation then comes from an
SVD-projected product of the covariance matrices at the winning shift.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import IllConditionedError, RankDeficiencyError
from .kinematics import AngularVelocitySeries, Frame
from .optimizer import CovarianceSet, condition_number

_AXES = ("x", "y", "z")


def shift_series(series: AngularVelocitySeries, t_d: float) -> AngularVelocitySeries:
    """Resample a series at t + t_d back onto its own grid.

    Linear interpolation; queries beyond the recorded span hold the edge
    sample. Callers pairing the result with another series are expected to
    drop the out-of-range window symmetrically.
    """
    dt = series.uniform_dt()
    if not math.isfinite(t_d):
        raise ValueError("t_d must be finite")
    if abs(t_d) > series.span:
        raise ValueError(f"|t_d|={abs(t_d)} exceeds the series span {series.span}")
    t = series.time_grid
    shifted = np.column_stack([np.interp(t + t_d, t, series.samples[:, k]) for k in range(3)])
    return AngularVelocitySeries(t, shifted, series.frame)


def _pair_covariance(imu_samples: np.ndarray, foot_samples: np.ndarray) -> CovarianceSet:
    n = len(imu_samples)
    mean_i = imu_samples.mean(axis=0)
    mean_f = foot_samples.mean(axis=0)
    ic = imu_samples - mean_i
    fc = foot_samples - mean_f
    sigma_ii = ic.T @ ic / (n - 1)
    sigma_ff = fc.T @ fc / (n - 1)
    sigma_if = ic.T @ fc / (n - 1)
    return CovarianceSet(sigma_ii=sigma_ii, sigma_ff=sigma_ff,
                         sigma_if=sigma_if, sigma_fi=sigma_if.T,
                         mean_i=mean_i, mean_f=mean_f)


def covariance_set(imu_shifted: AngularVelocitySeries, foot: AngularVelocitySeries) -> CovarianceSet:
    """Auto- and cross-covariances of an aligned IMU/foot series pair.

    Sample-mean centring with 1/(N-1) normalization; the foot-IMU cross
    matrix is exactly the transpose of the IMU-foot one.
    """
    if len(imu_shifted) != len(foot):
        raise ValueError(f"length mismatch: {len(imu_shifted)} vs {len(foot)}")
    if len(foot) < 2:
        raise ValueError("need at least 2 samples")
    span = max(foot.span, 1e-300)
    if np.abs(imu_shifted.time_grid - foot.time_grid).max() > 1e-9 * span:
        raise ValueError("series grids are not aligned")
    return _pair_covariance(imu_shifted.samples, foot.samples)


def trace_correlation(cov: CovarianceSet) -> float:
    """Trace correlation coefficient of the series pair behind ``cov``.

    r = sqrt(Tr(S_II^-1 S_IF S_FF^-1 S_FI) / 3), clamped to [0, 1]. A
    warning is emitted if the raw value falls outside by more than 1e-9.
    """
    cov.checked_invertible(floor=1e-12)
    product = np.linalg.solve(cov.sigma_ii, cov.sigma_if) @ np.linalg.solve(cov.sigma_ff, cov.sigma_fi)
    r_squared = float(np.trace(product)) / 3.0
    if r_squared < -1e-9:
        warnings.warn(f"trace correlation squared is {r_squared}, clamping to 0")
    r = math.sqrt(max(r_squared, 0.0))
    if r > 1.0 + 1e-9:
        warnings.warn(f"trace correlation is {r}, clamping to 1")
    return min(r, 1.0)


@dataclass(frozen=True)
class OffsetSearch:
    """Candidate grid for the time-offset scan."""

    offset_range: float        # scan covers ±offset_range seconds
    step: float                # coarse candidate spacing, seconds
    refine: bool = True        # second pass at step/refine_factor around the coarse argmax
    refine_factor: int = 10

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.offset_range < 0:
            raise ValueError("offset_range must be >= 0")
        if self.refine_factor < 2:
            raise ValueError("refine_factor must be at least 2")


@dataclass(frozen=True)
class OffsetEstimate:
    time_offset: float
    scan: np.ndarray  # rows of (candidate offset, trace correlation); NaN r marks failures


def _paired_window(imu: AngularVelocitySeries, foot: AngularVelocitySeries,
                   offset_range: float, window_samples: int | None):
    """Index window on the common grid valid for every candidate shift."""
    if len(imu) != len(foot):
        raise ValueError(f"length mismatch: {len(imu)} vs {len(foot)}")
    dt = foot.uniform_dt()
    span = max(foot.span, 1e-300)
    if np.abs(imu.time_grid - foot.time_grid).max() > 1e-9 * span:
        raise ValueError("series grids are not aligned")
    margin = int(math.ceil(offset_range / dt - 1e-9))
    i0, i1 = margin, len(foot) - margin
    if i1 - i0 < 2:
        raise ValueError("series too short for the requested offset range")
    if window_samples is not None:
        if window_samples < 2 or window_samples > i1 - i0:
            raise ValueError(
                f"window of {window_samples} samples does not fit the valid span of {i1 - i0}"
            )
        i0 = i0 + (i1 - i0 - window_samples) // 2
        i1 = i0 + window_samples
    return i0, i1, dt


def _scan_correlations(imu: AngularVelocitySeries, foot: AngularVelocitySeries,
                       window: tuple[int, int], candidates: np.ndarray) -> np.ndarray:
    i0, i1 = window
    t_window = foot.time_grid[i0:i1]
    foot_window = foot.samples[i0:i1]
    t_imu = imu.time_grid
    rs = np.empty(len(candidates))
    for idx, tau in enumerate(candidates):
        shifted = np.column_stack([
            np.interp(t_window + tau, t_imu, imu.samples[:, k]) for k in range(3)
        ])
        try:
            rs[idx] = trace_correlation(_pair_covariance(shifted, foot_window))
        except IllConditionedError:
            rs[idx] = np.nan
    return rs


def _argmax_smallest_offset(candidates: np.ndarray, rs: np.ndarray) -> int:
    best = -1
    for idx in range(len(candidates)):
        if np.isnan(rs[idx]):
            continue
        if best < 0 or rs[idx] > rs[best] or (
                rs[idx] == rs[best] and abs(candidates[idx]) < abs(candidates[best])):
            best = idx
    if best < 0:
        raise IllConditionedError("every offset candidate failed; the pair carries no usable excitation")
    return best


def estimate_time_offset(imu: AngularVelocitySeries, foot: AngularVelocitySeries,
                         search: OffsetSearch,
                         window_samples: int | None = None) -> OffsetEstimate:
    """Offset maximizing the trace correlation over a candidate grid.

    All candidates are scored on one fixed window so the scan is unbiased;
    ties go to the smallest |offset|. With ``refine`` a second pass at
    step/refine_factor runs around the coarse argmax (clipped to the scan
    range).
    """
    if search.offset_range > foot.span / 4:
        raise ValueError(
            f"offset range {search.offset_range} exceeds a quarter of the series span {foot.span}"
        )
    i0, i1, _ = _paired_window(imu, foot, search.offset_range, window_samples)

    n_steps = int(math.floor(search.offset_range / search.step + 1e-9))
    coarse = np.arange(-n_steps, n_steps + 1) * search.step
    rs = _scan_correlations(imu, foot, (i0, i1), coarse)
    best = _argmax_smallest_offset(coarse, rs)

    scan_offsets = [coarse]
    scan_rs = [rs]
    estimate = coarse[best]
    best_r = rs[best]
    if search.refine:
        fine_step = search.step / search.refine_factor
        fine = estimate + np.arange(-(search.refine_factor - 1),
                                    search.refine_factor) * fine_step
        fine = fine[np.abs(fine) <= search.offset_range + 1e-12]
        fine_rs = _scan_correlations(imu, foot, (i0, i1), fine)
        fine_best = _argmax_smallest_offset(fine, fine_rs)
        if fine_rs[fine_best] > best_r or (
                fine_rs[fine_best] == best_r and abs(fine[fine_best]) < abs(estimate)):
            estimate = fine[fine_best]
            best_r = fine_rs[fine_best]
        scan_offsets.append(fine)
        scan_rs.append(fine_rs)

    offsets = np.concatenate(scan_offsets)
    values = np.concatenate(scan_rs)
    order = np.argsort(offsets, kind="stable")
    scan = np.column_stack([offsets[order], values[order]])
    return OffsetEstimate(time_offset=float(estimate), scan=scan)


def estimate_rotation(cov: CovarianceSet, convention: str = "best_fit") -> np.ndarray:
    """Extrinsic rotation from the covariance set of an aligned pair.

    Decomposes S_FF^-1 S_FI with an SVD and projects onto the special
    orthogonal group. The default "best_fit" convention returns the matrix
    R minimizing sum ||R w_imu - w_foot||^2 over the pair (for noiseless
    rotation-related streams it reproduces the mounting rotation exactly);
    "matrix_inverse" returns its transpose, composing an extra inversion
    after the projection.
    """
    if convention not in ("best_fit", "matrix_inverse"):
        raise ValueError(f"unknown convention {convention!r}")
    s_ff = cov.sigma_ff
    sv = np.linalg.svd(s_ff, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] < 1e-12 * sv[0]:
        weak = np.linalg.svd(s_ff)[0][:, -1]
        axis = _AXES[int(np.argmax(np.abs(weak)))]
        if sv[1] < 1e-12 * sv[0]:
            raise RankDeficiencyError(
                f"foot covariance has two vanishing singular values; "
                f"weakest excitation along {axis}", axis=axis)
        raise IllConditionedError(
            f"foot covariance is singular; insufficient excitation along {axis}")
    m = np.linalg.solve(s_ff, cov.sigma_fi)
    u, _, vt = np.linalg.svd(m)
    d = np.diag([1.0, 1.0, float(np.linalg.det(u @ vt))])
    rotation = u @ d @ vt
    if convention == "matrix_inverse":
        rotation = rotation.T
    if np.abs(rotation.T @ rotation - np.eye(3)).max() > 1e-9 or abs(np.linalg.det(rotation) - 1.0) > 1e-9:
        raise IllConditionedError("rotation estimate failed the orthogonality check")
    return rotation


@dataclass(frozen=True)
class CalibrationOptions:
    """Settings for the combined offset + rotation calibration."""

    offset_range: float = 0.25
    offset_step: float | None = None   # defaults to the grid spacing
    refine: bool = True
    refine_factor: int = 10
    window_samples: int | None = None  # analysis window; None = full valid span
    rotation_convention: str = "best_fit"


@dataclass(frozen=True)
class CalibrationResult:
    """Estimated extrinsics plus the diagnostics behind them."""

    rotation: np.ndarray
    time_offset: float
    correlation: float
    condition_number: float
    offset_scan: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float)
        if r.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-9 or abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("rotation must be orthogonal with determinant +1 to 1e-9")
        scan = np.asarray(self.offset_scan, dtype=float)
        if scan.ndim != 2 or scan.shape[1] != 2:
            raise ValueError("offset_scan must have shape (n, 2)")
        best = np.nanmax(scan[:, 1]) if np.any(np.isfinite(scan[:, 1])) else np.nan
        if not (np.isfinite(best) and abs(self.correlation - best) <= 1e-12):
            raise ValueError("correlation must equal the maximum over the offset scan")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "offset_scan", scan)


def calibrate(imu: AngularVelocitySeries, foot: AngularVelocitySeries,
              options: CalibrationOptions | None = None) -> CalibrationResult:
    """Full spatial-temporal calibration of an IMU/foot series pair.

    Runs the offset scan, shifts the IMU stream by the winning offset and
    estimates the extrinsic rotation from the covariance set on the same
    analysis window the scan used.
    """
    options = options or CalibrationOptions()
    if imu.frame is not Frame.FOOT_IMU or foot.frame is not Frame.FOOT_KINEMATIC:
        raise ValueError(
            f"expected (FootIMU, FootKinematic) series, got ({imu.frame}, {foot.frame})"
        )
    dt = foot.uniform_dt()
    step = options.offset_step if options.offset_step is not None else dt
    search = OffsetSearch(offset_range=options.offset_range, step=step,
                          refine=options.refine, refine_factor=options.refine_factor)
    estimate = estimate_time_offset(imu, foot, search, window_samples=options.window_samples)

    i0, i1, _ = _paired_window(imu, foot, options.offset_range, options.window_samples)
    t_window = foot.time_grid[i0:i1]
    shifted = np.column_stack([
        np.interp(t_window + estimate.time_offset, imu.time_grid, imu.samples[:, k])
        for k in range(3)
    ])
    cov = _pair_covariance(shifted, foot.samples[i0:i1])
    rotation = estimate_rotation(cov, convention=options.rotation_convention)
    return CalibrationResult(
        rotation=rotation,
        time_offset=estimate.time_offset,
        correlation=float(np.nanmax(estimate.scan[:, 1])),
        condition_number=condition_number(cov.sigma_ff),
        offset_scan=estimate.scan,
    )
