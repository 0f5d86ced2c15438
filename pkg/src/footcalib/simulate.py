"""Synthetic foot-IMU measurements and baseline comparison gaits.

A measurement stream is the kinematic foot-end series seen through a
fixed extrinsic rotation, delayed by a transport time offset and
corrupted by gyroscope white noise. Baseline gaits (walk, spin, wave) are
deterministic cartoon joint profiles used only to reproduce the
qualitative conditioning gap between ordinary locomotion and the
optimized calibration motion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.spatial.transform import Rotation

from .kinematics import AngularVelocitySeries, Frame, JointTrajectory


@dataclass(frozen=True)
class GroundTruth:
    """True extrinsic rotation (foot frame from IMU frame) and time offset."""

    rotation: np.ndarray  # 3x3, maps IMU-frame vectors into the foot frame
    time_offset: float    # s, IMU timestamps minus encoder timestamps

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-12 or abs(np.linalg.det(r) - 1.0) > 1e-12:
            raise ValueError("rotation must be orthogonal with determinant +1 to 1e-12")
        if not math.isfinite(self.time_offset):
            raise ValueError("time_offset must be finite")
        object.__setattr__(self, "rotation", r)

    @classmethod
    def from_euler_deg(cls, roll_x: float, pitch_y: float, yaw_z: float,
                       time_offset: float = 0.0) -> "GroundTruth":
        r = Rotation.from_euler("XYZ", [roll_x, pitch_y, yaw_z], degrees=True).as_matrix()
        return cls(rotation=r, time_offset=time_offset)

    @property
    def euler_deg(self) -> np.ndarray:
        """Intrinsic x-y-z Euler angles (roll, pitch, yaw) in degrees."""
        return Rotation.from_matrix(self.rotation).as_euler("XYZ", degrees=True)


def random_ground_truth(rng: np.random.Generator, offset_range: float,
                        grid_step: float | None = None,
                        max_pitch_deg: float = 80.0) -> GroundTruth:
    """Random mounting rotation and offset for a synthetic experiment.

    Rotations are uniform on SO(3) but rejection-sampled to keep the pitch
    Euler angle away from the ±90 deg gimbal region so per-axis rotation
    errors stay well defined. The offset is uniform in ±offset_range and
    snapped to grid_step when given.
    """
    while True:
        q = rng.normal(size=4)
        r = Rotation.from_quat(q / np.linalg.norm(q))
        if abs(r.as_euler("XYZ", degrees=True)[1]) <= max_pitch_deg:
            break
    if grid_step is not None:
        steps = int(math.floor(offset_range / grid_step + 1e-9))
        t_d = float(rng.integers(-steps, steps + 1)) * grid_step
    else:
        t_d = float(rng.uniform(-offset_range, offset_range))
    return GroundTruth(rotation=r.as_matrix(), time_offset=t_d)


@dataclass(frozen=True)
class NoiseModel:
    """Gyroscope white-noise description.

    density is in deg/s/sqrt(Hz); the per-sample standard deviation is
    density * sqrt(sample_rate), converted to rad/s.
    """

    density: float      # deg/s/sqrt(Hz)
    sample_rate: float  # Hz
    seed: int = 0

    def __post_init__(self):
        if self.density < 0:
            raise ValueError("density must be >= 0")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def sigma_rad_s(self) -> float:
        return math.radians(self.density) * math.sqrt(self.sample_rate)


def simulate_imu(foot_series: AngularVelocitySeries, truth: GroundTruth,
                 noise: NoiseModel) -> AngularVelocitySeries:
    """Synthesize the foot-IMU angular-velocity stream.

    Each output sample at time t is R^-1 applied to the kinematic series
    evaluated at t - t_d (linear interpolation, edges held), plus i.i.d.
    Gaussian noise per axis. Timestamps stay on the original grid: the
    offset is hidden in the data, as in real logging.
    """
    if foot_series.frame is not Frame.FOOT_KINEMATIC:
        raise ValueError(f"expected a FootKinematic series, got {foot_series.frame}")
    dt = foot_series.uniform_dt()
    if abs(dt * noise.sample_rate - 1.0) > 1e-9:
        raise ValueError(
            f"series grid spacing {dt} does not match noise model sample rate {noise.sample_rate}"
        )
    t = foot_series.time_grid
    query = t - truth.time_offset
    shifted = np.column_stack([np.interp(query, t, foot_series.samples[:, k]) for k in range(3)])
    # omega_I = R^T omega_F for each row
    measured = shifted @ truth.rotation
    if noise.density > 0:
        rng = np.random.default_rng(noise.seed)
        measured = measured + rng.normal(0.0, noise.sigma_rad_s, measured.shape)
    return AngularVelocitySeries(t, measured, Frame.FOOT_IMU)


class GaitKind(Enum):
    WALK = "walk"
    SPIN = "spin"
    WAVE = "wave"


@dataclass(frozen=True)
class GaitParams:
    """Cyclic gait profile parameters; amplitudes in rad, times in s."""

    period: float = 1.0
    duration: float = 4.0
    sample_rate: float = 500.0
    hip_amplitude: float | None = None
    thigh_amplitude: float | None = None
    calf_amplitude: float | None = None

    def __post_init__(self):
        for name in ("period", "duration", "sample_rate"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


# Default per-joint amplitudes (hip, thigh, calf) in rad. The shapes are
# artifact constants chosen so the walk and spin profiles barely excite
# one velocity axis while the wave profile keeps a little more diversity,
# reproducing the conditioning ordering wave < walk/spin, all far above
# the optimized motion.
_GAIT_AMPLITUDES = {
    GaitKind.WALK: (0.005, 0.35, 0.35),
    GaitKind.SPIN: (0.45, 0.004, 0.004),
    GaitKind.WAVE: (0.009, 0.4, 0.005),
}

# Per-joint frequency multipliers and phases (hip, thigh, calf).
_GAIT_SHAPES = {
    GaitKind.WALK: ((1, 0.0), (1, 0.0), (1, math.pi / 2)),
    GaitKind.SPIN: ((1, 0.0), (2, 0.0), (1, 0.7)),
    GaitKind.WAVE: ((3, 0.0), (1, 0.0), (2, 0.4)),
}


def baseline_gait(kind: GaitKind, params: GaitParams | None = None) -> JointTrajectory:
    """Deterministic cyclic joint profile for one of the comparison gaits.

    Each joint follows amplitude * sin(m * w0 * t + phase) with w0 =
    2*pi/period; the (m, phase) shape constants and default amplitudes are
    listed in this module. Walk swings thigh and calf in quadrature with a
    small hip sway, spin is a dominant hip oscillation over near-constant
    thigh/calf, and wave is a single-joint thigh sinusoid with hip and
    calf nearly static.
    """
    params = params or GaitParams()
    amplitudes = list(_GAIT_AMPLITUDES[kind])
    for idx, override in enumerate((params.hip_amplitude, params.thigh_amplitude,
                                    params.calf_amplitude)):
        if override is not None:
            amplitudes[idx] = override
    w0 = 2.0 * math.pi / params.period
    n = int(math.floor(params.duration * params.sample_rate + 1e-9))
    t = np.arange(n + 1) / params.sample_rate

    angles, rates = [], []
    for amp, (mult, phase) in zip(amplitudes, _GAIT_SHAPES[kind]):
        w = mult * w0
        angles.append(amp * np.sin(w * t + phase))
        rates.append(amp * w * np.cos(w * t + phase))

    return JointTrajectory(
        time_grid=t,
        theta_hip=angles[0], theta_thigh=angles[1], theta_calf=angles[2],
        dtheta_hip=rates[0], dtheta_thigh=rates[1], dtheta_calf=rates[2],
    )
