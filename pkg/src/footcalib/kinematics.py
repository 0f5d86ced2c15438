"""Three-joint leg model and the joint-space to foot-frame velocity map.

The leg has hip, thigh and calf revolute joints in a modified
Denavit-Hartenberg arrangement with twists (0, -90 deg, 0, 0). With the
floating base held fixed, the foot-end angular velocity depends only on
the hip rate, the combined thigh+calf angle and the combined thigh+calf
rate:

    wx = -dhip * sin(th_thigh + th_calf)
    wy = -dhip * cos(th_thigh + th_calf)
    wz =  dthigh + dcalf
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import UnsupportedGeometryError

_STANDARD_TWISTS = (0.0, -math.pi / 2, 0.0, 0.0)
_TWIST_TOL = 1e-12


class Frame(Enum):
    """Reference frame an angular-velocity series is expressed in."""

    FOOT_KINEMATIC = "FootKinematic"
    FOOT_IMU = "FootIMU"


@dataclass(frozen=True)
class LegGeometry:
    """Twist angles and joint limits of one leg.

    Twists are in radians; the defaults describe a Go2-class leg. Joint
    limits are closed intervals [lower, upper] in radians. The default
    limits are absolute Go2-class ranges; experiment configs typically
    substitute posture-relative limits because generated calibration
    trajectories oscillate around zero.
    """

    twist_hip: float = 0.0
    twist_thigh: float = -math.pi / 2
    twist_calf: float = 0.0
    twist_foot: float = 0.0
    hip_limits: tuple[float, float] = (-0.84, 0.84)
    thigh_limits: tuple[float, float] = (-1.5, 3.4)
    calf_limits: tuple[float, float] = (-2.7, -0.8)

    def __post_init__(self):
        for name in ("hip_limits", "thigh_limits", "calf_limits"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"{name} must be a finite interval with lower < upper, got {(lo, hi)}")

    @property
    def has_standard_twists(self) -> bool:
        twists = (self.twist_hip, self.twist_thigh, self.twist_calf, self.twist_foot)
        return all(abs(a - b) <= _TWIST_TOL for a, b in zip(twists, _STANDARD_TWISTS))

    def require_standard_twists(self):
        if not self.has_standard_twists:
            raise UnsupportedGeometryError(
                "foot angular velocity is only defined for twists "
                "(0, -pi/2, 0, 0); got "
                f"({self.twist_hip}, {self.twist_thigh}, {self.twist_calf}, {self.twist_foot})"
            )

    def limits(self, joint: str) -> tuple[float, float]:
        return getattr(self, f"{joint}_limits")


def _as_float_array(name: str, values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class JointTrajectory:
    """Time-gridded joint angles and angular velocities for one leg.

    All seven sequences share the same length (>= 2) and the time grid is
    uniform to one part in 1e9.
    """

    time_grid: np.ndarray
    theta_hip: np.ndarray
    theta_thigh: np.ndarray
    theta_calf: np.ndarray
    dtheta_hip: np.ndarray
    dtheta_thigh: np.ndarray
    dtheta_calf: np.ndarray

    def __post_init__(self):
        for name in ("time_grid", "theta_hip", "theta_thigh", "theta_calf",
                     "dtheta_hip", "dtheta_thigh", "dtheta_calf"):
            object.__setattr__(self, name, _as_float_array(name, getattr(self, name)))
        n = len(self.time_grid)
        if n < 2:
            raise ValueError("trajectory needs at least 2 samples")
        for name in ("theta_hip", "theta_thigh", "theta_calf",
                     "dtheta_hip", "dtheta_thigh", "dtheta_calf"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length {len(getattr(self, name))} != time grid length {n}")
        diffs = np.diff(self.time_grid)
        dt = (self.time_grid[-1] - self.time_grid[0]) / (n - 1)
        if dt <= 0 or np.any(diffs <= 0):
            raise ValueError("time grid must be strictly increasing")
        if np.max(np.abs(diffs - dt)) > 1e-9 * dt:
            raise ValueError("time grid spacing must be uniform to 1 part in 1e9")

    def __len__(self) -> int:
        return len(self.time_grid)

    @property
    def dt(self) -> float:
        return (self.time_grid[-1] - self.time_grid[0]) / (len(self.time_grid) - 1)

    @property
    def sample_rate(self) -> float:
        return 1.0 / self.dt

    @property
    def theta_sum(self) -> np.ndarray:
        """Combined thigh+calf angle; the only angle the velocity map needs."""
        return self.theta_thigh + self.theta_calf

    @property
    def dtheta_sum(self) -> np.ndarray:
        return self.dtheta_thigh + self.dtheta_calf

    def joint_angles(self, joint: str) -> np.ndarray:
        return getattr(self, f"theta_{joint}")


@dataclass(frozen=True)
class AngularVelocitySeries:
    """Timestamped 3-vector angular-velocity samples with a frame tag."""

    time_grid: np.ndarray
    samples: np.ndarray
    frame: Frame

    def __post_init__(self):
        t = np.asarray(self.time_grid, dtype=float)
        w = np.asarray(self.samples, dtype=float)
        if t.ndim != 1:
            raise ValueError("time_grid must be one-dimensional")
        if w.ndim != 2 or w.shape[1] != 3:
            raise ValueError(f"samples must have shape (n, 3), got {w.shape}")
        if w.shape[0] != t.shape[0]:
            raise ValueError("samples length must equal time grid length")
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(w)):
            raise ValueError("series contains non-finite values")
        if t.shape[0] >= 2 and np.any(np.diff(t) <= 0):
            raise ValueError("time grid must be strictly increasing")
        if not isinstance(self.frame, Frame):
            raise ValueError(f"frame must be a Frame, got {self.frame!r}")
        object.__setattr__(self, "time_grid", t)
        object.__setattr__(self, "samples", w)

    def __len__(self) -> int:
        return len(self.time_grid)

    def uniform_dt(self, rel_tol: float = 1e-9) -> float:
        """Grid spacing, raising if the grid is not uniform within rel_tol."""
        n = len(self.time_grid)
        if n < 2:
            raise ValueError("series needs at least 2 samples for a grid spacing")
        dt = (self.time_grid[-1] - self.time_grid[0]) / (n - 1)
        if np.max(np.abs(np.diff(self.time_grid) - dt)) > rel_tol * dt:
            raise ValueError("series time grid is not uniform")
        return float(dt)

    @property
    def span(self) -> float:
        return float(self.time_grid[-1] - self.time_grid[0])


def foot_angular_velocity(geometry: LegGeometry, theta_thigh_plus_calf: float,
                          dtheta_hip: float, dtheta_thigh_plus_calf: float) -> np.ndarray:
    """Foot-end angular velocity for a single joint state.

    Args:
        geometry: leg geometry; must carry the standard twists.
        theta_thigh_plus_calf: combined thigh+calf angle [rad].
        dtheta_hip: hip joint rate [rad/s].
        dtheta_thigh_plus_calf: combined thigh+calf rate [rad/s].

    Returns:
        Foot-frame angular velocity (wx, wy, wz) in rad/s.
    """
    geometry.require_standard_twists()
    values = (theta_thigh_plus_calf, dtheta_hip, dtheta_thigh_plus_calf)
    if not all(math.isfinite(v) for v in values):
        raise ValueError(f"inputs must be finite, got {values}")
    return np.array([
        -dtheta_hip * math.sin(theta_thigh_plus_calf),
        -dtheta_hip * math.cos(theta_thigh_plus_calf),
        dtheta_thigh_plus_calf,
    ])


def trajectory_to_foot_velocity(geometry: LegGeometry, traj: JointTrajectory) -> AngularVelocitySeries:
    """Map a joint trajectory to the foot-end angular-velocity series."""
    geometry.require_standard_twists()
    theta_sum = traj.theta_sum
    omega = np.column_stack([
        -traj.dtheta_hip * np.sin(theta_sum),
        -traj.dtheta_hip * np.cos(theta_sum),
        traj.dtheta_sum,
    ])
    return AngularVelocitySeries(traj.time_grid, omega, Frame.FOOT_KINEMATIC)


@dataclass(frozen=True)
class JointLimitStatus:
    """Motion range of one joint and whether it stayed inside its limits."""

    range_rad: float
    in_bounds: bool


def joint_limit_report(traj: JointTrajectory, geometry: LegGeometry) -> dict[str, JointLimitStatus]:
    """Per-joint motion range and limit compliance for a trajectory."""
    report = {}
    for joint in ("hip", "thigh", "calf"):
        angles = traj.joint_angles(joint)
        lo, hi = geometry.limits(joint)
        report[joint] = JointLimitStatus(
            range_rad=float(angles.max() - angles.min()),
            in_bounds=bool(angles.min() >= lo and angles.max() <= hi),
        )
    return report
