"""Condition-number trajectory generation for calibration motions.

Joint rates are built from a harmonic family: the hip rate is a sine
series and the combined thigh+calf rate a cosine series, both over odd
multiples of a base frequency. Over an integer number of periods this
family makes the foot angular-velocity covariance diagonal, and gradient
descent on the harmonic amplitudes drives its condition number toward 1
while joint-limit penalties keep the motion executable.

Odd multiples matter: a family over consecutive integer multiples couples
the x and z velocity components (the time average of wx*wz picks up
matched harmonics between the hip-rate derivative and cos(thigh+calf))
and the covariance is then far from diagonal. Restricting to odd
multiples removes every matched pair and the off-diagonals vanish to
machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import IllConditionedError
from .kinematics import (
    AngularVelocitySeries,
    Frame,
    JointTrajectory,
    LegGeometry,
    joint_limit_report,
    trajectory_to_foot_velocity,
)

JOINTS = ("hip", "thigh", "calf")


@dataclass(frozen=True)
class Schedule:
    """Base frequency, period and execution time grid for a calibration run.

    The grid covers one closed period: both t=0 and t=T are present so the
    emitted trajectory returns to its starting state.
    """

    base_frequency: float  # rad/s
    period: float          # s
    time_grid: np.ndarray  # s


def derive_schedule(imu_frequency: float, offset_range: float) -> Schedule:
    """Schedule for a sensor sampled at ``imu_frequency`` with time offsets in ±``offset_range``.

    The base frequency pi/(4*t_r) makes the fundamental period 8*t_r, so a
    single period supports an unambiguous offset search over ±t_r.
    """
    if not (imu_frequency > 0 and math.isfinite(imu_frequency)):
        raise ValueError(f"imu_frequency must be positive, got {imu_frequency}")
    if not (offset_range > 0 and math.isfinite(offset_range)):
        raise ValueError(f"offset_range must be positive, got {offset_range}")
    f = math.pi / (4.0 * offset_range)
    period = 8.0 * offset_range
    n = int(math.floor(period * imu_frequency + 1e-9))
    grid = np.arange(n + 1) / imu_frequency
    return Schedule(base_frequency=f, period=period, time_grid=grid)


@dataclass(frozen=True)
class BasisSpec:
    """Harmonic amplitudes defining one calibration trajectory.

    ``hip_rate_coeffs[k]`` is the sine amplitude of the hip rate and
    ``pitch_rate_coeffs[k]`` the cosine amplitude of the combined
    thigh+calf rate, both at angular frequency (2k+1) * base_frequency.
    ``calf_share`` splits the combined rate between calf (share) and thigh
    (remainder).
    """

    hip_rate_coeffs: np.ndarray    # rad/s
    pitch_rate_coeffs: np.ndarray  # rad/s
    base_frequency: float          # rad/s
    period: float                  # s
    calf_share: float = 0.0

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.hip_rate_coeffs, dtype=float))
        b = np.atleast_1d(np.asarray(self.pitch_rate_coeffs, dtype=float))
        if a.ndim != 1 or b.ndim != 1 or len(a) != len(b) or len(a) < 1:
            raise ValueError("coefficient arrays must be equal-length 1-d with at least one harmonic")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("coefficients must be finite")
        if not (self.base_frequency > 0 and self.period > 0):
            raise ValueError("base_frequency and period must be positive")
        if not 0.0 <= self.calf_share <= 1.0:
            raise ValueError(f"calf_share must be in [0, 1], got {self.calf_share}")
        object.__setattr__(self, "hip_rate_coeffs", a)
        object.__setattr__(self, "pitch_rate_coeffs", b)

    @property
    def harmonic_count(self) -> int:
        return len(self.hip_rate_coeffs)

    @property
    def harmonic_multipliers(self) -> np.ndarray:
        """Odd integer multipliers 1, 3, 5, ... of the base frequency."""
        return 2 * np.arange(1, self.harmonic_count + 1) - 1

    @property
    def angular_frequencies(self) -> np.ndarray:
        return self.harmonic_multipliers * self.base_frequency


@dataclass(frozen=True)
class OptimizerConfig:
    """Knobs of the gradient-descent trajectory generator."""

    kappa_objective: float = 1.2
    max_iterations: int = 5000
    step_size: float = 0.02
    fd_epsilon: float = 1e-6
    penalty_hip: float = 10.0
    penalty_thigh: float = 10.0
    penalty_calf: float = 10.0
    imu_frequency: float = 500.0  # Hz
    offset_range: float = 0.25    # s
    seed: int = 0

    def __post_init__(self):
        if self.kappa_objective < 1.0:
            raise ValueError("kappa_objective must be >= 1")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        for name in ("step_size", "fd_epsilon", "imu_frequency", "offset_range"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("penalty_hip", "penalty_thigh", "penalty_calf"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def penalty_weight(self, joint: str) -> float:
        return getattr(self, f"penalty_{joint}")


def initial_basis_spec(config: OptimizerConfig, harmonic_count: int = 3,
                       calf_share: float = 0.0, seed: int | None = None) -> BasisSpec:
    """Seeded random starting point with amplitudes drawn from U[0.5, 1.5]."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    schedule = derive_schedule(config.imu_frequency, config.offset_range)
    return BasisSpec(
        hip_rate_coeffs=rng.uniform(0.5, 1.5, harmonic_count),
        pitch_rate_coeffs=rng.uniform(0.5, 1.5, harmonic_count),
        base_frequency=schedule.base_frequency,
        period=schedule.period,
        calf_share=calf_share,
    )


def eval_basis(spec: BasisSpec, time_grid) -> JointTrajectory:
    """Evaluate the harmonic family as joint angles and rates on a time grid.

    Rates are the defining series; angles are their exact antiderivatives
    (hip: -sum A_k/w_k * cos(w_k t); thigh+calf: sum B_k/w_k * sin(w_k t)),
    so every joint oscillates about zero.
    """
    t = np.asarray(time_grid, dtype=float)
    w = spec.angular_frequencies
    phase = np.outer(w, t)
    sin_ph = np.sin(phase)
    cos_ph = np.cos(phase)

    dtheta_hip = spec.hip_rate_coeffs @ sin_ph
    theta_hip = -(spec.hip_rate_coeffs / w) @ cos_ph
    rate_sum = spec.pitch_rate_coeffs @ cos_ph
    angle_sum = (spec.pitch_rate_coeffs / w) @ sin_ph

    rho = spec.calf_share
    return JointTrajectory(
        time_grid=t,
        theta_hip=theta_hip,
        theta_thigh=(1.0 - rho) * angle_sum,
        theta_calf=rho * angle_sum,
        dtheta_hip=dtheta_hip,
        dtheta_thigh=(1.0 - rho) * rate_sum,
        dtheta_calf=rho * rate_sum,
    )


def one_period_grid(spec: BasisSpec, imu_frequency: float) -> np.ndarray:
    """Half-open grid covering exactly one period: t = 0 .. T - 1/f_imu.

    Covariance evaluation must leave out the duplicated endpoint sample:
    including t=T counts the first phase twice, which biases the sample
    means by O(1/N) and lifts the covariance off-diagonals far above
    machine precision.
    """
    n = int(round(spec.period * imu_frequency))
    if n < 2:
        raise ValueError("period times sample rate must be at least 2 samples")
    return np.arange(n) / imu_frequency


def auto_covariance(series: AngularVelocitySeries) -> np.ndarray:
    """Sample auto-covariance (mean-centred, 1/(N-1)) of a foot-frame series."""
    if series.frame is not Frame.FOOT_KINEMATIC:
        raise ValueError(f"auto_covariance expects a FootKinematic series, got {series.frame}")
    n = len(series)
    if n < 2:
        raise ValueError("need at least 2 samples for a covariance")
    centred = series.samples - series.samples.mean(axis=0)
    return centred.T @ centred / (n - 1)


def condition_number(matrix) -> float:
    """Ratio of extreme singular values of a symmetric PSD 3x3 matrix.

    Returns +inf when the smallest singular value is below 1e-15 of the
    largest (or the matrix is zero).
    """
    m = np.asarray(matrix, dtype=float)
    if m.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains non-finite values")
    scale = np.abs(m).max()
    if scale == 0.0:
        return math.inf
    if np.abs(m - m.T).max() > 1e-9 * scale:
        raise ValueError("matrix is asymmetric beyond 1e-9 relative tolerance")
    s = np.linalg.svd(m, compute_uv=False)
    if s[-1] < 1e-15 * s[0]:
        return math.inf
    return float(s[0] / s[-1])


@dataclass(frozen=True)
class LossReport:
    """Loss breakdown: condition number plus active joint-limit penalties."""

    loss: float
    kappa: float
    penalties: dict[str, float]
    in_bounds: bool


def trajectory_loss(spec: BasisSpec, config: OptimizerConfig, geometry: LegGeometry) -> LossReport:
    """Condition number of the foot velocity covariance over one period,
    plus weight * motion-range penalties for joints that leave their limits."""
    traj = eval_basis(spec, one_period_grid(spec, config.imu_frequency))
    sigma = auto_covariance(trajectory_to_foot_velocity(geometry, traj))
    kappa = condition_number(sigma)
    report = joint_limit_report(traj, geometry)
    penalties = {}
    for joint in JOINTS:
        status = report[joint]
        penalties[joint] = 0.0 if status.in_bounds else config.penalty_weight(joint) * status.range_rad
    in_bounds = all(report[j].in_bounds for j in JOINTS)
    return LossReport(loss=kappa + sum(penalties.values()), kappa=kappa,
                      penalties=penalties, in_bounds=in_bounds)


@dataclass(frozen=True)
class OptimizeResult:
    """Best trajectory found by the gradient descent."""

    spec: BasisSpec
    trajectory: JointTrajectory
    kappa_history: np.ndarray
    loss_history: np.ndarray
    kappa_final: float
    iterations: int
    converged: bool   # condition number met the objective with all joints in bounds
    feasible: bool    # returned spec keeps all joints in bounds


def _with_coeffs(spec: BasisSpec, params: np.ndarray) -> BasisSpec:
    n = spec.harmonic_count
    return replace(spec, hip_rate_coeffs=params[:n].copy(), pitch_rate_coeffs=params[n:].copy())


def loss_gradient(spec: BasisSpec, config: OptimizerConfig, geometry: LegGeometry,
                  epsilon: float | None = None) -> np.ndarray:
    """Central finite-difference gradient of the loss over the stacked
    (hip, pitch) amplitudes; this is the gradient the optimizer descends."""
    eps = config.fd_epsilon if epsilon is None else epsilon
    params = np.concatenate([spec.hip_rate_coeffs, spec.pitch_rate_coeffs])
    grad = np.zeros(len(params))
    for j in range(len(params)):
        probe = params.copy()
        probe[j] += eps
        up = trajectory_loss(_with_coeffs(spec, probe), config, geometry).loss
        probe[j] -= 2 * eps
        down = trajectory_loss(_with_coeffs(spec, probe), config, geometry).loss
        grad[j] = (up - down) / (2 * eps)
    return grad


def optimize(initial: BasisSpec, config: OptimizerConfig, geometry: LegGeometry) -> OptimizeResult:
    """Run gradient descent on the harmonic amplitudes.

    Per iteration: evaluate the loss, stop early when the condition number
    is below the objective with every joint in bounds, otherwise take a
    step against the central finite-difference gradient. A step that
    raises the loss or produces non-finite values is rejected and the step
    size halved for that iteration; the step size resets after each
    accepted step. Returns the best iterate seen, preferring in-bounds
    specs and breaking ties by loss.
    """
    params = np.concatenate([initial.hip_rate_coeffs, initial.pitch_rate_coeffs])

    def loss_at(p: np.ndarray) -> LossReport:
        return trajectory_loss(_with_coeffs(initial, p), config, geometry)

    best_params = params.copy()
    report = loss_at(params)
    best = report
    kappa_history = [report.kappa]
    loss_history = [report.loss]
    converged = report.kappa < config.kappa_objective and report.in_bounds
    iterations = 0

    while not converged and iterations < config.max_iterations:
        iterations += 1
        grad = loss_gradient(_with_coeffs(initial, params), config, geometry)

        step = config.step_size
        moved = False
        while step >= 1e-15 * config.step_size:
            candidate = params - step * grad
            cand_report = loss_at(candidate)
            if math.isfinite(cand_report.loss) and cand_report.loss <= report.loss:
                params, report = candidate, cand_report
                moved = True
                break
            step *= 0.5
        if not moved:
            break  # no descent direction left at any step size

        kappa_history.append(report.kappa)
        loss_history.append(report.loss)
        if (report.in_bounds, -report.loss) > (best.in_bounds, -best.loss):
            best, best_params = report, params.copy()
        if report.kappa < config.kappa_objective and report.in_bounds:
            converged = True

    best_spec = _with_coeffs(initial, best_params)
    schedule_grid = derive_schedule(config.imu_frequency, best_spec.period / 8.0).time_grid
    trajectory = eval_basis(best_spec, schedule_grid)
    return OptimizeResult(
        spec=best_spec,
        trajectory=trajectory,
        kappa_history=np.asarray(kappa_history),
        loss_history=np.asarray(loss_history),
        kappa_final=best.kappa,
        iterations=iterations,
        converged=converged,
        feasible=best.in_bounds,
    )


@dataclass(frozen=True)
class CovarianceSet:
    """Auto- and cross-covariances of an IMU/foot angular-velocity pair."""

    sigma_ii: np.ndarray
    sigma_ff: np.ndarray
    sigma_if: np.ndarray
    sigma_fi: np.ndarray
    mean_i: np.ndarray
    mean_f: np.ndarray

    def __post_init__(self):
        for name in ("sigma_ii", "sigma_ff", "sigma_if", "sigma_fi"):
            m = np.asarray(getattr(self, name), dtype=float)
            if m.shape != (3, 3) or not np.all(np.isfinite(m)):
                raise ValueError(f"{name} must be a finite 3x3 matrix")
            object.__setattr__(self, name, m)
        for name in ("mean_i", "mean_f"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,) or not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be a finite 3-vector")
            object.__setattr__(self, name, v)
        for name in ("sigma_ii", "sigma_ff"):
            m = getattr(self, name)
            scale = max(np.abs(m).max(), 1e-300)
            if np.abs(m - m.T).max() > 1e-9 * scale:
                raise ValueError(f"{name} must be symmetric to 1e-9 relative")
        if not np.array_equal(self.sigma_fi, self.sigma_if.T):
            raise ValueError("sigma_fi must be exactly the transpose of sigma_if")

    def checked_invertible(self, floor: float = 1e-12) -> None:
        """Raise if either auto-covariance is singular at the relative floor."""
        for name in ("sigma_ii", "sigma_ff"):
            s = np.linalg.svd(getattr(self, name), compute_uv=False)
            if s[0] == 0.0 or s[-1] < floor * s[0]:
                raise IllConditionedError(
                    f"{name} is singular at the {floor:g} relative floor; "
                    "the motion is insufficiently excited"
                )
