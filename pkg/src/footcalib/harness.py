"""Experiment driver: optimize, simulate and calibrate over a full matrix.

Runs every (foot, motion, noise density, seed) cell of an experiment
configuration, collecting condition number, correlation, rotation error
and time-offset error per cell, and writes deterministic report files.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from .calibrate import CalibrationOptions, calibrate
from .errors import CalibrationError
from .kinematics import JointTrajectory, LegGeometry, trajectory_to_foot_velocity
from .optimizer import OptimizerConfig, derive_schedule, eval_basis, initial_basis_spec, optimize
from .simulate import GaitKind, GaitParams, GroundTruth, NoiseModel, baseline_gait, random_ground_truth, simulate_imu
from . import io as fio

FOOT_IDS = ("FL", "FR", "RL", "RR")


class Motion(Enum):
    """Calibration motion executed for a matrix cell."""

    A2I = "a2i"    # condition-number-optimized calibration motion
    WALK = "walk"
    SPIN = "spin"
    WAVE = "wave"


# Stable per-token codes for child-seed derivation; row results must not
# depend on the position of a motion/foot/density in the config lists.
_MOTION_CODE = {Motion.A2I: 1, Motion.WALK: 2, Motion.SPIN: 3, Motion.WAVE: 4}
_GAIT_FOR_MOTION = {Motion.WALK: GaitKind.WALK, Motion.SPIN: GaitKind.SPIN,
                    Motion.WAVE: GaitKind.WAVE}


def _foot_code(foot: str) -> int:
    return FOOT_IDS.index(foot) if foot in FOOT_IDS else 100 + sum(map(ord, foot))


def _density_code(density: float) -> int:
    return int(round(density * 1e9))


def _child_seed(*entropy: int) -> int:
    return int(np.random.SeedSequence(list(entropy)).generate_state(1)[0])


def calibration_geometry() -> LegGeometry:
    """Leg geometry with posture-relative joint limits.

    Generated calibration trajectories oscillate about zero by
    construction, so experiment limits are expressed as deviations from
    the nominal lifted calibration posture rather than absolute Go2-class
    ranges (whose calf interval does not contain zero).
    """
    return LegGeometry(hip_limits=(-0.84, 0.84), thigh_limits=(-1.5, 1.5),
                       calf_limits=(-1.5, 1.5))


@dataclass(frozen=True)
class ExperimentConfig:
    """Full experiment matrix description."""

    geometry: LegGeometry
    truths: dict[str, GroundTruth]
    noise_densities: tuple[float, ...]
    motions: tuple[Motion, ...]
    optimizer: OptimizerConfig
    seeds: tuple[int, ...]
    output_dir: Path

    def __post_init__(self):
        if not self.truths:
            raise ValueError("need at least one foot")
        if not self.noise_densities:
            raise ValueError("need at least one noise density")
        if not self.motions:
            raise ValueError("need at least one motion")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if any(d < 0 for d in self.noise_densities):
            raise ValueError("noise densities must be >= 0")
        for foot, truth in self.truths.items():
            if abs(truth.time_offset) > self.optimizer.offset_range:
                raise ValueError(
                    f"{foot}: |time offset| {abs(truth.time_offset)} exceeds the "
                    f"search range {self.optimizer.offset_range}"
                )
        object.__setattr__(self, "output_dir", Path(self.output_dir))


def default_truths(base_seed: int = 0, offset_range: float = 0.1,
                   grid_step: float | None = 1 / 500.0) -> dict[str, GroundTruth]:
    """Distinct seeded random mounting truths for the four feet."""
    truths = {}
    for foot in FOOT_IDS:
        rng = np.random.default_rng(np.random.SeedSequence([base_seed, 7, _foot_code(foot)]))
        truths[foot] = random_ground_truth(rng, offset_range, grid_step=grid_step)
    return truths


# Spatial calibration presets measured on a real quadruped (per-foot
# intrinsic x-y-z Euler triples, degrees); useful for qualitative
# comparison runs against arbitrary random mountings.
GO2_PRESET_EULER_DEG = {
    "FL": (104.0, 17.0, 21.0),
    "FR": (136.0, -11.0, 55.0),
    "RL": (56.0, -32.0, -129.0),
    "RR": (92.0, -21.0, 115.0),
}


def go2_preset_truths(time_offset: float = 0.0) -> dict[str, GroundTruth]:
    return {foot: GroundTruth.from_euler_deg(*euler, time_offset=time_offset)
            for foot, euler in GO2_PRESET_EULER_DEG.items()}


def default_experiment_config(output_dir, base_seed: int = 0,
                              noise_densities=(0.006, 0.03, 0.06),
                              motions=(Motion.A2I, Motion.WALK, Motion.SPIN, Motion.WAVE),
                              seeds=tuple(range(20)),
                              optimizer: OptimizerConfig | None = None) -> ExperimentConfig:
    optimizer = optimizer or OptimizerConfig(seed=base_seed)
    return ExperimentConfig(
        geometry=calibration_geometry(),
        truths=default_truths(base_seed, grid_step=1 / optimizer.imu_frequency),
        noise_densities=tuple(noise_densities),
        motions=tuple(motions),
        optimizer=optimizer,
        seeds=tuple(seeds),
        output_dir=Path(output_dir),
    )


@dataclass(frozen=True)
class RotationError:
    """Rotation calibration error in degrees.

    ``degrees`` is the Euclidean norm of the per-axis intrinsic x-y-z
    Euler-angle differences (wrapped to (-180, 180]); when the Euler
    extraction is within 0.5 deg of gimbal lock the geodesic angle is
    reported instead and the result is flagged.
    """

    degrees: float
    geodesic_degrees: float
    gimbal_flagged: bool


def _wrap_deg(d: np.ndarray) -> np.ndarray:
    return (d + 180.0) % 360.0 - 180.0


def rotation_error(rotation_estimate, truth_euler_deg) -> RotationError:
    est = np.asarray(rotation_estimate, dtype=float)
    if est.shape != (3, 3) or np.abs(est.T @ est - np.eye(3)).max() > 1e-9 \
            or abs(np.linalg.det(est) - 1.0) > 1e-9:
        raise ValueError("rotation_estimate must be a proper rotation matrix")
    truth = np.asarray(truth_euler_deg, dtype=float)
    if truth.shape != (3,):
        raise ValueError("truth_euler_deg must be a 3-vector (roll, pitch, yaw) in degrees")

    est_euler = Rotation.from_matrix(est).as_euler("XYZ", degrees=True)
    per_axis = _wrap_deg(est_euler - truth)
    euler_norm = float(np.sqrt(np.sum(per_axis ** 2)))

    truth_matrix = Rotation.from_euler("XYZ", truth, degrees=True).as_matrix()
    relative = est @ truth_matrix.T
    cos_angle = np.clip((np.trace(relative) - 1.0) / 2.0, -1.0, 1.0)
    geodesic = float(math.degrees(math.acos(cos_angle)))

    flagged = min(abs(abs(est_euler[1]) - 90.0), abs(abs(truth[1]) - 90.0)) < 0.5
    return RotationError(degrees=geodesic if flagged else euler_norm,
                         geodesic_degrees=geodesic, gimbal_flagged=flagged)


@dataclass(frozen=True)
class ReportRow:
    """One matrix cell result. Failed cells carry the error message and NaN metrics."""

    foot: str
    motion: Motion
    noise_density: float
    seed: int
    cn: float
    cc: float
    re_deg: float
    td_error_ms: float
    gimbal_flagged: bool
    geodesic_deg: float
    wall_time_s: float
    error: str = ""


@dataclass(frozen=True)
class SummaryRow:
    """Median metrics over feet and seeds for one (motion, density) cell."""

    motion: Motion
    noise_density: float
    rows: int
    median_cn: float
    median_cc: float
    median_re_deg: float
    median_abs_td_error_ms: float


@dataclass(frozen=True)
class MatrixResult:
    rows: list[ReportRow]
    summary: list[SummaryRow]
    output_dir: Path


def build_trajectory(config: ExperimentConfig, motion: Motion, foot: str,
                     seed: int) -> JointTrajectory:
    """Trajectory a cell executes: optimizer output for a2i, fixed gait otherwise.

    The a2i motion is optimized once per (foot, seed) and executed for two
    full periods so the calibration window can cover one exact period away
    from the data edges. Baseline gaits run for their default duration at
    the experiment sample rate.
    """
    opt = config.optimizer
    if motion is Motion.A2I:
        init_seed = _child_seed(opt.seed, 1, _foot_code(foot), _MOTION_CODE[motion], seed)
        result = optimize(initial_basis_spec(opt, seed=init_seed), opt, config.geometry)
        n = int(round(2 * result.spec.period * opt.imu_frequency))
        grid = np.arange(n + 1) / opt.imu_frequency
        return eval_basis(result.spec, grid)
    kind = _GAIT_FOR_MOTION[motion]
    return baseline_gait(kind, GaitParams(duration=4.0, sample_rate=opt.imu_frequency))


def _cell_options(config: ExperimentConfig, motion: Motion) -> CalibrationOptions:
    window = None
    if motion is Motion.A2I:
        schedule = derive_schedule(config.optimizer.imu_frequency, config.optimizer.offset_range)
        window = int(round(schedule.period * config.optimizer.imu_frequency))
    return CalibrationOptions(offset_range=config.optimizer.offset_range,
                              window_samples=window)


def run_cell(config: ExperimentConfig, foot: str, motion: Motion, density: float,
             seed: int, trajectory: JointTrajectory):
    """One matrix cell: simulate, calibrate, compute metrics.

    Returns (ReportRow fields without wall time, offset scan or None).
    """
    truth = config.truths[foot]
    foot_series = trajectory_to_foot_velocity(config.geometry, trajectory)
    noise_seed = _child_seed(config.optimizer.seed, 2, _foot_code(foot),
                             _MOTION_CODE[motion], _density_code(density), seed)
    noise = NoiseModel(density=density, sample_rate=config.optimizer.imu_frequency,
                       seed=noise_seed)
    imu = simulate_imu(foot_series, truth, noise)
    result = calibrate(imu, foot_series, _cell_options(config, motion))
    err = rotation_error(result.rotation, truth.euler_deg)
    metrics = dict(
        cn=result.condition_number,
        cc=result.correlation,
        re_deg=err.degrees,
        td_error_ms=(result.time_offset - truth.time_offset) * 1e3,
        gimbal_flagged=err.gimbal_flagged,
        geodesic_deg=err.geodesic_degrees,
    )
    return metrics, result.offset_scan


def _summarize(rows: list[ReportRow], motions, densities) -> list[SummaryRow]:
    summary = []
    for motion in motions:
        for density in densities:
            cells = [r for r in rows
                     if r.motion is motion and r.noise_density == density and not r.error]
            if cells:
                summary.append(SummaryRow(
                    motion=motion, noise_density=density, rows=len(cells),
                    median_cn=float(np.median([r.cn for r in cells])),
                    median_cc=float(np.median([r.cc for r in cells])),
                    median_re_deg=float(np.median([r.re_deg for r in cells])),
                    median_abs_td_error_ms=float(np.median([abs(r.td_error_ms) for r in cells])),
                ))
            else:
                summary.append(SummaryRow(motion=motion, noise_density=density, rows=0,
                                          median_cn=math.nan, median_cc=math.nan,
                                          median_re_deg=math.nan,
                                          median_abs_td_error_ms=math.nan))
    return summary


def run_matrix(config: ExperimentConfig) -> MatrixResult:
    """Run the full experiment matrix and write the report files.

    Report files (rows.csv, summary.csv, summary.json and the per-cell
    offset scans) are deterministic for a fixed config; wall-clock timings
    go to a separate timing.csv so the reports stay byte-reproducible.
    Rows are ordered by foot, motion, density, seed and written as they
    are computed. A failed cell records its error and does not abort the
    matrix.
    """
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "scans").mkdir(exist_ok=True)

    feet = sorted(config.truths)
    motions = sorted(config.motions, key=lambda m: m.value)
    densities = sorted(config.noise_densities)
    seeds = sorted(config.seeds)

    trajectory_cache: dict = {}
    rows: list[ReportRow] = []
    with fio.open_rows_writer(out / "rows.csv") as write_row, \
            fio.open_timing_writer(out / "timing.csv") as write_timing:
        for foot in feet:
            for motion in motions:
                for density in densities:
                    for seed in seeds:
                        started = time.perf_counter()
                        cache_key = (motion, foot, seed) if motion is Motion.A2I else motion
                        if cache_key not in trajectory_cache:
                            trajectory_cache[cache_key] = build_trajectory(config, motion, foot, seed)
                        try:
                            metrics, scan = run_cell(config, foot, motion, density, seed,
                                                     trajectory_cache[cache_key])
                            error = ""
                        except CalibrationError as exc:
                            metrics = dict(cn=math.nan, cc=math.nan, re_deg=math.nan,
                                           td_error_ms=math.nan, gimbal_flagged=False,
                                           geodesic_deg=math.nan)
                            scan = None
                            error = f"{type(exc).__name__}: {exc}"
                        wall = time.perf_counter() - started
                        row = ReportRow(foot=foot, motion=motion, noise_density=density,
                                        seed=seed, wall_time_s=wall, error=error, **metrics)
                        rows.append(row)
                        write_row(row)
                        write_timing(row)
                        if scan is not None:
                            fio.write_offset_scan(
                                out / "scans" / f"{foot}_{motion.value}_{density:g}_{seed}.csv",
                                scan)

    summary = _summarize(rows, motions, densities)
    fio.write_summary_csv(out / "summary.csv", summary)
    fio.write_summary_json(out / "summary.json", summary)
    return MatrixResult(rows=rows, summary=summary, output_dir=out)


def config_to_dict(config: ExperimentConfig) -> dict:
    geo = config.geometry
    return {
        "geometry": {
            "twists": [geo.twist_hip, geo.twist_thigh, geo.twist_calf, geo.twist_foot],
            "hip_limits": list(geo.hip_limits),
            "thigh_limits": list(geo.thigh_limits),
            "calf_limits": list(geo.calf_limits),
        },
        "truths": {
            foot: {"euler_deg": [float(v) for v in truth.euler_deg],
                   "t_d_s": float(truth.time_offset)}
            for foot, truth in sorted(config.truths.items())
        },
        "noise_densities": list(config.noise_densities),
        "motions": [m.value for m in config.motions],
        "optimizer": {
            "kappa_objective": config.optimizer.kappa_objective,
            "max_iterations": config.optimizer.max_iterations,
            "step_size": config.optimizer.step_size,
            "fd_epsilon": config.optimizer.fd_epsilon,
            "penalty_hip": config.optimizer.penalty_hip,
            "penalty_thigh": config.optimizer.penalty_thigh,
            "penalty_calf": config.optimizer.penalty_calf,
            "imu_frequency": config.optimizer.imu_frequency,
            "offset_range": config.optimizer.offset_range,
            "seed": config.optimizer.seed,
        },
        "seeds": list(config.seeds),
        "output_dir": str(config.output_dir),
    }


def config_from_dict(doc: dict, output_dir=None) -> ExperimentConfig:
    """Build a config from a JSON document; missing sections take the defaults."""
    if "geometry" in doc:
        g = doc["geometry"]
        twists = g.get("twists", [0.0, -math.pi / 2, 0.0, 0.0])
        geometry = LegGeometry(
            twist_hip=twists[0], twist_thigh=twists[1],
            twist_calf=twists[2], twist_foot=twists[3],
            hip_limits=tuple(g["hip_limits"]),
            thigh_limits=tuple(g["thigh_limits"]),
            calf_limits=tuple(g["calf_limits"]),
        )
    else:
        geometry = calibration_geometry()
    optimizer = OptimizerConfig(**doc.get("optimizer", {}))
    if "truths" in doc:
        truths = {foot: GroundTruth.from_euler_deg(*spec["euler_deg"],
                                                   time_offset=spec.get("t_d_s", 0.0))
                  for foot, spec in doc["truths"].items()}
    else:
        truths = default_truths(optimizer.seed, grid_step=1 / optimizer.imu_frequency)
    return ExperimentConfig(
        geometry=geometry,
        truths=truths,
        noise_densities=tuple(doc.get("noise_densities", (0.006, 0.03, 0.06))),
        motions=tuple(Motion(m.lower()) for m in doc.get(
            "motions", [m.value for m in Motion])),
        optimizer=optimizer,
        seeds=tuple(doc.get("seeds", range(20))),
        output_dir=Path(output_dir if output_dir is not None
                        else doc.get("output_dir", "matrix-out")),
    )


def save_config(path, config: ExperimentConfig) -> None:
    import json

    Path(path).write_text(json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n")


def load_config(path, output_dir=None) -> ExperimentConfig:
    import json

    return config_from_dict(json.loads(Path(path).read_text()), output_dir=output_dir)
