"""File formats: delimited-text dumps and JSON documents.

All numeric text is written with 17 significant digits so round trips
preserve doubles exactly, and files end with a newline. Writers are
deterministic: identical inputs produce byte-identical files.
"""

from __future__ import annotations

import json
import math
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .calibrate import CalibrationResult
from .kinematics import AngularVelocitySeries, Frame, JointTrajectory
from .optimizer import OptimizeResult
from .simulate import GroundTruth

TRAJECTORY_HEADER = "t,theta_hip,theta_thigh,theta_calf,dtheta_hip,dtheta_thigh,dtheta_calf"
MEASUREMENT_HEADER = "t,wx,wy,wz,frame"


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def write_trajectory(path, traj: JointTrajectory) -> None:
    lines = [TRAJECTORY_HEADER]
    columns = (traj.time_grid, traj.theta_hip, traj.theta_thigh, traj.theta_calf,
               traj.dtheta_hip, traj.dtheta_thigh, traj.dtheta_calf)
    for row in zip(*columns):
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_trajectory(path) -> JointTrajectory:
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0] != TRAJECTORY_HEADER:
        raise ValueError(f"{path}: expected header {TRAJECTORY_HEADER!r}")
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    if data.ndim != 2 or data.shape[1] != 7:
        raise ValueError(f"{path}: expected 7 columns")
    return JointTrajectory(*(data[:, k] for k in range(7)))


def write_measurements(path, series: AngularVelocitySeries) -> None:
    lines = [MEASUREMENT_HEADER]
    for t, (wx, wy, wz) in zip(series.time_grid, series.samples):
        lines.append(f"{_fmt(t)},{_fmt(wx)},{_fmt(wy)},{_fmt(wz)},{series.frame.value}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_measurements(path) -> AngularVelocitySeries:
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0] != MEASUREMENT_HEADER:
        raise ValueError(f"{path}: expected header {MEASUREMENT_HEADER!r}")
    times, samples, frames = [], [], set()
    for line in lines[1:]:
        t, wx, wy, wz, frame = line.split(",")
        times.append(float(t))
        samples.append((float(wx), float(wy), float(wz)))
        frames.add(frame)
    if len(frames) != 1:
        raise ValueError(f"{path}: expected a single frame tag, got {sorted(frames)}")
    return AngularVelocitySeries(np.array(times), np.array(samples), Frame(frames.pop()))


def _dump_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_ground_truth(path, truth: GroundTruth) -> None:
    _dump_json(path, {
        "euler_deg": [float(v) for v in truth.euler_deg],
        "t_d_s": float(truth.time_offset),
    })


def read_ground_truth(path) -> GroundTruth:
    doc = json.loads(Path(path).read_text())
    return GroundTruth.from_euler_deg(*doc["euler_deg"], time_offset=doc["t_d_s"])


def write_optimizer_result(path, result: OptimizeResult) -> None:
    spec = result.spec
    _dump_json(path, {
        "A": [float(v) for v in spec.hip_rate_coeffs],
        "B": [float(v) for v in spec.pitch_rate_coeffs],
        "f": float(spec.base_frequency),
        "T": float(spec.period),
        "N": int(spec.harmonic_count),
        "rho": float(spec.calf_share),
        "kappa_final": float(result.kappa_final),
        "iterations": int(result.iterations),
        "kappa_history": [float(v) for v in result.kappa_history],
    })


def write_calibration_report(path, result: CalibrationResult) -> None:
    from scipy.spatial.transform import Rotation

    euler = Rotation.from_matrix(result.rotation).as_euler("XYZ", degrees=True)
    _dump_json(path, {
        "t_d_s": float(result.time_offset),
        "euler_deg": [float(v) for v in euler],
        "rotation_matrix": [float(v) for v in result.rotation.reshape(-1)],
        "correlation": float(result.correlation),
        "condition_number": float(result.condition_number),
        "scan": [[float(t), float(r)] for t, r in result.offset_scan],
    })


def read_calibration_report(path) -> dict:
    return json.loads(Path(path).read_text())


ROWS_HEADER = "foot,motion,noise_density,seed,cn,cc,re_deg,td_error_ms,gimbal_flagged,geodesic_deg,error"
TIMING_HEADER = "foot,motion,noise_density,seed,wall_time_s"
SUMMARY_HEADER = "motion,noise_density,rows,median_cn,median_cc,median_re_deg,median_abs_td_error_ms"


def _row_line(row) -> str:
    return ",".join([
        row.foot,
        row.motion.value,
        _fmt(row.noise_density),
        str(row.seed),
        _fmt(row.cn),
        _fmt(row.cc),
        _fmt(row.re_deg),
        _fmt(row.td_error_ms),
        "1" if row.gimbal_flagged else "0",
        _fmt(row.geodesic_deg),
        row.error.replace(",", ";"),
    ])


@contextmanager
def open_rows_writer(path):
    """Incremental report-row writer; yields a callable taking one row."""
    with open(path, "w", newline="\n") as handle:
        handle.write(ROWS_HEADER + "\n")

        def write(row):
            handle.write(_row_line(row) + "\n")
            handle.flush()

        yield write


@contextmanager
def open_timing_writer(path):
    """Wall-time sidecar writer; kept out of rows.csv so reports stay deterministic."""
    with open(path, "w", newline="\n") as handle:
        handle.write(TIMING_HEADER + "\n")

        def write(row):
            handle.write(",".join([
                row.foot, row.motion.value, _fmt(row.noise_density), str(row.seed),
                _fmt(row.wall_time_s),
            ]) + "\n")

        yield write


def read_rows_csv(path) -> list[dict]:
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0] != ROWS_HEADER:
        raise ValueError(f"{path}: expected header {ROWS_HEADER!r}")
    names = ROWS_HEADER.split(",")
    rows = []
    for line in lines[1:]:
        values = line.split(",")
        record = dict(zip(names, values))
        for key in ("noise_density", "cn", "cc", "re_deg", "td_error_ms", "geodesic_deg"):
            record[key] = float(record[key])
        record["seed"] = int(record["seed"])
        record["gimbal_flagged"] = record["gimbal_flagged"] == "1"
        rows.append(record)
    return rows


def write_summary_csv(path, summary) -> None:
    lines = [SUMMARY_HEADER]
    for cell in summary:
        lines.append(",".join([
            cell.motion.value,
            _fmt(cell.noise_density),
            str(cell.rows),
            _fmt(cell.median_cn),
            _fmt(cell.median_cc),
            _fmt(cell.median_re_deg),
            _fmt(cell.median_abs_td_error_ms),
        ]))
    Path(path).write_text("\n".join(lines) + "\n")


def write_summary_json(path, summary) -> None:
    _dump_json(path, [
        {
            "motion": cell.motion.value,
            "noise_density": cell.noise_density,
            "rows": cell.rows,
            "median_cn": _json_float(cell.median_cn),
            "median_cc": _json_float(cell.median_cc),
            "median_re_deg": _json_float(cell.median_re_deg),
            "median_abs_td_error_ms": _json_float(cell.median_abs_td_error_ms),
        }
        for cell in summary
    ])


def _json_float(value: float):
    return None if math.isnan(value) else float(value)


def write_offset_scan(path, scan: np.ndarray) -> None:
    lines = ["t_d,r"]
    for t_d, r in scan:
        lines.append(f"{_fmt(t_d)},{_fmt(r)}")
    Path(path).write_text("\n".join(lines) + "\n")
