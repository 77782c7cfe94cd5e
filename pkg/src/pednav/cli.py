"""Command-line front end: ingestion, configuration, orchestration, exports.

Subcommands::

    pednav pdr run        -c config.yaml
    pednav pdr calibrate  -c config.yaml
    pednav smins run      -c config.yaml
    pednav sim gait       -c config.yaml
    pednav sim foot       -c config.yaml
    pednav assess drift   -c config.yaml

One structured config file drives a run, with a few common overrides on
the command line. Interchange formats are CSV with fixed headers
(streams: ``t,fx,fy,fz,wx,wy,wz``; trajectories: ``t,x,y[,psi_u]``;
navigation: ``t,px,py,pz,vx,vy,vz,roll,pitch,yaw,stationary``) and JSON
for reports and gains. Angles live in radians everywhere except
human-readable log lines. Exit codes: 0 success, 1 validation failure,
2 numerical-health failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .core import GRAVITY, ImuStream, dcm_to_euler
from .errors import NumericalHealthError, PednavError, ValidationError
from .pdr import (
    StepDetectorConfig,
    StepLengthGains,
    StepLengthModel,
    calibrate_gains,
    detect_steps,
    run_pdr,
)
from .sim import (
    ErrorBudget,
    GaitProfile,
    assess_ins_drift,
    assess_pdr_drift_distance,
    assess_smins_drift,
    generate_foot_mounted_walk,
    generate_handheld_walk,
    inject_sensor_errors,
)
from .smins import (
    ErrorStateFilter,
    NavState,
    SensorErrorModel,
    ZvdConfig,
    run_smins,
)

logger = logging.getLogger(__name__)

IMU_HEADER = ["t", "fx", "fy", "fz", "wx", "wy", "wz"]
NAV_HEADER = ["t", "px", "py", "pz", "vx", "vy", "vz", "roll", "pitch", "yaw", "stationary"]


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


# ---------------------------------------------------------------------------
# file formats


def ingest_imu_csv(path, fs_hint: float | None = None) -> ImuStream:
    """Read and validate an IMU log (header ``t,fx,fy,fz,wx,wy,wz``).

    Timestamps must be strictly increasing; the offending line number is
    reported otherwise. Gaps above 0.5 s are logged, not rejected.
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"input file not found: {path}")
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != IMU_HEADER:
            raise ValidationError(
                f"{path}: expected header {','.join(IMU_HEADER)}, got {header}"
            )
        prev_t = None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 7:
                raise ValidationError(f"{path}: malformed row at line {lineno}")
            try:
                vals = [float(x) for x in row]
            except ValueError:
                raise ValidationError(f"{path}: unparsable number at line {lineno}")
            if prev_t is not None and vals[0] <= prev_t:
                raise ValidationError(
                    f"{path}: non-increasing timestamp at line {lineno}"
                )
            prev_t = vals[0]
            rows.append(vals)
    if not rows:
        raise ValidationError(f"{path}: no samples")
    arr = np.asarray(rows)
    stream = ImuStream(arr[:, 0], arr[:, 1:4], arr[:, 4:7])
    for idx, gap in stream.gaps(0.5):
        logger.warning("%s: %.3f s sampling gap before sample %d", path, gap, idx)
    if fs_hint is not None and len(stream) > 1:
        fs = stream.sample_rate()
        if abs(fs - fs_hint) > 0.01 * fs_hint:
            logger.warning(
                "%s: sample rate %.2f Hz differs from the configured %.2f Hz",
                path,
                fs,
                fs_hint,
            )
    logger.info("%s: %d samples over %.2f s", path, len(stream), stream.duration)
    return stream


def write_imu_csv(path, stream: ImuStream) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(IMU_HEADER)
        for k in range(len(stream)):
            writer.writerow(
                [_fmt(stream.t[k])]
                + [_fmt(x) for x in stream.f[k]]
                + [_fmt(x) for x in stream.w[k]]
            )


def write_trajectory_csv(path, t, xy, headings=None) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if headings is None:
            writer.writerow(["t", "x", "y"])
            for k in range(len(t)):
                writer.writerow([_fmt(t[k]), _fmt(xy[k][0]), _fmt(xy[k][1])])
        else:
            writer.writerow(["t", "x", "y", "psi_u"])
            for k in range(len(t)):
                psi = headings[k - 1] if k > 0 else 0.0
                writer.writerow([_fmt(t[k]), _fmt(xy[k][0]), _fmt(xy[k][1]), _fmt(psi)])


def read_trajectory_csv(path) -> dict:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:3] != ["t", "x", "y"]:
            raise ValidationError(f"{path}: expected a trajectory header t,x,y[,psi_u]")
        rows = [[float(x) for x in row] for row in reader if row]
    arr = np.asarray(rows)
    out = {"t": arr[:, 0], "xy": arr[:, 1:3]}
    if len(header) > 3:
        out["psi_u"] = arr[:, 3]
    return out


def write_nav_csv(path, t, positions, velocities, attitudes, stationary) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(NAV_HEADER)
        for k in range(len(t)):
            roll, pitch, yaw = dcm_to_euler(attitudes[k])
            writer.writerow(
                [_fmt(t[k])]
                + [_fmt(x) for x in positions[k]]
                + [_fmt(x) for x in velocities[k]]
                + [_fmt(roll), _fmt(pitch), _fmt(yaw), str(int(stationary[k]))]
            )


def read_nav_csv(path) -> dict:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != NAV_HEADER:
            raise ValidationError(f"{path}: expected header {','.join(NAV_HEADER)}")
        rows = [[float(x) for x in row] for row in reader if row]
    arr = np.asarray(rows)
    return {
        "t": arr[:, 0],
        "p": arr[:, 1:4],
        "v": arr[:, 4:7],
        "rpy": arr[:, 7:10],
        "stationary": arr[:, 10].astype(bool),
    }


# ---------------------------------------------------------------------------
# metrics


def heading_error_circular(est, ref) -> float:
    """Angular RMSE from per-sample chordal distances on the unit circle.

    Each pair contributes the chord sqrt((sin a - sin b)^2 +
    (cos a - cos b)^2), converted back to an angle via 2 asin(chord/2),
    which makes the result invariant to adding multiples of 2 pi.
    """
    est = np.asarray(est, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if est.shape != ref.shape:
        raise ValidationError("heading sequences must have equal length")
    chord = np.sqrt((np.sin(est) - np.sin(ref)) ** 2 + (np.cos(est) - np.cos(ref)) ** 2)
    ang = 2.0 * np.arcsin(np.clip(chord / 2.0, 0.0, 1.0))
    return float(np.sqrt(np.mean(ang**2)))


def zvd_scores(estimated: np.ndarray, truth: np.ndarray) -> tuple[float, float]:
    """Precision and recall of a stationarity mask against its truth."""
    est = np.asarray(estimated, dtype=bool)
    tru = np.asarray(truth, dtype=bool)
    tp = int(np.sum(est & tru))
    fp = int(np.sum(est & ~tru))
    fn = int(np.sum(~est & tru))
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    return precision, recall


def max_inter_stance_velocity_error(
    t: np.ndarray, v_est: np.ndarray, v_truth: np.ndarray, stance: np.ndarray
) -> float:
    """Largest velocity-error magnitude between consecutive stance phases."""
    err = np.linalg.norm(np.asarray(v_est) - np.asarray(v_truth), axis=1)
    moving = ~np.asarray(stance, dtype=bool)
    return float(np.max(err[moving])) if np.any(moving) else 0.0


# ---------------------------------------------------------------------------
# configuration and reports


@dataclass
class RunConfig:
    pipeline: str
    seed: int = 0
    input: str | None = None
    output_dir: str = "."
    fs_hint: float | None = None
    pdr: dict = field(default_factory=dict)
    smins: dict = field(default_factory=dict)
    sim: dict = field(default_factory=dict)
    assess: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def provenance(self) -> dict:
        return {
            "config_sha256": self.config_hash,
            "seed": self.seed,
            "pednav_version": __version__,
            "numpy_version": np.__version__,
        }

    def out_path(self, name: str) -> Path:
        out = Path(self.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        return out / name


def load_config(path, pipeline: str, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: config must be a mapping")
    declared = data.get("pipeline")
    if declared is not None and declared != pipeline:
        raise ValidationError(
            f"config selects pipeline {declared!r} but the command runs {pipeline!r}"
        )
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    data["pipeline"] = pipeline
    cfg = RunConfig(
        pipeline=pipeline,
        seed=int(data.get("seed", 0)),
        input=data.get("input"),
        output_dir=str(data.get("output_dir", ".")),
        fs_hint=data.get("fs_hint"),
        pdr=data.get("pdr", {}) or {},
        smins=data.get("smins", {}) or {},
        sim=data.get("sim", {}) or {},
        assess=data.get("assess", {}) or {},
        raw=data,
    )
    return cfg


@dataclass
class RunReport:
    """Per-run metrics plus the provenance needed to reproduce the run."""

    pipeline: str
    provenance: dict
    outputs: dict = field(default_factory=dict)
    step_count: int | None = None
    estimated_distance_m: float | None = None
    reference_distance_m: float | None = None
    relative_error_pct: float | None = None
    endpoint_error_m: float | None = None
    heading_rmse_rad: float | None = None
    zvd_precision: float | None = None
    zvd_recall: float | None = None
    stance_fraction: float | None = None
    max_stance_gap_velocity_error: float | None = None
    covariance_healthy: bool | None = None
    gains: dict | None = None
    notes: list = field(default_factory=list)

    def finish_distance_metrics(self) -> None:
        if self.reference_distance_m and self.estimated_distance_m is not None:
            self.relative_error_pct = (
                100.0
                * (self.estimated_distance_m - self.reference_distance_m)
                / self.reference_distance_m
            )

    def write(self, path) -> None:
        payload = {k: v for k, v in self.__dict__.items() if v is not None}
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


# ---------------------------------------------------------------------------
# command implementations


def _detector_config(section: dict) -> StepDetectorConfig:
    det = section.get("detector", {}) or {}
    return StepDetectorConfig(
        min_step_interval=float(det.get("min_step_interval", 0.3)),
        peak_height_factor=float(det.get("peak_height_factor", 1.5)),
    )


def _load_gains(section: dict, base: Path) -> StepLengthGains | None:
    if "gains_file" in section:
        gpath = Path(section["gains_file"])
        if not gpath.is_absolute():
            gpath = base / gpath
        if not gpath.exists():
            raise ValidationError(f"gains file not found: {gpath}")
        with open(gpath) as fh:
            data = json.load(fh)
        return StepLengthGains(
            k_c=data.get("k_c"),
            k_w=data.get("k_w"),
            k_a1=data.get("k_a1"),
            k_a2=data.get("k_a2"),
            k_a3=data.get("k_a3"),
            residual=data.get("residual"),
        )
    if "gains" in section:
        g = section["gains"]
        return StepLengthGains(
            k_c=g.get("k_c"),
            k_w=g.get("k_w"),
            k_a1=g.get("k_a1"),
            k_a2=g.get("k_a2"),
            k_a3=g.get("k_a3"),
        )
    return None


def cmd_pdr_run(cfg: RunConfig) -> RunReport:
    if not cfg.input:
        raise ValidationError("pdr run needs an input stream (input: path)")
    section = cfg.pdr
    stream = ingest_imu_csv(cfg.input, cfg.fs_hint)
    model = StepLengthModel(section.get("model", "SL2"))
    gains = _load_gains(section, Path(cfg.output_dir))
    init_sec = section.get("init", {}) or {}
    init = (
        float(init_sec.get("x0", 0.0)),
        float(init_sec.get("y0", 0.0)),
        float(init_sec.get("psi0", 0.0)),
    )
    traj = run_pdr(
        stream,
        cfg=_detector_config(section),
        gains=gains,
        model=model,
        heading_mode=section.get("heading_mode", "AHRS_aligned"),
        init=init,
        height=section.get("height"),
        gender=section.get("gender", "male"),
    )
    traj_path = cfg.out_path("trajectory.csv")
    write_trajectory_csv(traj_path, traj.t, traj.xy, traj.headings)

    report = RunReport(pipeline="pdr", provenance=cfg.provenance())
    report.outputs["trajectory"] = str(traj_path)
    report.step_count = len(traj.steps)
    report.estimated_distance_m = traj.track_length
    ref = section.get("reference_distance")
    if ref is not None:
        report.reference_distance_m = float(ref)
        report.finish_distance_metrics()
    if report.step_count == 0:
        report.notes.append("no steps detected; trajectory holds the initial point only")

    truth_path = section.get("truth")
    if truth_path:
        truth = read_trajectory_csv(truth_path)
        endpoint = np.linalg.norm(traj.xy[-1] - truth["xy"][-1])
        report.endpoint_error_m = float(endpoint)
        if "psi_u" in truth and truth["t"].size == traj.t.size:
            report.heading_rmse_rad = heading_error_circular(
                traj.headings, truth["psi_u"][1:]
            )
    report_path = cfg.out_path("report.json")
    report.write(report_path)
    report.outputs["report"] = str(report_path)
    return report


def cmd_pdr_calibrate(cfg: RunConfig) -> RunReport:
    if not cfg.input:
        raise ValidationError("pdr calibrate needs an input stream (input: path)")
    section = cfg.pdr
    ref = section.get("reference_distance")
    if ref is None:
        raise ValidationError("calibration needs pdr.reference_distance")
    model = StepLengthModel(section.get("model", "SL2"))
    stream = ingest_imu_csv(cfg.input, cfg.fs_hint)
    steps = detect_steps(stream, _detector_config(section))
    gains = calibrate_gains(steps, float(ref), model)

    gains_path = cfg.out_path("gains.json")
    payload = {"model": model.value}
    for key in ("k_c", "k_w", "k_a1", "k_a2", "k_a3", "residual"):
        val = getattr(gains, key)
        if val is not None:
            payload[key] = val
    with open(gains_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")

    report = RunReport(pipeline="pdr", provenance=cfg.provenance(), gains=payload)
    report.outputs["gains"] = str(gains_path)
    report.step_count = len(steps)
    report.reference_distance_m = float(ref)
    from .pdr import step_length_adaptive, step_length_weinberg

    if model is StepLengthModel.WEINBERG:
        report.estimated_distance_m = float(
            np.sum([step_length_weinberg(ev, gains.k_w) for ev in steps])
        )
    else:
        report.estimated_distance_m = float(
            np.sum([step_length_adaptive(ev, gains) for ev in steps])
        )
    report.finish_distance_metrics()
    report_path = cfg.out_path("calibration_report.json")
    report.write(report_path)
    report.outputs["report"] = str(report_path)
    return report


def _sensor_model(section: dict) -> SensorErrorModel:
    return SensorErrorModel(
        sigma_a=float(section.get("sigma_a", 0.0)),
        sigma_g=float(section.get("sigma_g", 0.0)),
        sigma_ab=float(section.get("sigma_ab", 0.0)),
        sigma_gb=float(section.get("sigma_gb", 0.0)),
        b_a0=np.asarray(section.get("b_a0", [0.0, 0.0, 0.0]), dtype=float),
        b_g0=np.asarray(section.get("b_g0", [0.0, 0.0, 0.0]), dtype=float),
    )


def _zvd_config(section: dict) -> ZvdConfig:
    z = section.get("zvd", {}) or {}
    return ZvdConfig(
        gamma_fmag_min=float(z.get("gamma_fmag_min", 9.0)),
        gamma_fmag_max=float(z.get("gamma_fmag_max", 11.0)),
        gamma_sigma_f=float(z.get("gamma_sigma_f", 0.5)),
        gamma_omega=float(z.get("gamma_omega", 0.6)),
        window=int(z.get("window", 7)),
        median_window=int(z.get("median_window", 11)),
        printed_inequalities=bool(z.get("printed_inequalities", False)),
    )


def cmd_smins_run(cfg: RunConfig) -> RunReport:
    if not cfg.input:
        raise ValidationError("smins run needs an input stream (input: path)")
    section = cfg.smins
    stream = ingest_imu_csv(cfg.input, cfg.fs_hint)
    model = _sensor_model(section.get("error_model", {}) or {})
    filt_sec = section.get("filter", {}) or {}
    p0_blocks = filt_sec.get("P0_diag_blocks")
    P0 = None
    if p0_blocks is not None:
        P0 = np.diag(
            np.repeat(
                [
                    float(p0_blocks.get("pos", 1e-6)),
                    float(p0_blocks.get("vel", 1e-6)),
                    float(p0_blocks.get("att", 1e-6)),
                    float(p0_blocks.get("ba", 1e-4)),
                    float(p0_blocks.get("bg", 1e-6)),
                ],
                3,
            )
        )
    filt = ErrorStateFilter.create(
        model,
        fs=stream.sample_rate(),
        P0=P0,
        r_zvu=float(filt_sec.get("r_zvu", 0.01)),
        r_zar=float(filt_sec.get("r_zar", 0.01)),
    )
    init_sec = section.get("init", {}) or {}
    init = NavState(
        p=np.asarray(init_sec.get("p", [0.0, 0.0, 0.0]), dtype=float),
        v=np.asarray(init_sec.get("v", [0.0, 0.0, 0.0]), dtype=float),
        T_rb=np.eye(3),
        t=float(stream.t[0]),
    )
    aiding = set(section.get("aiding", ["ZVU", "ZAR"]))
    g = float(section.get("g", GRAVITY))

    truth = None
    truth_path = section.get("truth")
    if truth_path:
        truth = read_nav_csv(truth_path)
        if truth["t"].size != len(stream):
            raise ValidationError("truth file length does not match the stream")

    stance_mask = None
    if section.get("stance_source", "detector") == "truth":
        if truth is None:
            raise ValidationError("stance_source: truth requires a truth file")
        stance_mask = truth["stationary"]

    result = run_smins(
        stream,
        init=init,
        errmodel=model,
        zvd_cfg=_zvd_config(section),
        aiding=aiding,
        stance_mask=stance_mask,
        filt=filt,
        g=g,
        backend=section.get("backend"),
    )

    nav_path = cfg.out_path("nav.csv")
    write_nav_csv(
        nav_path,
        result.t,
        result.positions,
        result.velocities,
        result.attitudes,
        result.stationary,
    )
    report = RunReport(pipeline="smins", provenance=cfg.provenance())
    report.outputs["nav"] = str(nav_path)
    report.stance_fraction = float(np.mean(result.stationary))
    try:
        result.filter.check_health()
        report.covariance_healthy = True
    except NumericalHealthError as exc:
        report.covariance_healthy = False
        report.notes.append(str(exc))

    if truth is not None:
        report.endpoint_error_m = float(
            np.linalg.norm(result.positions[-1] - truth["p"][-1])
        )
        report.max_stance_gap_velocity_error = max_inter_stance_velocity_error(
            result.t, result.velocities, truth["v"], truth["stationary"]
        )
        prec, rec = zvd_scores(result.stationary, truth["stationary"])
        report.zvd_precision = prec
        report.zvd_recall = rec
    report_path = cfg.out_path("report.json")
    report.write(report_path)
    report.outputs["report"] = str(report_path)
    return report


def _gait_profile(section: dict) -> GaitProfile:
    prof = section.get("profile", {}) or {}
    kwargs = {}
    for key in (
        "step_frequency",
        "step_length",
        "walk_speed",
        "stance_duration",
        "swing_peak_accel",
        "waveform",
        "pulse_duty",
        "swing_rate",
        "swing_margin",
    ):
        if key in prof:
            kwargs[key] = prof[key]
    for key in ("heading_script", "device_offset_script"):
        if key in prof and prof[key] is not None:
            kwargs[key] = [(float(a), float(b)) for a, b in prof[key]]
    return GaitProfile(**kwargs)


def cmd_sim(cfg: RunConfig, kind: str) -> RunReport:
    section = cfg.sim
    fs = float(section.get("fs", 100.0))
    duration = float(section.get("duration", 30.0))
    profile = _gait_profile(section)
    report = RunReport(pipeline="sim", provenance=cfg.provenance())

    if kind == "gait":
        stream, truth = generate_handheld_walk(profile, fs, duration)
        truth_path = cfg.out_path("truth_trajectory.csv")
        write_trajectory_csv(truth_path, truth.t, truth.xy, truth.headings)
        report.outputs["truth"] = str(truth_path)
        report.step_count = len(truth.lengths)
        stance = None
    elif kind == "foot":
        stream, foot_truth, stance = generate_foot_mounted_walk(
            profile, fs, duration, g=float(section.get("g", GRAVITY))
        )
        truth_path = cfg.out_path("truth_nav.csv")
        write_nav_csv(
            truth_path, foot_truth.t, foot_truth.p, foot_truth.v, foot_truth.c, stance
        )
        report.outputs["truth"] = str(truth_path)
        report.stance_fraction = float(np.mean(stance))
    else:
        raise ValidationError(f"unknown sim kind {kind!r}")

    if section.get("errors"):
        stream = inject_sensor_errors(stream, _sensor_model(section["errors"]), cfg.seed)
    stream_path = cfg.out_path("stream.csv")
    write_imu_csv(stream_path, stream)
    report.outputs["stream"] = str(stream_path)
    report_path = cfg.out_path("sim_report.json")
    report.write(report_path)
    report.outputs["report"] = str(report_path)
    return report


def cmd_assess(cfg: RunConfig) -> RunReport:
    section = cfg.assess
    bsec = section.get("budget", {}) or {}
    budget = ErrorBudget(
        b_a=float(bsec.get("b_a_mg", 5.0)) / 1000.0,
        delta_kw=float(bsec.get("delta_kw", 0.05)),
        correction_efficiency=float(bsec.get("correction_efficiency", 0.9)),
        zupt_interval=float(bsec.get("zupt_interval", 1.0)),
        g=float(bsec.get("g", GRAVITY)),
    )
    walk_speed = float(section.get("walk_speed", 2.0))
    t_end = float(section.get("t_end", 30.0))
    dt = float(section.get("dt", 1.0))
    mode = section.get("smins_mode", "velocity_reset")
    if t_end < 0.0 or dt <= 0.0:
        raise ValidationError("assess needs t_end >= 0 and dt > 0")

    times = np.arange(0.0, t_end + dt / 2.0, dt)
    drift_path = cfg.out_path("drift.csv")
    with open(drift_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "ins_m", "pdr_m", "smins_m"])
        for t in times:
            writer.writerow(
                [
                    _fmt(t),
                    _fmt(assess_ins_drift(budget, t)),
                    _fmt(assess_pdr_drift_distance(budget, walk_speed * t)),
                    _fmt(assess_smins_drift(budget, t, mode=mode)),
                ]
            )
    report = RunReport(pipeline="assess", provenance=cfg.provenance())
    report.outputs["drift"] = str(drift_path)
    report.notes.append(
        f"at t={t_end:g} s: ins={assess_ins_drift(budget, t_end):.6g} m, "
        f"pdr={assess_pdr_drift_distance(budget, walk_speed * t_end):.6g} m, "
        f"smins={assess_smins_drift(budget, t_end, mode=mode):.6g} m"
    )
    report_path = cfg.out_path("assess_report.json")
    report.write(report_path)
    report.outputs["report"] = str(report_path)
    return report


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pednav", description="Pedestrian inertial navigation toolkit"
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("-c", "--config", required=True, help="YAML run configuration")
        p.add_argument("--input", help="override the input path")
        p.add_argument("--output-dir", help="override the output directory")
        p.add_argument("--seed", type=int, help="override the seed")

    pdr = sub.add_parser("pdr", help="step-and-heading positioning")
    pdr_sub = pdr.add_subparsers(dest="action", required=True)
    add_common(pdr_sub.add_parser("run"))
    add_common(pdr_sub.add_parser("calibrate"))

    smins = sub.add_parser("smins", help="zero-velocity aided navigation")
    smins_sub = smins.add_subparsers(dest="action", required=True)
    add_common(smins_sub.add_parser("run"))

    simp = sub.add_parser("sim", help="synthetic data generation")
    sim_sub = simp.add_subparsers(dest="action", required=True)
    add_common(sim_sub.add_parser("gait"))
    add_common(sim_sub.add_parser("foot"))

    assess = sub.add_parser("assess", help="analytical drift comparison")
    assess_sub = assess.add_subparsers(dest="action", required=True)
    add_common(assess_sub.add_parser("drift"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    overrides = {
        "input": getattr(args, "input", None),
        "output_dir": getattr(args, "output_dir", None),
        "seed": getattr(args, "seed", None),
    }
    pipeline = {"pdr": "pdr", "smins": "smins", "sim": "sim", "assess": "assess"}[
        args.command
    ]
    try:
        cfg = load_config(args.config, pipeline, overrides)
        if args.command == "pdr" and args.action == "run":
            report = cmd_pdr_run(cfg)
        elif args.command == "pdr" and args.action == "calibrate":
            report = cmd_pdr_calibrate(cfg)
        elif args.command == "smins":
            report = cmd_smins_run(cfg)
        elif args.command == "sim":
            report = cmd_sim(cfg, args.action)
        else:
            report = cmd_assess(cfg)
    except NumericalHealthError as exc:
        print(f"numerical-health failure: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, PednavError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for name, path in report.outputs.items():
        logger.info("wrote %s: %s", name, path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
