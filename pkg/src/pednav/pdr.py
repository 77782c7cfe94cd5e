"""Model-based pedestrian dead reckoning.

The pipeline has four stages: step detection on the specific-force
magnitude, step-length estimation (constant / inverted-pendulum /
adaptive models), heading or walking-direction estimation, and the 2-D
position recursion. Step-length gains are obtained from a calibration
walk of known distance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from .core import (
    GRAVITY,
    ImuStream,
    LowPassFilter,
    quat_integrate,
    wrap_angle,
)
from .errors import DegenerateCalibrationError, FreeFallError, ValidationError

logger = logging.getLogger(__name__)

K_CONSTANT_MALE = 0.415
K_CONSTANT_FEMALE = 0.413


class StepLengthModel(str, Enum):
    CONSTANT = "SL1"
    WEINBERG = "SL2"
    ADAPTIVE = "SL3"


class HeadingMode(str, Enum):
    AHRS_ALIGNED = "AHRS_aligned"
    GRAVITY_OFFSET = "gravity_offset"


@dataclass
class StepDetectorConfig:
    min_step_interval: float = 0.3
    peak_height_factor: float = 1.5

    def __post_init__(self):
        if self.min_step_interval <= 0.0:
            raise ValidationError("min_step_interval must be positive")
        if self.peak_height_factor <= 0.0:
            raise ValidationError("peak_height_factor must be positive")


@dataclass(frozen=True)
class StepEvent:
    """One detected step and the features of its interval.

    The step interval runs from the previous peak (exclusive) to this
    step's peak (inclusive); the first step's interval starts at the
    beginning of the recording.
    """

    t_peak: float
    f_peak: float
    f_mag_max: float
    f_mag_min: float
    duration: float
    step_frequency: float
    sigma_f: float

    def __post_init__(self):
        if self.f_mag_max < self.f_mag_min:
            raise ValidationError("f_mag_max must be >= f_mag_min")

    @property
    def peak_to_peak(self) -> float:
        return self.f_mag_max - self.f_mag_min

    @property
    def weinberg_feature(self) -> float:
        """Fourth root of the peak-to-peak specific-force magnitude."""
        return self.peak_to_peak ** 0.25


@dataclass
class StepLengthGains:
    k_c: float | None = None
    k_w: float | None = None
    k_a1: float | None = None
    k_a2: float | None = None
    k_a3: float | None = None
    residual: float | None = None

    def adaptive_vector(self) -> np.ndarray:
        if self.k_a1 is None or self.k_a2 is None or self.k_a3 is None:
            raise ValidationError("adaptive gains k_a1..k_a3 are not set")
        return np.array([self.k_a1, self.k_a2, self.k_a3])


@dataclass(frozen=True)
class HeadingState:
    """Device heading, device-to-user offset, and walking direction.

    psi_u = psi_p - psi_s by construction, all wrapped to (-pi, pi].
    """

    psi_p: float
    psi_s: float
    psi_u: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "psi_p", wrap_angle(self.psi_p))
        object.__setattr__(self, "psi_s", wrap_angle(self.psi_s))
        object.__setattr__(self, "psi_u", wrap_angle(self.psi_p - self.psi_s))


@dataclass
class Trajectory2D:
    """Planar step-wise track; point 0 is the known initial position."""

    t: np.ndarray
    xy: np.ndarray
    lengths: np.ndarray
    headings: np.ndarray
    steps: list[StepEvent] = field(default_factory=list)

    @property
    def track_length(self) -> float:
        return float(np.sum(self.lengths))

    @property
    def endpoint_displacement(self) -> float:
        return float(np.linalg.norm(self.xy[-1] - self.xy[0]))


class ForceStats(NamedTuple):
    magnitudes: np.ndarray
    mean: float
    sigma_f: float
    sigma_f_double_centered: float


def specific_force_stats(stream) -> ForceStats:
    """Per-sample magnitude, trajectory mean and standard deviation.

    ``sigma_f`` is the population standard deviation of the magnitude
    (the RMS of the mean-removed magnitude) and is what detection
    thresholds use. ``sigma_f_double_centered`` additionally subtracts
    the mean from the already mean-removed signal, i.e. the RMS of
    (f_mag - 2 f_bar); it is reported for completeness only.
    """
    stream = ImuStream.coerce(stream)
    mags = np.linalg.norm(stream.f, axis=1)
    mean = float(np.mean(mags))
    centered = mags - mean
    sigma = float(np.sqrt(np.mean(centered**2)))
    sigma_dc = float(np.sqrt(np.mean((centered - mean) ** 2)))
    return ForceStats(mags, mean, sigma, sigma_dc)


def _local_maxima(x: np.ndarray) -> np.ndarray:
    """Indices of strict local maxima; plateau ties go to the earlier sample."""
    if x.size < 3:
        return np.empty(0, dtype=int)
    mask = (x[1:-1] > x[:-2]) & (x[1:-1] >= x[2:])
    return np.nonzero(mask)[0] + 1


def detect_steps(stream, cfg: StepDetectorConfig | None = None) -> list[StepEvent]:
    """Peak-based step detection on the mean-removed force magnitude.

    A valid peak is a local maximum exceeding
    ``peak_height_factor * sigma_f`` and at least ``min_step_interval``
    after the previously accepted peak (earliest-first).
    """
    cfg = cfg or StepDetectorConfig()
    stream = ImuStream.coerce(stream)
    if stream.duration <= cfg.min_step_interval:
        raise ValidationError("stream shorter than the minimum step interval")
    if len(stream) >= 2 and stream.sample_rate() < 20.0:
        raise ValidationError("step detection needs a sampling rate of at least 20 Hz")
    for idx, gap in stream.gaps(0.5):
        logger.warning("sampling gap of %.3f s before sample %d", gap, idx)

    stats = specific_force_stats(stream)
    fm = stats.magnitudes - stats.mean
    threshold = cfg.peak_height_factor * stats.sigma_f

    peaks: list[int] = []
    for i in _local_maxima(fm):
        if fm[i] <= threshold:
            continue
        if peaks and stream.t[i] - stream.t[peaks[-1]] < cfg.min_step_interval:
            continue
        peaks.append(int(i))

    events: list[StepEvent] = []
    prev = None
    for i in peaks:
        lo = 0 if prev is None else prev + 1
        seg = stats.magnitudes[lo : i + 1]
        t0 = stream.t[0] if prev is None else stream.t[prev]
        duration = float(stream.t[i] - t0)
        events.append(
            StepEvent(
                t_peak=float(stream.t[i]),
                f_peak=float(fm[i]),
                f_mag_max=float(np.max(seg)),
                f_mag_min=float(np.min(seg)),
                duration=duration,
                step_frequency=1.0 / duration,
                sigma_f=float(np.std(seg)),
            )
        )
        prev = i
    return events


def step_length_constant(height: float, gender: str = "male") -> float:
    """Constant step length proportional to body height."""
    if not (0.5 < height < 2.5):
        raise ValidationError(f"height {height} m outside the plausible range")
    g = gender.lower()
    if g in ("male", "m"):
        k = K_CONSTANT_MALE
    elif g in ("female", "f"):
        k = K_CONSTANT_FEMALE
    else:
        raise ValidationError(f"unknown gender {gender!r}")
    return k * height


def step_length_weinberg(ev: StepEvent, k_w: float) -> float:
    """Inverted-pendulum step length: k_w * (f_max - f_min)^(1/4)."""
    if k_w <= 0.0:
        raise ValidationError("Weinberg gain must be positive")
    return k_w * ev.weinberg_feature


def step_length_adaptive(ev: StepEvent, gains: StepLengthGains) -> float:
    """Affine model in step frequency and per-step force deviation.

    k_a1 * SF + k_a2 * sigma_f + k_a3, clamped at zero because a
    negative step length is physically meaningless.
    """
    if ev.step_frequency <= 0.0:
        raise ValidationError("step frequency must be positive")
    k1, k2, k3 = gains.adaptive_vector()
    return max(0.0, k1 * ev.step_frequency + k2 * ev.sigma_f + k3)


def calibrate_gains(
    steps: list[StepEvent],
    known_distance: float,
    model: StepLengthModel | str = StepLengthModel.WEINBERG,
) -> StepLengthGains:
    """Fit step-length gains so the walk reproduces a known distance.

    The Weinberg gain has the closed form D / sum_j (df_j)^(1/4). The
    adaptive gains are a least-squares fit of (SF, sigma_f, 1) against
    per-step target lengths obtained by distributing the distance
    proportionally to the Weinberg features (per-step truth is not
    observable from a single total). A rank-deficient adaptive system is
    solved minimum-norm when it is consistent and rejected otherwise.
    """
    model = StepLengthModel(model)
    if known_distance <= 0.0:
        raise ValidationError("known distance must be positive")
    if model is StepLengthModel.CONSTANT:
        raise ValidationError("the constant model has no calibratable gain")

    weights = np.array([ev.weinberg_feature for ev in steps])
    if model is StepLengthModel.WEINBERG:
        if len(steps) < 1:
            raise ValidationError("Weinberg calibration needs at least one step")
        total = float(np.sum(weights))
        if total <= 0.0:
            raise ValidationError("zero peak-to-peak force; cannot calibrate")
        k_w = known_distance / total
        return StepLengthGains(k_w=k_w, residual=0.0)

    if len(steps) < 3:
        raise ValidationError("adaptive calibration needs at least three steps")
    if np.sum(weights) <= 0.0:
        raise ValidationError("zero peak-to-peak force; cannot calibrate")
    targets = known_distance * weights / np.sum(weights)
    design = np.column_stack(
        [
            [ev.step_frequency for ev in steps],
            [ev.sigma_f for ev in steps],
            np.ones(len(steps)),
        ]
    )
    solution, _, rank, _ = np.linalg.lstsq(design, targets, rcond=None)
    residual = float(np.linalg.norm(design @ solution - targets))
    if rank < 3:
        if residual > 1e-9 * max(1.0, known_distance):
            raise DegenerateCalibrationError(
                f"adaptive design matrix has rank {rank} and the system is "
                f"inconsistent (residual {residual:.3g})"
            )
        logger.warning(
            "adaptive calibration is underdetermined (rank %d); "
            "returning the minimum-norm gains",
            rank,
        )
    return StepLengthGains(
        k_a1=float(solution[0]),
        k_a2=float(solution[1]),
        k_a3=float(solution[2]),
        residual=residual,
    )


def heading_from_quaternion(q: np.ndarray) -> float:
    """Device heading atan2(2(q2 q3 - q1 q4), 1 - 2(q3^2 + q4^2)) in (-pi, pi]."""
    q1, q2, q3, q4 = q
    sin_pitch = 2.0 * (q1 * q3 + q2 * q4)
    if abs(sin_pitch) > 1.0 - 1e-6:
        logger.warning("heading is low-confidence near +/-90 deg pitch")
    return wrap_angle(float(np.arctan2(2.0 * (q2 * q3 - q1 * q4), 1.0 - 2.0 * (q3 * q3 + q4 * q4))))


def walking_direction_gravity(
    stream,
    lpf: LowPassFilter | None = None,
    psi0: float = 0.0,
    fs: float | None = None,
) -> np.ndarray:
    """Walking direction by integrating the gravity-projected turn rate.

    The low-pass-filtered specific force gives the gravity direction
    gamma = -f_lpf / ||f_lpf||; the angular rate projected on gamma is
    the horizontal turning rate, accumulated from ``psi0``. Returns the
    unwrapped per-sample walking direction. Accuracy assumes steady
    walking; transients degrade the gravity estimate.
    """
    stream = ImuStream.coerce(stream)
    lpf = lpf or LowPassFilter(cutoff_hz=1.0)
    fs = fs if fs is not None else stream.sample_rate()
    f_lpf = lpf.apply(stream.f, fs)
    norms = np.linalg.norm(f_lpf, axis=1)
    if np.any(norms < 0.5):
        raise FreeFallError("filtered specific force below 0.5 m/s^2")
    gamma = -f_lpf / norms[:, None]
    omega_v = np.sum(gamma * stream.w, axis=1)
    psi = np.empty(len(stream))
    psi[0] = psi0
    if len(stream) > 1:
        psi[1:] = psi0 + np.cumsum(omega_v[1:] * np.diff(stream.t))
    return psi


def position_update_2d(prev: tuple[float, float], s: float, psi_u: float) -> tuple[float, float]:
    """Advance a planar position by step length s along heading psi_u."""
    if s < 0.0:
        raise ValidationError("step length must be non-negative")
    x, y = prev
    return (x + s * np.cos(psi_u), y + s * np.sin(psi_u))


def _ahrs_headings(stream: ImuStream) -> np.ndarray:
    """Per-sample device heading from integrating the gyroscope quaternion."""
    q = np.array([1.0, 0.0, 0.0, 0.0])
    psi = np.empty(len(stream))
    psi[0] = heading_from_quaternion(q)
    for k in range(1, len(stream)):
        dt = stream.t[k] - stream.t[k - 1]
        q = quat_integrate(q, stream.w[k], dt)
        psi[k] = heading_from_quaternion(q)
    return psi


def run_pdr(
    stream,
    cfg: StepDetectorConfig | None = None,
    gains: StepLengthGains | None = None,
    model: StepLengthModel | str = StepLengthModel.WEINBERG,
    heading_mode: HeadingMode | str = HeadingMode.AHRS_ALIGNED,
    init: tuple[float, float, float] = (0.0, 0.0, 0.0),
    height: float | None = None,
    gender: str = "male",
    lpf: LowPassFilter | None = None,
) -> Trajectory2D:
    """Full step-and-heading positioning from a known initial pose.

    ``init`` is (x0, y0, psi0). With ``AHRS_aligned`` the device is
    assumed aligned with the walking direction (zero offset) and the
    heading comes from the gyroscope quaternion; with ``gravity_offset``
    the walking direction is integrated from the gravity-projected turn
    rate, which tolerates a constant device offset.
    """
    model = StepLengthModel(model)
    heading_mode = HeadingMode(heading_mode)
    stream = ImuStream.coerce(stream)
    x0, y0, psi0 = init

    steps = detect_steps(stream, cfg)
    if not steps:
        logger.warning("no steps detected; returning the initial position only")
        return Trajectory2D(
            t=np.array([stream.t[0]]),
            xy=np.array([[x0, y0]]),
            lengths=np.empty(0),
            headings=np.empty(0),
            steps=[],
        )

    if model is StepLengthModel.CONSTANT:
        if height is None:
            raise ValidationError("the constant model needs the user height")
        const_len = step_length_constant(height, gender)
        lengths = np.full(len(steps), const_len)
    elif model is StepLengthModel.WEINBERG:
        if gains is None or gains.k_w is None:
            raise ValidationError("Weinberg model requires a calibrated k_w")
        lengths = np.array([step_length_weinberg(ev, gains.k_w) for ev in steps])
    else:
        if gains is None:
            raise ValidationError("adaptive model requires calibrated gains")
        lengths = np.array([step_length_adaptive(ev, gains) for ev in steps])

    peak_idx = np.searchsorted(stream.t, [ev.t_peak for ev in steps])
    if heading_mode is HeadingMode.AHRS_ALIGNED:
        psi_all = psi0 + _ahrs_headings(stream)
    else:
        psi_all = walking_direction_gravity(stream, lpf=lpf, psi0=psi0)
    headings = psi_all[peak_idx]

    t = np.empty(len(steps) + 1)
    xy = np.empty((len(steps) + 1, 2))
    t[0] = stream.t[0]
    xy[0] = (x0, y0)
    pos = (x0, y0)
    for j, ev in enumerate(steps):
        pos = position_update_2d(pos, lengths[j], headings[j])
        t[j + 1] = ev.t_peak
        xy[j + 1] = pos
    return Trajectory2D(t=t, xy=xy, lengths=lengths, headings=headings, steps=steps)
