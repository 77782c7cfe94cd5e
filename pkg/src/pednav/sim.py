"""Synthetic pedestrian IMU generation and analytical drift assessment.

Two generators cover the two pipelines: a handheld walk whose
specific-force magnitude carries one peak per step (for step detection
and heading work), and a foot-mounted gait alternating exact stance
phases with swing pulses (for zero-velocity aided navigation). The
foot-mounted ground truth is constructed in discrete time by inverting
the strapdown recursion, so mechanizing the ideal stream reproduces the
truth to round-off.

The drift assessments are closed forms for the position error of free
inertial integration, step-and-heading reckoning with a miscalibrated
gain, and stance-aided integration with periodic velocity resets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .core import GRAVITY, ImuStream
from .errors import ValidationError
from .pdr import StepEvent, Trajectory2D
from .smins import NavState, SensorErrorModel

GOLDEN_SEED = 316
GOLDEN_FS = 100.0
GOLDEN_DURATION = 13.9
GOLDEN_DISTANCE = 25.4
GOLDEN_STEP_COUNT = 26


@dataclass
class GaitProfile:
    """Parameters of a synthetic walk.

    ``heading_script`` and ``device_offset_script`` are piecewise-linear
    anchor sequences [(t, angle_rad), ...] for the walking direction and
    the device-to-user offset; both default to constant zero. The
    handheld waveform is either ``sinusoid`` (magnitude g + A sin) or
    ``pulse`` (one raised-cosine burst per step, a peakier and more
    gait-like shape).
    """

    step_frequency: float = 1.9
    step_length: float = 0.7
    walk_speed: float | None = None
    stance_duration: float = 0.3
    swing_peak_accel: float = 3.0
    heading_script: list[tuple[float, float]] | None = None
    device_offset_script: list[tuple[float, float]] | None = None
    waveform: str = "sinusoid"
    pulse_duty: float = 0.4
    swing_rate: float = 2.0
    swing_margin: int = 8

    def __post_init__(self):
        if self.step_frequency <= 0.0 or self.step_length < 0.0:
            raise ValidationError("step frequency and length must be positive")
        if self.stance_duration >= 1.0 / self.step_frequency:
            raise ValidationError("stance must be shorter than a full step cycle")
        if self.waveform not in ("sinusoid", "pulse"):
            raise ValidationError(f"unknown waveform {self.waveform!r}")
        if self.walk_speed is None:
            self.walk_speed = self.step_length * self.step_frequency


def _script_values(script, t: np.ndarray) -> np.ndarray:
    if not script:
        return np.zeros_like(t)
    pts = np.asarray(script, dtype=float)
    return np.interp(t, pts[:, 0], pts[:, 1])


def scripted_headings(profile: GaitProfile, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Walking direction and device offset evaluated on a time grid."""
    return (
        _script_values(profile.heading_script, t),
        _script_values(profile.device_offset_script, t),
    )


def generate_handheld_walk(
    profile: GaitProfile, fs: float, duration: float
) -> tuple[ImuStream, Trajectory2D]:
    """Synthesize a handheld recording and its per-step ground truth.

    The device is carried flat (body z down); the specific-force
    magnitude oscillates about gravity with one peak per step and the
    z gyroscope carries the scripted device-heading rate, emitted so its
    cumulative sum reproduces the script exactly.
    """
    if fs < 50.0:
        raise ValidationError("handheld generator needs at least 50 Hz")
    n = int(round(duration * fs))
    t = np.arange(n) / fs
    sf = profile.step_frequency
    amp = profile.swing_peak_accel

    if profile.waveform == "sinusoid":
        mag = GRAVITY + amp * np.sin(2.0 * np.pi * sf * t)
        peak_times = [(j + 0.25) / sf for j in range(int(np.floor(duration * sf)))]
        peak_times = [tp for tp in peak_times if tp <= t[-1]]
    else:
        width = profile.pulse_duty / sf
        mag = np.full(n, GRAVITY)
        peak_times = []
        j = 0
        while True:
            center = (j + 1) / sf
            if center + width / 2.0 > t[-1]:
                break
            peak_times.append(center)
            lo = np.searchsorted(t, center - width / 2.0)
            hi = np.searchsorted(t, center + width / 2.0, side="right")
            phase = (t[lo:hi] - center) / width
            mag[lo:hi] += amp * 0.5 * (1.0 + np.cos(2.0 * np.pi * phase))
            j += 1

    psi_u, psi_s = scripted_headings(profile, t)
    psi_p = psi_u + psi_s
    wz = np.zeros(n)
    if n > 1:
        wz[1:] = np.diff(psi_p) * fs

    f = np.zeros((n, 3))
    f[:, 2] = -mag
    w = np.zeros((n, 3))
    w[:, 2] = wz
    stream = ImuStream(t, f, w)

    psi_steps = _script_values(profile.heading_script, np.asarray(peak_times))
    xy = np.zeros((len(peak_times) + 1, 2))
    for j, psi in enumerate(psi_steps):
        xy[j + 1, 0] = xy[j, 0] + profile.step_length * np.cos(psi)
        xy[j + 1, 1] = xy[j, 1] + profile.step_length * np.sin(psi)
    truth = Trajectory2D(
        t=np.concatenate([[0.0], peak_times]),
        xy=xy,
        lengths=np.full(len(peak_times), profile.step_length),
        headings=np.asarray(psi_steps),
    )
    return stream, truth


@dataclass
class FootTruth:
    """Discrete ground truth of a foot-mounted run."""

    t: np.ndarray
    p: np.ndarray
    v: np.ndarray
    c: np.ndarray  # body-to-reference matrices, (N, 3, 3)

    def nav_states(self):
        for k in range(self.t.size):
            yield NavState(p=self.p[k], v=self.v[k], T_rb=self.c[k].T, t=float(self.t[k]))

    def final_state(self) -> NavState:
        return NavState(p=self.p[-1], v=self.v[-1], T_rb=self.c[-1].T, t=float(self.t[-1]))


def _cayley_step(c: np.ndarray, w: np.ndarray, dt: float) -> np.ndarray:
    omega = np.array(
        [[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]]
    )
    a = 2.0 * np.eye(3) + omega * dt
    b = 2.0 * np.eye(3) - omega * dt
    return np.linalg.solve(b.T, (c @ a).T).T


def generate_foot_mounted_walk(
    profile: GaitProfile, fs: float, duration: float, g: float = GRAVITY
) -> tuple[ImuStream, FootTruth, np.ndarray]:
    """Foot-mounted gait with exact stance phases and a labeled mask.

    Each cycle is ``stance_duration`` of perfect rest (specific force
    exactly opposing gravity, zero rate) followed by a swing whose
    forward velocity is a raised-cosine bump confined to the middle of
    the swing; the margins around it keep the force quiet while the
    foot pitch rate (a +/- square profile with zero net rotation) stays
    above any stationarity threshold, so detector transitions are crisp.
    The emitted specific force is derived by inverting the discrete
    mechanization, making the ground truth exact under it.
    """
    if fs < 100.0:
        raise ValidationError("foot-mounted generator needs at least 100 Hz")
    dt = 1.0 / fs
    cycle = 1.0 / profile.step_frequency
    n_cycle = int(round(cycle * fs))
    n_stance = int(round(profile.stance_duration * fs))
    n_swing = n_cycle - n_stance
    margin = profile.swing_margin
    n_active = n_swing - 2 * margin
    if n_active < 4:
        raise ValidationError(
            "swing too short to realize the step length: "
            f"{n_swing} swing samples minus margins leaves {n_active}"
        )

    n = int(round(duration * fs))
    t = np.arange(n) / fs

    stance = np.zeros(n, dtype=bool)
    v_ref = np.zeros((n, 3))
    wy = np.zeros(n)
    bump = 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(1, n_active + 1) / n_active))
    half = n_swing // 2
    for start in range(0, n, n_cycle):
        sw0 = start + n_stance
        stance[start : min(sw0, n)] = True
        if sw0 + n_swing > n:
            # a truncated final cycle never swings, so it rests throughout
            stance[start:n] = True
            break
        scale = profile.step_length / (np.sum(bump) * dt)
        v_ref[sw0 + margin : sw0 + margin + n_active, 0] = scale * bump
        wy[sw0 : sw0 + half] = profile.swing_rate
        wy[sw0 + half : sw0 + n_swing] = -profile.swing_rate

    g_vec = np.array([0.0, 0.0, g])
    p = np.zeros((n, 3))
    c = np.empty((n, 3, 3))
    f = np.empty((n, 3))
    w = np.zeros((n, 3))
    w[:, 1] = wy
    c[0] = np.eye(3)
    f[0] = -g_vec
    w[0] = 0.0
    wy[0] = 0.0
    for k in range(1, n):
        c[k] = _cayley_step(c[k - 1], w[k], dt)
        accel = (v_ref[k] - v_ref[k - 1]) / dt
        f[k] = c[k].T @ (accel - g_vec)
        p[k] = p[k - 1] + dt * v_ref[k - 1]

    stream = ImuStream(t, f, w)
    truth = FootTruth(t=t.copy(), p=p, v=v_ref, c=c)
    return stream, truth, stance


def inject_sensor_errors(stream, model: SensorErrorModel, seed: int) -> ImuStream:
    """Corrupt an ideal stream with biases, bias random walks and noise.

    The draw order is fixed (accelerometer noise, gyroscope noise,
    accelerometer bias steps, gyroscope bias steps), so one seed always
    produces the bit-identical stream.
    """
    if seed is None:
        raise ValidationError("a seed is required for reproducible error injection")
    stream = ImuStream.coerce(stream)
    n = len(stream)
    rng = np.random.default_rng(seed)
    noise_a = rng.normal(0.0, model.sigma_a, size=(n, 3)) if model.sigma_a > 0 else 0.0
    noise_g = rng.normal(0.0, model.sigma_g, size=(n, 3)) if model.sigma_g > 0 else 0.0
    bias_a = np.broadcast_to(model.b_a0, (n, 3)).copy()
    bias_g = np.broadcast_to(model.b_g0, (n, 3)).copy()
    if model.sigma_ab > 0:
        steps = rng.normal(0.0, model.sigma_ab, size=(n - 1, 3))
        bias_a[1:] += np.cumsum(steps, axis=0)
    if model.sigma_gb > 0:
        steps = rng.normal(0.0, model.sigma_gb, size=(n - 1, 3))
        bias_g[1:] += np.cumsum(steps, axis=0)
    return ImuStream(stream.t.copy(), stream.f + bias_a + noise_a, stream.w + bias_g + noise_g)


@dataclass
class ErrorBudget:
    """Inputs of the analytical error comparison.

    ``b_a`` is the accelerometer bias in g units (5 mg = 0.005),
    ``delta_kw`` the relative error of the pendulum-model gain, and
    ``zupt_interval`` the stance cadence of the aided system.
    """

    b_a: float = 0.005
    delta_kw: float = 0.05
    correction_efficiency: float = 0.9
    zupt_interval: float = 1.0
    g: float = GRAVITY

    def __post_init__(self):
        if not (0.0 <= self.correction_efficiency <= 1.0):
            raise ValidationError("correction efficiency must be in [0, 1]")
        if self.zupt_interval <= 0.0:
            raise ValidationError("ZUPT interval must be positive")


def assess_ins_drift(budget: ErrorBudget, t: float) -> float:
    """Free-inertial position drift 0.5 * (b_a g) * t^2 from a bias alone."""
    if t < 0.0:
        raise ValidationError("time must be non-negative")
    return 0.5 * budget.b_a * budget.g * t * t


def assess_pdr_drift_distance(budget: ErrorBudget, distance: float) -> float:
    """Step-and-heading drift as the gain-error fraction of distance walked."""
    if budget.delta_kw < 0.0:
        raise ValidationError("delta_kw must be non-negative")
    return budget.delta_kw * distance


def assess_pdr_drift(budget: ErrorBudget, steps: list[StepEvent], k_w: float) -> float:
    """Sum of per-step length errors for a relative gain error.

    Equals ``delta_kw`` times the pendulum-model distance of the walk,
    since each step contributes (delta_kw k_w) * (peak-to-peak)^(1/4).
    """
    if budget.delta_kw < 0.0:
        raise ValidationError("delta_kw must be non-negative")
    return budget.delta_kw * k_w * float(np.sum([ev.weinberg_feature for ev in steps]))


def assess_smins_drift(budget: ErrorBudget, t: float, mode: str = "velocity_reset") -> float:
    """Stance-aided position drift from a bias alone.

    ``velocity_reset`` (default): the velocity error is nulled at every
    stance, so each interval contributes its own 0.5 (b_a g) dt^2 and
    the contributions accumulate: (t / dt) * 0.5 (b_a g) dt^2.
    ``efficiency``: at each stance the accumulated position drift is
    reduced by ``correction_efficiency``; this reading settles to a much
    smaller steady-state value and is provided for comparison only.
    """
    if t < 0.0:
        raise ValidationError("time must be non-negative")
    dt = budget.zupt_interval
    rate = 0.5 * budget.b_a * budget.g
    n_full = int(np.floor(t / dt + 1e-12))
    remainder = max(t - n_full * dt, 0.0)
    if mode == "velocity_reset":
        return n_full * rate * dt * dt + rate * remainder * remainder
    if mode == "efficiency":
        drift = 0.0
        for _ in range(n_full):
            drift = (drift + rate * dt * dt) * (1.0 - budget.correction_efficiency)
        return drift + rate * remainder * remainder
    raise ValidationError(f"unknown assessment mode {mode!r}")


def golden_texting_profile() -> GaitProfile:
    """Profile of the bundled texting-mode calibration walk.

    Twenty-six steps covering 25.4 m in a straight line with the device
    aligned to the walking direction, using the pulse waveform so the
    per-step peaks clear the default 1.5 sigma detection threshold the
    way real gait peaks do.
    """
    return GaitProfile(
        step_frequency=1.9,
        step_length=GOLDEN_DISTANCE / GOLDEN_STEP_COUNT,
        stance_duration=0.3,
        swing_peak_accel=3.0,
        waveform="pulse",
        pulse_duty=0.4,
    )


def generate_golden_walk() -> tuple[ImuStream, Trajectory2D]:
    """Regenerate the bundled walk (noise seeded for bit reproducibility)."""
    profile = golden_texting_profile()
    stream, truth = generate_handheld_walk(profile, GOLDEN_FS, GOLDEN_DURATION)
    noisy = inject_sensor_errors(
        stream, SensorErrorModel(sigma_a=0.05, sigma_g=0.002), seed=GOLDEN_SEED
    )
    return noisy, truth


def golden_walk_path():
    """Filesystem path of the bundled golden walk CSV."""
    return resources.files("pednav").joinpath("data/golden_texting_walk.csv")
