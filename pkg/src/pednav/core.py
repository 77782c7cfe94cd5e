"""Foundational math shared by every pipeline.

Conventions
-----------
* Reference frame: local-level frame fixed at the start point, z-axis
  down, so the local gravity vector is ``[0, 0, g]``.
* Quaternions are scalar-first 4-vectors ``[q1, q2, q3, q4]`` and encode
  the reference-to-body rotation; ``quat_to_dcm`` returns the matching
  reference-to-body direction cosine matrix (its transpose maps body to
  reference).
* Angular rates are body rates in rad/s, specific force in m/s^2.

All functions are pure except :class:`LowPassFilter`, which owns its
per-axis state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

GRAVITY = 9.81

# Vectors, quaternions and DCMs are plain float64 ndarrays of shape
# (3,), (4,) and (3, 3); the aliases only document intent.
Vec3 = np.ndarray
Quaternion = np.ndarray
Dcm = np.ndarray

QUAT_IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def _as_vec3(v, name: str = "vector") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise ValidationError(f"{name} must have shape (3,), got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"{name} contains non-finite values")
    return v


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    return np.pi - (np.pi - a) % (2.0 * np.pi)


def angle_difference(a: float, b: float) -> float:
    """Circular difference a - b wrapped to (-pi, pi]."""
    return wrap_angle(a - b)


@dataclass(frozen=True)
class ImuSample:
    """One timestamped inertial record: specific force f and angular rate w."""

    t: float
    f: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "f", _as_vec3(self.f, "specific force"))
        object.__setattr__(self, "w", _as_vec3(self.w, "angular rate"))
        if not np.isfinite(self.t):
            raise ValidationError("sample time must be finite")


class ImuStream:
    """A time-ordered batch of IMU samples stored as contiguous arrays.

    Construct from arrays (``t`` shape (N,), ``f``/``w`` shape (N, 3)) or
    from any iterable of :class:`ImuSample` via :meth:`coerce`. Timestamps
    must be strictly increasing.
    """

    def __init__(self, t: np.ndarray, f: np.ndarray, w: np.ndarray):
        t = np.ascontiguousarray(t, dtype=float)
        f = np.ascontiguousarray(f, dtype=float)
        w = np.ascontiguousarray(w, dtype=float)
        if t.ndim != 1 or f.shape != (t.size, 3) or w.shape != (t.size, 3):
            raise ValidationError(
                f"inconsistent stream shapes: t{t.shape}, f{f.shape}, w{w.shape}"
            )
        if t.size == 0:
            raise ValidationError("empty IMU stream")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(f)) and np.all(np.isfinite(w))):
            raise ValidationError("IMU stream contains non-finite values")
        if t.size > 1:
            bad = np.nonzero(np.diff(t) <= 0.0)[0]
            if bad.size:
                raise ValidationError(
                    f"timestamps not strictly increasing at index {bad[0] + 1}"
                )
        self.t = t
        self.f = f
        self.w = w

    @classmethod
    def from_samples(cls, samples) -> "ImuStream":
        samples = list(samples)
        if not samples:
            raise ValidationError("empty IMU stream")
        t = np.array([s.t for s in samples])
        f = np.array([s.f for s in samples])
        w = np.array([s.w for s in samples])
        return cls(t, f, w)

    @classmethod
    def coerce(cls, obj) -> "ImuStream":
        if isinstance(obj, cls):
            return obj
        return cls.from_samples(obj)

    def __len__(self) -> int:
        return self.t.size

    def __getitem__(self, i: int) -> ImuSample:
        return ImuSample(self.t[i], self.f[i].copy(), self.w[i].copy())

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    def median_dt(self) -> float:
        if len(self) < 2:
            raise ValidationError("need at least two samples to estimate rate")
        return float(np.median(np.diff(self.t)))

    def sample_rate(self) -> float:
        return 1.0 / self.median_dt()

    def gaps(self, threshold: float = 0.5) -> list[tuple[int, float]]:
        """Indices and sizes of inter-sample gaps exceeding ``threshold``."""
        if len(self) < 2:
            return []
        dt = np.diff(self.t)
        idx = np.nonzero(dt > threshold)[0]
        return [(int(i) + 1, float(dt[i])) for i in idx]


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n < 1e-12:
        raise ValidationError("cannot normalize near-zero quaternion")
    return q / n


def quat_rate_matrix(q: np.ndarray) -> np.ndarray:
    """4x3 matrix M(q) such that q_dot = 0.5 * M(q) @ w for body rates w.

    This is the kinematics of the reference-to-body quaternion; the flow
    it generates is norm preserving (the equivalent 4x4 generator is
    antisymmetric).
    """
    q1, q2, q3, q4 = q
    return 0.5 * np.array(
        [
            [q2, q3, q4],
            [-q1, -q4, q3],
            [q4, -q1, -q2],
            [-q3, q2, -q1],
        ]
    )


def quat_derivative(q: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Quaternion rate of change under body angular rate ``w``."""
    q = np.asarray(q, dtype=float)
    w = _as_vec3(w, "angular rate")
    if q.shape != (4,) or not np.all(np.isfinite(q)):
        raise ValidationError("quaternion must be a finite 4-vector")
    return quat_rate_matrix(q) @ w


def quat_integrate(q: np.ndarray, w: np.ndarray, dt: float) -> np.ndarray:
    """One explicit-Euler step on the quaternion kinematics, renormalized.

    dt must lie in (0, 0.1] s; for constant w the accumulated rotation
    converges to the closed-form axis-angle solution as dt -> 0.
    """
    if not (0.0 < dt <= 0.1):
        raise ValidationError(f"dt must be in (0, 0.1] s, got {dt}")
    return quat_normalize(q + quat_derivative(q, w) * dt)


def quat_to_dcm(q: np.ndarray) -> np.ndarray:
    """Reference-to-body direction cosine matrix of a unit quaternion."""
    q1, q2, q3, q4 = q
    return np.array(
        [
            [
                q1 * q1 + q2 * q2 - q3 * q3 - q4 * q4,
                2.0 * (q2 * q3 - q1 * q4),
                2.0 * (q1 * q3 + q2 * q4),
            ],
            [
                2.0 * (q2 * q3 + q1 * q4),
                q1 * q1 - q2 * q2 + q3 * q3 - q4 * q4,
                2.0 * (q3 * q4 - q1 * q2),
            ],
            [
                2.0 * (q2 * q4 - q1 * q3),
                2.0 * (q1 * q2 + q3 * q4),
                q1 * q1 - q2 * q2 - q3 * q3 + q4 * q4,
            ],
        ]
    )


def skew(w) -> np.ndarray:
    """Skew-symmetric matrix of w, satisfying skew(w) @ v == cross(w, v)."""
    wx, wy, wz = _as_vec3(w, "skew input")
    return np.array(
        [
            [0.0, -wz, wy],
            [wz, 0.0, -wx],
            [-wy, wx, 0.0],
        ]
    )


def dcm_to_euler(c_body_to_ref: np.ndarray) -> tuple[float, float, float]:
    """Roll, pitch, yaw (ZYX) of a body-to-reference rotation matrix."""
    c = np.asarray(c_body_to_ref, dtype=float)
    yaw = float(np.arctan2(c[1, 0], c[0, 0]))
    pitch = float(-np.arcsin(np.clip(c[2, 0], -1.0, 1.0)))
    roll = float(np.arctan2(c[2, 1], c[2, 2]))
    return roll, pitch, yaw


def orthogonality_error(c: np.ndarray) -> float:
    """Frobenius norm of C^T C - I."""
    c = np.asarray(c, dtype=float)
    return float(np.linalg.norm(c.T @ c - np.eye(3)))


def reorthogonalize(c: np.ndarray) -> np.ndarray:
    """One symmetric (polar) orthogonalization step, C(3I - C^T C)/2.

    Accurate when C is already close to orthogonal, which is the regime
    after rational attitude updates.
    """
    c = np.asarray(c, dtype=float)
    return c @ (3.0 * np.eye(3) - c.T @ c) / 2.0


@dataclass
class LowPassFilter:
    """First-order IIR low-pass with unity DC gain, stateful per axis.

    The smoothing coefficient is alpha = dt / (tau + dt) with
    tau = 1 / (2 pi cutoff_hz). The state is seeded with the first input
    so a constant signal passes through unchanged from the first sample.
    """

    cutoff_hz: float
    state: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.cutoff_hz <= 0.0:
            raise ValidationError("cutoff must be positive")

    def reset(self) -> None:
        self.state = None

    def apply(self, vectors: np.ndarray, fs: float) -> np.ndarray:
        """Filter a (N, 3) sequence sampled at ``fs`` Hz; state persists."""
        if fs <= 2.0 * self.cutoff_hz:
            raise ValidationError(
                f"sample rate {fs} Hz must exceed twice the cutoff {self.cutoff_hz} Hz"
            )
        x = np.asarray(vectors, dtype=float)
        squeeze = x.ndim == 1
        x = np.atleast_2d(x)
        dt = 1.0 / fs
        tau = 1.0 / (2.0 * np.pi * self.cutoff_hz)
        alpha = dt / (tau + dt)
        out = np.empty_like(x)
        y = x[0].copy() if self.state is None else self.state.copy()
        for k in range(x.shape[0]):
            y = y + alpha * (x[k] - y)
            out[k] = y
        self.state = y
        return out[0] if squeeze else out


def lowpass_apply(filt: LowPassFilter, vectors: np.ndarray, fs: float) -> np.ndarray:
    """Functional wrapper over :meth:`LowPassFilter.apply`."""
    return filt.apply(vectors, fs)
