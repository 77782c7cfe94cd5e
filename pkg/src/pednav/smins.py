"""Shoe-mounted INS: strapdown mechanization with zero-velocity aiding.

A simplified local-frame mechanization (earth rate and transport rate
neglected, constant gravity ``[0, 0, g]``) is corrected by an
error-state EKF whose 15-dimensional state stacks position error,
velocity error, attitude misalignment and the two sensor biases:

    dx = [dp, dv, eps, b_a, b_g]

Stationary instants are found by a three-condition detector (force
magnitude band, local force variance, angular-rate magnitude) with
median post-filtering, or by a Gaussian log-likelihood window test.
During stance the filter takes zero-velocity and zero-angular-rate
pseudo-measurements, and the estimated errors are fed back into the
navigation state (closed loop).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    GRAVITY,
    ImuSample,
    ImuStream,
    orthogonality_error,
    reorthogonalize,
    skew,
)
from .errors import NumericalHealthError, ValidationError

# Error-state block offsets.
POS = slice(0, 3)
VEL = slice(3, 6)
ATT = slice(6, 9)
BACC = slice(9, 12)
BGYR = slice(12, 15)

NSTATE = 15
NNOISE = 12


@dataclass
class NavState:
    """Strapdown nominal state: position, velocity, attitude, time.

    ``T_rb`` maps reference-frame vectors into the body frame; its
    transpose is the body-to-reference rotation used by the velocity
    dynamics.
    """

    p: np.ndarray
    v: np.ndarray
    T_rb: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float).reshape(3)
        self.v = np.asarray(self.v, dtype=float).reshape(3)
        self.T_rb = np.asarray(self.T_rb, dtype=float).reshape(3, 3)
        err = orthogonality_error(self.T_rb)
        if err > 1e-6:
            raise ValidationError(f"attitude matrix not orthogonal (error {err:.3g})")

    @classmethod
    def at_rest(cls, p=(0.0, 0.0, 0.0), t: float = 0.0) -> "NavState":
        return cls(p=np.asarray(p, float), v=np.zeros(3), T_rb=np.eye(3), t=t)

    def body_to_ref(self) -> np.ndarray:
        return self.T_rb.T.copy()


@dataclass
class ImuBiases:
    acc: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gyro: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.acc = np.asarray(self.acc, dtype=float).reshape(3).copy()
        self.gyro = np.asarray(self.gyro, dtype=float).reshape(3).copy()


@dataclass
class SensorErrorModel:
    """White-noise and random-walk bias model of the inertial sensors.

    All sigmas are per-sample standard deviations at the stream rate:
    ``sigma_a``/``sigma_g`` drive additive measurement noise and
    ``sigma_ab``/``sigma_gb`` drive the bias random walks. ``b_a0`` and
    ``b_g0`` are initial biases (injected by the simulator; used as the
    initial estimates by a filter configured from this model).
    """

    sigma_a: float = 0.0
    sigma_g: float = 0.0
    sigma_ab: float = 0.0
    sigma_gb: float = 0.0
    b_a0: np.ndarray = field(default_factory=lambda: np.zeros(3))
    b_g0: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("sigma_a", "sigma_g", "sigma_ab", "sigma_gb"):
            if getattr(self, name) < 0.0:
                raise ValidationError(f"{name} must be non-negative")
        self.b_a0 = np.asarray(self.b_a0, dtype=float).reshape(3)
        self.b_g0 = np.asarray(self.b_g0, dtype=float).reshape(3)

    def continuous_psd(self, fs: float) -> np.ndarray:
        """Continuous PSD of [w_a, w_g, w_ab, w_gb] for per-sample sigmas.

        Measurement white noise converts as sigma^2 / fs, a random-walk
        driving noise as sigma^2 * fs.
        """
        if fs <= 0.0:
            raise ValidationError("sample rate must be positive")
        return np.repeat(
            [
                self.sigma_a**2 / fs,
                self.sigma_g**2 / fs,
                self.sigma_ab**2 * fs,
                self.sigma_gb**2 * fs,
            ],
            3,
        )


def default_initial_covariance() -> np.ndarray:
    return np.diag(
        np.repeat([1e-6, 1e-6, 1e-6, 1e-4, 1e-6], 3)
    )


@dataclass
class ErrorStateFilter:
    """Error state, covariance and noise settings of the closed-loop EKF."""

    dx: np.ndarray = field(default_factory=lambda: np.zeros(NSTATE))
    P: np.ndarray = field(default_factory=default_initial_covariance)
    w_psd: np.ndarray = field(default_factory=lambda: np.zeros(NNOISE))
    R_zvu: np.ndarray = field(default_factory=lambda: 1e-4 * np.eye(3))
    R_zar: np.ndarray = field(default_factory=lambda: 1e-4 * np.eye(3))

    def __post_init__(self):
        self.dx = np.asarray(self.dx, dtype=float).reshape(NSTATE)
        self.P = np.asarray(self.P, dtype=float).reshape(NSTATE, NSTATE)
        self.w_psd = np.asarray(self.w_psd, dtype=float).reshape(NNOISE)
        self.R_zvu = np.asarray(self.R_zvu, dtype=float).reshape(3, 3)
        self.R_zar = np.asarray(self.R_zar, dtype=float).reshape(3, 3)

    @classmethod
    def create(
        cls,
        model: SensorErrorModel,
        fs: float,
        P0: np.ndarray | None = None,
        r_zvu: float = 0.01,
        r_zar: float = 0.01,
    ) -> "ErrorStateFilter":
        """Filter sized for a stream at ``fs`` Hz with pseudo-measurement
        noise standard deviations ``r_zvu`` (m/s) and ``r_zar`` (rad/s)."""
        return cls(
            P=default_initial_covariance() if P0 is None else np.array(P0, dtype=float),
            w_psd=model.continuous_psd(fs),
            R_zvu=r_zvu**2 * np.eye(3),
            R_zar=r_zar**2 * np.eye(3),
        )

    def check_health(self) -> None:
        sym = np.linalg.norm(self.P - self.P.T)
        if sym > 1e-10 * max(np.linalg.norm(self.P), 1e-300):
            raise NumericalHealthError(f"covariance asymmetry {sym:.3g}")
        floor = -1e-9 * max(np.trace(self.P), 0.0)
        if np.min(np.diag(self.P)) < floor:
            raise NumericalHealthError("covariance diagonal went negative")


@dataclass
class ZvdConfig:
    """Thresholds for the three stationarity conditions.

    ``window`` (odd) is the total width of the moving-variance window,
    ``median_window`` (odd) the width of the median post-filter. With
    ``printed_inequalities`` the variance and rate conditions use the
    greater-than form some sources print instead of the below-threshold
    form used here.
    """

    gamma_fmag_min: float = 9.0
    gamma_fmag_max: float = 11.0
    gamma_sigma_f: float = 0.5
    gamma_omega: float = 0.6
    window: int = 7
    median_window: int = 11
    printed_inequalities: bool = False

    def __post_init__(self):
        if self.gamma_fmag_min >= self.gamma_fmag_max:
            raise ValidationError("gamma_fmag_min must be below gamma_fmag_max")
        for name in ("window", "median_window"):
            v = getattr(self, name)
            if v < 1 or v % 2 == 0:
                raise ValidationError(f"{name} must be odd and >= 1")


def strapdown_step(state: NavState, sample: ImuSample, dt: float, g: float = GRAVITY) -> NavState:
    """One mechanization step: rational attitude update, Euler velocity
    and position updates.

    The attitude advances through the rational (Cayley) product
    ``C_k = C_{k-1} (2I + W dt)(2I - W dt)^-1`` with W the angular-rate
    skew matrix; the velocity uses the updated attitude and the position
    uses the previous velocity.
    """
    if not (0.0 < dt <= 0.05):
        raise ValidationError(f"dt must be in (0, 0.05] s, got {dt}")
    w_norm = float(np.linalg.norm(sample.w))
    if w_norm * dt >= 2.0:
        raise NumericalHealthError(
            f"|w| dt = {w_norm * dt:.3g} too large for the rational attitude update"
        )
    omega = skew(sample.w)
    eye2 = 2.0 * np.eye(3)
    c_prev = state.T_rb.T
    # X (2I - W dt) = C (2I + W dt)  ->  X = solve from the right
    rhs = c_prev @ (eye2 + omega * dt)
    c_new = np.linalg.solve((eye2 - omega * dt).T, rhs.T).T
    g_vec = np.array([0.0, 0.0, g])
    v_new = state.v + dt * (c_new @ sample.f + g_vec)
    p_new = state.p + dt * state.v
    return NavState(p=p_new, v=v_new, T_rb=c_new.T, t=state.t + dt)


def build_system_matrices(state: NavState, sample: ImuSample) -> tuple[np.ndarray, np.ndarray]:
    """Continuous-time error dynamics F (15x15) and noise shaping G (15x12).

    With constant gravity in a local frame the position-to-velocity
    gravity-gradient block vanishes; the velocity error couples to the
    misalignment through -skew(C f) and to the accelerometer bias
    through the body-to-reference matrix C.
    """
    c = state.body_to_ref()
    f_ref = c @ sample.f
    F = np.zeros((NSTATE, NSTATE))
    F[POS, VEL] = np.eye(3)
    F[VEL, ATT] = -skew(f_ref)
    F[VEL, BACC] = c
    F[ATT, BGYR] = c
    G = np.zeros((NSTATE, NNOISE))
    G[VEL, 0:3] = c
    G[ATT, 3:6] = c
    G[BACC, 6:9] = np.eye(3)
    G[BGYR, 9:12] = np.eye(3)
    return F, G


def ekf_predict(
    filt: ErrorStateFilter, F: np.ndarray, dt: float, G: np.ndarray
) -> ErrorStateFilter:
    """Covariance propagation P <- Phi P Phi^T + Q with Phi = I + F dt
    and Q = G W G^T dt; the a-priori error estimate is zero by the
    closed-loop construction."""
    phi = np.eye(NSTATE) + F * dt
    q = (G * filt.w_psd) @ G.T * dt
    P = phi @ filt.P @ phi.T + q
    filt.P = 0.5 * (P + P.T)
    filt.dx = np.zeros(NSTATE)
    floor = -1e-9 * max(np.trace(filt.P), 0.0)
    if np.min(np.diag(filt.P)) < floor:
        raise NumericalHealthError("covariance lost positive semidefiniteness")
    return filt


def ekf_update(
    filt: ErrorStateFilter, dz: np.ndarray, H: np.ndarray, R: np.ndarray
) -> ErrorStateFilter:
    """Measurement update with gain K = P H^T (H P H^T + R)^-1."""
    dz = np.atleast_1d(np.asarray(dz, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    S = H @ filt.P @ H.T + R
    if np.linalg.cond(S) > 1e12:
        raise NumericalHealthError("ill-conditioned innovation covariance")
    K = np.linalg.solve(S, H @ filt.P).T
    filt.dx = K @ dz
    P = (np.eye(NSTATE) - K @ H) @ filt.P
    filt.P = 0.5 * (P + P.T)
    return filt


def inject_and_reset(
    state: NavState, biases: ImuBiases, dx: np.ndarray
) -> tuple[NavState, ImuBiases]:
    """Feed estimated errors back into the nominal state.

    Position and velocity are corrected by subtraction, the attitude by
    the small-angle rotation ``T_rb (I + skew(eps))`` followed by
    re-orthogonalization, and the bias estimates absorb their error
    states. The caller zeroes the filter's error state afterwards.
    """
    dx = np.asarray(dx, dtype=float).reshape(NSTATE)
    eps = dx[ATT]
    if np.linalg.norm(eps) >= 0.5:
        raise ValidationError("misalignment too large for small-angle injection")
    t_rb = reorthogonalize(state.T_rb @ (np.eye(3) + skew(eps)))
    new_state = NavState(p=state.p - dx[POS], v=state.v - dx[VEL], T_rb=t_rb, t=state.t)
    new_biases = ImuBiases(acc=biases.acc + dx[BACC], gyro=biases.gyro + dx[BGYR])
    return new_state, new_biases


def _moving_mean_var(x: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Centered moving mean and population variance, truncated at the ends."""
    n = x.size
    half = window // 2
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, n)
    s1 = np.concatenate([[0.0], np.cumsum(x)])
    s2 = np.concatenate([[0.0], np.cumsum(x * x)])
    cnt = hi - lo
    mean = (s1[hi] - s1[lo]) / cnt
    var = np.maximum((s2[hi] - s2[lo]) / cnt - mean**2, 0.0)
    return mean, var


def median_filter_bool(flags: np.ndarray, window: int) -> np.ndarray:
    """Strict-majority vote over a centered window, truncated at the ends."""
    if window < 1 or window % 2 == 0:
        raise ValidationError("median window must be odd and >= 1")
    x = np.asarray(flags, dtype=float)
    n = x.size
    half = window // 2
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, n)
    s1 = np.concatenate([[0.0], np.cumsum(x)])
    ones = s1[hi] - s1[lo]
    return 2.0 * ones > (hi - lo)


def detect_zero_velocity(stream, cfg: ZvdConfig | None = None) -> np.ndarray:
    """Per-sample stationarity by the AND of three conditions plus a
    median post-filter.

    C1: force magnitude inside [gamma_fmag_min, gamma_fmag_max];
    C2: moving variance of the force magnitude below gamma_sigma_f;
    C3: angular-rate magnitude below gamma_omega.
    Boundary samples use truncated windows. Output is invariant under
    time translation of the input window.
    """
    cfg = cfg or ZvdConfig()
    stream = ImuStream.coerce(stream)
    if len(stream) < max(cfg.window, cfg.median_window):
        raise ValidationError("stream shorter than the detector windows")
    fmag = np.linalg.norm(stream.f, axis=1)
    wmag = np.linalg.norm(stream.w, axis=1)
    _, var = _moving_mean_var(fmag, cfg.window)
    c1 = (fmag > cfg.gamma_fmag_min) & (fmag < cfg.gamma_fmag_max)
    if cfg.printed_inequalities:
        c2 = var > cfg.gamma_sigma_f
        c3 = var > cfg.gamma_omega
    else:
        c2 = var < cfg.gamma_sigma_f
        c3 = wmag < cfg.gamma_omega
    return median_filter_bool(c1 & c2 & c3, cfg.median_window)


def shoe_statistic(window, model: SensorErrorModel, g: float = GRAVITY) -> float:
    """Gaussian log-likelihood stationarity statistic of a sample window.

    Mean of ||f - g u||^2 / sigma_a^2 + ||w||^2 / sigma_g^2 over the
    window, where u is the unit vector along the window-mean specific
    force. Small values support the stationary hypothesis.
    """
    window = ImuStream.coerce(window)
    if model.sigma_a <= 0.0 or model.sigma_g <= 0.0:
        raise ValidationError("noise model sigmas must be positive for the test")
    f_mean = np.mean(window.f, axis=0)
    norm = np.linalg.norm(f_mean)
    if norm < 1e-12:
        raise ValidationError("window mean specific force is zero")
    u = f_mean / norm
    acc_term = np.sum((window.f - g * u) ** 2, axis=1) / model.sigma_a**2
    gyr_term = np.sum(window.w**2, axis=1) / model.sigma_g**2
    return float(np.mean(acc_term + gyr_term))


def likelihood_ratio_zvd(
    window,
    model: SensorErrorModel,
    gamma: float,
    w_b: int = 0,
    w_f: int = 0,
    g: float = GRAVITY,
) -> bool:
    """Window likelihood-ratio stationarity decision.

    The ratio of the stationary to the moving hypothesis exceeding its
    threshold is equivalent, in the log domain, to the quadratic
    statistic falling below ``gamma`` (the inequality flips because the
    statistic appears with a negative sign in the stationary
    log-likelihood). ``w_b`` and ``w_f`` are the backward and forward
    window extents, so the window must hold w_b + w_f + 1 samples.
    """
    window = ImuStream.coerce(window)
    expected = w_b + w_f + 1
    if len(window) != expected:
        raise ValidationError(
            f"window must hold w_b + w_f + 1 = {expected} samples, got {len(window)}"
        )
    return shoe_statistic(window, model, g) < gamma


def zvu_residual(state: NavState) -> tuple[np.ndarray, np.ndarray]:
    """Zero-velocity residual: the INS velocity itself, observing dv."""
    H = np.zeros((3, NSTATE))
    H[:, VEL] = np.eye(3)
    return state.v.copy(), H


def zar_residual(sample: ImuSample) -> tuple[np.ndarray, np.ndarray]:
    """Zero-angular-rate residual: the measured rate, observing b_g.

    In the closed loop the sample should already be corrected by the
    current gyroscope bias estimate, so the residual is the remaining
    bias plus noise.
    """
    H = np.zeros((3, NSTATE))
    H[:, BGYR] = np.eye(3)
    return sample.w.copy(), H


@dataclass
class SminsResult:
    """Per-sample navigation solution and filter diagnostics."""

    t: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    attitudes: np.ndarray  # body-to-reference matrices, shape (N, 3, 3)
    stationary: np.ndarray
    cov_trace: np.ndarray
    innovations: np.ndarray  # (N, 6): ZVU residual cols 0:3, ZAR cols 3:6, NaN when absent
    bias_acc: np.ndarray
    bias_gyro: np.ndarray
    filter: ErrorStateFilter

    def final_state(self) -> NavState:
        return NavState(
            p=self.positions[-1],
            v=self.velocities[-1],
            T_rb=self.attitudes[-1].T,
            t=float(self.t[-1]),
        )

    def nav_states(self):
        for k in range(self.t.size):
            yield NavState(
                p=self.positions[k],
                v=self.velocities[k],
                T_rb=self.attitudes[k].T,
                t=float(self.t[k]),
            )


def run_smins(
    stream,
    init: NavState | None = None,
    errmodel: SensorErrorModel | None = None,
    zvd_cfg: ZvdConfig | None = None,
    aiding: set[str] | None = None,
    stance_mask: np.ndarray | None = None,
    filt: ErrorStateFilter | None = None,
    init_biases: ImuBiases | None = None,
    g: float = GRAVITY,
    backend: str | None = None,
) -> SminsResult:
    """Closed-loop shoe-mounted INS over a full stream.

    Per sample: mechanize with bias-corrected measurements, propagate
    the error covariance, and, when the stance detector (or the supplied
    ``stance_mask``) fires, apply the enabled pseudo-measurements as one
    stacked update and feed the estimated errors back. ``aiding`` is a
    subset of {"ZVU", "ZAR"}.
    """
    from . import _backend

    stream = ImuStream.coerce(stream)
    errmodel = errmodel or SensorErrorModel()
    aiding = {"ZVU", "ZAR"} if aiding is None else set(aiding)
    unknown = aiding - {"ZVU", "ZAR"}
    if unknown:
        raise ValidationError(f"unknown aiding types: {sorted(unknown)}")
    init = init or NavState.at_rest(t=float(stream.t[0]))
    if filt is None:
        filt = ErrorStateFilter.create(errmodel, fs=stream.sample_rate())
    if init_biases is None:
        init_biases = ImuBiases(acc=errmodel.b_a0, gyro=errmodel.b_g0)

    if stance_mask is not None:
        stationary = np.asarray(stance_mask, dtype=bool).reshape(len(stream))
    elif aiding:
        stationary = detect_zero_velocity(stream, zvd_cfg)
    else:
        stationary = np.zeros(len(stream), dtype=bool)

    loop = _backend.get_loop(backend)
    out = loop(
        stream.t,
        stream.f,
        stream.w,
        stationary.astype(np.uint8),
        init.p.copy(),
        init.v.copy(),
        init.body_to_ref(),
        init_biases.acc.copy(),
        init_biases.gyro.copy(),
        filt,
        "ZVU" in aiding,
        "ZAR" in aiding,
        g,
    )
    return SminsResult(
        t=stream.t.copy(),
        positions=out["p"],
        velocities=out["v"],
        attitudes=out["c"],
        stationary=stationary,
        cov_trace=out["ptrace"],
        innovations=out["innov"],
        bias_acc=out["ba"],
        bias_gyro=out["bg"],
        filter=filt,
    )
