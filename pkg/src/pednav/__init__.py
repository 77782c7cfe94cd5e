"""Pedestrian inertial navigation toolkit.

Two complete positioning pipelines over raw accelerometer/gyroscope
streams:

* ``pdr`` -- model-based step-and-heading dead reckoning (step
  detection, step-length models with calibration, quaternion or
  gravity-based heading, 2-D position recursion);
* ``smins`` -- shoe-mounted strapdown INS with a 15-state error-state
  EKF, zero-velocity detection, and zero-velocity / zero-angular-rate
  aiding.

``sim`` generates synthetic handheld and foot-mounted walks with exact
ground truth and provides closed-form drift assessments; ``cli`` is the
batch front end. The filter inner loop runs on a compiled kernel when
the extension is built, with a pure-Python fallback selected at import.
"""

__version__ = "0.1.0"

from . import _backend
from .core import (
    GRAVITY,
    ImuSample,
    ImuStream,
    LowPassFilter,
    lowpass_apply,
    quat_derivative,
    quat_integrate,
    quat_normalize,
    quat_to_dcm,
    skew,
    wrap_angle,
)
from .pdr import (
    HeadingMode,
    StepDetectorConfig,
    StepEvent,
    StepLengthGains,
    StepLengthModel,
    Trajectory2D,
    calibrate_gains,
    detect_steps,
    heading_from_quaternion,
    position_update_2d,
    run_pdr,
    specific_force_stats,
    step_length_adaptive,
    step_length_constant,
    step_length_weinberg,
    walking_direction_gravity,
)
from .sim import (
    ErrorBudget,
    GaitProfile,
    assess_ins_drift,
    assess_pdr_drift,
    assess_pdr_drift_distance,
    assess_smins_drift,
    generate_foot_mounted_walk,
    generate_handheld_walk,
    inject_sensor_errors,
)
from .smins import (
    ErrorStateFilter,
    ImuBiases,
    NavState,
    SensorErrorModel,
    SminsResult,
    ZvdConfig,
    build_system_matrices,
    detect_zero_velocity,
    ekf_predict,
    ekf_update,
    inject_and_reset,
    likelihood_ratio_zvd,
    run_smins,
    strapdown_step,
    zar_residual,
    zvu_residual,
)

HAVE_COMPILED_KERNEL = _backend.HAVE_COMPILED


def active_backend() -> str:
    """Name of the filter-loop backend selected for this process."""
    return _backend.default_backend()
