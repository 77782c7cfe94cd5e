from __future__ import annotations

import numpy as np
import pytest

from pednav.cli import ingest_imu_csv
from pednav.core import ImuStream
from pednav.sim import golden_walk_path


def make_stream(duration: float, fs: float, f_fn, w_fn) -> ImuStream:
    """Build a stream from per-time vector functions (t in seconds)."""
    t = np.arange(int(round(duration * fs))) / fs
    f = np.array([f_fn(ti) for ti in t], dtype=float)
    w = np.array([w_fn(ti) for ti in t], dtype=float)
    return ImuStream(t, f, w)


def constant_stream(duration: float, fs: float, f, w=(0.0, 0.0, 0.0)) -> ImuStream:
    n = int(round(duration * fs))
    t = np.arange(n) / fs
    return ImuStream(t, np.tile(np.asarray(f, float), (n, 1)), np.tile(np.asarray(w, float), (n, 1)))


def rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix, the closed-form oracle for attitude tests."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    k = np.array(
        [[0.0, -axis[2], axis[1]], [axis[2], 0.0, -axis[0]], [-axis[1], axis[0], 0.0]]
    )
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def rotation_angle_between(r1: np.ndarray, r2: np.ndarray) -> float:
    """Geodesic angle between two rotation matrices."""
    cosang = (np.trace(r1.T @ r2) - 1.0) / 2.0
    return float(np.arccos(np.clip(cosang, -1.0, 1.0)))


@pytest.fixture(scope="session")
def golden_stream() -> ImuStream:
    return ingest_imu_csv(golden_walk_path())
