from __future__ import annotations

import numpy as np
import pytest

from pednav.core import (
    ImuStream,
    LowPassFilter,
    lowpass_apply,
    quat_derivative,
    quat_integrate,
    quat_to_dcm,
    skew,
    wrap_angle,
)
from pednav.errors import ValidationError
from pednav.pdr import heading_from_quaternion

from conftest import rotation_about_axis, rotation_angle_between

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


class TestQuatDerivative:
    def test_zero_rate_is_fixed_point(self):
        np.testing.assert_array_equal(
            quat_derivative(IDENTITY, np.zeros(3)), np.zeros(4)
        )

    def test_identity_yaw_rate(self):
        # evaluated by hand for the identity quaternion: only the last
        # component moves, at -wz/2
        qdot = quat_derivative(IDENTITY, np.array([0.0, 0.0, 1.0]))
        np.testing.assert_allclose(qdot, [0.0, 0.0, 0.0, -0.5], atol=1e-15)

    def test_linear_in_rate(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            q = rng.normal(size=4)
            q /= np.linalg.norm(q)
            w = rng.normal(size=3)
            np.testing.assert_allclose(
                quat_derivative(q, 2.0 * w), 2.0 * quat_derivative(q, w), rtol=1e-12
            )

    def test_norm_preserving_generator(self):
        # q . qdot = 0 means the flow stays on the unit sphere
        rng = np.random.default_rng(4)
        for _ in range(50):
            q = rng.normal(size=4)
            q /= np.linalg.norm(q)
            w = rng.normal(size=3)
            assert abs(q @ quat_derivative(q, w)) < 1e-14

    def test_rejects_nonfinite(self):
        with pytest.raises(ValidationError):
            quat_derivative(IDENTITY, np.array([np.nan, 0.0, 0.0]))


class TestQuatIntegrate:
    def test_zero_rate_keeps_quaternion(self):
        q = quat_integrate(IDENTITY, np.zeros(3), 0.01)
        np.testing.assert_allclose(q, IDENTITY, atol=1e-15)

    def test_rejects_bad_dt(self):
        for dt in (0.0, -0.01, 0.2):
            with pytest.raises(ValidationError):
                quat_integrate(IDENTITY, np.zeros(3), dt)

    def test_quarter_turn_heading(self):
        # closed-form oracle: a constant pi/2 rad/s yaw rate for one
        # second rotates the heading by exactly 90 degrees
        q = IDENTITY
        for _ in range(10000):
            q = quat_integrate(q, np.array([0.0, 0.0, np.pi / 2.0]), 1e-4)
        assert abs(np.degrees(heading_from_quaternion(q)) - 90.0) < 0.01

    def test_unit_norm_after_random_steps(self):
        rng = np.random.default_rng(5)
        q = IDENTITY
        for _ in range(500):
            q = quat_integrate(q, rng.normal(scale=2.0, size=3), 0.01)
            assert abs(np.linalg.norm(q) - 1.0) <= 1e-9

    @pytest.mark.parametrize("axis", [(0, 0, 1), (1, 0, 0), (0.3, -0.2, 0.4)])
    def test_matches_closed_form_rotation(self, axis):
        # composing N steps approaches the axis-angle rotation; the
        # attitude matrix of the reference-to-body quaternion equals the
        # transposed Rodrigues rotation for the same axis and angle
        w = np.asarray(axis, dtype=float)
        total_t = 1.0
        errors = []
        for dt in (0.01, 0.005, 0.0025, 0.00125):
            q = IDENTITY
            for _ in range(int(round(total_t / dt))):
                q = quat_integrate(q, w, dt)
            expected = rotation_about_axis(w, np.linalg.norm(w) * total_t).T
            errors.append(rotation_angle_between(quat_to_dcm(q), expected))
        for coarse, fine in zip(errors, errors[1:]):
            assert fine <= 0.55 * coarse + 1e-12


class TestQuatToDcm:
    def test_identity(self):
        np.testing.assert_array_equal(quat_to_dcm(IDENTITY), np.eye(3))

    def test_quarter_turn_element(self):
        # symbolic evaluation: element (1,2) is 2(q2 q3 - q1 q4) = -1
        q = np.array([np.sqrt(0.5), 0.0, 0.0, np.sqrt(0.5)])
        assert quat_to_dcm(q)[0, 1] == pytest.approx(-1.0, abs=1e-12)

    def test_orthogonal_for_random_unit_quaternions(self):
        rng = np.random.default_rng(6)
        for _ in range(1000):
            q = rng.normal(size=4)
            q /= np.linalg.norm(q)
            c = quat_to_dcm(q)
            assert np.linalg.norm(c.T @ c - np.eye(3)) < 1e-9
            assert np.linalg.det(c) == pytest.approx(1.0, abs=1e-9)

    def test_double_cover(self):
        rng = np.random.default_rng(7)
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        np.testing.assert_allclose(quat_to_dcm(q), quat_to_dcm(-q), atol=1e-15)


class TestSkew:
    def test_zero(self):
        np.testing.assert_array_equal(skew(np.zeros(3)), np.zeros((3, 3)))

    def test_layout(self):
        s = skew([1.0, 2.0, 3.0])
        assert s[0, 1] == -3.0 and s[0, 2] == 2.0 and s[1, 2] == -1.0

    def test_antisymmetric(self):
        s = skew([0.4, -1.2, 0.7])
        np.testing.assert_array_equal(s + s.T, np.zeros((3, 3)))

    def test_cross_product(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            a, b = rng.normal(size=(2, 3))
            np.testing.assert_allclose(skew(a) @ b, np.cross(a, b), atol=1e-14)
            np.testing.assert_allclose(skew(a) @ b, -skew(b) @ a, atol=1e-14)


class TestLowPassFilter:
    def test_dc_gain(self):
        lpf = LowPassFilter(cutoff_hz=1.0)
        out = lpf.apply(np.tile([2.0, -1.0, 0.5], (1600, 1)), fs=100.0)
        np.testing.assert_allclose(out[-1], [2.0, -1.0, 0.5], rtol=0.01)

    def test_zero_in_zero_out(self):
        lpf = LowPassFilter(cutoff_hz=1.0)
        out = lpf.apply(np.zeros((100, 3)), fs=100.0)
        np.testing.assert_array_equal(out, np.zeros((100, 3)))

    def test_sinus_attenuation(self):
        # first-order magnitude response 1/sqrt(1 + (f/fc)^2) gives
        # ~0.0995 at 10x the cutoff; assert the generous 0.16 bound
        fs, fc, f = 100.0, 1.0, 10.0
        t = np.arange(2000) / fs
        x = np.zeros((t.size, 3))
        x[:, 0] = np.sin(2.0 * np.pi * f * t)
        out = lowpass_apply(LowPassFilter(cutoff_hz=fc), x, fs)
        steady = out[500:, 0]
        assert np.max(np.abs(steady)) < 0.16

    def test_aliasing_guard(self):
        with pytest.raises(ValidationError):
            LowPassFilter(cutoff_hz=30.0).apply(np.zeros((10, 3)), fs=50.0)

    def test_state_persists_across_calls(self):
        lpf = LowPassFilter(cutoff_hz=1.0)
        first = lpf.apply(np.ones((50, 3)), fs=100.0)
        second = lpf.apply(np.zeros((1, 3)), fs=100.0)
        assert 0.0 < second[0, 0] < first[-1, 0]


class TestWrapAngle:
    @pytest.mark.parametrize(
        "raw,expected",
        [(0.0, 0.0), (np.pi, np.pi), (-np.pi, np.pi), (3 * np.pi / 2, -np.pi / 2), (7.0, 7.0 - 2 * np.pi)],
    )
    def test_values(self, raw, expected):
        assert wrap_angle(raw) == pytest.approx(expected, abs=1e-12)


class TestImuStream:
    def test_rejects_non_monotone(self):
        t = np.array([0.0, 0.01, 0.01])
        with pytest.raises(ValidationError, match="index 2"):
            ImuStream(t, np.zeros((3, 3)), np.zeros((3, 3)))

    def test_rejects_empty(self):
        with pytest.raises(ValidationError):
            ImuStream(np.empty(0), np.empty((0, 3)), np.empty((0, 3)))

    def test_gap_listing(self):
        t = np.array([0.0, 0.01, 1.0, 1.01])
        stream = ImuStream(t, np.zeros((4, 3)), np.zeros((4, 3)))
        assert stream.gaps(0.5) == [(2, pytest.approx(0.99))]

    def test_sample_roundtrip(self):
        t = np.array([0.0, 0.5])
        f = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        w = np.array([[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]])
        stream = ImuStream(t, f, w)
        rebuilt = ImuStream.from_samples(list(stream))
        np.testing.assert_array_equal(rebuilt.f, f)
        np.testing.assert_array_equal(rebuilt.w, w)
