"""Tests for the synthesized sensor streams."""

from __future__ import annotations

import numpy as np
import pytest

from vinsim import earth, so3
from vinsim.scenario import Ramp, generate_truth
from vinsim.sensors import SENSOR_RATE, SensorConfig, generate_sensors

from helpers import make_config

QUIET = SensorConfig(
    gyro_noise=0.0, gyro_bias_sigma=0.0, gyro_bias_walk=0.0,
    accel_noise=0.0, accel_bias_sigma=0.0, accel_bias_walk=0.0,
    mag_noise=0.0, mag_bias_sigma=0.0, mag_bias_walk=0.0,
    baro_noise=0.0, gnss_pos_noise=0.0, gnss_alt_noise=0.0, gnss_vel_noise=0.0,
)


@pytest.fixture(scope="module")
def traj():
    return generate_truth(make_config())


@pytest.fixture(scope="module")
def quiet_stream(traj):
    return generate_sensors(traj, QUIET, seed=5)


class TestStructure:
    def test_rate_and_alignment(self, traj, quiet_stream):
        s = quiet_stream
        assert s.n == traj.n // 5 + 1
        np.testing.assert_allclose(np.diff(s.t), 1.0 / SENSOR_RATE, atol=1e-12)
        np.testing.assert_allclose(s.t[0], traj.t[0])

    def test_deterministic(self, traj):
        cfg = SensorConfig()
        a = generate_sensors(traj, cfg, seed=9)
        b = generate_sensors(traj, cfg, seed=9)
        c = generate_sensors(traj, cfg, seed=10)
        np.testing.assert_array_equal(a.gyro, b.gyro)
        np.testing.assert_array_equal(a.gnss_pos, b.gnss_pos)
        assert not np.allclose(a.gyro, c.gyro)

    def test_frame_view(self, quiet_stream):
        s = quiet_stream
        k_on = int(np.flatnonzero(s.gnss_mask)[0])
        f_on = s.frame(k_on)
        f_off = s.frame(k_on + 1)
        assert f_on.gnss_pos is not None and f_on.gnss_vel is not None
        assert f_off.gnss_pos is None and f_off.gnss_vel is None
        np.testing.assert_array_equal(f_on.gyro, s.gyro[k_on])

    def test_csv_export(self, quiet_stream, tmp_path):
        path = tmp_path / "sensors.csv"
        quiet_stream.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == quiet_stream.n + 1
        assert lines[0].startswith("t,gyro_x")


class TestNoiseFree:
    """With all noise terms zeroed, each channel must match its model exactly."""

    def test_gyro_is_inertial_rate(self, traj, quiet_stream):
        s = quiet_stream
        for k in [0, 57, 4000, s.n - 1]:
            i = 5 * k
            T, v, q = traj.T[i], traj.v[i], traj.q[i]
            w_in = earth.earth_rate(T[1]) + earth.transport_rate(T, v)
            expect = traj.omega[i] + so3.rotate_inv(q, w_in)
            np.testing.assert_allclose(s.gyro[k], expect, atol=1e-15)

    def test_accel_is_specific_force(self, traj, quiet_stream):
        np.testing.assert_array_equal(quiet_stream.accel, traj.f[::5])

    def test_mag_is_body_frame_field(self, traj, quiet_stream):
        s = quiet_stream
        for k in [0, 123, s.n - 1]:
            expect = so3.rotate_inv(traj.q[5 * k], traj.b_real)
            np.testing.assert_allclose(s.mag[k], expect, atol=1e-12)

    def test_baro_without_offset_is_altitude(self, quiet_stream, traj):
        # make_config sets dp = 0, so pressure altitude equals true altitude.
        np.testing.assert_allclose(quiet_stream.baro_alt, traj.T[::5, 2], atol=1e-9)

    def test_baro_encodes_pressure_offset(self):
        cfg = make_config(dp=Ramp(120.0, 120.0))
        tr = generate_truth(cfg)
        s = generate_sensors(tr, QUIET, seed=1)
        p = earth.isa_pressure(tr.T[::5, 2]) + 120.0
        np.testing.assert_allclose(s.baro_alt, earth.isa_altitude(p), atol=1e-9)
        # A positive pressure offset reads as a lower pressure altitude.
        assert np.all(s.baro_alt < tr.T[::5, 2])

    def test_gnss_exact(self, traj, quiet_stream):
        s = quiet_stream
        m = s.gnss_mask
        np.testing.assert_allclose(s.gnss_pos[m], traj.T[::5][m], atol=1e-15)
        np.testing.assert_allclose(s.gnss_vel[m], traj.v[::5][m], atol=1e-15)
        assert np.all(np.isnan(s.gnss_pos[~m]))


class TestGnssSchedule:
    def test_whole_seconds_before_loss(self, quiet_stream):
        s = quiet_stream
        ks = np.flatnonzero(s.gnss_mask)
        # 1 Hz epochs at t = 1..99 s for a 150 s run losing GNSS at 100 s.
        assert ks.size == 99
        np.testing.assert_allclose(s.t[ks], np.arange(1.0, 100.0), atol=1e-9)

    def test_loss_time_respected(self, quiet_stream):
        s = quiet_stream
        assert not np.any(s.gnss_mask[s.t >= s.t[0] + 100.0 - 1e-9])


class TestNoiseStatistics:
    def test_white_noise_levels(self, traj):
        cfg = SensorConfig(
            gyro_bias_sigma=0.0, gyro_bias_walk=0.0,
            accel_bias_sigma=0.0, accel_bias_walk=0.0,
            mag_bias_sigma=0.0, mag_bias_walk=0.0,
        )
        s = generate_sensors(traj, cfg, seed=3)
        q = generate_sensors(traj, QUIET, seed=3)
        for got, ref, sig in [
            (s.gyro, q.gyro, cfg.gyro_noise),
            (s.accel, q.accel, cfg.accel_noise),
            (s.mag, q.mag, cfg.mag_noise),
        ]:
            resid = got - ref
            np.testing.assert_allclose(resid.std(), sig, rtol=0.03)
            assert abs(resid.mean()) < 4 * sig / np.sqrt(resid.size)
        resid = s.baro_alt - q.baro_alt
        np.testing.assert_allclose(resid.std(), cfg.baro_noise, rtol=0.05)

    def test_gnss_noise_units(self, traj):
        """GNSS position noise is specified in metres per axis, applied in
        geodetic coordinates through the local radii."""
        cfg = SensorConfig(gnss_pos_noise=2.0, gnss_alt_noise=4.0, gnss_vel_noise=0.1)
        err_m = []
        for seed in range(25):
            s = generate_sensors(traj, cfg, seed=seed)
            m = s.gnss_mask
            T = traj.T[::5][m]
            d = s.gnss_pos[m] - T
            rad = np.array([earth.radii(x) for x in T[:, 1]])
            m_r, n_r = rad[:, 0], rad[:, 1]
            east = d[:, 0] * (n_r + T[:, 2]) * np.cos(T[:, 1])
            north = d[:, 1] * (m_r + T[:, 2])
            err_m.append(np.column_stack([north, east, d[:, 2]]))
        err_m = np.concatenate(err_m)
        np.testing.assert_allclose(err_m[:, 0].std(), 2.0, rtol=0.05)
        np.testing.assert_allclose(err_m[:, 1].std(), 2.0, rtol=0.05)
        np.testing.assert_allclose(err_m[:, 2].std(), 4.0, rtol=0.05)

    def test_bias_initial_draw(self, traj):
        cfg = SensorConfig(
            gyro_noise=0.0, gyro_bias_sigma=1e-4, gyro_bias_walk=0.0,
            accel_noise=0.0, accel_bias_walk=0.0, mag_noise=0.0, mag_bias_walk=0.0,
        )
        b0 = np.array([generate_sensors(traj, cfg, seed=s).e_gyr[0] for s in range(120)])
        np.testing.assert_allclose(b0.std(), 1e-4, rtol=0.12)
        # Bias is constant in time when the walk intensity is zero.
        s = generate_sensors(traj, cfg, seed=0)
        np.testing.assert_array_equal(s.e_gyr[0], s.e_gyr[-1])

    def test_bias_walk_growth(self, traj):
        cfg = SensorConfig(gyro_bias_sigma=0.0, gyro_bias_walk=1e-4)
        var = []
        for seed in range(150):
            s = generate_sensors(traj, cfg, seed=seed)
            var.append(s.e_gyr[-1] ** 2)
        t_total = 150.0
        expect = (1e-4) ** 2 * t_total
        np.testing.assert_allclose(np.mean(var), expect, rtol=0.15)
