"""Strapdown sensor suite: IMU, magnetometer, barometer and GNSS receiver.

Sensor streams are synthesized from a truth trajectory at the 100 Hz
estimation rate (GNSS at 1 Hz).  The gyroscope measures the full inertial
body rate -- the navigation-frame rate plus the earth and transport rates
seen in body axes -- while the accelerometer measures specific force and the
magnetometer the true local field, each corrupted by a slowly-walking bias
plus white noise.  The barometer reports pressure altitude, i.e. the true
static pressure (including the scenario's pressure offset) decoded through
the standard atmosphere.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import earth
from .scenario import TRUTH_RATE, TruthTrajectory, _batch_quat_to_matrix, _batch_radii

__all__ = ["SENSOR_RATE", "SensorConfig", "SensorFrame", "SensorStream", "generate_sensors"]

SENSOR_RATE = 100.0


@dataclass(frozen=True)
class SensorConfig:
    """Noise and error-model parameters (1-sigma) for the sensor suite."""

    gyro_noise: float = 2e-3          # rad/s white
    gyro_bias_sigma: float = 5e-5     # rad/s initial bias
    gyro_bias_walk: float = 1e-6      # rad/s per sqrt(s)
    accel_noise: float = 2e-2         # m/s^2 white
    accel_bias_sigma: float = 2e-2    # m/s^2 initial bias
    accel_bias_walk: float = 1e-5     # m/s^2 per sqrt(s)
    mag_noise: float = 40.0           # nT white
    mag_bias_sigma: float = 60.0      # nT initial bias
    mag_bias_walk: float = 0.02       # nT per sqrt(s)
    baro_noise: float = 0.4           # m of pressure altitude, white
    gnss_pos_noise: float = 1.5       # m per horizontal axis
    gnss_alt_noise: float = 3.0       # m vertical
    gnss_vel_noise: float = 0.06      # m/s per axis
    gnss_rate: float = 1.0            # Hz


@dataclass(frozen=True)
class SensorFrame:
    """All measurements for one 100 Hz estimation step.

    ``gnss_pos``/``gnss_vel`` are only present (not None) on whole-second
    epochs while GNSS is available; positions are geodetic [lon, lat, alt].
    """

    k: int
    t: float
    gyro: np.ndarray
    accel: np.ndarray
    mag: np.ndarray
    baro_alt: float
    gnss_pos: np.ndarray | None = None
    gnss_vel: np.ndarray | None = None


@dataclass
class SensorStream:
    cfg: SensorConfig
    t: np.ndarray            # (n,)
    gyro: np.ndarray         # (n, 3)
    accel: np.ndarray        # (n, 3)
    mag: np.ndarray          # (n, 3)
    baro_alt: np.ndarray     # (n,)
    gnss_mask: np.ndarray    # (n,) bool
    gnss_pos: np.ndarray     # (n, 3) geodetic, NaN off-epoch
    gnss_vel: np.ndarray     # (n, 3) NED, NaN off-epoch
    e_gyr: np.ndarray        # (n, 3) true gyro error state (for tests)
    e_acc: np.ndarray
    e_mag: np.ndarray

    @property
    def n(self):
        return self.t.size

    def frame(self, k):
        gp = self.gnss_pos[k] if self.gnss_mask[k] else None
        gv = self.gnss_vel[k] if self.gnss_mask[k] else None
        return SensorFrame(
            k=k, t=float(self.t[k]), gyro=self.gyro[k], accel=self.accel[k],
            mag=self.mag[k], baro_alt=float(self.baro_alt[k]),
            gnss_pos=gp, gnss_vel=gv,
        )

    def to_csv(self, path):
        header = (
            ["t", "gyro_x", "gyro_y", "gyro_z", "accel_x", "accel_y", "accel_z"]
            + ["mag_x", "mag_y", "mag_z", "baro_alt", "gnss"]
            + ["gnss_lon", "gnss_lat", "gnss_alt", "gnss_vn", "gnss_ve", "gnss_vd"]
        )
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for k in range(self.n):
                row = [
                    self.t[k], *self.gyro[k], *self.accel[k], *self.mag[k],
                    self.baro_alt[k], float(self.gnss_mask[k]),
                    *self.gnss_pos[k], *self.gnss_vel[k],
                ]
                w.writerow(["%.17g" % x for x in row])


def _bias_walk(rng, n, dt, sigma0, walk):
    """Initial bias plus first-order random walk, per axis."""
    b0 = rng.normal(0.0, sigma0, 3)
    steps = rng.normal(0.0, walk * np.sqrt(dt), (n, 3))
    steps[0] = 0.0
    return b0 + np.cumsum(steps, axis=0)


def generate_sensors(traj: TruthTrajectory, cfg: SensorConfig, seed) -> SensorStream:
    """Synthesize the 100 Hz sensor stream for one truth trajectory."""
    step = int(round(TRUTH_RATE / SENSOR_RATE))
    idx = np.arange(0, traj.n, step)
    n = idx.size
    dt = 1.0 / SENSOR_RATE
    t = traj.t[idx]
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 2477)))

    q = traj.q[idx]
    T = traj.T[idx]
    v = traj.v[idx]
    lat, alt = T[:, 1], T[:, 2]
    m_r, n_r = _batch_radii(lat)
    R = _batch_quat_to_matrix(q)

    # Gyro: body rate plus earth and transport rates seen in body axes.
    w_en = np.column_stack(
        [v[:, 1] / (n_r + alt), -v[:, 0] / (m_r + alt), -v[:, 1] * np.tan(lat) / (n_r + alt)]
    )
    w_ie = np.column_stack(
        [earth.EARTH_RATE * np.cos(lat), np.zeros(n), -earth.EARTH_RATE * np.sin(lat)]
    )
    w_body = np.einsum("nji,nj->ni", R, w_ie + w_en)
    e_gyr = _bias_walk(rng, n, dt, cfg.gyro_bias_sigma, cfg.gyro_bias_walk)
    gyro = traj.omega[idx] + w_body + e_gyr + rng.normal(0.0, cfg.gyro_noise, (n, 3))

    e_acc = _bias_walk(rng, n, dt, cfg.accel_bias_sigma, cfg.accel_bias_walk)
    accel = traj.f[idx] + e_acc + rng.normal(0.0, cfg.accel_noise, (n, 3))

    e_mag = _bias_walk(rng, n, dt, cfg.mag_bias_sigma, cfg.mag_bias_walk)
    mag = (
        np.einsum("nji,j->ni", R, traj.b_real)
        + e_mag
        + rng.normal(0.0, cfg.mag_noise, (n, 3))
    )

    # Barometer: true pressure (ISA plus offset) decoded as pressure altitude.
    p_true = earth.isa_pressure(alt) + traj.dp[idx]
    baro = earth.isa_altitude(p_true) + rng.normal(0.0, cfg.baro_noise, n)

    # GNSS on whole seconds strictly before the loss time.
    gnss_every = int(round(SENSOR_RATE / cfg.gnss_rate))
    k = np.arange(n)
    mask = (k % gnss_every == 0) & (k > 0) & (t < traj.cfg.t_gnss_loss)
    gnss_pos = np.full((n, 3), np.nan)
    gnss_vel = np.full((n, 3), np.nan)
    ne = rng.normal(0.0, cfg.gnss_pos_noise, (n, 2))
    du = rng.normal(0.0, cfg.gnss_alt_noise, n)
    gnss_pos[mask, 0] = T[mask, 0] + ne[mask, 1] / ((n_r[mask] + alt[mask]) * np.cos(lat[mask]))
    gnss_pos[mask, 1] = T[mask, 1] + ne[mask, 0] / (m_r[mask] + alt[mask])
    gnss_pos[mask, 2] = T[mask, 2] + du[mask]
    gnss_vel[mask] = v[mask] + rng.normal(0.0, cfg.gnss_vel_noise, (n, 3))[mask]

    return SensorStream(
        cfg=cfg, t=t, gyro=gyro, accel=accel, mag=mag, baro_alt=baro,
        gnss_mask=mask, gnss_pos=gnss_pos, gnss_vel=gnss_vel,
        e_gyr=e_gyr, e_acc=e_acc, e_mag=e_mag,
    )
