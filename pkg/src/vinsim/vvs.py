"""Virtual vision sensor: surrogate visual odometry and its conversion into
position/velocity observations.

A downward-looking visual pipeline produces full poses (attitude plus
geodetic position) at 10 Hz.  This module stands in for that pipeline with a
cheap surrogate whose error behaviour is shaped like the real thing: the
visual attitude and altitude stay close to the inertial estimates they are
seeded with, while the horizontal position accumulates a slow drift
proportional to distance flown.  The converter then differentiates
consecutive poses into a geodetic rate and repackages it as a combined
position/velocity pseudo-measurement the navigation filter can consume in
place of a GNSS fix, with an ad-hoc dynamic covariance.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import earth, so3

__all__ = [
    "DT_IMG",
    "VVS_DECIMATION",
    "VoConfig",
    "VisualPose",
    "VvsObservation",
    "SurrogateVo",
    "VvsConverter",
    "vvs_geodetic_rate",
    "vvs_velocity",
    "vvs_position",
]

DT_IMG = 0.1          # image period, s
VVS_DECIMATION = 10   # filter executions per image (0.1 s / 0.01 s)
_WINDOW = 20          # velocity readings in the running-average window


@dataclass(frozen=True)
class VoConfig:
    """Error model of the surrogate visual odometry.

    ``drift`` is the target expected final horizontal error as a fraction of
    the distance flown; it is realized as a per-run constant bias direction,
    which is what an accumulating odometry error looks like from outside.
    """

    drift: float = 0.004        # fraction of distance flown
    pos_noise: float = 0.05     # m, per-frame white horizontal error
    alt_pull: float = 0.3       # per-frame pull of altitude toward truth
    alt_noise: float = 0.05     # m, per-frame white vertical error
    att_pull: float = 0.3       # per-frame pull of attitude toward truth
    att_noise: float = 2e-4     # rad, per-frame white attitude error
    att_clamp: float = np.deg2rad(0.5)  # max pitch/bank offset from inertial


@dataclass(frozen=True)
class VisualPose:
    """One 10 Hz visual pipeline output: attitude plus geodetic position."""

    t: float
    q: np.ndarray   # unit quaternion, body to NED
    T: np.ndarray   # [lon rad, lat rad, alt m]


@dataclass(frozen=True)
class VvsObservation:
    """Position/velocity pseudo-measurement derived from two visual poses.

    Sigmas are 1-sigma values in metres (position, per NED axis) and m/s
    (velocity, per NED axis); the filter converts the horizontal position
    sigmas into geodetic units at its own linearization point.
    """

    t: float
    T_obs: np.ndarray      # [lon, lat, alt]
    v_obs: np.ndarray      # NED m/s
    pos_sigma: np.ndarray  # m, per NED axis
    vel_sigma: np.ndarray  # m/s, per NED axis


class SurrogateVo:
    """Stand-in for the visual odometry pipeline.

    Emits poses whose attitude and altitude are the supplied inertial
    estimates pulled part-way toward truth (pitch and bank clamped so they
    never stray far from the inertial values), and whose horizontal position
    integrates the true increments plus a per-run bias aligned with a random
    direction, sized so the expected final error is ``drift`` times the
    distance flown.
    """

    def __init__(self, cfg: VoConfig, seed):
        self.cfg = cfg
        self.rng = np.random.default_rng(np.random.SeedSequence((int(seed), 3989)))
        # Per-axis sigma d / sqrt(pi/2) makes E|bias vector| equal to d.
        sig_b = cfg.drift / np.sqrt(np.pi / 2.0)
        self.bias_per_m = self.rng.normal(0.0, sig_b, 2)  # north, east per metre
        self._prev_truth_T = None
        self._prev_pose = None

    def _attitude(self, q_true, q_est):
        cfg = self.cfg
        delta = so3.minus(q_true, q_est)
        noise = self.rng.normal(0.0, cfg.att_noise, 3)
        q_vis = so3.plus(q_est, cfg.att_pull * delta + noise)
        yaw, pitch, roll = so3.quat_to_euler(q_vis)
        _, pitch_e, roll_e = so3.quat_to_euler(q_est)
        pitch = pitch_e + np.clip(pitch - pitch_e, -cfg.att_clamp, cfg.att_clamp)
        roll = roll_e + np.clip(roll - roll_e, -cfg.att_clamp, cfg.att_clamp)
        return so3.euler_to_quat(yaw, pitch, roll)

    def pose(self, t, q_true, T_true, q_est, T_est) -> VisualPose:
        """Produce the visual pose for image time ``t``.

        The first call initializes the visual track from the inertial
        estimate; later calls integrate the truth increments with the error
        model on top.
        """
        cfg = self.cfg
        q_vis = self._attitude(q_true, q_est)
        if self._prev_pose is None:
            T_vis = np.array(T_est, dtype=float)
            T_vis[2] = (1.0 - cfg.alt_pull) * T_est[2] + cfg.alt_pull * T_true[2]
        else:
            T_prev = self._prev_pose.T
            m_r, n_r = earth.radii(T_prev[1])
            # Horizontal distance of the true increment, for the drift bias.
            d_north = (T_true[1] - self._prev_truth_T[1]) * (m_r + T_prev[2])
            d_east = (
                (T_true[0] - self._prev_truth_T[0])
                * (n_r + T_prev[2]) * np.cos(T_prev[1])
            )
            dist = np.hypot(d_north, d_east)
            err = self.bias_per_m * dist + self.rng.normal(0.0, cfg.pos_noise, 2)
            T_vis = np.empty(3)
            T_vis[0] = (
                T_prev[0] + (T_true[0] - self._prev_truth_T[0])
                + err[1] / ((n_r + T_prev[2]) * np.cos(T_prev[1]))
            )
            T_vis[1] = (
                T_prev[1] + (T_true[1] - self._prev_truth_T[1])
                + err[0] / (m_r + T_prev[2])
            )
            h = T_prev[2] + (T_true[2] - self._prev_truth_T[2])
            h = (1.0 - cfg.alt_pull) * h + cfg.alt_pull * T_true[2]
            T_vis[2] = h + self.rng.normal(0.0, cfg.alt_noise)
        pose = VisualPose(t=float(t), q=q_vis, T=T_vis)
        self._prev_truth_T = np.array(T_true, dtype=float)
        self._prev_pose = pose
        return pose


def vvs_geodetic_rate(pose_i: VisualPose, pose_prev: VisualPose) -> np.ndarray:
    """Finite-difference geodetic rate [lon_dot, lat_dot, alt_dot] of two
    consecutive visual poses."""
    dt = pose_i.t - pose_prev.t
    if abs(dt - DT_IMG) > 1e-6:
        raise ValueError(
            f"visual poses are not consecutive: dt = {dt:.6f} s, expected {DT_IMG} s"
        )
    return (pose_i.T - pose_prev.T) / DT_IMG


def vvs_velocity(rate, prior_T) -> np.ndarray:
    """NED velocity from a geodetic rate, using the radii and altitude of the
    previous-image inertial estimate ``prior_T``."""
    m_r, n_r = earth.radii(prior_T[1])
    return np.array(
        [
            (m_r + prior_T[2]) * rate[1],
            (n_r + prior_T[2]) * np.cos(prior_T[1]) * rate[0],
            -rate[2],
        ]
    )


def vvs_position(rate, prior_T, baro_alt) -> np.ndarray:
    """Geodetic position observation: the previous-image inertial horizontal
    estimate advanced by the visual rate over one image period, with the
    altitude taken from the (frozen-offset) barometric channel."""
    return np.array(
        [
            prior_T[0] + rate[0] * DT_IMG,
            prior_T[1] + rate[1] * DT_IMG,
            float(baro_alt),
        ]
    )


@dataclass
class VvsConverter:
    """Turns the visual pose stream into filter-ready observations.

    Holds the previous pose and previous-image inertial estimate, the
    20-sample velocity window for the dynamic covariance, and the barometric
    pressure-offset estimate that is refined while GNSS is available and
    frozen afterwards.

    One instance per run; not thread-safe.
    """

    gnss_pos_sigma: float = 1.5   # m, horizontal GNSS sigma the 0.1 rule scales
    gnss_alt_sigma: float = 3.0   # m
    vel_sigma_floor: float = 0.01  # m/s
    cal_tau: float = 20.0         # s, pressure-offset calibration time constant
    dp_hat: float = 0.0
    _cal_started: bool = field(default=False, repr=False)
    _prev_pose: VisualPose | None = field(default=None, repr=False)
    _prev_est_T: np.ndarray | None = field(default=None, repr=False)
    _window: deque = field(default_factory=lambda: deque(maxlen=_WINDOW), repr=False)

    def calibrate_pressure(self, baro_alt_raw, est_alt, dt):
        """Track the pressure offset while an absolute altitude reference is
        available: offset = measured static pressure minus the pressure the
        standard atmosphere assigns to the estimated altitude."""
        sample = earth.isa_pressure(baro_alt_raw) - earth.isa_pressure(est_alt)
        if not self._cal_started:
            self.dp_hat = float(sample)
            self._cal_started = True
        else:
            alpha = dt / self.cal_tau
            self.dp_hat += alpha * (float(sample) - self.dp_hat)

    def decode_baro(self, baro_alt_raw) -> float:
        """Pressure altitude -> altitude, removing the frozen offset."""
        return float(earth.isa_altitude(earth.isa_pressure(baro_alt_raw) - self.dp_hat))

    @property
    def pos_sigma(self) -> np.ndarray:
        return 0.1 * np.array(
            [self.gnss_pos_sigma, self.gnss_pos_sigma, self.gnss_alt_sigma]
        )

    def _vel_sigma(self, v_obs) -> np.ndarray:
        self._window.append(np.array(v_obs, dtype=float))
        mean = np.mean(self._window, axis=0)
        return np.maximum(np.abs(v_obs - mean), self.vel_sigma_floor)

    def step(self, pose: VisualPose, est_T, baro_alt_raw) -> VvsObservation | None:
        """Process one image; returns None on the bootstrap frame."""
        est_T = np.array(est_T, dtype=float)
        if self._prev_pose is None:
            self._prev_pose = pose
            self._prev_est_T = est_T
            return None
        rate = vvs_geodetic_rate(pose, self._prev_pose)
        v_obs = vvs_velocity(rate, self._prev_est_T)
        T_obs = vvs_position(rate, self._prev_est_T, self.decode_baro(baro_alt_raw))
        obs = VvsObservation(
            t=pose.t,
            T_obs=T_obs,
            v_obs=v_obs,
            pos_sigma=self.pos_sigma,
            vel_sigma=self._vel_sigma(v_obs),
        )
        self._prev_pose = pose
        self._prev_est_T = est_T
        return obs
