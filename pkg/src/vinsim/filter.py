"""27-state error-state navigation filter on the attitude manifold.

The attitude is carried as a unit quaternion ``q`` (the manifold element)
together with a local rotation-vector displacement held in the first three
slots of the Euclidean error vector.  The remaining 24 slots are the body
rate, geodetic position, NED velocity, specific force and four slowly-varying
sensor error terms.  Every 100 Hz execution performs a time update (RK4 mean,
second-order transition matrix for the covariance), one or two measurement
updates, and a reset that folds the estimated displacement back into the
quaternion and transports the covariance accordingly.

State vector layout (27 slots):

====== ======================= =========
slice  meaning                 units
====== ======================= =========
0:3    attitude displacement   rad
3:6    body rate w_NB^B        rad/s
6:9    position lon, lat, alt  rad, rad, m
9:12   velocity v^N            m/s
12:15  specific force f_IB^B   m/s^2
15:18  gyroscope error E_GYR   rad/s
18:21  accelerometer error     m/s^2
21:24  magnetometer error      nT
24:27  magnetic deviation B^N  nT
====== ======================= =========
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import earth, so3
from .sensors import SensorFrame
from .vvs import VvsObservation

__all__ = [
    "FILTER_RATE",
    "NoiseConfig",
    "FilterState",
    "ObservationBundle",
    "NavFilter",
    "initial_state",
]

FILTER_RATE = 100.0


@dataclass(frozen=True)
class NoiseConfig:
    """Process/measurement noise and initialization parameters.

    Process entries are continuous PSDs (unit^2 per second); position and
    velocity PSDs and the GNSS measurement sigmas are given in metres and
    converted to geodetic units at the current estimate.  The ``*_denied``
    position/velocity PSDs take over once GNSS is gone: the visual
    observations are worse than GNSS, so the filter must trust its own
    position/velocity model less.
    """

    # process noise PSDs
    q_att: float = 1e-9           # rad^2/s
    q_omega: float = 5e-4         # (rad/s)^2/s
    q_pos: float = 1e-4           # m^2/s, GNSS regime
    q_vel: float = 5e-4           # (m/s)^2/s, GNSS regime
    q_pos_denied: float = 1e-2    # m^2/s, visual regime
    q_vel_denied: float = 1e-2    # (m/s)^2/s, visual regime
    q_force: float = 5e-3         # (m/s^2)^2/s
    q_gyro_bias: float = 1e-12    # (rad/s)^2/s
    q_accel_bias: float = 1e-10   # (m/s^2)^2/s
    q_mag_bias: float = 4e-4      # nT^2/s
    q_bdev: float = 1e-6          # nT^2/s
    # measurement sigmas
    r_gyro: float = 2e-3          # rad/s
    r_accel: float = 2e-2         # m/s^2
    r_mag: float = 40.0           # nT
    r_gnss_pos: float = 1.5       # m, horizontal per axis
    r_gnss_alt: float = 3.0       # m
    r_gnss_vel: float = 0.06      # m/s
    # initial 1-sigma values (diagonal P0)
    p0_att: float = np.deg2rad(0.5)
    p0_omega: float = 0.01
    p0_pos: float = 3.0           # m horizontal
    p0_alt: float = 5.0           # m
    p0_vel: float = 0.3
    p0_force: float = 0.3
    p0_gyro_bias: float = 1e-4
    p0_accel_bias: float = 0.04
    p0_mag_bias: float = 120.0
    p0_bdev: float = 300.0


@dataclass
class FilterState:
    """Filter estimate at time ``t``: manifold element plus Euclidean part.

    Treated as a value; the stepping methods return new instances and never
    mutate their input.
    """

    t: float
    q: np.ndarray       # (4,) unit quaternion
    x: np.ndarray       # (27,)
    P: np.ndarray       # (27, 27)

    def copy(self):
        return FilterState(self.t, self.q.copy(), self.x.copy(), self.P.copy())


@dataclass(frozen=True)
class ObservationBundle:
    """One measurement vector: the always-present inertial/magnetic triplets,
    optionally extended by a position/velocity observation."""

    t: float
    gyro: np.ndarray
    accel: np.ndarray
    mag: np.ndarray
    pos: np.ndarray | None = None        # geodetic [lon, lat, alt]
    vel: np.ndarray | None = None        # NED
    source: str | None = None            # "GNSS" or "VVS"
    pos_sigma: np.ndarray | None = None  # m per NED axis [n, e, d]
    vel_sigma: np.ndarray | None = None  # m/s per NED axis

    @property
    def nrows(self):
        return 15 if self.pos is not None else 9


# --------------------------------------------------------------------------
# numba kernels
# --------------------------------------------------------------------------


@njit(cache=True)
def _cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def _dynamics(q, x):
    """Exact nonlinear time derivative of the 27-slot state."""
    xdot = np.zeros(27)
    T = x[6:9]
    v = x[9:12]
    xdot[0:3] = x[3:6]
    xdot[6:9] = earth.geodetic_dot(T, v)
    qc = so3.plus(q, x[0:3])
    w_en = earth.transport_rate(T, v)
    a = so3.rotate(qc, x[12:15])
    g = earth.gravity_ned(T[1], T[2])
    cor = earth.coriolis_accel(T[1], v)
    xdot[9:12] = a - _cross(w_en, v) + g - cor
    return xdot


@njit(cache=True)
def _build_A(q, x):
    """System matrix: Jacobian of the dynamics, with the position columns
    deliberately left at zero."""
    A = np.zeros((27, 27))
    T = x[6:9]
    v = x[9:12]
    for i in range(3):
        A[i, 3 + i] = 1.0
    A[6:9, 9:12] = earth.jac_geodetic_dot_wrt_v(T)
    qc = so3.plus(q, x[0:3])
    A[9:12, 0:3] = so3.jac_rotate_wrt_R(qc, x[12:15])
    A[9:12, 9:12] = (
        -so3.skew(earth.transport_rate(T, v))
        + so3.skew(v) @ earth.jac_transport_rate_wrt_v(T)
        - earth.jac_coriolis_wrt_v(T[1])
    )
    A[9:12, 12:15] = so3.jac_rotate_wrt_v(qc)
    return A


@njit(cache=True)
def _qdiag_geodetic(x, qdiag_si):
    """Per-step process noise diagonal; position entries arrive in m^2/s and
    leave in geodetic units at the current estimate."""
    out = qdiag_si.copy()
    m_r, n_r = earth.radii(x[7])
    out[6] = qdiag_si[6] / ((n_r + x[8]) * np.cos(x[7])) ** 2
    out[7] = qdiag_si[7] / (m_r + x[8]) ** 2
    return out


@njit(cache=True)
def _time_update(q, x, P, dt, qdiag_si):
    """RK4 mean propagation and second-order covariance propagation.

    Mutates ``x`` and ``P`` in place.
    """
    A = _build_A(q, x)
    k1 = _dynamics(q, x)
    k2 = _dynamics(q, x + 0.5 * dt * k1)
    k3 = _dynamics(q, x + 0.5 * dt * k2)
    k4 = _dynamics(q, x + dt * k3)
    qd = _qdiag_geodetic(x, qdiag_si)
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    phi = 0.5 * dt * dt * (A @ A)
    phi += dt * A
    for i in range(27):
        phi[i, i] += 1.0
    Pn = phi @ P @ phi.T
    for i in range(27):
        Pn[i, i] += qd[i] * dt
    for i in range(27):
        if Pn[i, i] < -1e-9:
            raise ValueError("time update produced a negative variance")
        for j in range(i + 1, 27):
            s = 0.5 * (Pn[i, j] + Pn[j, i])
            Pn[i, j] = s
            Pn[j, i] = s
    P[:, :] = Pn


@njit(cache=True)
def _predicted_obs(q, x, b_model, nrows):
    """Measurement prediction, 9 or 15 rows, no simplifications."""
    z = np.empty(nrows)
    T = x[6:9]
    v = x[9:12]
    qc = so3.plus(q, x[0:3])
    w_in = earth.earth_rate(T[1]) + earth.transport_rate(T, v)
    z[0:3] = x[3:6] + so3.inv_adjoint(qc, w_in) + x[15:18]
    z[3:6] = x[12:15] + x[18:21]
    z[6:9] = so3.rotate_inv(qc, b_model - x[24:27]) + x[21:24]
    if nrows == 15:
        z[9:12] = T
        z[12:15] = v
    return z


@njit(cache=True)
def _build_H(q, x, b_model, nrows):
    """Output matrix; position columns of the gyro/mag rows stay at zero,
    matching the linearization policy of the system matrix."""
    H = np.zeros((nrows, 27))
    T = x[6:9]
    v = x[9:12]
    qc = so3.plus(q, x[0:3])
    w_in = earth.earth_rate(T[1]) + earth.transport_rate(T, v)
    Rt = so3.jac_inv_adjoint_wrt_w(qc)
    H[0:3, 0:3] = so3.jac_inv_adjoint_wrt_R(qc, w_in)
    H[0:3, 9:12] = Rt @ earth.jac_transport_rate_wrt_v(T)
    H[6:9, 0:3] = so3.jac_rotate_inv_wrt_R(qc, b_model - x[24:27])
    H[6:9, 24:27] = -so3.jac_rotate_inv_wrt_v(qc)
    for i in range(3):
        H[i, 3 + i] = 1.0        # gyro wrt body rate
        H[i, 15 + i] = 1.0       # gyro wrt E_GYR
        H[3 + i, 12 + i] = 1.0   # accel wrt specific force
        H[3 + i, 18 + i] = 1.0   # accel wrt E_ACC
        H[6 + i, 21 + i] = 1.0   # mag wrt E_MAG
    if nrows == 15:
        for i in range(3):
            H[9 + i, 6 + i] = 1.0    # position rows
            H[12 + i, 9 + i] = 1.0   # velocity rows
    return H


@njit(cache=True)
def _measurement_update(q, x, P, z, rdiag, b_model):
    """Joseph-form EKF update. Mutates ``x`` and ``P`` in place."""
    nrows = z.size
    zhat = _predicted_obs(q, x, b_model, nrows)
    H = _build_H(q, x, b_model, nrows)
    PHt = P @ H.T
    S = H @ PHt
    for i in range(nrows):
        S[i, i] += rdiag[i]
    K = np.linalg.solve(S, PHt.T).T
    x += K @ (z - zhat)
    IKH = -(K @ H)
    for i in range(27):
        IKH[i, i] += 1.0
    Pn = IKH @ P @ IKH.T + (K * rdiag) @ K.T
    for i in range(27):
        for j in range(i + 1, 27):
            s = 0.5 * (Pn[i, j] + Pn[j, i])
            Pn[i, j] = s
            Pn[j, i] = s
    P[:, :] = Pn


@njit(cache=True)
def _reset(q, x, P):
    """Fold the attitude displacement into the quaternion; transport the
    covariance by the block-diagonal Jacobian of the folding map.  Returns
    the new quaternion; mutates ``x`` and ``P``."""
    dr = x[0:3].copy()
    q_new = so3.plus(q, dr)
    D = so3.jac_plus_wrt_R(dr)
    P[0:3, :] = D @ P[0:3, :]
    P[:, 0:3] = P[:, 0:3] @ D.T
    for i in range(27):
        for j in range(i + 1, 27):
            s = 0.5 * (P[i, j] + P[j, i])
            P[i, j] = s
            P[j, i] = s
    x[0:3] = 0.0
    return q_new


# --------------------------------------------------------------------------
# python-level filter
# --------------------------------------------------------------------------


class NavFilter:
    """Error-state EKF over one run; owns the noise model and the magnetic
    field model, but no per-run state (states are passed in and returned)."""

    def __init__(self, noise: NoiseConfig, b_model, dt=1.0 / FILTER_RATE):
        self.noise = noise
        self.b_model = np.asarray(b_model, dtype=float)
        self.dt = float(dt)
        n = noise
        self._qdiag_gnss = self._assemble_qdiag(n.q_pos, n.q_vel)
        self._qdiag_denied = self._assemble_qdiag(n.q_pos_denied, n.q_vel_denied)
        self._r9 = np.repeat(
            np.array([n.r_gyro**2, n.r_accel**2, n.r_mag**2]), 3
        )

    def _assemble_qdiag(self, q_pos, q_vel):
        n = self.noise
        return np.repeat(
            np.array(
                [
                    n.q_att, n.q_omega, q_pos, q_vel, n.q_force,
                    n.q_gyro_bias, n.q_accel_bias, n.q_mag_bias, n.q_bdev,
                ]
            ),
            3,
        ).astype(float)

    # -- linearization-level API (used heavily by the tests) ---------------

    def dynamics(self, q, x):
        return _dynamics(np.asarray(q, float), np.asarray(x, float))

    def build_A(self, q, x):
        return _build_A(np.asarray(q, float), np.asarray(x, float))

    def predicted_obs(self, q, x, nrows=9):
        return _predicted_obs(np.asarray(q, float), np.asarray(x, float),
                              self.b_model, nrows)

    def build_H(self, q, x, nrows=9):
        return _build_H(np.asarray(q, float), np.asarray(x, float),
                        self.b_model, nrows)

    # -- filter steps -------------------------------------------------------

    def time_update(self, state: FilterState, dt=None, denied=False) -> FilterState:
        dt = self.dt if dt is None else float(dt)
        out = state.copy()
        qdiag = self._qdiag_denied if denied else self._qdiag_gnss
        _time_update(out.q, out.x, out.P, dt, qdiag)
        out.t = state.t + dt
        return out

    def _pos_rdiag(self, x, pos_sigma_ned, vel_sigma):
        """Rows 9..14 of the measurement variance, geodetic units for the
        horizontal position components."""
        m_r, n_r = earth.radii(x[7])
        sig = np.empty(6)
        sig[0] = pos_sigma_ned[1] / ((n_r + x[8]) * np.cos(x[7]))
        sig[1] = pos_sigma_ned[0] / (m_r + x[8])
        sig[2] = pos_sigma_ned[2]
        sig[3:6] = vel_sigma
        return sig**2

    def _bundle_z_r(self, x, obs: ObservationBundle):
        if obs.pos is None:
            return np.concatenate([obs.gyro, obs.accel, obs.mag]), self._r9
        n = self.noise
        if obs.pos_sigma is not None:
            pos_sigma, vel_sigma = obs.pos_sigma, obs.vel_sigma
        else:
            pos_sigma = np.array([n.r_gnss_pos, n.r_gnss_pos, n.r_gnss_alt])
            vel_sigma = np.full(3, n.r_gnss_vel)
        z = np.concatenate([obs.gyro, obs.accel, obs.mag, obs.pos, obs.vel])
        r = np.concatenate([self._r9, self._pos_rdiag(x, pos_sigma, vel_sigma)])
        return z, r

    def measurement_update(self, state: FilterState, obs: ObservationBundle) -> FilterState:
        if abs(obs.t - state.t) > 1e-9:
            raise ValueError("observation time does not match the state time")
        out = state.copy()
        z, r = self._bundle_z_r(out.x, obs)
        _measurement_update(out.q, out.x, out.P, z, r, self.b_model)
        return out

    def reset(self, state: FilterState) -> FilterState:
        out = state.copy()
        out.q = _reset(out.q, out.x, out.P)
        return out

    def step(self, state: FilterState, frame: SensorFrame, vvs_hook=None,
             denied=False) -> FilterState:
        """One 100 Hz execution.

        Dispatch: GNSS present in the frame -> single 15-row pass; otherwise
        a 9-row pass, and if ``vvs_hook`` is given it receives the
        intermediate estimate and may return a :class:`VvsObservation` that
        triggers a second, 15-row pass.
        """
        if abs(frame.t - state.t - self.dt) > 1e-6:
            raise ValueError("frame time is not one step ahead of the state")
        out = state.copy()
        qdiag = self._qdiag_denied if denied else self._qdiag_gnss
        _time_update(out.q, out.x, out.P, self.dt, qdiag)
        out.t = frame.t

        if frame.gnss_pos is not None:
            n = self.noise
            z = np.concatenate(
                [frame.gyro, frame.accel, frame.mag, frame.gnss_pos, frame.gnss_vel]
            )
            r = np.concatenate(
                [
                    self._r9,
                    self._pos_rdiag(
                        out.x,
                        np.array([n.r_gnss_pos, n.r_gnss_pos, n.r_gnss_alt]),
                        np.full(3, n.r_gnss_vel),
                    ),
                ]
            )
            _measurement_update(out.q, out.x, out.P, z, r, self.b_model)
            out.q = _reset(out.q, out.x, out.P)
            return out

        z9 = np.concatenate([frame.gyro, frame.accel, frame.mag])
        _measurement_update(out.q, out.x, out.P, z9, self._r9, self.b_model)
        out.q = _reset(out.q, out.x, out.P)
        if vvs_hook is None:
            return out
        vobs = vvs_hook(out)
        if vobs is None:
            return out
        z = np.concatenate([z9, vobs.T_obs, vobs.v_obs])
        r = np.concatenate(
            [self._r9, self._pos_rdiag(out.x, vobs.pos_sigma, vobs.vel_sigma)]
        )
        _measurement_update(out.q, out.x, out.P, z, r, self.b_model)
        out.q = _reset(out.q, out.x, out.P)
        return out


def initial_state(sample, noise: NoiseConfig, rng) -> FilterState:
    """Truth-plus-noise initialization with the documented diagonal P0.

    ``sample`` is a truth grid point at the start time.  Sensor-error slots
    start at zero with prior variances sized to cover the true error scales.
    """
    n = noise
    m_r, n_r = earth.radii(sample.T[1])
    x = np.zeros(27)
    q = so3.plus(sample.q, rng.normal(0.0, n.p0_att, 3))
    x[3:6] = sample.omega + rng.normal(0.0, n.p0_omega, 3)
    x[6] = sample.T[0] + rng.normal(0.0, n.p0_pos) / (
        (n_r + sample.T[2]) * np.cos(sample.T[1])
    )
    x[7] = sample.T[1] + rng.normal(0.0, n.p0_pos) / (m_r + sample.T[2])
    x[8] = sample.T[2] + rng.normal(0.0, n.p0_alt)
    x[9:12] = sample.v + rng.normal(0.0, n.p0_vel, 3)
    x[12:15] = sample.f + rng.normal(0.0, n.p0_force, 3)
    sig = np.repeat(
        np.array(
            [
                n.p0_att, n.p0_omega, 1.0, n.p0_vel, n.p0_force,
                n.p0_gyro_bias, n.p0_accel_bias, n.p0_mag_bias, n.p0_bdev,
            ]
        ),
        3,
    ).astype(float)
    sig[6] = n.p0_pos / ((n_r + sample.T[2]) * np.cos(sample.T[1]))
    sig[7] = n.p0_pos / (m_r + sample.T[2])
    sig[8] = n.p0_alt
    return FilterState(t=float(sample.t), q=q, x=x, P=np.diag(sig**2))
