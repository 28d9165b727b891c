"""Flight scenarios and the 500 Hz truth-trajectory generator.

A scenario is a stochastic script for a small fixed-wing aircraft: an initial
geodetic position, an air-path bearing schedule flown as coordinated banked
turns, optional altitude and airspeed changes, horizontal wind with linear
transitions, pressure/temperature offsets from the standard atmosphere, and
band-limited turbulence on the attitude angles and the airspeed.

The generator is built so that every stored sample is *self-consistent*: the
positions are the RK4 integral of the stored velocities, the body rates are
the exact analytic rates of the stored attitudes, and the specific force is
back-computed so the navigation velocity equation holds exactly at each
sample.  Maneuver ramps use quintic smoothsteps and turbulence is synthesized
from a truncated spectrum, which keeps all derivatives finite and lets the
tests verify consistency by finite differences.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import earth

__all__ = [
    "TRUTH_RATE",
    "Ramp",
    "Turn",
    "ScenarioConfig",
    "TruthSample",
    "TruthTrajectory",
    "sample_scenario",
    "generate_truth",
]

TRUTH_RATE = 500.0
_GRAV = 9.80665
_RAMP = 3.0  # maneuver ramp-in/out time, s

# Default onboard magnetic field model (NED, nanotesla): a representative
# mid-latitude field used as "constant per scenario".
DEFAULT_B_MODEL = (24000.0, 1500.0, 40000.0)


@dataclass(frozen=True)
class Ramp:
    """Linear transition from ``v0`` to ``v1`` over ``[t0, t1]``."""

    v0: float
    v1: float
    t0: float = 0.0
    t1: float = 0.0

    def value(self, t):
        if self.t1 <= self.t0:
            return np.full_like(np.asarray(t, dtype=float), self.v1)
        return np.interp(t, [self.t0, self.t1], [self.v0, self.v1])

    def rate(self, t):
        t = np.asarray(t, dtype=float)
        if self.t1 <= self.t0:
            return np.zeros_like(t)
        r = (self.v1 - self.v0) / (self.t1 - self.t0)
        return np.where((t >= self.t0) & (t < self.t1), r, 0.0)


@dataclass(frozen=True)
class Turn:
    """One bearing change: starts at ``t_start``, signed ``delta`` radians."""

    t_start: float
    delta: float


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: int
    seed: int
    t_end: float
    t_gnss_loss: float
    lon0: float
    lat0: float
    alt0: float
    bearing0: float
    turns: tuple[Turn, ...]
    tas: Ramp
    climb_t: float
    alt1: float
    path_angle: float
    bank_limit: float
    wind_speed: Ramp
    wind_bearing: Ramp
    dp: Ramp
    dT: Ramp
    turb_angle_sigma: float
    turb_angle_tau: float
    turb_speed_sigma: float
    turb_speed_tau: float
    turb_f_cut: float = 1.0
    b_model: tuple[float, float, float] = DEFAULT_B_MODEL
    bdev_sigma: float = 150.0


@dataclass(frozen=True)
class TruthSample:
    """One truth grid point."""

    t: float
    q: np.ndarray
    T: np.ndarray
    v: np.ndarray
    omega: np.ndarray
    f: np.ndarray
    wind: np.ndarray
    dp: float
    dT: float


@dataclass
class TruthTrajectory:
    """Truth arrays on the 500 Hz grid plus per-run environment constants."""

    cfg: ScenarioConfig
    t: np.ndarray
    q: np.ndarray          # (n, 4) unit quaternions, nav->body attitude
    T: np.ndarray          # (n, 3) lon, lat, alt
    v: np.ndarray          # (n, 3) NED ground velocity
    omega: np.ndarray      # (n, 3) body rate w_NB^B
    f: np.ndarray          # (n, 3) specific force f_IB^B
    wind: np.ndarray       # (n, 3) NED wind
    dp: np.ndarray         # (n,) pressure offset, Pa
    dT: np.ndarray         # (n,) temperature offset, K
    b_real: np.ndarray     # (3,) true magnetic field = model - deviation
    b_dev: np.ndarray      # (3,) true magnetic deviation

    @property
    def n(self):
        return self.t.size

    @property
    def dt(self):
        return 1.0 / TRUTH_RATE

    def sample(self, i):
        return TruthSample(
            t=float(self.t[i]), q=self.q[i], T=self.T[i], v=self.v[i],
            omega=self.omega[i], f=self.f[i], wind=self.wind[i],
            dp=float(self.dp[i]), dT=float(self.dT[i]),
        )

    def index_at(self, t):
        return int(round(t * TRUTH_RATE))

    def gnss_denied_distance(self):
        """Horizontal ground distance flown after the GNSS loss, meters."""
        i0 = self.index_at(self.cfg.t_gnss_loss)
        speed = np.hypot(self.v[i0:, 0], self.v[i0:, 1])
        return float(np.trapezoid(speed, dx=self.dt))

    def to_csv(self, path):
        header = (
            ["t", "qw", "qx", "qy", "qz", "lon", "lat", "alt"]
            + ["vn", "ve", "vd", "wx", "wy", "wz", "fx", "fy", "fz"]
            + ["wind_n", "wind_e", "wind_d", "dp", "dT"]
        )
        data = np.column_stack(
            [self.t, self.q, self.T, self.v, self.omega, self.f,
             self.wind, self.dp, self.dT]
        )
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in data:
                w.writerow(["%.17g" % x for x in row])

    @classmethod
    def from_csv(cls, path, cfg, b_real=None):
        """Rebuild a trajectory from :meth:`to_csv` output.

        The magnetic deviation is not part of the CSV schema; pass ``b_real``
        when sensor replay needs the true field, otherwise the onboard model
        value is assumed (zero deviation).
        """
        data = np.genfromtxt(path, delimiter=",", skip_header=1)
        if b_real is None:
            b_real = np.asarray(cfg.b_model, dtype=float)
        return cls(
            cfg=cfg, t=data[:, 0], q=data[:, 1:5], T=data[:, 5:8],
            v=data[:, 8:11], omega=data[:, 11:14], f=data[:, 14:17],
            wind=data[:, 17:20], dp=data[:, 20], dT=data[:, 21],
            b_real=np.asarray(b_real, dtype=float),
            b_dev=np.asarray(cfg.b_model, dtype=float) - np.asarray(b_real, dtype=float),
        )


# -- stochastic scenario sampling ---------------------------------------------

_DEFAULT_T_END = {1: 600.0, 2: 500.0}
_FULL_T_END = {1: 3800.0, 2: 500.0}

_RANGE_NAMES = frozenset(
    ("lon0", "lat0", "alt0", "tas0", "turb_angle_sigma", "turb_angle_tau",
     "turb_speed_sigma", "turb_speed_tau", "wind_speed0", "wind_delta",
     "dp0", "dp_delta", "dT0", "dT_delta")
)


def sample_scenario(scenario, seed, t_end=None, duration_scale=1.0, full_length=False,
                    ranges=None):
    """Draw one stochastic scenario realization.

    Parameters
    ----------
    scenario : int
        1: long GNSS-denied cruise with one turn, one altitude change and one
        airspeed change.  2: short flight with eight bearing changes and
        constant airspeed, altitude, wind and atmosphere.
    seed : int
        Seed for the scenario draw (independent of sensor noise seeds).
    t_end : float, optional
        Explicit flight duration; overrides the defaults (600 s desk-scale
        for scenario 1, 500 s for scenario 2; 3800 s full-length scenario 1).
    duration_scale : float, optional
        Scales the GNSS-denied span: ``t_end = loss + scale * (default - loss)``.
    full_length : bool, optional
        Use the full-length default duration instead of the desk-scale one.
    ranges : dict, optional
        Overrides for the primitive draw ranges, ``{name: (lo, hi)}``.
        Supported names: ``lon0, lat0, alt0, tas0, turb_angle_sigma,
        turb_angle_tau, turb_speed_sigma, turb_speed_tau, wind_speed0,
        wind_delta, dp0, dp_delta, dT0, dT_delta`` (SI units).  Derived
        quantities (turn sizes, event windows) are not directly overridable.
        The draw order is fixed, so overriding a range changes only that
        value, not the rest of the realization.
    """
    if scenario not in (1, 2):
        raise ValueError("scenario must be 1 or 2")
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 977, scenario)))
    ranges = {} if ranges is None else dict(ranges)
    unknown = set(ranges) - _RANGE_NAMES
    if unknown:
        raise ValueError(f"unknown draw-range names: {sorted(unknown)}")

    def u(name, lo, hi):
        lo, hi = ranges.get(name, (lo, hi))
        return rng.uniform(lo, hi)

    t_loss = 100.0
    if t_end is None:
        base = (_FULL_T_END if full_length else _DEFAULT_T_END)[scenario]
        t_end = t_loss + duration_scale * (base - t_loss)
    if t_end <= t_loss:
        raise ValueError("t_end must exceed the GNSS loss time (100 s)")

    lon0 = u("lon0", -0.3, 0.3)
    lat0 = u("lat0", 0.6, 0.9)
    alt0 = u("alt0", 1100.0, 1900.0)
    bearing0 = rng.uniform(-np.pi, np.pi)
    tas0 = u("tas0", 24.0, 32.0)
    turb = dict(
        turb_angle_sigma=u("turb_angle_sigma", np.deg2rad(0.15), np.deg2rad(0.45)),
        turb_angle_tau=u("turb_angle_tau", 1.5, 3.0),
        turb_speed_sigma=u("turb_speed_sigma", 0.25, 0.6),
        turb_speed_tau=u("turb_speed_tau", 2.0, 4.0),
    )

    window = t_end - t_loss
    w_lo = t_loss + 0.08 * window
    w_hi = t_end - 0.15 * window

    def env_window(max_dur):
        dur = rng.uniform(30.0, max_dur)
        start = rng.uniform(w_lo, max(w_lo + 1.0, w_hi - dur))
        return start, start + dur

    if scenario == 1:
        omega_max = _GRAV * np.tan(np.deg2rad(10.0)) / tas0
        # Budget the three maneuvers against the usable window so short
        # desk-scale runs stay feasible; full-length runs see the full ranges.
        w_cap = (w_hi - w_lo) - 3 * 10.0
        if w_cap < 40.0:
            raise ValueError("scenario 1 window too short for its maneuvers")
        turn_hi = min(np.deg2rad(150.0), (0.30 * w_cap - _RAMP) * omega_max)
        turn_lo = min(np.deg2rad(30.0), 0.5 * turn_hi)
        turn_delta = rng.choice([-1.0, 1.0]) * rng.uniform(turn_lo, turn_hi)
        turn_dur = abs(turn_delta) / omega_max + _RAMP
        dv = rng.uniform(-4.0, 4.0)
        speed_dur = min(40.0, 0.15 * w_cap)
        slow_tas = min(tas0, tas0 + dv)
        sink = slow_tas * np.sin(np.deg2rad(2.0))
        dh_hi = min(120.0, (0.45 * w_cap - _RAMP) * sink)
        dh = rng.choice([-1.0, 1.0]) * rng.uniform(min(40.0, 0.5 * dh_hi), dh_hi)
        climb_dur = abs(dh) / sink + _RAMP
        starts = _disjoint_starts(
            rng, [turn_dur, speed_dur, climb_dur], w_lo, w_hi, gap=10.0
        )
        turns = (Turn(starts[0], turn_delta),)
        tas = Ramp(tas0, tas0 + dv, starts[1], starts[1] + speed_dur)
        climb_t, alt1 = starts[2], alt0 + dh
        ws0 = u("wind_speed0", 0.0, 7.0)
        ws1 = float(np.clip(ws0 + u("wind_delta", -3.0, 3.0), 0.0, 10.0))
        wb0 = rng.uniform(-np.pi, np.pi)
        wb1 = wb0 + rng.uniform(-1.0, 1.0)
        wt = env_window(120.0)
        wind_speed = Ramp(ws0, ws1, *wt)
        wind_bearing = Ramp(wb0, wb1, *wt)
        dp0 = u("dp0", -1200.0, 1200.0)
        dpt = env_window(150.0)
        dp = Ramp(dp0, dp0 + u("dp_delta", -400.0, 400.0), *dpt)
        dT0 = u("dT0", -8.0, 8.0)
        dTt = env_window(150.0)
        dT = Ramp(dT0, dT0 + u("dT_delta", -3.0, 3.0), *dTt)
    else:
        omega_max = _GRAV * np.tan(np.deg2rad(10.0)) / tas0
        n_turns = 8
        lo2 = t_loss + 0.04 * window
        per_turn = ((w_hi - lo2) - n_turns * 8.0) / n_turns
        delta_hi = min(np.deg2rad(45.0), (0.9 * per_turn - _RAMP) * omega_max)
        if delta_hi <= np.deg2rad(5.0):
            raise ValueError("scenario 2 window too short for eight turns")
        delta_lo = min(np.deg2rad(20.0), 0.5 * delta_hi)
        deltas = rng.choice([-1.0, 1.0], n_turns) * rng.uniform(
            delta_lo, delta_hi, n_turns
        )
        durs = np.abs(deltas) / omega_max + _RAMP
        starts = _disjoint_starts(rng, list(durs), lo2, w_hi, gap=8.0)
        turns = tuple(Turn(s, d) for s, d in zip(starts, deltas))
        tas = Ramp(tas0, tas0)
        climb_t, alt1 = 0.0, alt0
        ws = u("wind_speed0", 0.0, 7.0)
        wb = rng.uniform(-np.pi, np.pi)
        wind_speed = Ramp(ws, ws)
        wind_bearing = Ramp(wb, wb)
        dp = Ramp(0.0, u("dp0", -1200.0, 1200.0))
        dT = Ramp(0.0, u("dT0", -8.0, 8.0))

    return ScenarioConfig(
        scenario=scenario, seed=int(seed), t_end=float(t_end), t_gnss_loss=t_loss,
        lon0=lon0, lat0=lat0, alt0=alt0, bearing0=bearing0, turns=turns,
        tas=tas, climb_t=climb_t, alt1=alt1,
        path_angle=np.deg2rad(2.0), bank_limit=np.deg2rad(10.0),
        wind_speed=wind_speed, wind_bearing=wind_bearing, dp=dp, dT=dT, **turb
    )


def _disjoint_starts(rng, durations, lo, hi, gap):
    """Random non-overlapping start times for events of given durations."""
    total = sum(durations) + gap * len(durations)
    slack = (hi - lo) - total
    if slack < 0:
        raise ValueError("maneuvers do not fit in the scenario window")
    offsets = np.sort(rng.uniform(0.0, slack, len(durations)))
    starts = []
    acc = lo
    for off, dur in zip(offsets, durations):
        starts.append(acc + off)
        acc += dur + gap
    return starts


# -- spectral turbulence -------------------------------------------------------


def _spectral_gm(n, dt, sigma, tau, f_cut, rng):
    """Band-limited stationary Gauss-Markov noise and its exact derivative.

    Synthesizes a real series whose power spectrum follows the first-order
    Gauss-Markov (Ornstein-Uhlenbeck) shape ``1 / (1 + (w * tau)^2)`` up to
    ``f_cut`` and is zero above.  Because the series is a finite Fourier sum,
    its derivative is exact, which the truth generator relies on.
    """
    if sigma == 0.0 or n < 8:
        return np.zeros(n), np.zeros(n)
    freqs = np.fft.rfftfreq(n, dt)
    w = 2.0 * np.pi * freqs
    shape = 1.0 / np.sqrt(1.0 + (w * tau) ** 2)
    shape[(freqs <= 0.0) | (freqs > f_cut)] = 0.0
    coeff = (rng.standard_normal(freqs.size) + 1j * rng.standard_normal(freqs.size))
    spec = coeff * shape
    x = np.fft.irfft(spec, n)
    xdot = np.fft.irfft(spec * (1j * w), n)
    std = x.std()
    if std == 0.0:
        return np.zeros(n), np.zeros(n)
    x *= sigma / std
    xdot *= sigma / std
    return x, xdot


# -- maneuver profiles ---------------------------------------------------------


def _quintic(u):
    """C2 smoothstep, its derivative, and its running integral on [0, 1]."""
    s = u**3 * (10.0 - 15.0 * u + 6.0 * u**2)
    ds = 30.0 * u**2 * (1.0 - u) ** 2
    iu = 2.5 * u**4 - 3.0 * u**5 + u**6
    return s, ds, iu


def _smooth_pulse(t, t0, t_ramp, t_hold):
    """Quintic-edged unit pulse: returns (pulse, rate, running integral).

    Ramps 0 -> 1 over ``t_ramp``, holds, ramps back down.  The edges have zero
    slope *and* curvature, so rates derived from the pulse stay twice
    differentiable; the running integral (total area ``t_ramp + t_hold``) is
    exact, not numeric.
    """
    p = np.zeros_like(t)
    dp = np.zeros_like(t)
    ip = np.zeros_like(t)
    t1, t2, t3 = t0 + t_ramp, t0 + t_ramp + t_hold, t0 + 2 * t_ramp + t_hold

    up = (t >= t0) & (t < t1)
    u = (t[up] - t0) / t_ramp
    s, ds, iu = _quintic(u)
    p[up] = s
    dp[up] = ds / t_ramp
    ip[up] = t_ramp * iu

    hold = (t >= t1) & (t < t2)
    p[hold] = 1.0
    ip[hold] = 0.5 * t_ramp + (t[hold] - t1)

    down = (t >= t2) & (t < t3)
    u = (t[down] - t2) / t_ramp
    s, ds, iu = _quintic(u)
    p[down] = 1.0 - s
    dp[down] = -ds / t_ramp
    ip[down] = 0.5 * t_ramp + t_hold + t_ramp * (u - iu)

    after = t >= t3
    ip[after] = t_ramp + t_hold
    return p, dp, ip


def _smoothstep(t, t0, t1):
    """Quintic smoothstep 0 -> 1 over [t0, t1] and its rate."""
    if t1 <= t0:
        return np.ones_like(t), np.zeros_like(t)
    u = np.clip((t - t0) / (t1 - t0), 0.0, 1.0)
    s, ds, _ = _quintic(u)
    return s, ds / (t1 - t0)


def _pulse_times(amount, peak, t_ramp):
    """Hold time and realized peak for a pulse of requested integral."""
    hold = abs(amount) / peak - t_ramp
    if hold < 0.0:
        return 0.0, abs(amount) / t_ramp
    return hold, peak


# -- truth generation ----------------------------------------------------------


@njit(cache=True)
def _integrate_position(T0, v, dt):
    """RK4 integration of the geodetic position for gridded NED velocity."""
    n = v.shape[0]
    out = np.empty((n, 3))
    out[0] = T0
    for k in range(n - 1):
        y = out[k]
        vm = 0.5 * (v[k] + v[k + 1])
        k1 = earth.geodetic_dot(y, v[k])
        k2 = earth.geodetic_dot(y + 0.5 * dt * k1, vm)
        k3 = earth.geodetic_dot(y + 0.5 * dt * k2, vm)
        k4 = earth.geodetic_dot(y + dt * k3, v[k + 1])
        out[k + 1] = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return out


def _batch_euler_to_quat(yaw, pitch, roll):
    cy, sy = np.cos(0.5 * yaw), np.sin(0.5 * yaw)
    cp, sp = np.cos(0.5 * pitch), np.sin(0.5 * pitch)
    cr, sr = np.cos(0.5 * roll), np.sin(0.5 * roll)
    q = np.empty((yaw.size, 4))
    q[:, 0] = cy * cp * cr + sy * sp * sr
    q[:, 1] = cy * cp * sr - sy * sp * cr
    q[:, 2] = cy * sp * cr + sy * cp * sr
    q[:, 3] = sy * cp * cr - cy * sp * sr
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    q[q[:, 0] < 0.0] *= -1.0
    return q


def _batch_quat_to_matrix(q):
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    R = np.empty((q.shape[0], 3, 3))
    R[:, 0, 0] = 1 - 2 * (y * y + z * z)
    R[:, 0, 1] = 2 * (x * y - w * z)
    R[:, 0, 2] = 2 * (x * z + w * y)
    R[:, 1, 0] = 2 * (x * y + w * z)
    R[:, 1, 1] = 1 - 2 * (x * x + z * z)
    R[:, 1, 2] = 2 * (y * z - w * x)
    R[:, 2, 0] = 2 * (x * z - w * y)
    R[:, 2, 1] = 2 * (y * z + w * x)
    R[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def generate_truth(cfg: ScenarioConfig) -> TruthTrajectory:
    """Generate the 500 Hz truth trajectory for one scenario realization."""
    dt = 1.0 / TRUTH_RATE
    n = int(round(cfg.t_end * TRUTH_RATE)) + 1
    t = np.arange(n) * dt
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 1311, cfg.scenario)))

    # Bearing schedule: coordinated turns with cosine-edged rate pulses.
    chi = np.full(n, cfg.bearing0)
    chid = np.zeros(n)
    chidd = np.zeros(n)
    for turn in cfg.turns:
        tas_here = float(cfg.tas.value(np.array([turn.t_start]))[0])
        peak = _GRAV * np.tan(cfg.bank_limit) / tas_here
        hold, peak = _pulse_times(turn.delta, peak, _RAMP)
        p, dp_, ip = _smooth_pulse(t, turn.t_start, _RAMP, hold)
        sgn = np.sign(turn.delta)
        chi += sgn * peak * ip
        chid += sgn * peak * p
        chidd += sgn * peak * dp_

    # Path angle pulse for the altitude change.
    gamma = np.zeros(n)
    gammad = np.zeros(n)
    dh = cfg.alt1 - cfg.alt0
    if abs(dh) > 1e-9:
        tas_here = float(cfg.tas.value(np.array([cfg.climb_t]))[0])
        peak = np.sin(cfg.path_angle) * tas_here
        hold, peak = _pulse_times(dh, peak, _RAMP)
        p, dp_, _ = _smooth_pulse(t, cfg.climb_t, _RAMP, hold)
        g_pk = np.arcsin(peak / tas_here)
        gamma = np.sign(dh) * g_pk * p
        gammad = np.sign(dh) * g_pk * dp_

    # Airspeed: smoothstep command plus band-limited turbulence.
    s, ds = _smoothstep(t, cfg.tas.t0, cfg.tas.t1)
    dv_t, dvd_t = _spectral_gm(
        n, dt, cfg.turb_speed_sigma, cfg.turb_speed_tau, cfg.turb_f_cut, rng
    )
    vtas = cfg.tas.v0 + (cfg.tas.v1 - cfg.tas.v0) * s + dv_t
    vtasd = (cfg.tas.v1 - cfg.tas.v0) * ds + dvd_t

    # Wind with linear transitions (horizontal only).
    ws, wsd = cfg.wind_speed.value(t), cfg.wind_speed.rate(t)
    wb, wbd = cfg.wind_bearing.value(t), cfg.wind_bearing.rate(t)
    cwb, swb = np.cos(wb), np.sin(wb)
    wind = np.column_stack([ws * cwb, ws * swb, np.zeros(n)])
    windd = np.column_stack(
        [wsd * cwb - ws * swb * wbd, wsd * swb + ws * cwb * wbd, np.zeros(n)]
    )

    # Ground velocity and its exact derivative.
    cc, sc = np.cos(chi), np.sin(chi)
    cg, sg = np.cos(gamma), np.sin(gamma)
    u = np.column_stack([cc * cg, sc * cg, -sg])
    du = np.column_stack(
        [
            -sc * cg * chid - cc * sg * gammad,
            cc * cg * chid - sc * sg * gammad,
            -cg * gammad,
        ]
    )
    v = vtas[:, None] * u + wind
    vdot = vtasd[:, None] * u + vtas[:, None] * du + windd

    # Attitude: yaw/pitch/roll about the flight path plus turbulence.
    eps = [
        _spectral_gm(n, dt, cfg.turb_angle_sigma, cfg.turb_angle_tau, cfg.turb_f_cut, rng)
        for _ in range(3)
    ]
    bank = np.arctan(chid * vtas / _GRAV)
    bankd = (chidd * vtas + chid * vtasd) / _GRAV / (1.0 + (chid * vtas / _GRAV) ** 2)
    yaw, yawd = chi + eps[0][0], chid + eps[0][1]
    pitch, pitchd = gamma + eps[1][0], gammad + eps[1][1]
    roll, rolld = bank + eps[2][0], bankd + eps[2][1]
    q = _batch_euler_to_quat(yaw, pitch, roll)
    spch, cpch = np.sin(pitch), np.cos(pitch)
    srl, crl = np.sin(roll), np.cos(roll)
    omega = np.column_stack(
        [
            rolld - yawd * spch,
            pitchd * crl + yawd * cpch * srl,
            -pitchd * srl + yawd * cpch * crl,
        ]
    )

    # Position by RK4, then back-compute the specific force so the velocity
    # dynamics hold exactly at every sample.
    T0 = np.array([cfg.lon0, cfg.lat0, cfg.alt0])
    T = _integrate_position(T0, v, dt)
    lat, alt = T[:, 1], T[:, 2]
    m_r, n_r = _batch_radii(lat)
    w_en = np.column_stack(
        [v[:, 1] / (n_r + alt), -v[:, 0] / (m_r + alt), -v[:, 1] * np.tan(lat) / (n_r + alt)]
    )
    a_cor = 2.0 * earth.EARTH_RATE * np.column_stack(
        [
            v[:, 1] * np.sin(lat),
            -v[:, 0] * np.sin(lat) - v[:, 2] * np.cos(lat),
            v[:, 1] * np.cos(lat),
        ]
    )
    g_vec = np.zeros((n, 3))
    g_vec[:, 2] = _batch_gravity(lat, alt)
    accel_n = vdot + np.cross(w_en, v) - g_vec + a_cor
    R = _batch_quat_to_matrix(q)
    f = np.einsum("nji,nj->ni", R, accel_n)

    b_dev = rng.normal(0.0, cfg.bdev_sigma, 3)
    b_model = np.asarray(cfg.b_model, dtype=float)

    return TruthTrajectory(
        cfg=cfg, t=t, q=q, T=T, v=v, omega=omega, f=f, wind=wind,
        dp=cfg.dp.value(t), dT=cfg.dT.value(t),
        b_real=b_model - b_dev, b_dev=b_dev,
    )


def _batch_radii(lat):
    s2 = np.sin(lat) ** 2
    den = 1.0 - earth.WGS84_E2 * s2
    return earth.WGS84_A * (1.0 - earth.WGS84_E2) / den ** 1.5, earth.WGS84_A / np.sqrt(den)


def _batch_gravity(lat, h):
    s2 = np.sin(lat) ** 2
    g0 = 9.7803253359 * (1.0 + 1.931852652458e-3 * s2) / np.sqrt(1.0 - earth.WGS84_E2 * s2)
    return g0 - (3.0877e-6 - 4.4e-9 * s2) * h + 7.2e-14 * h * h
