"""Shared builders for hand-crafted test configurations."""

from __future__ import annotations

import numpy as np

from vinsim import so3
from vinsim.scenario import Ramp, ScenarioConfig

from oracles import fd_jacobian, random_unit_quat


def make_config(**over):
    """A quiet, fully deterministic scenario config (no wind, no turbulence,
    no maneuvers) that individual tests override field by field."""
    base = dict(
        scenario=1,
        seed=0,
        t_end=150.0,
        t_gnss_loss=100.0,
        lon0=0.05,
        lat0=0.7,
        alt0=1500.0,
        bearing0=0.3,
        turns=(),
        tas=Ramp(28.0, 28.0),
        climb_t=0.0,
        alt1=1500.0,
        path_angle=np.deg2rad(2.0),
        bank_limit=np.deg2rad(10.0),
        wind_speed=Ramp(0.0, 0.0),
        wind_bearing=Ramp(0.0, 0.0),
        dp=Ramp(0.0, 0.0),
        dT=Ramp(0.0, 0.0),
        turb_angle_sigma=0.0,
        turb_angle_tau=2.0,
        turb_speed_sigma=0.0,
        turb_speed_tau=3.0,
    )
    base.update(over)
    return ScenarioConfig(**base)


# Finite-difference step scale per state slot (rad, rad/s, geodetic, m/s,
# m/s^2, then the four sensor-error blocks).  Chosen so central differences
# keep both truncation and roundoff far below the 1e-5 comparison threshold.
FD_SCALE = np.repeat(
    np.array([0.1, 0.1, 1.0, 100.0, 100.0, 1.0, 1.0, 1.0, 1.0]), 3
)

# Columns of the system/output matrices that the linearization deliberately
# leaves at zero: the geodetic position block.
NEGLECTED_COLS = [6, 7, 8]


def random_nav_state(rng):
    """A random but physically-scaled filter state with zero displacement
    (the filter linearizes immediately after a reset)."""
    q = random_unit_quat(rng)
    x = np.zeros(27)
    x[3:6] = rng.normal(0.0, 0.2, 3)
    x[6] = rng.uniform(-np.pi, np.pi)
    x[7] = rng.uniform(-1.2, 1.2)
    x[8] = rng.uniform(0.0, 5000.0)
    x[9:12] = rng.normal(0.0, 40.0, 3)
    x[12:15] = rng.normal(0.0, 5.0, 3)
    x[15:18] = rng.normal(0.0, 1e-4, 3)
    x[18:21] = rng.normal(0.0, 0.05, 3)
    x[21:24] = rng.normal(0.0, 100.0, 3)
    x[24:27] = rng.normal(0.0, 300.0, 3)
    return q, x


def fd_state_jacobian(func, x, eps=1e-3):
    """Central-difference Jacobian of ``func`` over the 27-slot state, with
    per-slot step sizes ``FD_SCALE * eps``."""
    x = np.asarray(x, dtype=float)

    def scaled(u):
        return func(x + FD_SCALE * u)

    jac = fd_jacobian(scaled, np.zeros(27), eps=eps)
    return jac / FD_SCALE[None, :]


def assert_jacobian_close(J_impl, J_fd, skip_cols=(), rtol=1e-5):
    """Column-scaled comparison of an analytic Jacobian against a
    finite-difference one; ``skip_cols`` are excluded (documented neglect)."""
    J_impl = np.asarray(J_impl, dtype=float)
    J_fd = np.asarray(J_fd, dtype=float)
    assert J_impl.shape == J_fd.shape
    for j in range(J_impl.shape[1]):
        if j in skip_cols:
            continue
        scale = max(np.max(np.abs(J_fd[:, j])), 1e-12)
        err = np.max(np.abs(J_impl[:, j] - J_fd[:, j])) / scale
        assert err < rtol, f"column {j}: relative error {err:.3e}"


def attitude_error_deg(q_est, q_true):
    """Rotation-vector norm of the attitude error, degrees."""
    return float(np.degrees(np.linalg.norm(so3.minus(q_est, q_true))))
