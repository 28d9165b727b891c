"""Earth models: WGS84 geodesy, gravity, magnetic field, and ISA atmosphere.

Positions are geodetic ``T = [lon, lat, h]`` (radians, radians, meters above
the ellipsoid) and velocities are NED ``v = [vN, vE, vD]`` in m/s.  The
kinematic relations and their sparse Jacobians follow the standard curved
rotating-ellipsoid navigation equations.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

__all__ = [
    "WGS84_A",
    "WGS84_F",
    "WGS84_E2",
    "EARTH_RATE",
    "radii",
    "geodetic_dot",
    "jac_geodetic_dot_wrt_v",
    "transport_rate",
    "jac_transport_rate_wrt_v",
    "earth_rate",
    "coriolis_accel",
    "jac_coriolis_wrt_v",
    "gravity_ned",
    "dipole_field_ned",
    "isa_pressure",
    "isa_altitude",
]

WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)
EARTH_RATE = 7.292115e-5

# Somigliana normal gravity on the ellipsoid plus a free-air altitude term.
_GRAV_GE = 9.7803253359
_GRAV_K = 1.931852652458e-3

# ISA troposphere.
_ISA_P0 = 101325.0
_ISA_T0 = 288.15
_ISA_L = 0.0065
_ISA_R = 287.05287
_ISA_G = 9.80665
_ISA_EXP = _ISA_G / (_ISA_R * _ISA_L)


@njit(cache=True)
def radii(lat):
    """Meridian and transverse curvature radii ``(M, N)`` at latitude ``lat``."""
    s2 = math.sin(lat) ** 2
    den = 1.0 - WGS84_E2 * s2
    m = WGS84_A * (1.0 - WGS84_E2) / den ** 1.5
    n = WGS84_A / math.sqrt(den)
    return m, n


@njit(cache=True)
def geodetic_dot(T, v):
    """Time derivative of the geodetic position for NED velocity ``v``."""
    m, n = radii(T[1])
    out = np.empty(3)
    out[0] = v[1] / ((n + T[2]) * math.cos(T[1]))
    out[1] = v[0] / (m + T[2])
    out[2] = -v[2]
    return out


@njit(cache=True)
def jac_geodetic_dot_wrt_v(T):
    """Jacobian of :func:`geodetic_dot` with respect to ``v`` (3x3, sparse)."""
    m, n = radii(T[1])
    out = np.zeros((3, 3))
    out[0, 1] = 1.0 / ((n + T[2]) * math.cos(T[1]))
    out[1, 0] = 1.0 / (m + T[2])
    out[2, 2] = -1.0
    return out


@njit(cache=True)
def transport_rate(T, v):
    """Angular rate of the NED frame w.r.t. the earth frame, NED axes."""
    m, n = radii(T[1])
    out = np.empty(3)
    out[0] = v[1] / (n + T[2])
    out[1] = -v[0] / (m + T[2])
    out[2] = -v[1] * math.tan(T[1]) / (n + T[2])
    return out


@njit(cache=True)
def jac_transport_rate_wrt_v(T):
    """Jacobian of :func:`transport_rate` with respect to ``v``."""
    m, n = radii(T[1])
    out = np.zeros((3, 3))
    out[0, 1] = 1.0 / (n + T[2])
    out[1, 0] = -1.0 / (m + T[2])
    out[2, 1] = -math.tan(T[1]) / (n + T[2])
    return out


@njit(cache=True)
def earth_rate(lat):
    """Earth rotation rate in NED axes at latitude ``lat``."""
    out = np.empty(3)
    out[0] = EARTH_RATE * math.cos(lat)
    out[1] = 0.0
    out[2] = -EARTH_RATE * math.sin(lat)
    return out


@njit(cache=True)
def coriolis_accel(lat, v):
    """Coriolis acceleration ``2 w_ie x v`` in NED axes."""
    w = 2.0 * EARTH_RATE
    s, c = math.sin(lat), math.cos(lat)
    out = np.empty(3)
    out[0] = w * v[1] * s
    out[1] = -w * (v[0] * s + v[2] * c)
    out[2] = w * v[1] * c
    return out


@njit(cache=True)
def jac_coriolis_wrt_v(lat):
    """Jacobian of :func:`coriolis_accel` with respect to ``v``."""
    w = 2.0 * EARTH_RATE
    s, c = math.sin(lat), math.cos(lat)
    out = np.zeros((3, 3))
    out[0, 1] = w * s
    out[1, 0] = -w * s
    out[1, 2] = -w * c
    out[2, 1] = w * c
    return out


@njit(cache=True)
def gravity_ned(lat, h):
    """Plumb gravity vector in NED axes (Somigliana + free-air correction)."""
    s2 = math.sin(lat) ** 2
    g0 = _GRAV_GE * (1.0 + _GRAV_K * s2) / math.sqrt(1.0 - WGS84_E2 * s2)
    g = g0 - (3.0877e-6 - 4.4e-9 * s2) * h + 7.2e-14 * h * h
    out = np.zeros(3)
    out[2] = g
    return out


@njit(cache=True)
def dipole_field_ned(lon, lat, h, moment_nt, pole_lon, pole_lat):
    """Centered tilted-dipole magnetic field in NED axes, nanotesla.

    ``moment_nt`` is the equatorial surface field strength.  The horizontal
    component points toward the north magnetic pole, so the declination is
    implied by the pole position.
    """
    sp, cp = math.sin(pole_lat), math.cos(pole_lat)
    sl, cl = math.sin(lat), math.cos(lat)
    cdl = math.cos(lon - pole_lon)
    sdl = math.sin(lon - pole_lon)
    # Geomagnetic latitude and the bearing of the magnetic pole.
    smlat = sl * sp + cl * cp * cdl
    smlat = min(1.0, max(-1.0, smlat))
    cmlat = math.sqrt(1.0 - smlat * smlat)
    scale = (WGS84_A / (WGS84_A + h)) ** 3
    b_hor = moment_nt * cmlat * scale
    b_down = 2.0 * moment_nt * smlat * scale
    # Declination = bearing from geographic north to the magnetic pole.
    if cmlat < 1e-9:
        decl = 0.0
    else:
        decl = math.atan2(-cp * sdl, sp * cl - sl * cp * cdl)
    out = np.empty(3)
    out[0] = b_hor * math.cos(decl)
    out[1] = b_hor * math.sin(decl)
    out[2] = b_down
    return out


def isa_pressure(h):
    """ISA troposphere static pressure at geometric altitude ``h`` (Pa).

    Accepts scalars or arrays.
    """
    return _ISA_P0 * (1.0 - _ISA_L * np.asarray(h, dtype=float) / _ISA_T0) ** _ISA_EXP


def isa_altitude(p):
    """Inverse of :func:`isa_pressure`: altitude for static pressure ``p``."""
    return _ISA_T0 / _ISA_L * (1.0 - (np.asarray(p, dtype=float) / _ISA_P0) ** (1.0 / _ISA_EXP))
