"""Rotation algebra on SO(3) with unit-quaternion states.

Quaternions are ``numpy`` arrays ``[w, x, y, z]`` with the scalar part first,
normalized and sign-canonicalized (``w >= 0``) by every constructing
operation.  Rotation vectors are tangent-space coordinates with norm <= pi
after canonicalization.  ``plus``/``minus`` use the local (right) convention:
``plus(q, r) = q * exp(r)`` and ``minus(q2, q1) = log(q1^-1 * q2)``.

All closed-form tangent Jacobians used by the filter live here so they can be
unit-tested against finite differences of the operations themselves.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

__all__ = [
    "skew",
    "quat_identity",
    "quat_normalize",
    "quat_conjugate",
    "quat_product",
    "quat_to_matrix",
    "matrix_to_quat",
    "exp_rotvec",
    "log_quat",
    "canonicalize_rotvec",
    "rotvec_to_matrix",
    "rotate",
    "rotate_inv",
    "inv_adjoint",
    "plus",
    "minus",
    "euler_to_quat",
    "quat_to_euler",
    "jac_plus_wrt_R",
    "jac_rotate_wrt_R",
    "jac_rotate_wrt_v",
    "jac_rotate_inv_wrt_R",
    "jac_rotate_inv_wrt_v",
    "jac_inv_adjoint_wrt_R",
    "jac_inv_adjoint_wrt_w",
]

_SMALL_ANGLE = 1e-8


@njit(cache=True)
def skew(v):
    """Cross-product matrix such that ``skew(a) @ b == cross(a, b)``."""
    out = np.zeros((3, 3))
    out[0, 1] = -v[2]
    out[0, 2] = v[1]
    out[1, 0] = v[2]
    out[1, 2] = -v[0]
    out[2, 0] = -v[1]
    out[2, 1] = v[0]
    return out


@njit(cache=True)
def quat_identity():
    q = np.zeros(4)
    q[0] = 1.0
    return q


@njit(cache=True)
def quat_normalize(q):
    """Unit-norm, sign-canonical copy of ``q`` (scalar part >= 0)."""
    out = q / np.sqrt(q[0] ** 2 + q[1] ** 2 + q[2] ** 2 + q[3] ** 2)
    neg = out[0] < 0.0
    if out[0] == 0.0:
        if out[1] < 0.0:
            neg = True
        elif out[1] == 0.0:
            if out[2] < 0.0:
                neg = True
            elif out[2] == 0.0 and out[3] < 0.0:
                neg = True
    if neg:
        out = -out
    return out


@njit(cache=True)
def quat_conjugate(q):
    out = np.empty(4)
    out[0] = q[0]
    out[1] = -q[1]
    out[2] = -q[2]
    out[3] = -q[3]
    return out


@njit(cache=True)
def quat_product(q, p):
    """Hamilton product ``q * p`` (no normalization)."""
    out = np.empty(4)
    out[0] = q[0] * p[0] - q[1] * p[1] - q[2] * p[2] - q[3] * p[3]
    out[1] = q[0] * p[1] + q[1] * p[0] + q[2] * p[3] - q[3] * p[2]
    out[2] = q[0] * p[2] - q[1] * p[3] + q[2] * p[0] + q[3] * p[1]
    out[3] = q[0] * p[3] + q[1] * p[2] - q[2] * p[1] + q[3] * p[0]
    return out


@njit(cache=True)
def quat_to_matrix(q):
    """Direction cosine matrix R such that ``R @ v`` rotates v by q."""
    w, x, y, z = q[0], q[1], q[2], q[3]
    out = np.empty((3, 3))
    out[0, 0] = 1.0 - 2.0 * (y * y + z * z)
    out[0, 1] = 2.0 * (x * y - w * z)
    out[0, 2] = 2.0 * (x * z + w * y)
    out[1, 0] = 2.0 * (x * y + w * z)
    out[1, 1] = 1.0 - 2.0 * (x * x + z * z)
    out[1, 2] = 2.0 * (y * z - w * x)
    out[2, 0] = 2.0 * (x * z - w * y)
    out[2, 1] = 2.0 * (y * z + w * x)
    out[2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return out


@njit(cache=True)
def matrix_to_quat(R):
    """Quaternion from a rotation matrix (Shepperd's method)."""
    q = np.empty(4)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > R[0, 0] and tr > R[1, 1] and tr > R[2, 2]:
        s = math.sqrt(1.0 + tr) * 2.0
        q[0] = 0.25 * s
        q[1] = (R[2, 1] - R[1, 2]) / s
        q[2] = (R[0, 2] - R[2, 0]) / s
        q[3] = (R[1, 0] - R[0, 1]) / s
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q[0] = (R[2, 1] - R[1, 2]) / s
        q[1] = 0.25 * s
        q[2] = (R[0, 1] + R[1, 0]) / s
        q[3] = (R[0, 2] + R[2, 0]) / s
    elif R[1, 1] > R[2, 2]:
        s = math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        q[0] = (R[0, 2] - R[2, 0]) / s
        q[1] = (R[0, 1] + R[1, 0]) / s
        q[2] = 0.25 * s
        q[3] = (R[1, 2] + R[2, 1]) / s
    else:
        s = math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        q[0] = (R[1, 0] - R[0, 1]) / s
        q[1] = (R[0, 2] + R[2, 0]) / s
        q[2] = (R[1, 2] + R[2, 1]) / s
        q[3] = 0.25 * s
    return quat_normalize(q)


@njit(cache=True)
def exp_rotvec(r):
    """Exponential map: rotation vector -> unit quaternion.

    Parameters
    ----------
    r : ndarray, shape (3,)
        Rotation vector (axis * angle, radians).

    Returns
    -------
    ndarray, shape (4,)
        Canonical unit quaternion.
    """
    angle2 = r[0] ** 2 + r[1] ** 2 + r[2] ** 2
    angle = math.sqrt(angle2)
    if angle < _SMALL_ANGLE:
        w = 1.0 - angle2 / 8.0
        s = 0.5 - angle2 / 48.0
    else:
        w = math.cos(0.5 * angle)
        s = math.sin(0.5 * angle) / angle
    q = np.empty(4)
    q[0] = w
    q[1] = s * r[0]
    q[2] = s * r[1]
    q[3] = s * r[2]
    return quat_normalize(q)


@njit(cache=True)
def log_quat(q):
    """Logarithmic map: unit quaternion -> rotation vector with norm <= pi."""
    w, x, y, z = q[0], q[1], q[2], q[3]
    if w < 0.0:
        w, x, y, z = -w, -x, -y, -z
    s = math.sqrt(x * x + y * y + z * z)
    out = np.empty(3)
    if s < _SMALL_ANGLE:
        k = 2.0 / w * (1.0 - s * s / (3.0 * w * w))
    else:
        k = 2.0 * math.atan2(s, w) / s
    out[0] = k * x
    out[1] = k * y
    out[2] = k * z
    return out


@njit(cache=True)
def canonicalize_rotvec(r):
    """Wrap a rotation vector to the ball of radius pi (same rotation)."""
    angle = math.sqrt(r[0] ** 2 + r[1] ** 2 + r[2] ** 2)
    if angle <= math.pi:
        return r.copy()
    wrapped = angle % (2.0 * math.pi)
    if wrapped > math.pi:
        wrapped -= 2.0 * math.pi
    return r * (wrapped / angle)


@njit(cache=True)
def rotvec_to_matrix(r):
    """Rodrigues formula: ``R = I + sin(a)/a K + (1-cos(a))/a^2 K^2``."""
    angle2 = r[0] ** 2 + r[1] ** 2 + r[2] ** 2
    angle = math.sqrt(angle2)
    if angle < _SMALL_ANGLE:
        a = 1.0 - angle2 / 6.0
        b = 0.5 - angle2 / 24.0
    else:
        a = math.sin(angle) / angle
        b = (1.0 - math.cos(angle)) / angle2
    K = skew(r)
    return np.eye(3) + a * K + b * (K @ K)


@njit(cache=True)
def rotate(q, v):
    """Apply the rotation: ``R(q) @ v`` without building the matrix."""
    tx = 2.0 * (q[2] * v[2] - q[3] * v[1])
    ty = 2.0 * (q[3] * v[0] - q[1] * v[2])
    tz = 2.0 * (q[1] * v[1] - q[2] * v[0])
    out = np.empty(3)
    out[0] = v[0] + q[0] * tx + q[2] * tz - q[3] * ty
    out[1] = v[1] + q[0] * ty + q[3] * tx - q[1] * tz
    out[2] = v[2] + q[0] * tz + q[1] * ty - q[2] * tx
    return out


@njit(cache=True)
def rotate_inv(q, v):
    """Apply the inverse rotation: ``R(q).T @ v``."""
    return rotate(quat_conjugate(q), v)


@njit(cache=True)
def inv_adjoint(q, w):
    """Inverse adjoint action on a tangent vector; for SO(3) this is R.T @ w."""
    return rotate_inv(q, w)


@njit(cache=True)
def plus(q, r):
    """Local composition ``q * exp(r)``."""
    return quat_normalize(quat_product(q, exp_rotvec(r)))


@njit(cache=True)
def minus(q2, q1):
    """Local difference ``log(q1^-1 * q2)``, the tangent vector at q1."""
    return log_quat(quat_normalize(quat_product(quat_conjugate(q1), q2)))


@njit(cache=True)
def euler_to_quat(yaw, pitch, roll):
    """Quaternion from ZYX (yaw-pitch-roll) Euler angles in radians."""
    cy, sy = math.cos(0.5 * yaw), math.sin(0.5 * yaw)
    cp, sp = math.cos(0.5 * pitch), math.sin(0.5 * pitch)
    cr, sr = math.cos(0.5 * roll), math.sin(0.5 * roll)
    q = np.empty(4)
    q[0] = cy * cp * cr + sy * sp * sr
    q[1] = cy * cp * sr - sy * sp * cr
    q[2] = cy * sp * cr + sy * cp * sr
    q[3] = sy * cp * cr - cy * sp * sr
    return quat_normalize(q)


@njit(cache=True)
def quat_to_euler(q):
    """ZYX Euler angles (yaw, pitch, roll) from a quaternion."""
    w, x, y, z = q[0], q[1], q[2], q[3]
    yaw = math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))
    sp = 2.0 * (w * y - x * z)
    if sp > 1.0:
        sp = 1.0
    elif sp < -1.0:
        sp = -1.0
    pitch = math.asin(sp)
    roll = math.atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))
    return yaw, pitch, roll


# -- tangent-space Jacobians -------------------------------------------------
#
# All Jacobians are with respect to a local (right) perturbation of the
# rotation argument, d/d(dr) f(q * exp(dr)) at dr = 0, or with respect to the
# Euclidean vector argument.


@njit(cache=True)
def jac_plus_wrt_R(dr):
    """Jacobian of ``plus(q, dr)`` w.r.t. a local perturbation of ``q``.

    Equals ``R(-dr)``: the fixed tangent increment is transported by the
    inverse rotation it represents.
    """
    return rotvec_to_matrix(-dr)


@njit(cache=True)
def jac_rotate_wrt_R(q, v):
    """Jacobian of ``rotate(q, v)`` w.r.t. a local perturbation of ``q``."""
    return -quat_to_matrix(q) @ skew(v)


@njit(cache=True)
def jac_rotate_wrt_v(q):
    """Jacobian of ``rotate(q, v)`` w.r.t. ``v``."""
    return quat_to_matrix(q)


@njit(cache=True)
def jac_rotate_inv_wrt_R(q, v):
    """Jacobian of ``rotate_inv(q, v)`` w.r.t. a local perturbation of ``q``."""
    return skew(rotate_inv(q, v))


@njit(cache=True)
def jac_rotate_inv_wrt_v(q):
    """Jacobian of ``rotate_inv(q, v)`` w.r.t. ``v``."""
    return quat_to_matrix(q).T


@njit(cache=True)
def jac_inv_adjoint_wrt_R(q, w):
    """Jacobian of ``inv_adjoint(q, w)`` w.r.t. a local perturbation of ``q``."""
    return skew(rotate_inv(q, w))


@njit(cache=True)
def jac_inv_adjoint_wrt_w(q):
    """Jacobian of ``inv_adjoint(q, w)`` w.r.t. ``w``."""
    return quat_to_matrix(q).T
