"""Unit quaternion utilities, scalar-first (w, x, y, z) convention.

Quaternions represent body-to-world rotations. All functions broadcast over
leading dimensions, so arrays of shape (..., 4) work throughout. The hot
functions keep a scalar fast path for plain 1-D inputs that evaluates the
same expressions as the broadcast path.
"""

import math

import numpy as np


def identity():
    return np.array([1.0, 0.0, 0.0, 0.0])


def normalize(q):
    q = np.asarray(q, dtype=float)
    if q.ndim == 1:
        return q / math.sqrt(q @ q)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def conjugate(q):
    q = np.asarray(q, dtype=float)
    if q.ndim == 1:
        return np.array([q[0], -q[1], -q[2], -q[3]])
    out = q.copy()
    out[..., 1:] *= -1.0
    return out


def multiply(q1, q2):
    """Hamilton product q1 ⊗ q2."""
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    if q1.ndim == 1 and q2.ndim == 1:
        w1, x1, y1, z1 = q1
        w2, x2, y2, z2 = q2
        return np.array(
            [
                w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
                w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
                w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
                w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
            ]
        )
    w1, x1, y1, z1 = q1[..., 0], q1[..., 1], q1[..., 2], q1[..., 3]
    w2, x2, y2, z2 = q2[..., 0], q2[..., 1], q2[..., 2], q2[..., 3]
    out = np.empty(np.broadcast(q1, q2).shape)
    out[..., 0] = w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2
    out[..., 1] = w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2
    out[..., 2] = w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2
    out[..., 3] = w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2
    return out


def cross(a, b):
    # np.cross carries axis-juggling overhead that dominates small inputs
    if a.ndim == 1 and b.ndim == 1:
        a0, a1, a2 = a
        b0, b1, b2 = b
        return np.array([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0])
    out = np.empty(np.broadcast(a, b).shape)
    out[..., 0] = a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1]
    out[..., 1] = a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2]
    out[..., 2] = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    return out


def rotate(q, v):
    """Rotate vector(s) v by quaternion(s) q (body frame -> world frame)."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    if q.ndim == 1 and v.ndim == 1:
        qw, qx, qy, qz = q
        vx, vy, vz = v
        tx = 2.0 * (qy * vz - qz * vy)
        ty = 2.0 * (qz * vx - qx * vz)
        tz = 2.0 * (qx * vy - qy * vx)
        return np.array(
            [
                vx + qw * tx + (qy * tz - qz * ty),
                vy + qw * ty + (qz * tx - qx * tz),
                vz + qw * tz + (qx * ty - qy * tx),
            ]
        )
    qw = q[..., :1]
    qv = q[..., 1:]
    t = 2.0 * cross(qv, v)
    return v + qw * t + cross(qv, t)


def rotate_inverse(q, v):
    """Rotate vector(s) v by the inverse of q (world frame -> body frame)."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    if q.ndim == 1 and v.ndim == 1:
        qw, qx, qy, qz = q[0], -q[1], -q[2], -q[3]
        vx, vy, vz = v
        tx = 2.0 * (qy * vz - qz * vy)
        ty = 2.0 * (qz * vx - qx * vz)
        tz = 2.0 * (qx * vy - qy * vx)
        return np.array(
            [
                vx + qw * tx + (qy * tz - qz * ty),
                vy + qw * ty + (qz * tx - qx * tz),
                vz + qw * tz + (qx * ty - qy * tx),
            ]
        )
    return rotate(conjugate(q), v)


def to_matrix(q):
    """Rotation matrix R with R @ v_body = v_world."""
    q = np.asarray(q, dtype=float)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    row0 = np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], axis=-1)
    row1 = np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], axis=-1)
    row2 = np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], axis=-1)
    return np.stack([row0, row1, row2], axis=-2)


def from_matrix(rot):
    """Rotation matrix -> unit quaternion (single matrix, Shepperd's method)."""
    rot = np.asarray(rot, dtype=float)
    m00, m11, m22 = rot[0, 0], rot[1, 1], rot[2, 2]
    trace = m00 + m11 + m22
    if trace > max(m00, m11, m22):
        w = 0.5 * np.sqrt(1.0 + trace)
        s = 0.25 / w
        q = np.array([w,
                      s * (rot[2, 1] - rot[1, 2]),
                      s * (rot[0, 2] - rot[2, 0]),
                      s * (rot[1, 0] - rot[0, 1])])
    elif m00 >= m11 and m00 >= m22:
        x = 0.5 * np.sqrt(1.0 + m00 - m11 - m22)
        s = 0.25 / x
        q = np.array([s * (rot[2, 1] - rot[1, 2]),
                      x,
                      s * (rot[0, 1] + rot[1, 0]),
                      s * (rot[0, 2] + rot[2, 0])])
    elif m11 >= m22:
        y = 0.5 * np.sqrt(1.0 + m11 - m00 - m22)
        s = 0.25 / y
        q = np.array([s * (rot[0, 2] - rot[2, 0]),
                      s * (rot[0, 1] + rot[1, 0]),
                      y,
                      s * (rot[1, 2] + rot[2, 1])])
    else:
        z = 0.5 * np.sqrt(1.0 + m22 - m00 - m11)
        s = 0.25 / z
        q = np.array([s * (rot[1, 0] - rot[0, 1]),
                      s * (rot[0, 2] + rot[2, 0]),
                      s * (rot[1, 2] + rot[2, 1]),
                      z])
    if q[0] < 0.0:
        q = -q
    return q / np.linalg.norm(q)


def from_rotvec(v):
    """Exponential map: rotation vector (angle * axis) -> unit quaternion."""
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        angle = math.sqrt(v @ v)
        half = 0.5 * angle
        if angle < 1e-8:
            scale = 0.5 - angle**2 / 48.0
        else:
            scale = math.sin(half) / angle
        return np.array([math.cos(half), scale * v[0], scale * v[1], scale * v[2]])
    angle = np.linalg.norm(v, axis=-1, keepdims=True)
    half = 0.5 * angle
    # sinc form is well conditioned near zero angle
    small = angle < 1e-8
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(small, 0.5 - angle**2 / 48.0, np.sin(half) / np.where(small, 1.0, angle))
    return np.concatenate([np.cos(half), scale * v], axis=-1)


def to_rotvec(q):
    """Log map: unit quaternion -> rotation vector, angle in [0, pi]."""
    q = np.asarray(q, dtype=float)
    if q.ndim == 1:
        # force positive scalar part so the returned angle is the short way around
        qw, qx, qy, qz = (-q if q[0] < 0.0 else q)
        sin_half = math.sqrt(qx * qx + qy * qy + qz * qz)
        angle = 2.0 * math.atan2(sin_half, qw)
        if sin_half < 1e-8:
            scale = 2.0 + angle**2 / 12.0
        else:
            scale = angle / sin_half
        return np.array([scale * qx, scale * qy, scale * qz])
    # force positive scalar part so the returned angle is the short way around
    q = np.where(q[..., :1] < 0.0, -q, q)
    qv = q[..., 1:]
    sin_half = np.linalg.norm(qv, axis=-1, keepdims=True)
    angle = 2.0 * np.arctan2(sin_half, q[..., :1])
    small = sin_half < 1e-8
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(small, 2.0 + angle**2 / 12.0, angle / np.where(small, 1.0, sin_half))
    return scale * qv


def derivative(q, omega):
    """Kinematics q_dot = 1/2 q ⊗ (0, omega) for body-frame rates omega."""
    q = np.asarray(q, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if q.ndim == 1 and omega.ndim == 1:
        w, x, y, z = q
        ox, oy, oz = omega
        return 0.5 * np.array(
            [
                -x * ox - y * oy - z * oz,
                w * ox + y * oz - z * oy,
                w * oy - x * oz + z * ox,
                w * oz + x * oy - y * ox,
            ]
        )
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    ox, oy, oz = omega[..., 0], omega[..., 1], omega[..., 2]
    out = np.empty(np.broadcast_shapes(q.shape, omega.shape[:-1] + (4,)))
    out[..., 0] = -x * ox - y * oy - z * oz
    out[..., 1] = w * ox + y * oz - z * oy
    out[..., 2] = w * oy - x * oz + z * ox
    out[..., 3] = w * oz + x * oy - y * ox
    return 0.5 * out


def from_yaw(yaw):
    """Rotation about world z by the given yaw angle."""
    return np.array([np.cos(0.5 * yaw), 0.0, 0.0, np.sin(0.5 * yaw)])


def hat(v):
    """Skew-symmetric matrix so that hat(u) @ w == u x w."""
    v = np.asarray(v, dtype=float)
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def vee(m):
    """Inverse of hat: extract the vector from a skew-symmetric matrix."""
    return np.array([m[2, 1], m[0, 2], m[1, 0]])
