"""Quaternion and rotation-matrix algebra.

Quaternions are numpy arrays with scalar-first layout ``(w, x, y, z)``. All
functions broadcast over leading axes. ``q`` and ``-q`` encode the same
rotation; functions that *return* a quaternion canonicalize it so that the
first nonzero component is positive (normally ``w >= 0``).
"""
from __future__ import annotations

import numpy as np

from .errors import BPAError, ZeroVectorError

UNIT_TOL = 1e-12
ROT_TOL = 1e-10

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def canonicalize(q: np.ndarray) -> np.ndarray:
    """Pick the antipodal representative whose first nonzero component is positive."""
    q = np.asarray(q, dtype=float)
    nz = np.abs(q) > 0
    first = np.argmax(nz, axis=-1)
    lead = np.take_along_axis(q, first[..., None], axis=-1)
    return np.where(lead < 0, -q, q)


def normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def check_unit(q: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != 4 or not np.all(np.isfinite(q)):
        raise BPAError(f"expected finite quaternion(s) of shape (..., 4), got {q.shape}")
    if np.any(np.abs(np.sum(q * q, axis=-1) - 1.0) > tol):
        raise BPAError("quaternion is not unit norm")
    return q


def conjugate(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


inverse = conjugate


def _hamilton(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = np.moveaxis(np.asarray(a, dtype=float), -1, 0)
    bw, bx, by, bz = np.moveaxis(np.asarray(b, dtype=float), -1, 0)
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_multiply(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Hamilton product ``q1 ∘ q2`` (apply ``q2`` first), renormalized and canonicalized."""
    return canonicalize(normalize(_hamilton(q1, q2)))


def quat_to_rotation(q: np.ndarray) -> np.ndarray:
    """3x3 rotation matrix of a unit quaternion ``(r1, r2, r3, r4) = (w, x, y, z)``."""
    r1, r2, r3, r4 = np.moveaxis(np.asarray(q, dtype=float), -1, 0)
    rows = [
        [r1**2 + r2**2 - r3**2 - r4**2, 2 * r2 * r3 - 2 * r1 * r4, 2 * r2 * r4 + 2 * r1 * r3],
        [2 * r2 * r3 + 2 * r1 * r4, r1**2 - r2**2 + r3**2 - r4**2, 2 * r3 * r4 - 2 * r1 * r2],
        [2 * r2 * r4 - 2 * r1 * r3, 2 * r3 * r4 + 2 * r1 * r2, r1**2 - r2**2 - r3**2 + r4**2],
    ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def is_rotation(R: np.ndarray, tol: float = ROT_TOL) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape[-2:] != (3, 3) or not np.all(np.isfinite(R)):
        return False
    eye = np.swapaxes(R, -1, -2) @ R
    return bool(np.all(np.abs(eye - np.eye(3)) <= tol) and np.all(np.abs(np.linalg.det(R) - 1) <= tol))


def rotation_to_quat(R: np.ndarray) -> np.ndarray:
    """Inverse of :func:`quat_to_rotation` for a single matrix (Shepperd's method)."""
    R = np.asarray(R, dtype=float)
    if not is_rotation(R):
        raise BPAError("matrix is not a proper rotation (orthonormal, det = +1)")
    tr = np.trace(R)
    # branch on the largest of (w, x, y, z)^2 to avoid cancellation
    diag = np.array([tr, R[0, 0], R[1, 1], R[2, 2]])
    k = int(np.argmax(diag))
    if k == 0:
        s = 2.0 * np.sqrt(1.0 + tr)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif k == 1:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif k == 2:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    return canonicalize(normalize(np.array(q)))


def rotate_vector(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate 3-vector(s) ``v`` by ``q``; broadcasts like ``quat_to_rotation(q) @ v``."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    w = q[..., :1]
    u = q[..., 1:]
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def axis_angle(axis: np.ndarray, angle) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis, axis=-1, keepdims=True)
    half = 0.5 * np.asarray(angle, dtype=float)[..., None]
    return np.concatenate([np.cos(half), np.sin(half) * axis], axis=-1)


def _orthogonal_axis(u: np.ndarray) -> np.ndarray:
    # cross with the basis vector least aligned with u
    e = np.zeros(3)
    e[int(np.argmin(np.abs(u)))] = 1.0
    a = np.cross(u, e)
    return a / np.linalg.norm(a)


def quat_between_axes(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Minimal-angle rotation taking direction ``u`` onto direction ``v``.

    Antiparallel inputs get a 180° turn about a fixed axis orthogonal to ``u``.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ZeroVectorError("cannot rotate to or from a zero vector")
    u = u / nu
    v = v / nv
    c = np.cross(u, v)
    # keep the axis exactly orthogonal to u; the half-vector u + v cancels near antiparallel
    c = c - (c @ u) * u
    sn, cs = np.linalg.norm(c), u @ v
    if sn == 0.0:
        if cs > 0:
            return np.array([1.0, 0.0, 0.0, 0.0])
        return canonicalize(np.concatenate([[0.0], _orthogonal_axis(u)]))
    half = 0.5 * np.arctan2(sn, cs)
    return canonicalize(np.concatenate([[np.cos(half)], np.sin(half) * c / sn]))


def angular_distance(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Rotation angle between ``q1`` and ``q2`` in ``[0, pi]``; sign-invariant."""
    a = np.asarray(q1, dtype=float)
    b = np.asarray(q2, dtype=float)
    sign = np.where(np.sum(a * b, axis=-1, keepdims=True) < 0, -1.0, 1.0)
    b = sign * b
    # atan2 form keeps full precision near zero, unlike arccos(|a·b|)
    return 4.0 * np.arctan2(np.linalg.norm(a - b, axis=-1), np.linalg.norm(a + b, axis=-1))


def random_quaternions(rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Uniform draws on SO(3) (normalized 4-D Gaussians)."""
    shape = (4,) if n is None else (n, 4)
    return canonicalize(normalize(rng.standard_normal(shape)))


def cross4(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Unit-norm 4-vector orthogonal to three orthonormal 4-vectors (signed cofactor expansion)."""
    M = np.stack([a, b, c])
    out = np.empty(4)
    for i in range(4):
        minor = np.delete(M, i, axis=1)
        out[i] = (-1) ** i * np.linalg.det(minor)
    return out
