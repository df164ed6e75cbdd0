"""Orientation estimates and Bingham noise models for oriented surface features.

A feature frame is the rotation ``R = [n, p, n x p]`` built from the surface
normal and the principal-curvature direction. Reversing ``p`` is the
180-degree turn about the local normal, which on quaternions is
``(q1, q2, q3, q4) -> (-q2, q1, q4, -q3)``, i.e. right multiplication by
``(0, 1, 0, 0)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bingham import BinghamDist
from .errors import BPAError, InvalidFrameError
from .quat import _hamilton, canonicalize, rotation_to_quat

DEFAULT_KAPPA = -100.0
FLATNESS_GAIN = 10.0
FRAME_TOL = 1e-10

_I = np.array([0.0, 1.0, 0.0, 0.0])
_J = np.array([0.0, 0.0, 1.0, 0.0])
_K = np.array([0.0, 0.0, 0.0, 1.0])


@dataclass(frozen=True)
class SurfaceFrame:
    normal: np.ndarray
    principal_dir: np.ndarray
    c1: float
    c2: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        p = np.asarray(self.principal_dir, dtype=float)
        if n.shape != (3,) or p.shape != (3,):
            raise InvalidFrameError("normal and principal direction must be 3-vectors")
        if abs(n @ n - 1) > FRAME_TOL or abs(p @ p - 1) > FRAME_TOL or abs(n @ p) > FRAME_TOL:
            raise InvalidFrameError("normal and principal direction must be orthonormal")
        if not (self.c1 >= self.c2 >= 0):
            raise InvalidFrameError(f"need c1 >= c2 >= 0, got c1={self.c1}, c2={self.c2}")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "principal_dir", p)

    @property
    def matrix(self) -> np.ndarray:
        return np.column_stack([self.normal, self.principal_dir, np.cross(self.normal, self.principal_dir)])


def orientation_from_frame(f: SurfaceFrame) -> np.ndarray:
    try:
        return rotation_to_quat(f.matrix)
    except BPAError as exc:
        raise InvalidFrameError(str(exc)) from exc


def flip_principal_curvature(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    q1, q2, q3, q4 = np.moveaxis(q, -1, 0)
    return np.stack([-q2, q1, q4, -q3], axis=-1)


def curvature_concentration(c1: float, c2: float, kappa: float = DEFAULT_KAPPA) -> float:
    """``max(10 (1 - c1/c2), kappa)``; ``c2 = 0`` reads as flat if ``c1 = 0`` too, else fully curved."""
    if kappa > 0:
        raise BPAError("kappa must be <= 0")
    if c2 == 0:
        return 0.0 if c1 == 0 else float(kappa)
    return float(max(FLATNESS_GAIN * (1.0 - c1 / c2), kappa))


def frame_bingham(q, lambdas) -> BinghamDist:
    """Bingham with mode ``q``: ``lambdas`` act on the local tilts about ``p``, ``n x p`` and ``n``.

    The directions are ``q ∘ j``, ``q ∘ k`` and ``q ∘ i``. The last one is the
    flipped frame, so the last concentration governs rotation about the normal.
    """
    q = np.asarray(q, dtype=float)
    V = np.column_stack([_hamilton(q, _J), _hamilton(q, _K), _hamilton(q, _I)])
    return BinghamDist.create(lambdas, V)


def feature_orientation_bingham(f: SurfaceFrame, kappa: float = DEFAULT_KAPPA) -> BinghamDist:
    mode = orientation_from_frame(f)
    lam3 = curvature_concentration(f.c1, f.c2, kappa)
    return frame_bingham(mode, [kappa, kappa, lam3])


def frame_quaternions(normals: np.ndarray, principal: np.ndarray) -> np.ndarray:
    """Vectorized frame -> quaternion for stacks of orthonormal ``(n, p)`` pairs."""
    normals = np.asarray(normals, dtype=float)
    principal = np.asarray(principal, dtype=float)
    out = np.empty((len(normals), 4))
    for i, (n, p) in enumerate(zip(normals, principal)):
        out[i] = rotation_to_quat(np.column_stack([n, p, np.cross(n, p)]))
    return canonicalize(out)
