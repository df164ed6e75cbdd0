"""Least-squares rigid alignment and its Bingham orientation posterior.

Pose convention: a pose ``(q, t)`` maps a model point ``x`` to ``Q (x + t)``
in the scene, ``Q`` being the rotation matrix of ``q``. Each correspondence
contributes the Gaussian likelihood ``N(||Q(x + t) - y||; 0, sigma)``.

For a fixed translation, the likelihood of one correspondence is
proportional to a Bingham density in ``q``. With ``a = ||x + t||`` and
``b = ||y||`` its concentrations are ``(-2ab/sigma^2, -2ab/sigma^2, 0)`` and its
directions are ``s' ∘ w_j ∘ s``. Here ``s`` rotates ``x + t`` onto the x-axis,
``s'`` rotates the x-axis onto ``y``, and ``w_j`` are the unit quaternions
``(0,0,1,0), (0,0,0,1), (0,1,0,0)``. Multiplying those terms together gives
the orientation posterior.

Posterior translations are handled in a frame centered on the
(precision-weighted) scene centroid ``c``. There the least-squares
translation ``t* = -xbar`` does not depend on ``q``, and the scene-frame
translation of a pose is ``t* + Q^T c``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .bingham import BinghamDist, bingham_mode, from_quadratic
from .errors import BPAError, DegenerateError
from .quat import _hamilton, check_unit, conjugate, quat_between_axes, rotate_vector

E1 = np.array([1.0, 0.0, 0.0])

# columns w_1, w_2, w_3: w_j . r picks out r3, r4 and r2
W_CLAIM = np.array(
    [
        [0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
    ]
)

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class OrientationPair:
    """Model-frame and scene-frame feature orientations with a Bingham noise model.

    ``noise`` is a distribution over the model feature orientation; it is
    normally centered on ``q_x`` (see :func:`bpa.features.feature_orientation_bingham`).
    """

    q_x: np.ndarray
    q_y: np.ndarray
    noise: BinghamDist

    def __post_init__(self):
        object.__setattr__(self, "q_x", check_unit(self.q_x))
        object.__setattr__(self, "q_y", check_unit(self.q_y))


@dataclass(frozen=True)
class Correspondence:
    x: np.ndarray
    y: np.ndarray
    sigma: float
    orientation: OrientationPair | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.shape != (3,) or y.shape != (3,) or not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise BPAError("correspondence points must be finite 3-vectors")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise BPAError(f"sigma must be > 0, got {self.sigma!r}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "sigma", float(self.sigma))


@dataclass(frozen=True)
class PosePosterior:
    """Orientation posterior conditioned on a translation.

    ``q_given_t`` is the Bingham over ``q`` at model-side translation ``t_star``,
    with scene points measured relative to ``scene_center``.
    """

    t_star: np.ndarray
    q_given_t: BinghamDist
    scene_center: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def translation(self, q) -> np.ndarray:
        """Scene-frame translation of the pose ``(q, .)`` under this posterior."""
        return self.t_star + rotate_vector(conjugate(q), self.scene_center)


def _stack(corrs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    X = np.array([c.x for c in corrs], dtype=float).reshape(-1, 3)
    Y = np.array([c.y for c in corrs], dtype=float).reshape(-1, 3)
    s = np.array([c.sigma for c in corrs], dtype=float)
    return X, Y, s


def horn_matrix(S: np.ndarray) -> np.ndarray:
    """Horn's symmetric 4x4 matrix for cross-covariance ``S = sum x y^T``.

    ``q^T N q = sum y^T Q x`` for unit ``q``.
    """
    (sxx, sxy, sxz), (syx, syy, syz), (szx, szy, szz) = S
    return np.array(
        [
            [sxx + syy + szz, syz - szy, szx - sxz, sxy - syx],
            [syz - szy, sxx - syy - szz, sxy + syx, szx + sxz],
            [szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy],
            [sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz],
        ]
    )


def horn(X: np.ndarray, Y: np.ndarray, weights=None) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form ``argmin sum w_i ||Q(x_i + t) - y_i||^2`` over poses."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n = len(X)
    if n < 3:
        raise DegenerateError(f"Horn alignment needs >= 3 correspondences, got {n}")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    w = w / w.sum()
    xbar = w @ X
    ybar = w @ Y
    Xc = X - xbar
    Yc = Y - ybar
    sv = np.linalg.svd(np.sqrt(w)[:, None] * Xc, compute_uv=False)
    if sv[0] == 0 or sv[1] <= 1e-9 * sv[0]:
        raise DegenerateError("model points are coincident or collinear; rotation not unique")
    N = horn_matrix((w[:, None] * Xc).T @ Yc)
    evals, evecs = np.linalg.eigh(N)
    if evals[3] - evals[2] <= 1e-12 * max(1.0, abs(evals).max()):
        raise DegenerateError("Horn eigenvalue gap vanished; rotation not unique")
    q = evecs[:, 3]
    q = q if q[0] >= 0 else -q
    t = rotate_vector(conjugate(q), ybar) - xbar
    return q, t


def horn_align(corrs, weights=None) -> tuple[np.ndarray, np.ndarray]:
    X, Y, _ = _stack(corrs)
    return horn(X, Y, weights)


def _claim_dirs(s: np.ndarray, s_prime: np.ndarray) -> np.ndarray:
    # column-wise s' ∘ w_j ∘ s
    cols = _hamilton(_hamilton(s_prime, W_CLAIM.T), s)
    return cols.T


def correspondence_terms(p: np.ndarray, y: np.ndarray, sigma: float):
    """Concentrations and directions for one correspondence with ``p = x + t`` (no normalizer)."""
    a = np.linalg.norm(p)
    b = np.linalg.norm(y)
    if a == 0.0 or b == 0.0:
        return np.zeros(3), np.eye(4)[:, [2, 3, 1]]
    lam = -2.0 * a * b / sigma**2
    V = _claim_dirs(quat_between_axes(p, E1), quat_between_axes(E1, y))
    return np.array([lam, lam, 0.0]), V


def correspondence_bingham(c: Correspondence, t) -> BinghamDist:
    """Bingham in ``q`` proportional to the likelihood of ``c`` at translation ``t``.

    A point at the rotation center (``x + t = 0`` or ``y = 0``) gives the uniform
    distribution.
    """
    lam, V = correspondence_terms(c.x + np.asarray(t, dtype=float), c.y, c.sigma)
    return BinghamDist.create(lam, V)


def position_quadratic(X, Y, sigma, t) -> tuple[np.ndarray, float]:
    """Summed Bingham exponent matrix and the q-free log-likelihood remainder.

    ``sum_i log N(||Q(x_i+t) - y_i||; 0, sigma_i) = q^T C q + K`` exactly.
    """
    P = np.asarray(X, dtype=float) + np.asarray(t, dtype=float)
    Y = np.asarray(Y, dtype=float)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (len(P),))
    C = np.zeros((4, 4))
    for p, y, s in zip(P, Y, sigma):
        lam, V = correspondence_terms(p, y, s)
        C += (V * lam) @ V.T
    a = np.linalg.norm(P, axis=1)
    b = np.linalg.norm(Y, axis=1)
    K = float(np.sum(-np.log(sigma) - LOG_SQRT_2PI - (a - b) ** 2 / (2.0 * sigma**2)))
    return C, K


def orientation_terms(pair: OrientationPair) -> tuple[np.ndarray, np.ndarray]:
    """Directions ``q_y ∘ v_i^{-1}`` of the measurement Bingham over the pose ``q``.

    If the model feature orientation ``o`` has density ``B(o)`` and the scene
    sees ``q_y = q ∘ o``, then ``v_i . (q^{-1} ∘ q_y) = (q_y ∘ v_i^{-1}) . q``.
    """
    V = pair.noise.dirs.T
    U = _hamilton(pair.q_y, conjugate(V))
    return pair.noise.lambdas, U.T


def orientation_quadratic(corrs) -> tuple[np.ndarray, float]:
    C = np.zeros((4, 4))
    K = 0.0
    for c in corrs:
        if c.orientation is None:
            continue
        lam, U = orientation_terms(c.orientation)
        C += (U * lam) @ U.T
        K -= c.orientation.noise.log_normalizer
    return C, K


def centroid_frame(corrs) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Precision-weighted centroids: returns ``(X, Y - ybar, sigma, xbar, ybar)``."""
    X, Y, s = _stack(corrs)
    w = s**-2
    w = w / w.sum()
    xbar = w @ X
    ybar = w @ Y
    return X, Y - ybar, s, xbar, ybar


def posterior_orientation(corrs, t=None, prior: BinghamDist | None = None) -> PosePosterior:
    """Bingham posterior over ``q`` given a translation.

    With ``t`` given the scene points are used as-is. Without it the posterior
    is taken at the least-squares translation in the centroid frame, and
    ``scene_center`` records that frame's origin.
    """
    corrs = list(corrs)
    if not corrs:
        raise BPAError("posterior needs at least one correspondence")
    if t is None:
        X, Yc, s, xbar, ybar = centroid_frame(corrs)
        t_star, center = -xbar, ybar
    else:
        X, Yc, s = _stack(corrs)
        t_star, center = np.asarray(t, dtype=float), np.zeros(3)
    C, _ = position_quadratic(X, Yc, s, t_star)
    if prior is not None:
        C = C + prior.quadratic
    B, _ = from_quadratic(C)
    return PosePosterior(t_star=t_star, q_given_t=B, scene_center=center)


def fuse_orientation_measurements(corrs, base: PosePosterior) -> PosePosterior:
    """Multiply each correspondence's orientation measurement into ``base``."""
    C, _ = orientation_quadratic(corrs)
    if not np.any(C):
        return base
    B, _ = from_quadratic(base.q_given_t.quadratic + C)
    return replace(base, q_given_t=B)


def map_pose(corrs, prior: BinghamDist | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Maximum a posteriori pose: least-squares translation, fused posterior mode."""
    post = fuse_orientation_measurements(corrs, posterior_orientation(corrs, prior=prior))
    q = bingham_mode(post.q_given_t, strict=True)
    return q, post.translation(q)
