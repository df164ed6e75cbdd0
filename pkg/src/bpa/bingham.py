"""Bingham distributions on the unit-quaternion sphere S^3.

Density ``p(q) = exp(sum_i lambda_i (v_i . q)^2) / F`` with ``lambda_i <= 0`` and
orthonormal directions ``v_1..v_3``; the mode is the unit vector orthogonal to
all three. Concentrations are stored ascending (most negative first).

The normalizer is evaluated through an exact one-dimensional reduction.
Writing ``q = (cos a cos b, cos a sin b, sin a cos c, sin a sin c)`` the
``b`` and ``c`` integrals are modified Bessel functions, leaving::

    F = 2 pi^2  int_0^1 exp(u l2) I0e(u (l2 - l1) / 2) I0e((1 - u) |l3| / 2) du

for sorted ``l1 <= l2 <= l3 <= 0`` (``I0e`` is the exponentially scaled
Bessel function). The integrand is nonnegative and monotone apart from
boundary layers at ``u = 0`` and ``u = 1``, so a composite Gauss-Legendre
rule on panels graded geometrically towards both ends is accurate to near
machine precision at any concentration.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import i0e

from .errors import BPAError, DegenerateError, OutOfRangeError
from .quat import canonicalize, cross4

SPHERE_AREA = 2.0 * np.pi**2
MAX_CONCENTRATION = 900.0
DEGENERATE_TOL = 1e-9
ORTHO_TOL = 1e-10

_GL_ORDER = 16
_PANEL_RATIO = 4.0


@lru_cache(maxsize=64)
def _half_rule(h0: float) -> tuple[np.ndarray, np.ndarray]:
    # composite Gauss-Legendre on [0, 1/2], panels growing geometrically from h0
    edges = [0.0]
    h = h0
    while edges[-1] + h < 0.5:
        edges.append(edges[-1] + h)
        h *= _PANEL_RATIO
    edges.append(0.5)
    e = np.array(edges)
    x, w = np.polynomial.legendre.leggauss(_GL_ORDER)
    a, b = e[:-1, None], e[1:, None]
    nodes = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
    weights = (0.5 * (b - a) * w).ravel()
    return nodes, weights


def log_bingham_normalizer(lambdas) -> float:
    """``log F`` for concentrations ``lambdas`` (any order, all ``<= 0``), no range limit."""
    lam = np.sort(np.asarray(lambdas, dtype=float))
    if lam.shape != (3,) or not np.all(np.isfinite(lam)):
        raise BPAError(f"expected three finite concentrations, got {lambdas!r}")
    if lam[-1] > 0:
        raise BPAError("Bingham concentrations must be <= 0")
    l1, l2, l3 = lam
    if l1 == 0.0:
        return float(np.log(SPHERE_AREA))
    # exponent ratio 1/100 of the thinnest boundary layer for the first panel
    h0 = min(1e-3, 1e-2 / -l1)
    s, ws = _half_rule(float(h0))
    # nodes near 0 in u, then nodes near 0 in v = 1 - u (computed without cancellation)
    u = np.concatenate([s, 1.0 - s])
    v = np.concatenate([1.0 - s, s])
    w = np.concatenate([ws, ws])
    f = np.exp(u * l2) * i0e(0.5 * u * (l2 - l1)) * i0e(-0.5 * v * l3)
    return float(np.log(SPHERE_AREA) + np.log(np.dot(w, f)))


def bingham_normalizer(lambdas) -> float:
    """Normalizer ``F`` over the supported range ``[-MAX_CONCENTRATION, 0]``.

    Raises :class:`OutOfRangeError` outside it. Internal callers that need
    ``F`` for sharper posteriors use :func:`log_bingham_normalizer` directly.
    """
    lam = np.asarray(lambdas, dtype=float)
    if np.any(lam < -MAX_CONCENTRATION):
        raise OutOfRangeError(
            f"concentration {lam.min():g} below supported range [-{MAX_CONCENTRATION:g}, 0]"
        )
    return float(np.exp(log_bingham_normalizer(lam)))


@dataclass(frozen=True, eq=False)
class BinghamDist:
    """Immutable Bingham distribution; build with :meth:`create`."""

    lambdas: np.ndarray
    dirs: np.ndarray
    log_normalizer: float

    @classmethod
    def create(cls, lambdas, dirs) -> "BinghamDist":
        lam = np.asarray(lambdas, dtype=float).copy()
        V = np.asarray(dirs, dtype=float).copy()
        if lam.shape != (3,) or V.shape != (4, 3):
            raise BPAError("expected 3 concentrations and a 4x3 direction matrix")
        if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(V))):
            raise BPAError("non-finite Bingham parameters")
        if np.any(lam > 0):
            raise BPAError("Bingham concentrations must be <= 0")
        if np.max(np.abs(V.T @ V - np.eye(3))) > ORTHO_TOL:
            raise BPAError("Bingham directions are not orthonormal")
        order = np.argsort(lam, kind="stable")
        lam, V = lam[order], V[:, order]
        lam.setflags(write=False)
        V.setflags(write=False)
        return cls(lam, V, log_bingham_normalizer(lam))

    @classmethod
    def uniform(cls) -> "BinghamDist":
        return cls.create(np.zeros(3), np.eye(4)[:, 1:])

    @property
    def normalizer(self) -> float:
        return float(np.exp(self.log_normalizer))

    @property
    def mode(self) -> np.ndarray:
        return bingham_mode(self)

    @property
    def degenerate(self) -> bool:
        """True when the largest kept concentration is ~0, i.e. the mode is a great circle."""
        return bool(self.lambdas[-1] > -DEGENERATE_TOL)

    @property
    def quadratic(self) -> np.ndarray:
        """Exponent matrix ``C = sum_i lambda_i v_i v_i^T``."""
        return (self.dirs * self.lambdas) @ self.dirs.T

    def logpdf(self, q) -> np.ndarray:
        proj = np.asarray(q, dtype=float) @ self.dirs
        return proj**2 @ self.lambdas - self.log_normalizer

    def pdf(self, q) -> np.ndarray:
        return np.exp(self.logpdf(q))

    def __repr__(self) -> str:
        return f"BinghamDist(lambdas={np.array2string(self.lambdas, precision=4)})"


def bingham_pdf(B: BinghamDist, q) -> np.ndarray:
    return B.pdf(q)


def from_quadratic(C: np.ndarray) -> tuple[BinghamDist, float]:
    """Bingham proportional to ``exp(q^T C q)`` plus the eigenvalue shift.

    ``q^T C q = q^T C_B q + shift`` where ``C_B`` is the returned Bingham's
    exponent matrix, so the shift carries the normalization bookkeeping that
    importance weights need.
    """
    C = 0.5 * (C + C.T)
    w, U = np.linalg.eigh(C)
    shift = float(w[-1])
    lam = np.minimum(w[:3] - shift, 0.0)
    return BinghamDist.create(lam, U[:, :3]), shift


def bingham_multiply(B1: BinghamDist, B2: BinghamDist) -> BinghamDist:
    """Product of two Bingham densities, renormalized.

    A repeated top eigenvalue is not resolved: the result comes back with
    ``degenerate`` set and its mode is one arbitrary point on the great circle.
    """
    return from_quadratic(B1.quadratic + B2.quadratic)[0]


def bingham_product(dists) -> BinghamDist:
    dists = list(dists)
    if not dists:
        return BinghamDist.uniform()
    return from_quadratic(sum(B.quadratic for B in dists))[0]


def bingham_mode(B: BinghamDist, strict: bool = False) -> np.ndarray:
    """Unit quaternion orthogonal to all directions (canonical sign).

    With ``strict=True`` a great-circle mode raises :class:`DegenerateError`.
    """
    if strict and B.degenerate:
        raise DegenerateError(
            f"Bingham mode is not unique (largest concentration {B.lambdas[-1]:.3g})"
        )
    V = B.dirs
    m = cross4(V[:, 0], V[:, 1], V[:, 2])
    return canonicalize(m / np.linalg.norm(m))


def mode_subspace(B: BinghamDist) -> np.ndarray:
    """Orthonormal 4x2 basis of the great circle of maximal density (degenerate case)."""
    return np.column_stack([bingham_mode(B), B.dirs[:, 2]])


def _acg_b(mu: np.ndarray) -> float:
    # root of sum_i 1 / (b + 2 mu_i) = 1 on [1, 4]
    g = lambda b: np.sum(1.0 / (b + 2.0 * mu)) - 1.0
    if g(4.0) >= 0.0:
        return 4.0
    return brentq(g, 1.0, 4.0, xtol=1e-14, rtol=1e-14)


def bingham_sample(B: BinghamDist, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` independent draws, shape ``(n, 4)``.

    Exact rejection sampling from an angular central Gaussian envelope
    (Kent, Ganeiber & Mardia). With ``A = -C`` positive semidefinite and
    ``Omega = I + 2A/b`` the ratio of target to envelope is bounded by
    ``exp(-(4 - b)/2) (4/b)^2``, so acceptance stays bounded away from zero
    at every concentration. Deterministic given the generator state.
    """
    # work in the eigenbasis: coordinates (v1.q, v2.q, v3.q, mode.q)
    mu = np.concatenate([-B.lambdas, [0.0]])
    basis = np.column_stack([B.dirs, bingham_mode(B)])
    b = _acg_b(mu)
    omega = 1.0 + 2.0 * mu / b
    log_m = -(4.0 - b) / 2.0 + 2.0 * np.log(4.0 / b)
    scale = 1.0 / np.sqrt(omega)
    out = np.empty((n, 4))
    filled = 0
    batch = max(16, int(1.3 * n))
    while filled < n:
        y = rng.standard_normal((batch, 4)) * scale
        x = y / np.linalg.norm(y, axis=1, keepdims=True)
        x2 = x * x
        log_ratio = -(x2 @ mu) + 2.0 * np.log(x2 @ omega) - log_m
        keep = x[np.log(rng.random(batch)) < log_ratio]
        take = min(len(keep), n - filled)
        out[filled : filled + take] = keep[:take]
        filled += take
    return out @ basis.T
