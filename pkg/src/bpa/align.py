"""Pose-posterior sampling and iterative alignment (BPA and the ICP baseline).

The importance sampler draws the model-side translation ``t'`` from a Gaussian
around the least-squares translation, then ``q`` from the exact conditional
Bingham posterior at ``t'``. The conditional is exactly proportional to the
likelihood in ``q``, so each weight is a function of ``t'`` alone:

    log w = K(t') + shift(t') + log F(t') - log N(t'; t*, s^2)

Here ``K`` and ``shift`` are the q-free parts of the log-likelihood (see
:func:`bpa.procrustes.position_quadratic`).

Both iterative aligners draw their correspondences from a generator seeded
with ``cfg.seed``. With the same seed and the same poses they therefore see
identical correspondences. BPA adds orientations and nothing else.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import logsumexp

from .bingham import SPHERE_AREA, BinghamDist, bingham_sample, from_quadratic
from .errors import BPAError, EmptyClassError
from .procrustes import (
    LOG_SQRT_2PI,
    Correspondence,
    OrientationPair,
    centroid_frame,
    horn_align,
    map_pose,
    orientation_quadratic,
    position_quadratic,
)
from .quat import _hamilton, canonicalize, conjugate, quat_multiply, rotate_vector

BRUTE_FORCE_MAX = 64


@dataclass(frozen=True)
class PoseSample:
    q: np.ndarray
    t: np.ndarray
    log_weight: float


@dataclass(frozen=True)
class TraceStep:
    """Pose held after one iteration and its acceptance objective (lower is better)."""

    q: np.ndarray
    t: np.ndarray
    error: float


@dataclass(frozen=True)
class AlignConfig:
    iterations: int = 20
    samples_per_step: int = 20
    # None -> mean(sigma) / sqrt(n_correspondences)
    translation_proposal_std: float | None = None
    seed: int = 0
    accept_mode: Literal["if-improved", "always"] = "if-improved"
    n_correspondences: int = 10
    sigma: float = 0.01
    n_probe: int = 50
    # "map": posterior MAP; "best": highest-weight draw; "draw": weight-proportional draw
    pose_proposal: Literal["map", "best", "draw"] = "map"

    def __post_init__(self):
        if self.iterations < 1 or self.samples_per_step < 1 or self.n_correspondences < 1:
            raise BPAError("iterations, samples_per_step and n_correspondences must be >= 1")
        if self.translation_proposal_std is not None and not self.translation_proposal_std > 0:
            raise BPAError("translation_proposal_std must be > 0")
        if not self.sigma > 0:
            raise BPAError("sigma must be > 0")
        if self.accept_mode not in ("if-improved", "always"):
            raise BPAError(f"unknown accept_mode {self.accept_mode!r}")
        if self.pose_proposal not in ("map", "best", "draw"):
            raise BPAError(f"unknown pose_proposal {self.pose_proposal!r}")


class NearestIndex:
    """Exact nearest neighbours; ties go to the lowest index."""

    def __init__(self, points: np.ndarray):
        self.points = np.asarray(points, dtype=float)
        self._tree = cKDTree(self.points) if len(self.points) > BRUTE_FORCE_MAX else None

    def query(self, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        n = len(self.points)
        if self._tree is None:
            d2 = np.sum((queries[:, None, :] - self.points[None, :, :]) ** 2, axis=-1)
            idx = np.argmin(d2, axis=1)  # first occurrence on ties
            return np.sqrt(d2[np.arange(len(queries)), idx]), idx
        k = min(4, n)
        dist, idx = self._tree.query(queries, k=k)
        dist = dist.reshape(len(queries), k)
        idx = idx.reshape(len(queries), k)
        tied = dist <= dist[:, :1]
        best = np.where(tied, idx, n).min(axis=1)
        # every candidate tied: there may be more beyond k
        for i in np.flatnonzero(tied.all(axis=1) & (k < n)):
            ball = self._tree.query_ball_point(queries[i], dist[i, 0] * (1 + 1e-12) + 1e-300)
            best[i] = min(ball)
        return dist[:, 0], best


def brute_force_nearest(points: np.ndarray, queries: np.ndarray) -> np.ndarray:
    d2 = np.sum((np.asarray(queries)[:, None, :] - np.asarray(points)[None, :, :]) ** 2, axis=-1)
    return np.argmin(d2, axis=1)


@dataclass(frozen=True, eq=False)
class OrientedCloud:
    """Points with optional per-point orientations and an edge mask.

    ``frames[i]`` and ``noise[i]`` are ignored where ``edge_mask[i]`` is set;
    edge points carry no orientation.
    """

    points: np.ndarray
    frames: np.ndarray | None = None
    noise: tuple[BinghamDist, ...] | None = None
    edge_mask: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "points", pts)
        n = len(pts)
        if n == 0:
            raise BPAError("cloud is empty")
        if self.frames is not None:
            fr = np.asarray(self.frames, dtype=float)
            if fr.shape != (n, 4):
                raise BPAError("frames must have one quaternion per point")
            object.__setattr__(self, "frames", fr)
        if self.noise is not None and len(self.noise) != n:
            raise BPAError("noise must have one Bingham per point")
        if self.edge_mask is not None:
            em = np.asarray(self.edge_mask, dtype=bool)
            if em.shape != (n,):
                raise BPAError("edge_mask must have one flag per point")
            object.__setattr__(self, "edge_mask", em)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def edges(self) -> np.ndarray:
        return np.zeros(len(self), dtype=bool) if self.edge_mask is None else self.edge_mask

    @cached_property
    def _indices(self) -> dict[bool, tuple[np.ndarray, NearestIndex | None]]:
        out = {}
        for cls in (False, True):
            members = np.flatnonzero(self.edges == cls)
            out[cls] = (members, NearestIndex(self.points[members]) if len(members) else None)
        return out

    def nearest(self, queries: np.ndarray, is_edge: np.ndarray) -> np.ndarray:
        """Nearest point of the same class (edge / surface) for each query."""
        result = np.empty(len(queries), dtype=int)
        for cls in (False, True):
            sel = np.flatnonzero(is_edge == cls)
            if not len(sel):
                continue
            members, index = self._indices[cls]
            if index is None:
                kind = "edge" if cls else "surface"
                raise EmptyClassError(f"no {kind} points in the model to match {kind} scene points")
            _, j = index.query(queries[sel])
            result[sel] = members[j]
        return result

    def transformed(self, q, t) -> "OrientedCloud":
        """Cloud moved by the pose ``(q, t)``: ``x -> Q(x + t)``, frames ``f -> q ∘ f``."""
        q = np.asarray(q, dtype=float)
        pts = rotate_vector(q, self.points + np.asarray(t, dtype=float))
        frames = None if self.frames is None else canonicalize(_hamilton(q, self.frames))
        noise = None
        if self.noise is not None:
            noise = tuple(
                BinghamDist.create(B.lambdas, _hamilton(q, B.dirs.T).T) for B in self.noise
            )
        return OrientedCloud(pts, frames, noise, self.edge_mask)


def measurement_log_likelihood(corrs, q, t) -> float:
    """``log p(Z | q, t)``: Gaussian distance terms plus Bingham orientation terms."""
    q = np.asarray(q, dtype=float)
    t = np.asarray(t, dtype=float)
    total = 0.0
    for c in corrs:
        d = np.linalg.norm(rotate_vector(q, c.x + t) - c.y)
        total += -0.5 * (d / c.sigma) ** 2 - np.log(c.sigma) - LOG_SQRT_2PI
        if c.orientation is not None:
            o = _hamilton(conjugate(q), c.orientation.q_y)
            total += float(c.orientation.noise.logpdf(o))
    return float(total)


def _gaussian_logpdf(z: np.ndarray, std: float) -> float:
    return float(-0.5 * np.sum((z / std) ** 2) - z.size * (np.log(std) + LOG_SQRT_2PI))


def proposal_std(corrs, cfg: AlignConfig) -> float:
    if cfg.translation_proposal_std is not None:
        return cfg.translation_proposal_std
    sig = np.array([c.sigma for c in corrs])
    return float(sig.mean() / np.sqrt(len(sig)))


def conditional_posterior(corrs, t_model, frame=None, orient=None) -> tuple[BinghamDist, float]:
    """Fused Bingham over ``q`` at model-side translation ``t_model`` and ``log p(Z | t_model)``.

    The marginal drops the constant uniform-prior density of ``q``.
    """
    X, Yc, s, _, _ = centroid_frame(corrs) if frame is None else frame
    Co, Ko = orientation_quadratic(corrs) if orient is None else orient
    C, K = position_quadratic(X, Yc, s, t_model)
    B, shift = from_quadratic(C + Co)
    return B, K + Ko + shift + B.log_normalizer


def bpa_sample(corrs, cfg: AlignConfig, rng: np.random.Generator) -> list[PoseSample]:
    """Weighted draws from the joint pose posterior; weights normalized to logsumexp 0."""
    corrs = list(corrs)
    if not corrs:
        raise BPAError("bpa_sample needs at least one correspondence")
    frame = centroid_frame(corrs)
    X, Yc, s, xbar, ybar = frame
    orient = orientation_quadratic(corrs)
    std = proposal_std(corrs, cfg)
    qs, ts, logw = [], [], []
    for _ in range(cfg.samples_per_step):
        z = std * rng.standard_normal(3)
        t_model = -xbar + z
        B, log_marginal = conditional_posterior(corrs, t_model, frame, orient)
        q = canonicalize(bingham_sample(B, rng, 1)[0])
        qs.append(q)
        ts.append(t_model + rotate_vector(conjugate(q), ybar))
        logw.append(log_marginal - np.log(SPHERE_AREA) - _gaussian_logpdf(z, std))
    logw = np.array(logw)
    logw -= logsumexp(logw)
    return [PoseSample(q, t, float(w)) for q, t, w in zip(qs, ts, logw)]


def find_correspondences(
    model: OrientedCloud,
    scene: OrientedCloud,
    q,
    t,
    k: int,
    rng: np.random.Generator | None = None,
    sigma: float = 0.01,
    orientations: bool = True,
) -> list[Correspondence]:
    """Match ``k`` random scene points to their nearest model points under pose ``(q, t)``.

    Edge points only match edge points and surface points only surface points.
    With ``k >= len(scene)`` every scene point is used in order.
    """
    n = len(scene)
    if k >= n:
        idx = np.arange(n)
    else:
        if rng is None:
            raise BPAError("a generator is required to subsample scene points")
        idx = np.sort(rng.choice(n, size=k, replace=False))
    q = np.asarray(q, dtype=float)
    y = scene.points[idx]
    # query in the model frame: x = Q^T y - t
    queries = rotate_vector(conjugate(q), y) - np.asarray(t, dtype=float)
    edge = scene.edges[idx]
    match = model.nearest(queries, edge)
    use_frames = (
        orientations
        and model.frames is not None
        and model.noise is not None
        and scene.frames is not None
    )
    out = []
    for i, j, e in zip(idx, match, edge):
        pair = None
        if use_frames and not e:
            pair = OrientationPair(model.frames[j], scene.frames[i], model.noise[j])
        out.append(Correspondence(model.points[j], scene.points[i], sigma, pair))
    return out


def _streams(cfg: AlignConfig):
    # correspondence draws, probe set, sampler
    return (np.random.default_rng([cfg.seed, k]) for k in range(3))


def _probe_indices(scene: OrientedCloud, cfg: AlignConfig, rng) -> np.ndarray:
    n = len(scene)
    if cfg.n_probe >= n:
        return np.arange(n)
    return np.sort(rng.choice(n, size=cfg.n_probe, replace=False))


def _probe_corrs(model, scene, probe, q, t, cfg, orientations):
    sub = OrientedCloud(
        scene.points[probe],
        None if scene.frames is None else scene.frames[probe],
        None,
        scene.edges[probe],
    )
    return find_correspondences(model, sub, q, t, len(probe), None, cfg.sigma, orientations)


def sse_error(corrs, q, t) -> float:
    return float(sum(np.sum((rotate_vector(q, c.x + t) - c.y) ** 2) for c in corrs))


def _iterate(model, scene, init, cfg, propose, objective, orientations):
    corr_rng, probe_rng, _ = _streams(cfg)
    probe = _probe_indices(scene, cfg, probe_rng)
    q = canonicalize(np.asarray(init[0], dtype=float))
    t = np.asarray(init[1], dtype=float)
    err = objective(_probe_corrs(model, scene, probe, q, t, cfg, orientations), q, t)
    trace = []
    for _ in range(cfg.iterations):
        corrs = find_correspondences(
            model, scene, q, t, cfg.n_correspondences, corr_rng, cfg.sigma, orientations
        )
        q_new, t_new = propose(corrs)
        q_new = canonicalize(q_new)
        err_new = objective(_probe_corrs(model, scene, probe, q_new, t_new, cfg, orientations), q_new, t_new)
        if cfg.accept_mode == "always" or err_new <= err:
            q, t, err = q_new, t_new, err_new
        trace.append(TraceStep(q, t, err))
    return trace


def icp_align(model: OrientedCloud, scene: OrientedCloud, init, cfg: AlignConfig) -> list[TraceStep]:
    """Sparse ICP: nearest-neighbour correspondences, then Horn on positions only.

    ``error`` is the summed squared distance over a fixed probe set of scene points.
    """
    return _iterate(model, scene, init, cfg, horn_align, sse_error, orientations=False)


def bpa_iterative_align(
    model: OrientedCloud,
    scene: OrientedCloud,
    init,
    cfg: AlignConfig,
    rng: np.random.Generator | None = None,
) -> list[TraceStep]:
    """Iterative BPA: ICP's correspondence loop with orientations and a Bingham posterior.

    ``error`` is the negative measurement log-likelihood of the probe set,
    orientation terms included.
    """
    if rng is None:
        rng = tuple(_streams(cfg))[2]

    def propose(corrs):
        if cfg.pose_proposal == "map":
            return map_pose(corrs)
        samples = bpa_sample(corrs, cfg, rng)
        lw = np.array([s.log_weight for s in samples])
        if cfg.pose_proposal == "best":
            pick = int(np.argmax(lw))
        else:
            pick = int(rng.choice(len(samples), p=np.exp(lw) / np.exp(lw).sum()))
        return samples[pick].q, samples[pick].t

    def objective(corrs, q, t):
        return -measurement_log_likelihood(corrs, q, t)

    return _iterate(model, scene, init, cfg, propose, objective, orientations=True)


def compose_pose(g, pose):
    """Left-apply the rigid motion ``g = (r, u)`` (``y -> R y + u``) to ``pose`` in ``Q(x + t)`` form."""
    r, u = np.asarray(g[0], dtype=float), np.asarray(g[1], dtype=float)
    q, t = pose
    q_new = quat_multiply(r, q)
    return q_new, np.asarray(t, dtype=float) + rotate_vector(conjugate(q_new), u)
