"""Synthetic oriented point clouds and pose perturbations.

Shapes are centered near the origin, roughly 10 cm across. Every surface
point carries an analytic normal, a principal direction and curvature pair
``(c1, c2)``. Points on creases and rims are edge-masked and carry no
orientation. On flat and umbilic (spherical) patches the principal direction
is undefined, so a random tangent is drawn for it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .align import OrientedCloud
from .bingham import BinghamDist, bingham_sample
from .features import curvature_concentration, frame_bingham, frame_quaternions
from .quat import _hamilton, axis_angle, canonicalize, normalize, quat_multiply

SHAPES = ("box", "cylinder", "sphere-cap", "composite")

BOX_HALF = np.array([0.06, 0.04, 0.03])
CYL_RADIUS, CYL_HALF_HEIGHT = 0.035, 0.06
CAP_RADIUS, CAP_MAX_POLAR = 0.06, np.pi / 3
EDGE_FRACTION = 0.15
# surface points this close to a crease or rim have no usable normal and are edge-masked
EDGE_BAND = 0.01


@dataclass
class Patch:
    points: np.ndarray
    normals: np.ndarray
    principal: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    edge: np.ndarray

    @staticmethod
    def concat(parts) -> "Patch":
        return Patch(*(np.concatenate([getattr(p, f) for p in parts]) for f in
                       ("points", "normals", "principal", "c1", "c2", "edge")))


def _random_tangent(normals: np.ndarray, rng) -> np.ndarray:
    v = rng.standard_normal(normals.shape)
    v -= np.sum(v * normals, axis=1, keepdims=True) * normals
    return normalize(v)


def _mask_band(patch: Patch, near: np.ndarray) -> Patch:
    edge = patch.edge | near
    nan = np.full(3, np.nan)
    patch.normals[near] = nan
    patch.principal[near] = nan
    return Patch(patch.points, patch.normals, patch.principal, patch.c1, patch.c2, edge)


def _edge_patch(points: np.ndarray) -> Patch:
    n = len(points)
    nan = np.full((n, 3), np.nan)
    return Patch(points, nan, nan.copy(), np.zeros(n), np.zeros(n), np.ones(n, dtype=bool))


def _split(n: int) -> tuple[int, int]:
    n_edge = int(round(EDGE_FRACTION * n))
    return n - n_edge, n_edge


def _box(n: int, rng, half=BOX_HALF) -> Patch:
    n_surf, n_edge = _split(n)
    # faces as (axis, sign), area-weighted
    faces = [(a, s) for a in range(3) for s in (-1.0, 1.0)]
    areas = np.array([4 * np.prod(np.delete(half, a)) for a, _ in faces])
    which = rng.choice(len(faces), size=n_surf, p=areas / areas.sum())
    pts = rng.uniform(-half, half, size=(n_surf, 3))
    normals = np.zeros((n_surf, 3))
    for k, (a, s) in enumerate(faces):
        sel = which == k
        pts[sel, a] = s * half[a]
        normals[sel, a] = s
    surf = Patch(pts, normals, _random_tangent(normals, rng), np.zeros(n_surf), np.zeros(n_surf),
                 np.zeros(n_surf, dtype=bool))
    # distance to the nearest crease within the face
    slack = half - np.abs(pts)
    slack[normals != 0] = np.inf
    surf = _mask_band(surf, slack.min(axis=1) < EDGE_BAND)
    # 12 crease edges: free axis a, other two coordinates at +/- half
    lengths = np.array([2 * half[a] for a in range(3) for _ in range(4)])
    e = rng.choice(12, size=n_edge, p=lengths / lengths.sum())
    epts = np.empty((n_edge, 3))
    for k in range(12):
        sel = e == k
        a = k // 4
        others = [i for i in range(3) if i != a]
        signs = ((k % 4) // 2 * 2 - 1, (k % 2) * 2 - 1)
        epts[sel, a] = rng.uniform(-half[a], half[a], size=sel.sum())
        for o, s in zip(others, signs):
            epts[sel, o] = s * half[o]
    return Patch.concat([surf, _edge_patch(epts)])


def _cylinder(n: int, rng, r=CYL_RADIUS, h=CYL_HALF_HEIGHT) -> Patch:
    n_surf, n_edge = _split(n)
    side_area, cap_area = 2 * np.pi * r * 2 * h, 2 * np.pi * r**2
    n_side = rng.binomial(n_surf, side_area / (side_area + cap_area))
    phi = rng.uniform(0, 2 * np.pi, n_side)
    z = rng.uniform(-h, h, n_side)
    radial = np.column_stack([np.cos(phi), np.sin(phi), np.zeros(n_side)])
    axis = np.tile([0.0, 0.0, 1.0], (n_side, 1))
    side = Patch(np.column_stack([r * radial[:, :2], z]), radial, axis,
                 np.full(n_side, 1.0 / r), np.zeros(n_side), np.zeros(n_side, dtype=bool))
    side = _mask_band(side, h - np.abs(z) < EDGE_BAND)
    n_cap = n_surf - n_side
    rho = r * np.sqrt(rng.random(n_cap))
    phi = rng.uniform(0, 2 * np.pi, n_cap)
    sgn = rng.choice([-1.0, 1.0], n_cap)
    cap_n = np.column_stack([np.zeros(n_cap), np.zeros(n_cap), sgn])
    caps = Patch(np.column_stack([rho * np.cos(phi), rho * np.sin(phi), sgn * h]), cap_n,
                 _random_tangent(cap_n, rng), np.zeros(n_cap), np.zeros(n_cap),
                 np.zeros(n_cap, dtype=bool))
    caps = _mask_band(caps, r - rho < EDGE_BAND)
    phi = rng.uniform(0, 2 * np.pi, n_edge)
    rims = np.column_stack([r * np.cos(phi), r * np.sin(phi), rng.choice([-h, h], n_edge)])
    return Patch.concat([side, caps, _edge_patch(rims)])


def _sphere_cap(n: int, rng, R=CAP_RADIUS, max_polar=CAP_MAX_POLAR) -> Patch:
    n_surf, n_edge = _split(n)
    # uniform on the cap: cos(polar) uniform in [cos(max_polar), 1]
    cz = rng.uniform(np.cos(max_polar), 1.0, n_surf)
    phi = rng.uniform(0, 2 * np.pi, n_surf)
    sz = np.sqrt(1 - cz**2)
    normals = np.column_stack([sz * np.cos(phi), sz * np.sin(phi), cz])
    c = np.full(n_surf, 1.0 / R)
    surf = Patch(R * normals - [0, 0, R * 0.5], normals, _random_tangent(normals, rng), c, c.copy(),
                 np.zeros(n_surf, dtype=bool))
    surf = _mask_band(surf, R * (max_polar - np.arccos(cz)) < EDGE_BAND)
    phi = rng.uniform(0, 2 * np.pi, n_edge)
    rim = np.column_stack([R * np.sin(max_polar) * np.cos(phi), R * np.sin(max_polar) * np.sin(phi),
                           np.full(n_edge, R * np.cos(max_polar) - R * 0.5)])
    return Patch.concat([surf, _edge_patch(rim)])


def _subset(patch: Patch, keep: np.ndarray) -> Patch:
    return Patch(*(getattr(patch, f)[keep] for f in ("points", "normals", "principal", "c1", "c2", "edge")))


# composite parts, as (xy center, size) on the box top
COMP_CYL = (np.array([0.033, 0.01]), 0.022, 0.04)
COMP_CAP = (np.array([-0.028, -0.005]), 0.035)


def _composite(n: int, rng) -> Patch:
    # a box with a cylinder standing on its top at one end and a dome at the
    # other; hidden surfaces are dropped and the junctions act as creases
    top = BOX_HALF[2]
    (cyl_c, cyl_r, cyl_h), (cap_c, cap_R) = COMP_CYL, COMP_CAP
    cap_rim = cap_R * np.sin(CAP_MAX_POLAR)
    m = int(1.3 * n) + 10
    box = _box(m // 2, rng)
    on_top = np.isclose(box.points[:, 2], top) & ~box.edge
    d_cyl = np.linalg.norm(box.points[:, :2] - cyl_c, axis=1) - cyl_r
    d_cap = np.linalg.norm(box.points[:, :2] - cap_c, axis=1) - cap_rim
    hidden = np.isclose(box.points[:, 2], top) & ((d_cyl < 0) | (d_cap < 0))
    box = _mask_band(box, on_top & (np.minimum(d_cyl, d_cap) < EDGE_BAND))
    box = _subset(box, ~hidden)
    cyl = _cylinder(m // 3, rng, r=cyl_r, h=cyl_h / 2)
    cyl = _subset(cyl, ~(np.isclose(cyl.points[:, 2], -cyl_h / 2) & ~cyl.edge))
    cyl.points = cyl.points + [*cyl_c, top + cyl_h / 2]
    cap = _sphere_cap(m - m // 2 - m // 3, rng, R=cap_R)
    # rim sits at local height R cos(max_polar) - R / 2
    cap.points = cap.points + [*cap_c, top - cap_R * (np.cos(CAP_MAX_POLAR) - 0.5)]
    whole = Patch.concat([box, cyl, cap])
    keep = np.sort(rng.choice(len(whole.points), size=min(n, len(whole.points)), replace=False))
    return _subset(whole, keep)


_BUILDERS = {"box": _box, "cylinder": _cylinder, "sphere-cap": _sphere_cap, "composite": _composite}


def sample_shape(shape: str, n: int, rng) -> Patch:
    if shape not in _BUILDERS:
        raise ValueError(f"unknown shape {shape!r}; choose from {SHAPES}")
    return _BUILDERS[shape](n, rng)


def cloud_from_patch(patch: Patch, kappa: float) -> OrientedCloud:
    """Oriented cloud whose per-point noise is the feature Bingham at ``kappa``."""
    n = len(patch.points)
    frames = np.tile([1.0, 0.0, 0.0, 0.0], (n, 1))
    surf = ~patch.edge
    frames[surf] = frame_quaternions(patch.normals[surf], patch.principal[surf])
    uniform = BinghamDist.uniform()
    noise = []
    for i in range(n):
        if patch.edge[i]:
            noise.append(uniform)
        else:
            lam3 = curvature_concentration(patch.c1[i], patch.c2[i], kappa)
            noise.append(frame_bingham(frames[i], [kappa, kappa, lam3]))
    return OrientedCloud(patch.points, frames, tuple(noise), patch.edge.copy())


def noisy_frames(patch: Patch, frames: np.ndarray, kappa: float, rng) -> np.ndarray:
    """Right-multiply each surface frame by a draw from its local feature Bingham at ``kappa``.

    ``kappa = -inf`` leaves the frames exact.
    """
    out = np.array(frames, dtype=float)
    if np.isneginf(kappa):
        return out
    ident = np.array([1.0, 0.0, 0.0, 0.0])
    for i in np.flatnonzero(~patch.edge):
        lam3 = curvature_concentration(patch.c1[i], patch.c2[i], kappa)
        local = frame_bingham(ident, [kappa, kappa, lam3])
        out[i] = canonicalize(_hamilton(out[i], bingham_sample(local, rng, 1)[0]))
    return out


def random_pose(rng, trans_scale: float = 0.05):
    q = canonicalize(normalize(rng.standard_normal(4)))
    return q, trans_scale * rng.standard_normal(3)


def perturb(truth, trans_std: float, rot_std: float, rng):
    """Gaussian translation offset and a Gaussian-angle turn about a uniform random axis."""
    q, t = truth
    q = np.asarray(q, dtype=float)
    t = np.asarray(t, dtype=float)
    dt = trans_std * rng.standard_normal(3)
    axis = normalize(rng.standard_normal(3))
    angle = rot_std * rng.standard_normal()
    return quat_multiply(axis_angle(axis, angle), q), t + dt
