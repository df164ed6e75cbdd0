import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bpa.errors import BPAError, InvalidFrameError
from bpa.features import (
    DEFAULT_KAPPA,
    SurfaceFrame,
    curvature_concentration,
    feature_orientation_bingham,
    flip_principal_curvature,
    frame_quaternions,
    orientation_from_frame,
)
from bpa.quat import angular_distance, axis_angle, quat_multiply, quat_to_rotation, random_quaternions


def random_frame(rng, c1=1.0, c2=1.0):
    R = quat_to_rotation(random_quaternions(rng))
    return SurfaceFrame(R[:, 0], R[:, 1], c1, c2)


def test_heuristic_fixtures():
    assert curvature_concentration(1.0, 1.0, -100) == 0
    assert curvature_concentration(2.0, 1.0, -100) == -10
    assert curvature_concentration(11.0, 1.0, -100) == -100
    assert curvature_concentration(50.0, 1.0, -100) == -100
    assert curvature_concentration(0.0, 0.0, -100) == 0
    assert curvature_concentration(3.0, 0.0, -100) == -100
    assert DEFAULT_KAPPA == -100
    with pytest.raises(BPAError):
        curvature_concentration(1.0, 1.0, 5.0)


def test_flip_fixture_and_involution(rng):
    np.testing.assert_array_equal(flip_principal_curvature([1.0, 0, 0, 0]), [0, 1, 0, 0])
    for q in random_quaternions(rng, 50):
        ff = flip_principal_curvature(flip_principal_curvature(q))
        assert np.allclose(ff, q) or np.allclose(ff, -q)


def test_flip_negates_p_and_pprime(rng):
    for q in random_quaternions(rng, 50):
        R = quat_to_rotation(q)
        Rf = quat_to_rotation(flip_principal_curvature(q))
        np.testing.assert_allclose(Rf, R * [1, -1, -1], atol=1e-12)


def test_orientation_from_frame_fixtures():
    f = SurfaceFrame([1.0, 0, 0], [0, 1.0, 0], 1, 1)
    np.testing.assert_allclose(orientation_from_frame(f), [1, 0, 0, 0], atol=1e-15)
    g = SurfaceFrame([1.0, 0, 0], [0, -1.0, 0], 1, 1)
    assert angular_distance(orientation_from_frame(g), flip_principal_curvature([1.0, 0, 0, 0])) < 1e-12


def test_frame_round_trip(rng):
    for _ in range(100):
        f = random_frame(rng)
        R = quat_to_rotation(orientation_from_frame(f))
        np.testing.assert_allclose(R, f.matrix, atol=1e-10)


def test_vectorized_frames_agree(rng):
    fs = [random_frame(rng) for _ in range(20)]
    qs = frame_quaternions(np.array([f.normal for f in fs]), np.array([f.principal_dir for f in fs]))
    for f, q in zip(fs, qs):
        assert angular_distance(q, orientation_from_frame(f)) < 1e-12


def test_invalid_frames():
    with pytest.raises(InvalidFrameError):
        SurfaceFrame([1.0, 0, 0], [1.0, 0, 0], 1, 1)
    with pytest.raises(InvalidFrameError):
        SurfaceFrame([2.0, 0, 0], [0, 1.0, 0], 1, 1)
    with pytest.raises(InvalidFrameError):
        SurfaceFrame([1.0, 0, 0], [0, 1.0, 0], 1, 2)
    with pytest.raises(InvalidFrameError):
        SurfaceFrame([1.0, 0, 0], [0, 1.0, 0], -1, -2)


def test_feature_bingham_structure(rng):
    f = random_frame(rng, 2.0, 1.0)
    B = feature_orientation_bingham(f)
    q = orientation_from_frame(f)
    assert angular_distance(B.mode, q) < 1e-12
    np.testing.assert_allclose(np.sort(B.lambdas), [-100, -100, -10])
    # v3 is the flipped frame
    v3 = B.dirs[:, np.argmax(B.lambdas)]
    assert abs(v3 @ flip_principal_curvature(q)) == pytest.approx(1, abs=1e-12)


def test_flat_patch_is_flip_invariant(rng):
    for c in [(0.0, 0.0), (3.0, 3.0)]:
        B = feature_orientation_bingham(random_frame(rng, *c))
        qs = random_quaternions(rng, 300)
        np.testing.assert_allclose(B.pdf(flip_principal_curvature(qs)), B.pdf(qs), rtol=1e-10)
        # p -> -p in the input frame leaves the density unchanged
        f = random_frame(rng, *c)
        g = SurfaceFrame(f.normal, -f.principal_dir, *c)
        np.testing.assert_allclose(
            feature_orientation_bingham(g).pdf(qs), feature_orientation_bingham(f).pdf(qs), rtol=1e-10
        )


@given(st.floats(1.0, 30.0), st.integers(0, 1000))
def test_mode_vs_flip_density(ratio, seed):
    rng = np.random.default_rng(seed)
    B = feature_orientation_bingham(random_frame(rng, ratio, 1.0))
    m, fl = B.logpdf(B.mode), B.logpdf(flip_principal_curvature(B.mode))
    lam3 = curvature_concentration(ratio, 1.0)
    # the flip lies entirely along v3, so the log-density drop is exactly -lam3
    assert m >= fl
    assert m - fl == pytest.approx(-lam3, abs=1e-9)
    if ratio == 1.0:
        assert m == fl


@pytest.mark.parametrize("ratio", [1.0, 2.0, 20.0])
def test_normal_tilt_penalized_by_kappa(rng, ratio):
    f = random_frame(rng, ratio, 1.0)
    B = feature_orientation_bingham(f)
    q = orientation_from_frame(f)
    phis = np.linspace(0.05, 1.5, 10)
    for local in ([0, 1, 0], [0, 0, 1]):
        # tilting n: rotate about a local tangent axis
        path = np.array([quat_multiply(q, axis_angle(local, p)) for p in phis])
        decay = B.logpdf(path) - B.logpdf(q)
        np.testing.assert_allclose(decay, DEFAULT_KAPPA * np.sin(phis / 2) ** 2, rtol=1e-9)
    # spinning about n costs lambda_3
    path = np.array([quat_multiply(q, axis_angle([1, 0, 0], p)) for p in phis])
    lam3 = curvature_concentration(ratio, 1.0)
    np.testing.assert_allclose(B.logpdf(path) - B.logpdf(q), lam3 * np.sin(phis / 2) ** 2, atol=1e-9)
