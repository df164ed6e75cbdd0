import csv
import io
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

import bpa.bench as bench
from bpa.bench import (
    CSV_COLUMNS,
    TrialConfig,
    TrialRecord,
    aggregate,
    generate_cloud,
    make_trial,
    perturb_pose,
    run_benchmark,
    run_trial,
)
from bpa.errors import BPAError, DegenerateError
from bpa.quat import angular_distance, random_quaternions
from bpa.synth import BOX_HALF, EDGE_BAND, sample_shape

SMALL = TrialConfig(n_trials=4, n_points=300, iterations=5)


def _parse(text):
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], np.array(rows[1:], dtype=float)


# -- perturb_pose -----------------------------------------------------------

def test_zero_stds_leave_truth_unchanged(rng):
    cfg = TrialConfig(trans_std=0.0, rot_std=0.0)
    q, t = random_quaternions(rng), rng.standard_normal(3)
    q2, t2 = perturb_pose((q, t), cfg, rng)
    np.testing.assert_array_equal(t2, t)
    assert angular_distance(q2, q) == 0.0


def test_translation_offset_is_centered(rng):
    cfg = TrialConfig(trans_std=0.02, rot_std=0.1)
    truth = (np.array([1.0, 0, 0, 0]), np.array([0.1, 0.2, 0.3]))
    d = np.array([perturb_pose(truth, cfg, rng)[1] - truth[1] for _ in range(10_000)])
    se = d.std(axis=0, ddof=1) / np.sqrt(len(d))
    assert np.all(np.abs(d.mean(axis=0)) < 3 * se)
    np.testing.assert_allclose(d.std(axis=0), 0.02, rtol=0.05)


def test_rotation_angle_is_folded_gaussian(rng):
    cfg = TrialConfig(trans_std=0.0, rot_std=0.3)
    q = random_quaternions(rng)
    ang = np.array([float(angular_distance(perturb_pose((q, np.zeros(3)), cfg, rng)[0], q)) for _ in range(4000)])
    # |N(0, 0.3^2)| essentially never reaches pi, where the angle would wrap
    res = stats.kstest(ang, stats.halfnorm(scale=0.3).cdf)
    assert res.pvalue > 1e-3


def test_perturbation_deterministic_per_seed():
    cfg = TrialConfig()
    truth = (np.array([1.0, 0, 0, 0]), np.zeros(3))
    a = perturb_pose(truth, cfg, np.random.default_rng(3))
    b = perturb_pose(truth, cfg, np.random.default_rng(3))
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


# -- shapes -----------------------------------------------------------------

def _surface_lambdas(cloud):
    return np.array([b.lambdas for b, e in zip(cloud.noise, cloud.edge_mask) if not e])


def test_sphere_cap_binghams_have_free_third_axis():
    cloud = generate_cloud(TrialConfig(shape="sphere-cap", n_points=400), np.random.default_rng(0))
    lam = _surface_lambdas(cloud)
    assert len(lam) > 0
    assert np.all(lam.max(axis=1) == 0.0)
    assert np.all(np.sort(lam, axis=1)[:, :2] == -100.0)


def test_cylinder_side_principal_direction_along_axis():
    patch = sample_shape("cylinder", 600, np.random.default_rng(1))
    side = ~patch.edge & (np.abs(patch.normals[:, 2]) < 1e-12)
    assert side.sum() > 50
    np.testing.assert_allclose(np.abs(patch.principal[side, 2]), 1.0, atol=1e-12)
    assert np.all(patch.c1[side] > 10 * np.abs(patch.c2[side]))
    cloud = generate_cloud(TrialConfig(shape="cylinder", n_points=600), np.random.default_rng(1))
    lam = np.array([cloud.noise[i].lambdas for i in np.flatnonzero(side)])
    np.testing.assert_array_equal(lam, -100.0)


def test_box_faces_flat_and_creases_masked():
    patch = sample_shape("box", 800, np.random.default_rng(2))
    surf = ~patch.edge
    np.testing.assert_array_equal(patch.c1[surf], 0.0)
    np.testing.assert_array_equal(patch.c2[surf], 0.0)
    np.testing.assert_allclose(np.abs(patch.normals[surf]).max(axis=1), 1.0)
    # distance from each face point to the nearest crease of its own face
    slack = BOX_HALF - np.abs(patch.points)
    on_face = np.isclose(slack, 0.0, atol=1e-12)
    assert np.all(on_face.sum(axis=1) >= 1)
    slack[on_face] = np.inf
    near_crease = slack.min(axis=1) < EDGE_BAND
    assert np.all(patch.edge[near_crease])
    crease = (np.isclose(np.abs(patch.points), BOX_HALF, atol=1e-12).sum(axis=1)) >= 2
    assert crease.sum() > 0 and np.all(patch.edge[crease])
    lam = _surface_lambdas(generate_cloud(TrialConfig(shape="box", n_points=800), np.random.default_rng(2)))
    assert np.all(lam.max(axis=1) == 0.0)


@pytest.mark.parametrize("shape", ["box", "cylinder", "sphere-cap", "composite"])
def test_generate_cloud_counts_and_determinism(shape):
    cfg = TrialConfig(shape=shape, n_points=500)
    a = generate_cloud(cfg, np.random.default_rng(9))
    b = generate_cloud(cfg, np.random.default_rng(9))
    assert len(a.points) == 500
    np.testing.assert_array_equal(a.points, b.points)
    np.testing.assert_array_equal(a.frames, b.frames)
    assert 0 < a.edge_mask.sum() < 500
    np.testing.assert_allclose(np.linalg.norm(a.frames, axis=1), 1.0)


# -- benchmark --------------------------------------------------------------

def test_noiseless_zero_perturbation_curves_vanish():
    cfg = replace(SMALL, n_trials=2, position_noise_std=0.0, trans_std=0.0, rot_std=0.0,
                  frame_noise_kappa=-np.inf)
    curves = run_benchmark(cfg)
    for a in (curves.bpa_pos, curves.icp_pos, curves.bpa_rot, curves.icp_rot):
        np.testing.assert_allclose(a, 0.0, atol=1e-7)


def test_running_min_monotone_in_every_trial():
    curves = run_benchmark(SMALL)
    for r in curves.trials:
        for a in (r.bpa_pos, r.icp_pos, r.bpa_rot, r.icp_rot):
            assert len(a) == SMALL.iterations
            assert np.all(np.diff(a) <= 0)


def test_first_trials_unchanged_when_doubling():
    a = run_benchmark(replace(SMALL, n_trials=2))
    b = run_benchmark(replace(SMALL, n_trials=4))
    for ra, rb in zip(a.trials, b.trials[:2]):
        for k in ("bpa_pos", "icp_pos", "bpa_rot", "icp_rot"):
            np.testing.assert_array_equal(getattr(ra, k), getattr(rb, k))


def test_csv_means_match_per_trial_records():
    curves = run_benchmark(SMALL)
    header, table = _parse(curves.to_csv())
    assert tuple(header) == CSV_COLUMNS
    np.testing.assert_array_equal(table[:, 0], np.arange(1, SMALL.iterations + 1))
    for col, key in enumerate(CSV_COLUMNS[1:], start=1):
        recomputed = np.array([getattr(r, key) for r in curves.trials]).sum(axis=0) / len(curves.trials)
        np.testing.assert_allclose(table[:, col], recomputed, rtol=0, atol=1e-9)


def test_csv_byte_identical_across_runs():
    assert run_benchmark(SMALL).to_csv() == run_benchmark(SMALL).to_csv()


def test_parallel_matches_serial():
    cfg = replace(SMALL, n_trials=3)
    assert run_benchmark(cfg, jobs=2).to_csv() == run_benchmark(cfg).to_csv()


def test_degenerate_trials_excluded_and_counted(monkeypatch):
    real = bench.icp_align
    calls = {"n": 0}

    def flaky(model, scene, init, acfg):
        calls["n"] += 1
        if calls["n"] == 2:
            raise DegenerateError("collinear")
        return real(model, scene, init, acfg)

    monkeypatch.setattr(bench, "icp_align", flaky)
    curves = run_benchmark(replace(SMALL, n_trials=3))
    assert curves.n_degenerate == 1
    assert [r.degenerate for r in curves.trials] == [False, True, False]
    ok = [curves.trials[0], curves.trials[2]]
    np.testing.assert_allclose(curves.bpa_rot, np.mean([r.bpa_rot for r in ok], axis=0))


def test_aggregate_all_degenerate_gives_nan():
    curves = aggregate([TrialRecord(0, True), TrialRecord(1, True)], 4)
    assert curves.n_degenerate == 2
    assert np.all(np.isnan(curves.bpa_pos)) and curves.iterations == 4


def test_trial_uses_same_init_for_both_methods():
    model, scene, truth, init, seed = make_trial(SMALL, 0)
    again = make_trial(SMALL, 0)
    np.testing.assert_array_equal(init[0], again[3][0])
    assert seed == again[4]
    rec = run_trial(SMALL, 0)
    assert not rec.degenerate
    # the scene really is the model under the ground-truth pose, plus noise
    from bpa.quat import rotate_vector

    resid = scene.points - rotate_vector(truth[0], model.points + truth[1])
    assert np.abs(resid).max() < 6 * SMALL.position_noise_std


@pytest.mark.parametrize(
    "kw",
    [dict(n_trials=0), dict(iterations=0), dict(rot_std=-1.0), dict(shape="torus"),
     dict(feature_kappa=1.0), dict(match_sigma=0.0), dict(frame_noise_kappa=2.0)],
)
def test_config_validation(kw):
    with pytest.raises(BPAError):
        TrialConfig(**kw)


def test_match_sigma_defaults_to_position_noise():
    assert TrialConfig(position_noise_std=0.004).sigma == 0.004
    assert TrialConfig(position_noise_std=0.0).sigma == bench.MIN_MATCH_SIGMA
    assert TrialConfig(match_sigma=0.02).sigma == 0.02
