"""Gaze analytics: ray casting, viewing distance, screen footprint.

The ray tests check the vectorized intersection against a per-triangle
scalar routine written here from scratch, and against closed-form geometry
on a metaball sphere.
"""
import math

import numpy as np
import pytest

from drillsim import (
    DEFAULT_HMD,
    GazeLog,
    GazeSample,
    HmdSpec,
    SpherePackVolume,
    Tissue,
    build_field,
    cyclops_ray,
    extract_mesh,
    hit_test_log,
    load_gaze_log,
    mean_eye_tooth_distance,
    parse_gaze_log,
    pixel_footprint,
    ray_mesh_distance,
    save_gaze_log,
    screen_share,
    single_sphere_iso_radius,
)
from drillsim import fixtures as fx
from drillsim.field import default_grid_box


def _sphere_mesh(radius=1.0, dims=(20, 20, 20)):
    vol = SpherePackVolume(np.zeros((1, 3)), np.array([radius]), [Tissue.ENAMEL])
    field = build_field(vol)
    box = default_grid_box(field, dims)
    return extract_mesh(field, dims, box), box


def scalar_ray_distance(origin, direction, mesh):
    """One triangle at a time, straight from the signed-volume algebra."""
    o = np.asarray(origin, float)
    d = np.asarray(direction, float)
    d = d / np.linalg.norm(d)
    best = None
    for i0, i1, i2 in mesh.triangles.tolist():
        v0 = mesh.vertices[i0]
        e1 = mesh.vertices[i1] - v0
        e2 = mesh.vertices[i2] - v0
        p = np.cross(d, e2)
        det = float(e1 @ p)
        if abs(det) < 1e-12:
            continue
        s = o - v0
        u = float(s @ p) / det
        if u < 0.0 or u > 1.0:
            continue
        q = np.cross(s, e1)
        v = float(d @ q) / det
        if v < 0.0 or u + v > 1.0:
            continue
        t = float(e2 @ q) / det
        if t >= 0.0 and (best is None or t < best):
            best = t
    return best


def test_ray_distance_matches_scalar_reference():
    mesh, _ = _sphere_mesh()
    rng = np.random.default_rng(14)
    checked_hits = 0
    for _ in range(25):
        origin = rng.uniform(-4, 4, 3)
        origin = origin / np.linalg.norm(origin) * 4.0
        target = rng.uniform(-0.8, 0.8, 3)
        direction = target - origin
        mine = ray_mesh_distance(origin, direction, mesh)
        ref = scalar_ray_distance(origin, direction, mesh)
        if ref is None:
            assert mine is None
        else:
            checked_hits += 1
            assert mine == pytest.approx(ref, abs=1e-9)
    assert checked_hits > 10


def test_ray_distance_against_closed_form_sphere():
    mesh, box = _sphere_mesh(dims=(40, 40, 40))
    r_iso = single_sphere_iso_radius(1.0)
    cell_diag = float(np.linalg.norm(box.size / 40.0))
    d = ray_mesh_distance(np.array([0.0, 0.0, 5.0]),
                          np.array([0.0, 0.0, -1.0]), mesh)
    assert d == pytest.approx(5.0 - r_iso, abs=cell_diag)


def test_ray_miss_returns_none():
    mesh, _ = _sphere_mesh()
    assert ray_mesh_distance(np.array([0.0, 0.0, 5.0]),
                             np.array([0.0, 1.0, 0.0]), mesh) is None


def test_ray_direction_need_not_be_normalized():
    mesh, _ = _sphere_mesh()
    o = np.array([0.0, 0.0, 5.0])
    d1 = ray_mesh_distance(o, np.array([0.0, 0.0, -1.0]), mesh)
    d2 = ray_mesh_distance(o, np.array([0.0, 0.0, -250.0]), mesh)
    assert d1 == pytest.approx(d2, abs=1e-12)


def test_cyclops_ray_starts_between_the_eyes():
    s = GazeSample(t=0.0,
                   left_eye=np.array([-3.0, 0.0, 10.0]),
                   right_eye=np.array([3.0, 2.0, 10.0]),
                   direction=np.array([0.0, 0.0, -2.0]))
    origin, direction = cyclops_ray(s)
    assert origin.tolist() == [0.0, 1.0, 10.0]
    assert np.linalg.norm(direction) == pytest.approx(1.0, abs=1e-12)
    assert direction.tolist() == [0.0, 0.0, -1.0]


def test_hit_test_log_flags_misses():
    mesh, _ = _sphere_mesh()
    hit = GazeSample(0.0, np.array([-0.03, 0.0, 5.0]), np.array([0.03, 0.0, 5.0]),
                     np.array([0.0, 0.0, -1.0]))
    miss = GazeSample(1.0, np.array([-0.03, 0.0, 5.0]), np.array([0.03, 0.0, 5.0]),
                      np.array([0.0, 1.0, 0.0]))
    log = GazeLog(samples=(hit, miss))
    distances, hits = hit_test_log(log, mesh)
    assert hits.tolist() == [True, False]
    assert math.isnan(distances[1])
    assert distances[0] == pytest.approx(5.0 - single_sphere_iso_radius(1.0),
                                         abs=0.3)


def test_mean_eye_tooth_distance_averages_only_hits():
    mesh, _ = _sphere_mesh()
    samples = []
    for i, z in enumerate((4.0, 6.0)):
        samples.append(GazeSample(float(i),
                                  np.array([-0.03, 0.0, z]),
                                  np.array([0.03, 0.0, z]),
                                  np.array([0.0, 0.0, -1.0])))
    samples.append(GazeSample(2.0, np.array([-0.03, 0.0, 4.0]),
                              np.array([0.03, 0.0, 4.0]),
                              np.array([0.0, 1.0, 0.0])))
    log = GazeLog(samples=tuple(samples))
    distances, hits = hit_test_log(log, mesh)
    want = float(np.mean(distances[hits]))
    assert mean_eye_tooth_distance(log, mesh) == pytest.approx(want, abs=1e-12)


def test_mean_distance_without_hits_is_an_error():
    mesh, _ = _sphere_mesh()
    away = GazeSample(0.0, np.array([-0.03, 0.0, 5.0]), np.array([0.03, 0.0, 5.0]),
                      np.array([0.0, 1.0, 0.0]))
    with pytest.raises(ValueError, match="no fixation"):
        mean_eye_tooth_distance(GazeLog(samples=(away,)), mesh)


def test_synthetic_gaze_log_has_hits_and_misses(tooth):
    log = fx.synthetic_gaze_log()
    mesh = extract_mesh(build_field(tooth), (45, 68, 45))
    distances, hits = hit_test_log(log, mesh)
    assert 0 < int(hits.sum()) < len(log.samples)
    assert mean_eye_tooth_distance(log, mesh) > 0


# --- footprint -------------------------------------------------------------

def test_pixel_footprint_formula():
    # one eye: 1440 px across 98 degrees; a 3.26 cm object at 23 cm spans
    # 2 atan(3.26 / 46) rad, which works out to just over 119 px
    want = 1440 * (2.0 * math.atan(3.26 / 46.0)) / math.radians(98.0)
    got = pixel_footprint(3.26, 23.0)
    assert got == pytest.approx(want, rel=1e-12)
    assert got == pytest.approx(119.1305946969107, abs=1e-9)


def test_pixel_footprint_scales_with_resolution():
    hmd = HmdSpec(per_eye_width_px=2880, per_eye_height_px=1600, fov_deg=98.0)
    assert pixel_footprint(3.26, 23.0, hmd) == pytest.approx(
        2.0 * pixel_footprint(3.26, 23.0), rel=1e-12)


def test_screen_share_per_eye_vs_combined():
    share = screen_share(3.26, 23.0)
    assert share["per_eye_share"] == pytest.approx(
        2.0 * share["combined_share"], rel=1e-12)
    # about a third of a percent of the combined canvas
    assert share["combined_share"] == pytest.approx(0.0031, abs=0.0003)
    assert share["footprint_px"] == pytest.approx(119.13, abs=0.01)


def test_default_hmd_spec():
    assert DEFAULT_HMD.per_eye_width_px == 1440
    assert DEFAULT_HMD.per_eye_height_px == 1600
    assert DEFAULT_HMD.fov_deg == 98.0
    assert DEFAULT_HMD.combined_width_px == 2880


def test_footprint_validation():
    with pytest.raises(ValueError):
        pixel_footprint(0.0, 23.0)
    with pytest.raises(ValueError):
        pixel_footprint(3.26, -1.0)


# --- log format ------------------------------------------------------------

def test_gaze_log_round_trip(tmp_path):
    log = fx.synthetic_gaze_log(n=40)
    p = tmp_path / "g.log"
    save_gaze_log(p, log)
    back = load_gaze_log(p)
    assert len(back.samples) == 40
    for a, b in zip(log.samples, back.samples):
        assert a.t == b.t
        assert np.array_equal(a.left_eye, b.left_eye)
        assert np.array_equal(a.right_eye, b.right_eye)
        assert np.array_equal(a.direction, b.direction)


def test_parse_gaze_log_errors_carry_line_numbers():
    good = "0.0 0 0 0 1 0 0 0 0 -1\n"
    with pytest.raises(ValueError, match="line 2"):
        parse_gaze_log(good + "0.1 0 0\n")
    with pytest.raises(ValueError, match="line 2"):
        parse_gaze_log(good + "0.1 0 0 0 1 0 0 0 x -1\n")


def test_gaze_log_requires_increasing_time():
    s = GazeSample(0.0, np.zeros(3), np.ones(3), np.array([0.0, 0.0, 1.0]))
    s2 = GazeSample(0.0, np.zeros(3), np.ones(3), np.array([0.0, 0.0, 1.0]))
    with pytest.raises(ValueError, match="strictly increasing"):
        GazeLog(samples=(s, s2))


def test_gaze_sample_rejects_zero_direction():
    with pytest.raises(ValueError):
        GazeSample(0.0, np.zeros(3), np.ones(3), np.zeros(3))
