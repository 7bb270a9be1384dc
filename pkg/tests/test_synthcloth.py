"""Folded-cloth scene generator: mesh, folds, render, truth, benchmark.

Controlled fixtures avoid the random placement so wall directions and
depths have closed-form expectations; seeded scenes then check the same
invariants generically.
"""
import math

import numpy as np
import pytest

from clothgrasp.errors import ParameterError
from clothgrasp.graspsel import GraspConfig2D, GraspMode
from clothgrasp.imaging import load_depth_png, load_rgb_png
from clothgrasp.regions import load_probmap, threshold_probs
from clothgrasp.synthcloth import (
    CAMERA_HEIGHT,
    DEFAULT_SIDE,
    FailureReason,
    FoldLine,
    SynthScene,
    apply_fold,
    benchmark,
    default_camera,
    evaluate,
    gt_grasp,
    load_camera_meta,
    make_flat,
    render,
    rigid_move,
    random_scene,
    save_bundle,
)

SQ2 = 1.0 / math.sqrt(2.0)


def _flat_scene(width=160, height=144, side=DEFAULT_SIDE, res=17):
    """Flat cloth centered under the camera, no rotation, no noise."""
    cloth = rigid_move(make_flat(side=side, res=res), 0.0, (-side / 2.0, -side / 2.0))
    cam = default_camera(width, height)
    depth, rgb, truth = render(cloth, cam, width=width, height=height)
    return SynthScene(cloth=cloth, depth=depth, rgb=rgb, truth=truth, cam=cam,
                      seed=0, folds=(), rotation=0.0, translation=(0.0, 0.0),
                      noise_sigma=0.0)


# ---------------------------------------------------------------- mesh

def test_make_flat_geometry():
    c = make_flat(side=0.4, res=2)
    corners = {(0.0, 0.0), (0.4, 0.0), (0.0, 0.4), (0.4, 0.4)}
    assert {tuple(p) for p in c.xy} == corners
    assert np.array_equal(c.uv, c.xy)
    assert np.all(c.layer == 0)
    np.testing.assert_array_equal(c.frames, np.broadcast_to(np.eye(2), (4, 2, 2)))
    # one layer of cloth rests one thickness above the table
    np.testing.assert_allclose(c.z, c.thickness)
    assert len(c.triangles) == 2


def test_make_flat_validation():
    with pytest.raises(ParameterError):
        make_flat(side=0.0)
    with pytest.raises(ParameterError):
        make_flat(res=1)
    with pytest.raises(ParameterError):
        make_flat(thickness=-0.001)


def test_fold_line_normalizes_direction():
    line = FoldLine(point=(0.0, 0.0), direction=(3.0, 4.0))
    assert line.direction == (0.6, 0.8)
    with pytest.raises(ParameterError):
        FoldLine(point=(0.0, 0.0), direction=(0.0, 0.0))


def test_fold_across_midline():
    # direction (0, -1) makes x > 0.2 the moving side
    c = apply_fold(make_flat(side=0.4, res=5),
                   FoldLine(point=(0.2, 0.2), direction=(0.0, -1.0)))
    right = c.uv[:, 0] > 0.2
    # reflected across x = 0.2, landing on the static half one layer up
    np.testing.assert_allclose(c.xy[right, 0], 0.4 - c.uv[right, 0], atol=1e-12)
    np.testing.assert_allclose(c.xy[right, 1], c.uv[right, 1], atol=1e-12)
    assert np.all(c.layer[right] == 1)
    assert np.all(c.layer[~right] == 0)
    np.testing.assert_allclose(
        c.frames[right], np.broadcast_to(np.diag([-1.0, 1.0]), (right.sum(), 2, 2)),
        atol=1e-12)
    np.testing.assert_allclose(
        c.frames[~right], np.broadcast_to(np.eye(2), ((~right).sum(), 2, 2)),
        atol=1e-12)
    # material coordinates never move
    np.testing.assert_array_equal(c.uv, make_flat(side=0.4, res=5).uv)


def test_fold_that_misses_is_identity():
    c = make_flat(side=0.4, res=5)
    far = FoldLine(point=(1.0, 0.0), direction=(0.0, -1.0))
    assert apply_fold(c, far) is c


def test_second_fold_stacks_layers():
    c = apply_fold(make_flat(side=0.4, res=9),
                   FoldLine(point=(0.2, 0.2), direction=(0.0, -1.0)))
    c = apply_fold(c, FoldLine(point=(0.2, 0.2), direction=(1.0, 0.0)))
    # the second flap lands on doubled cloth somewhere
    assert c.layer.max() == 2
    assert np.all(c.layer >= 0)


def test_fold_frames_stay_orthogonal():
    scene = random_scene(seed=12, res=9, width=96, height=96, noise_sigma=0.0,
                         n_folds=(2, 3))
    f = scene.cloth.frames
    prod = np.einsum("nij,nkj->nik", f, f)
    np.testing.assert_allclose(prod, np.broadcast_to(np.eye(2), prod.shape),
                               atol=1e-9)
    dets = np.linalg.det(f)
    np.testing.assert_allclose(np.abs(dets), 1.0, atol=1e-9)


def test_fold_pushes_inward_normal():
    # right-wall inward normal (-1, 0) flips to (1, 0) when the right
    # half folds over a vertical midline
    c = apply_fold(make_flat(side=0.4, res=5),
                   FoldLine(point=(0.2, 0.2), direction=(0.0, -1.0)))
    moved = c.uv[:, 0] > 0.2
    pushed = c.frames[moved] @ np.array([-1.0, 0.0])
    np.testing.assert_allclose(pushed, np.tile([1.0, 0.0], (moved.sum(), 1)),
                               atol=1e-12)


# ---------------------------------------------------------------- camera

def test_default_camera_fov_invariant_across_sizes():
    # the same workspace corner lands at the same fractional image position
    corner = np.array([0.3, 0.3, 0.0])
    fracs = []
    for w, h in ((640, 576), (160, 144)):
        cam = default_camera(w, h)
        pc = (corner - cam.translation) @ cam.rotation
        u = cam.fx * pc[0] / pc[2] + cam.cx
        fracs.append((u - cam.cx) / w)
    assert fracs[0] == pytest.approx(fracs[1], abs=1e-12)


# ---------------------------------------------------------------- render

def test_flat_render_depths_exact():
    scene = _flat_scene()
    on_cloth = scene.truth.top_layer >= 0
    assert on_cloth.any()
    # nadir camera: depth is plane height, one thickness above the table
    np.testing.assert_allclose(scene.depth.data[on_cloth],
                               CAMERA_HEIGHT - 0.002, atol=1e-9)
    np.testing.assert_allclose(scene.depth.data[~on_cloth], CAMERA_HEIGHT,
                               atol=1e-9)
    assert np.all(scene.truth.top_layer[on_cloth] == 0)


def test_flat_band_ratios_match_material_areas():
    scene = _flat_scene(width=640, height=576, res=33)
    cloth_px = (scene.truth.top_layer >= 0).sum()
    side = DEFAULT_SIDE
    outer_frac = 1.0 - (side - 0.03) ** 2 / side ** 2
    corner_frac = 4.0 * 0.03 ** 2 / side ** 2
    assert scene.truth.outer.sum() / cloth_px == pytest.approx(outer_frac, rel=0.10)
    assert scene.truth.corner.sum() / cloth_px == pytest.approx(corner_frac, rel=0.10)
    assert scene.truth.inner.sum() > 0


def test_truth_region_disjointness():
    for seed in (3, 4, 5):
        t = random_scene(seed=seed, res=9, width=96, height=96,
                         noise_sigma=0.0).truth
        assert not (t.inner & t.outer).any()
        assert not (t.inner & t.corner).any()
    # outer and corner overlap by design at the material corners
    flat = _flat_scene()
    assert (flat.truth.outer & flat.truth.corner).any()


def test_flat_wall_directions():
    scene = _flat_scene()
    cam = scene.cam
    t = scene.truth
    ys, xs = np.nonzero(t.outer & np.all(np.isfinite(t.edge_dir), axis=2))
    right = (xs - cam.cx > 20) & (np.abs(ys - cam.cy) < 10)
    assert right.any()
    # inward at the right wall is -x in the world, -u in the image
    np.testing.assert_allclose(t.edge_dir[ys[right], xs[right]],
                               np.tile([-1.0, 0.0], (right.sum(), 1)), atol=1e-9)

    cys, cxs = np.nonzero(t.corner & np.all(np.isfinite(t.corner_dir), axis=2))
    ur = (cxs > cam.cx) & (cys < cam.cy)
    assert ur.any()
    # material corner (side, side) renders upper-right; the world diagonal
    # (-1,-1)/sqrt2 maps through the nadir extrinsic to image (-1,+1)/sqrt2
    np.testing.assert_allclose(t.corner_dir[cys[ur], cxs[ur]],
                               np.tile([-SQ2, SQ2], (ur.sum(), 1)), atol=1e-9)


def test_fold_shrinks_silhouette():
    side = DEFAULT_SIDE
    flat = rigid_move(make_flat(side=side, res=17), 0.0, (-side / 2, -side / 2))
    cam = default_camera(160, 144)
    _, _, t0 = render(flat, cam, width=160, height=144)
    folded = apply_fold(flat, FoldLine(point=(0.0, 0.0), direction=(0.0, -1.0)))
    _, _, t1 = render(folded, cam, width=160, height=144)
    assert (t1.top_layer >= 0).sum() < (t0.top_layer >= 0).sum()


def test_render_noise_rules():
    cloth = rigid_move(make_flat(res=9), 0.0, (-DEFAULT_SIDE / 2, -DEFAULT_SIDE / 2))
    cam = default_camera(96, 96)
    with pytest.raises(ParameterError):
        render(cloth, cam, width=96, height=96, noise_sigma=-0.001)
    with pytest.raises(ParameterError):
        render(cloth, cam, width=96, height=96, noise_sigma=0.002)

    d0, _, t0 = render(cloth, cam, width=96, height=96)
    rng = np.random.default_rng(5)
    d1, _, t1 = render(cloth, cam, width=96, height=96, noise_sigma=0.002, rng=rng)
    # truth is computed before the noise lands
    assert np.array_equal(t0.outer, t1.outer)
    assert np.array_equal(t0.top_layer, t1.top_layer)
    assert not np.array_equal(d0.data, d1.data)

    d2 = render(cloth, cam, width=96, height=96, noise_sigma=0.002,
                rng=np.random.default_rng(5))[0]
    assert np.array_equal(d1.data, d2.data)


def test_render_rejects_cloth_behind_camera():
    from clothgrasp.geometry import CameraModel
    cloth = make_flat(res=5)
    below = CameraModel(fx=100.0, fy=100.0, cx=47.5, cy=47.5,
                        rotation=np.diag([1.0, -1.0, -1.0]),
                        translation=np.array([0.0, 0.0, -0.1]))
    with pytest.raises(ParameterError):
        render(cloth, below, width=96, height=96)


# ---------------------------------------------------------------- scenes

def test_random_scene_deterministic():
    a = random_scene(seed=21, res=9, width=96, height=96)
    b = random_scene(seed=21, res=9, width=96, height=96)
    assert np.array_equal(a.depth.data, b.depth.data)
    assert np.array_equal(a.cloth.xy, b.cloth.xy)
    assert np.array_equal(a.truth.outer, b.truth.outer)
    assert a.folds == b.folds
    c = random_scene(seed=22, res=9, width=96, height=96)
    assert not np.array_equal(a.depth.data, c.depth.data)


def test_random_scene_fold_counts():
    s = random_scene(seed=2, res=9, width=96, height=96, n_folds=(1, 3),
                     noise_sigma=0.0)
    assert 1 <= len(s.folds) <= 3
    flat = random_scene(seed=2, res=9, width=96, height=96, n_folds=0,
                        noise_sigma=0.0)
    assert flat.folds == ()
    assert np.all(flat.cloth.layer == 0)


def test_scene_masks_mirror_truth():
    scene = random_scene(seed=6, res=9, width=96, height=96, noise_sigma=0.0)
    m = scene.masks()
    assert np.array_equal(m.outer, scene.truth.outer)
    assert np.array_equal(m.inner, scene.truth.inner)
    assert np.array_equal(m.corner, scene.truth.corner)


# ---------------------------------------------------------------- scoring

def test_evaluate_ground_truth_grasp():
    scene = random_scene(seed=7, res=17, width=160, height=144, noise_sigma=0.0)
    g = gt_grasp(scene)
    out = evaluate(g, scene)
    assert out.success and out.reason is FailureReason.NONE
    # the truth direction scores zero angular error even at zero tolerance
    assert evaluate(g, scene, dir_tol_deg=0.0).success


def test_evaluate_reversed_direction_fails():
    scene = random_scene(seed=7, res=17, width=160, height=144, noise_sigma=0.0)
    g = gt_grasp(scene)
    rev = GraspConfig2D(point=g.point, angle_rad=g.angle_rad + math.pi,
                        uncertainty=None, mode=g.mode)
    out = evaluate(rev, scene)
    assert not out.success
    assert out.reason is FailureReason.DIRECTION_ERROR
    assert out.angular_error_deg == pytest.approx(180.0, abs=1e-6)


def test_evaluate_wrong_label_is_misdetection():
    scene = _flat_scene()
    deep = ~scene.truth.outer & ~scene.truth.corner & (scene.truth.top_layer >= 0)
    ys, xs = np.nonzero(deep)
    g = GraspConfig2D(point=(int(xs[0]), int(ys[0])), angle_rad=0.0,
                      uncertainty=None, mode=GraspMode.EDGE)
    out = evaluate(g, scene)
    assert not out.success and out.reason is FailureReason.MISDETECTION


def test_evaluate_blocked_approach_fails():
    scene = _flat_scene()
    cam = scene.cam
    t = scene.truth
    ys, xs = np.nonzero(t.outer & np.all(np.isfinite(t.edge_dir), axis=2))
    left = (cam.cx - xs > 20) & (np.abs(ys - cam.cy) < 10)
    x, y = int(xs[left][0]), int(ys[left][0])
    # outward angle: 180 degrees off the truth, tolerated at tol=180, but
    # the approach then marches inward across 30 cm of cloth
    g = GraspConfig2D(point=(x, y), angle_rad=math.pi, uncertainty=None,
                      mode=GraspMode.EDGE)
    out = evaluate(g, scene, dir_tol_deg=180.0)
    assert not out.success
    assert out.reason is FailureReason.DIRECTION_ERROR
    assert out.angular_error_deg == pytest.approx(180.0, abs=1e-6)


def test_evaluate_corner_mode():
    scene = _flat_scene()
    g = gt_grasp(scene, mode=GraspMode.CORNER)
    assert scene.truth.corner[g.point[1], g.point[0]]
    assert evaluate(g, scene).success


def test_evaluate_validation():
    scene = _flat_scene()
    g = GraspConfig2D(point=(10_000, 3), angle_rad=0.0, uncertainty=None,
                      mode=GraspMode.EDGE)
    with pytest.raises(ParameterError):
        evaluate(g, scene)
    with pytest.raises(ParameterError):
        evaluate(gt_grasp(scene), scene, dir_tol_deg=-1.0)


# ---------------------------------------------------------------- benchmark

def test_benchmark_row_accounting_and_determinism():
    rows = benchmark(["ours", "nodu"], n_scenes=2, seed=5, res=9,
                     noise_sigma=0.0)
    assert [r.method for r in rows] == ["ours", "no-directional-uncertainty"]
    for r in rows:
        assert r.scenes == 2
        assert r.successes + r.misdetection + r.direction_error + r.no_candidates == 2
        assert r.rate == r.successes / 2
    assert rows == benchmark(["ours", "nodu"], n_scenes=2, seed=5, res=9,
                             noise_sigma=0.0)


def test_benchmark_method_streams_independent():
    # dropping a method must not change another method's row
    both = benchmark(["nodu", "nodp"], n_scenes=2, seed=5, res=9, noise_sigma=0.0)
    alone = benchmark(["nodp"], n_scenes=2, seed=5, res=9, noise_sigma=0.0)
    assert both[1] == alone[0]


def test_benchmark_flat_scenes_at_loose_tolerance():
    rows = benchmark(["ours"], n_scenes=3, seed=9, res=17, n_folds=0,
                     noise_sigma=0.0, dir_tol_deg=180.0)
    assert rows[0].rate == 1.0


def test_benchmark_validation():
    with pytest.raises(ParameterError):
        benchmark(["ours"], n_scenes=0, seed=1)
    with pytest.raises(ParameterError):
        benchmark(["telepathy"], n_scenes=1, seed=1)


# ---------------------------------------------------------------- bundles

def test_bundle_round_trip(tmp_path):
    scene = random_scene(seed=3, res=9, width=160, height=144)
    paths = save_bundle(scene, tmp_path, "scene_0003")

    depth = load_depth_png(paths["depth"])
    assert np.abs(depth.data - scene.depth.data).max() <= 0.0005 + 1e-12

    rgb = load_rgb_png(paths["rgb"])
    assert np.array_equal(rgb.data, scene.rgb.data)

    probs = load_probmap(paths["regions"])
    masks = threshold_probs(probs)
    assert np.array_equal(masks.outer, scene.truth.outer)
    assert np.array_equal(masks.inner, scene.truth.inner)
    assert np.array_equal(masks.corner, scene.truth.corner)

    cam = load_camera_meta(paths["meta"])
    assert cam.fx == scene.cam.fx and cam.fy == scene.cam.fy
    assert cam.cx == scene.cam.cx and cam.cy == scene.cam.cy
    assert np.array_equal(cam.rotation, scene.cam.rotation)
    assert np.array_equal(cam.translation, scene.cam.translation)

    import json
    meta = json.loads(paths["meta"].read_text())
    assert len(meta["folds"]) == len(scene.folds)
    assert meta["width"] == 160 and meta["height"] == 144


def test_bundle_truth_channels(tmp_path):
    scene = random_scene(seed=3, res=9, width=160, height=144)
    paths = save_bundle(scene, tmp_path, "s")
    from PIL import Image
    arr = np.asarray(Image.open(paths["truth"]))
    # blue channel stores the visible layer, shifted so table pixels are 0
    np.testing.assert_array_equal(arr[..., 2].astype(np.int64),
                                  np.clip(scene.truth.top_layer + 1, 0, 255))
    # direction components round trip through the byte encoding
    t = scene.truth
    merged = np.where(np.isfinite(t.edge_dir), t.edge_dir, t.corner_dir)
    defined = np.all(np.isfinite(merged), axis=2)
    dec = arr[..., :2].astype(np.float64) / 255.0 * 2.0 - 1.0
    assert np.abs(dec[defined] - merged[defined]).max() <= 1.0 / 127.0
