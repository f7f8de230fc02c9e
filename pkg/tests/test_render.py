import asyncio
import concurrent.futures
import math

import numpy as np
import pytest

import quadtex
from quadtex import diff


def big_plane(z=0.0, size=10.0):
    plane = quadtex.make_plane(1, 1, size)
    return quadtex.QuadMesh(plane.vertices + [0.0, 0.0, z], plane.faces)


def two_planes():
    far, near = quadtex.make_plane(1, 1, 1.0), quadtex.make_plane(1, 1, 0.5)
    vertices = np.concatenate([far.vertices, near.vertices + [0.0, 0.0, 0.5]])
    return quadtex.QuadMesh(vertices, np.concatenate([far.faces, near.faces + 4]))


def constant_features(model, shape, seed=3):
    with diff.no_grad():
        features, coarse = model.features(shape, model.sample_latent(seed))
    return features.data, coarse.data


def test_full_screen_quad(square_camera):
    frag = quadtex.rasterize(big_plane(), square_camera)
    assert frag.mask.all()
    assert (frag.face_id == 0).all()
    assert np.allclose(frag.bary.sum(axis=-1), 1.0)


def test_camera_behind_object():
    camera = quadtex.Camera(0.0, -math.pi / 2, 2.0, math.radians(60.0), 32, target=(0.0, 0.0, 5.0))
    assert not quadtex.rasterize(big_plane(), camera).mask.any()


def test_near_quad_wins(square_camera):
    frag = quadtex.rasterize(two_planes(), square_camera)
    centre = frag.face_id[12:20, 12:20]
    assert (centre == 1).all()
    assert (frag.face_id == 0).any()
    assert (frag.depth[frag.face_id == 1] < 2.0).all()


def test_camera_validation():
    with pytest.raises(quadtex.PoseError):
        quadtex.Camera(0.0, 0.0, 0.0, 1.0, 32)
    with pytest.raises(quadtex.PoseError):
        quadtex.Camera(0.0, 0.0, 2.0, math.pi, 32)


def test_shade_zero_field(tiny_model, cube_shape, cube_view):
    for name, tensor in tiny_model.weights.items():
        if name.startswith('psi.'):
            tensor.data[...] = 0.0
    features, _ = constant_features(tiny_model, cube_shape)
    frag = quadtex.rasterize(cube_shape.mesh, cube_view)
    rgb = quadtex.shade(frag, features, tiny_model.field, cube_shape.mesh).data
    assert np.allclose(rgb[frag.mask], 0.0)
    assert np.allclose(rgb[~frag.mask], -1.0)


def test_shade_matches_pointwise_field(tiny_model, cube_shape, cube_view, rng):
    features, _ = constant_features(tiny_model, cube_shape)
    mesh = cube_shape.mesh
    frag = quadtex.rasterize(mesh, cube_view)
    with diff.no_grad():
        rgb = quadtex.shade(frag, features, tiny_model.field, mesh).data
        vertex_feats = quadtex.vertex_features(features, mesh)
        ys, xs = np.nonzero(frag.mask)
        for i in rng.choice(len(ys), 10, replace=False):
            y, x = ys[i], xs[i]
            sp = quadtex.SurfacePoint(frag.face_id[y, x], frag.half[y, x], frag.bary[y, x])
            expected = quadtex.eval_field(tiny_model.field, sp, vertex_feats, mesh).data
            assert np.allclose(rgb[y, x], expected, atol=1e-5)


def test_shade_gradient(tiny_model, cube_shape, cube_view):
    features, _ = constant_features(tiny_model, cube_shape)
    frag = quadtex.rasterize(cube_shape.mesh, cube_view)
    ys, xs = np.nonzero(frag.mask)
    weights = tiny_model.weights

    def fn(head):
        weights['psi.head.weight'] = head
        rgb = quadtex.shade(frag, features, tiny_model.field, cube_shape.mesh)
        return diff.tsum(rgb[ys[:20], xs[:20]])

    report = quadtex.gradcheck(fn, [weights['psi.head.weight'].data], tolerance=1e-2, eps=1e-6)
    assert report.ok, report


def test_shade_coarse_uniform(cube_shape, cube_view):
    frag = quadtex.rasterize(cube_shape.mesh, cube_view)
    colors = np.tile([0.2, -0.4, 0.6], (cube_shape.mesh.n_faces, 1))
    rgb = quadtex.shade_coarse(frag, colors).data
    assert np.allclose(rgb[frag.mask], [0.2, -0.4, 0.6])


def test_shade_coarse_two_faces():
    cube = quadtex.make_cube()
    camera = quadtex.Camera.from_degrees(45.0, 0.0, 3.0, 40.0, 48)
    frag = quadtex.rasterize(cube, camera)
    colors = np.linspace(-0.9, 0.9, 18).reshape(6, 3)
    rgb = quadtex.shade_coarse(frag, colors).data
    faces, counts = np.unique(frag.face_id[frag.mask], return_counts=True)
    # seen from the equator the top and bottom faces hide behind the two sides facing the camera
    main = faces[np.argsort(counts)[-2:]]
    assert np.sort(counts)[-2:].sum() >= 0.99 * frag.mask.sum()
    for face in main:
        assert np.allclose(rgb[frag.face_id == face], colors[face])


def test_shade_coarse_gradient_counts(cube_view):
    cube = quadtex.make_cube()
    frag = quadtex.rasterize(cube, cube_view)
    colors = diff.Tensor(np.zeros((6, 3)), requires_grad=True)
    rgb = quadtex.shade_coarse(frag, colors)
    mask = frag.mask
    loss = diff.tsum(rgb[:, :, 0] * mask.astype(np.float32)) / float(mask.sum())
    diff.backward(loss)
    for face in range(6):
        fraction = np.sum(frag.face_id == face) / mask.sum()
        assert colors.grad[face, 0] == pytest.approx(fraction, abs=1e-5)
    assert np.allclose(colors.grad[:, 1:], 0.0)


def test_render_noc_centre(square_camera):
    plane = quadtex.make_plane(1, 1, 1.0)
    frag = quadtex.rasterize(plane, square_camera)
    noc = quadtex.render_noc(frag, plane)
    assert np.allclose(noc[16, 16], 0.5, atol=0.05)
    assert np.allclose(noc[~frag.mask], 0.0)


def test_render_noc_range_and_continuity(cube_view):
    cube = quadtex.make_cube()
    frag = quadtex.rasterize(cube, cube_view)
    noc = quadtex.render_noc(frag, cube)
    assert noc.min() >= 0.0 and noc.max() <= 1.0
    # neighbours on the same face move by at most about one pixel footprint
    footprint = 2 * cube_view.distance * math.tan(cube_view.fov / 2) / cube_view.image_size
    same = frag.face_id[:, 1:] == frag.face_id[:, :-1]
    same &= frag.mask[:, 1:]
    step = np.abs(noc[:, 1:] - noc[:, :-1]).max(axis=-1)
    assert (step[same] <= 4 * footprint).all()


def test_pose_bins():
    camera = quadtex.pose_from_bins(0, 0)
    assert math.degrees(camera.azimuth) == pytest.approx(15.0)
    assert math.degrees(camera.elevation) == pytest.approx(6.0)
    cameras = {(round(c.azimuth, 6), round(c.elevation, 6))
               for c in (quadtex.pose_from_bins(a, e)
                         for a in range(quadtex.AZIMUTH_BINS) for e in range(quadtex.ELEVATION_BINS))}
    assert len(cameras) == 60
    assert quadtex.pose_to_bins(quadtex.pose_from_bins(7, 3)) == (7, 3)
    with pytest.raises(quadtex.PoseError):
        quadtex.pose_from_bins(12, 0)


async def test_rasterize_views(loop, cube_shape):
    cameras = [quadtex.Camera.from_degrees(a, 20.0, 3.0, 40.0, 24) for a in (0.0, 90.0, 180.0)]
    frags = await quadtex.rasterize_views(cube_shape.mesh, cameras)
    assert len(frags) == 3
    for frag, camera in zip(frags, cameras):
        assert np.array_equal(frag.face_id, quadtex.rasterize(cube_shape.mesh, camera).face_id)


def test_rasterize_views_on_fresh_loop(cube_shape):
    cameras = [quadtex.Camera.from_degrees(a, 20.0, 3.0, 40.0, 24) for a in (45.0, 135.0)]
    with concurrent.futures.ThreadPoolExecutor(max_workers=2) as executor:
        frags = asyncio.run(quadtex.rasterize_views(cube_shape.mesh, cameras, executor))
    for frag, camera in zip(frags, cameras):
        assert np.array_equal(frag.face_id, quadtex.rasterize(cube_shape.mesh, camera).face_id)


def test_model_render(tiny_model, cube_shape, cube_view):
    view = tiny_model.render(cube_shape, tiny_model.sample_latent(0), cube_view)
    assert view.rgb.shape == (32, 32, 3)
    assert view.mask.any()
    assert np.abs(view.rgb.data).max() <= 1.0
    coarse = tiny_model.render(cube_shape, tiny_model.sample_latent(0), cube_view, coarse=True)
    assert np.array_equal(coarse.mask, view.mask)


def test_mask_ignores_face_order(square_camera, cube_view, rng):
    for mesh, camera in ((quadtex.make_quad_sphere(2).finest, cube_view), (two_planes(), square_camera)):
        shuffled = quadtex.QuadMesh(mesh.vertices, mesh.faces[rng.permutation(mesh.n_faces)])
        frag, other = quadtex.rasterize(mesh, camera), quadtex.rasterize(shuffled, camera)
        assert frag.mask.any()
        assert np.array_equal(frag.mask, other.mask)
        assert np.allclose(frag.depth[frag.mask], other.depth[frag.mask])
