import numpy as np

import quadtex
from quadtex import diff


def test_vertex_features_mean(rng):
    mesh = quadtex.make_plane(2, 1)
    features = rng.standard_normal((2, 3))
    with diff.precision('float64'):
        vertex_feats = quadtex.vertex_features(features, mesh).data
    # vertices 1 and 4 sit on the shared edge
    assert np.allclose(vertex_feats[1], features.mean(axis=0))
    assert np.allclose(vertex_feats[4], features.mean(axis=0))
    assert np.allclose(vertex_feats[0], features[0])
    assert np.allclose(vertex_feats[2], features[1])


def test_vertex_features_cube(rng):
    mesh = quadtex.make_cube()
    features = rng.standard_normal((6, 2))
    with diff.precision('float64'):
        vertex_feats = quadtex.vertex_features(features, mesh).data
    for v in range(8):
        incident = [f for f in range(6) if v in mesh.faces[f]]
        assert len(incident) == 3
        assert np.allclose(vertex_feats[v], features[incident].mean(axis=0))


def test_quad_coords_agree_on_diagonal():
    for t in (0.0, 0.3, 1.0):
        lower = quadtex.quad_coords([0], [[0.0, t, 1.0 - t]])
        upper = quadtex.quad_coords([1], [[t, 0.0, 1.0 - t]])
        assert np.allclose(lower, upper)


def test_zero_field_is_grey(tiny_model, cube_shape, rng):
    for name, tensor in tiny_model.weights.items():
        if name.startswith('psi.'):
            tensor.data[...] = 0.0
    features = rng.standard_normal((24, 8))
    vertex_feats = quadtex.vertex_features(features, cube_shape.mesh)
    sp = quadtex.SurfacePoint(3, 1, (0.2, 0.3, 0.5))
    assert np.allclose(quadtex.eval_field(tiny_model.field, sp, vertex_feats, cube_shape.mesh).data, 0.0)


def test_field_at_vertex_uses_vertex_feature(tiny_model, cube_shape, rng):
    mesh = cube_shape.mesh
    with diff.no_grad():
        vertex_feats = quadtex.vertex_features(rng.standard_normal((24, 8)), mesh)
        face = 5
        corner = mesh.faces[face][quadtex.TRIANGLE_CORNERS[0][0]]
        interpolated = tiny_model.field.interpolate(vertex_feats, mesh, [face], [0], [[1.0, 0.0, 0.0]]).data
    assert np.allclose(interpolated[0], vertex_feats.data[corner], atol=1e-6)


def test_grid_single_sample_is_centre():
    halves, bary = quadtex.grid_samples(1)
    assert np.allclose(quadtex.quad_coords(halves, bary), [[0.0, 0.5, 0.5]])


def test_grid_matches_pointwise(tiny_model, cube_shape, rng):
    mesh = cube_shape.mesh
    with diff.no_grad():
        vertex_feats = quadtex.vertex_features(rng.standard_normal((24, 8)), mesh)
        tile = quadtex.sample_face_grid(tiny_model.field, cube_shape, vertex_feats, 7, 4).data
        halves, bary = quadtex.grid_samples(4)
        for i in range(16):
            sp = quadtex.SurfacePoint(7, halves[i], bary[i])
            expected = quadtex.eval_field(tiny_model.field, sp, vertex_feats, mesh).data
            assert np.allclose(tile[i // 4, i % 4], expected, atol=1e-6)
    assert tile.shape == (4, 4, 3)


def test_grid_coordinates():
    halves, bary = quadtex.grid_samples(4)
    uvw = quadtex.quad_coords(halves, bary)
    ticks = (np.arange(4) + 0.5) / 4
    assert np.allclose(uvw[:, 1].reshape(4, 4), np.tile(ticks, (4, 1)))
    assert np.allclose(uvw[:, 2].reshape(4, 4), np.tile(ticks[:, None], (1, 4)))
    assert np.allclose(bary.sum(axis=1), 1.0)
    assert (bary >= 0).all()


def test_field_gradient(tiny_model, rng):
    coords = quadtex.quad_coords([0, 1, 1], rng.dirichlet(np.ones(3), 3))

    def fn(features):
        return diff.tsum(tiny_model.field(features, coords))

    report = quadtex.gradcheck(fn, [rng.standard_normal((3, 8))], eps=1e-6, tolerance=1e-2)
    assert report.ok, report


def test_field_continuous_across_diagonal(tiny_model, cube_shape, rng):
    mesh = cube_shape.mesh
    offset = 1e-4
    with diff.precision('float64'), diff.no_grad():
        vertex_feats = quadtex.vertex_features(rng.standard_normal((mesh.n_faces, 8)), mesh)
        for face in rng.choice(mesh.n_faces, 6, replace=False):
            for t in (0.2, 0.5, 0.8):
                lower = quadtex.SurfacePoint(face, 0, (offset, t - offset, 1.0 - t))
                upper = quadtex.SurfacePoint(face, 1, (t - offset, offset, 1.0 - t))
                a = quadtex.eval_field(tiny_model.field, lower, vertex_feats, mesh).data
                b = quadtex.eval_field(tiny_model.field, upper, vertex_feats, mesh).data
                assert np.abs(a - b).max() <= 1e-3
                assert np.abs(a).max() <= 1.0
                on_lower = quadtex.SurfacePoint(face, 0, (0.0, t, 1.0 - t))
                on_upper = quadtex.SurfacePoint(face, 1, (t, 0.0, 1.0 - t))
                assert np.allclose(quadtex.eval_field(tiny_model.field, on_lower, vertex_feats, mesh).data,
                                   quadtex.eval_field(tiny_model.field, on_upper, vertex_feats, mesh).data)
