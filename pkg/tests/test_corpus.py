import numpy as np
import pytest

import quadtex


def test_texture_kinds():
    colors = [[0.5, 0.5, 0.5], [-0.5, -0.5, -0.5]]
    checker = quadtex.ProceduralTexture('checker', colors, [1.0, 0.0, 0.0], 2.0)
    out = checker(np.array([[0.1, 0.1, 0.1], [0.6, 0.1, 0.1]]))
    assert np.allclose(out, colors)
    two_tone = quadtex.ProceduralTexture('two_tone', colors, [0.0, 0.0, 1.0], 1.0)
    assert np.allclose(two_tone(np.array([[0.5, 0.5, 0.9], [0.5, 0.5, 0.1]])), colors)
    stripes = quadtex.ProceduralTexture('stripes', colors, [1.0, 0.0, 0.0], 1.0)
    assert np.allclose(stripes(np.array([[0.25, 0.0, 0.0], [0.75, 0.0, 0.0]])), colors)
    with pytest.raises(quadtex.ConfigError):
        quadtex.ProceduralTexture('plaid', colors, [1.0, 0.0, 0.0], 1.0)


def test_random_texture_colors_differ(rng):
    for kind in quadtex.TEXTURES:
        texture = quadtex.random_texture(kind, rng)
        assert np.abs(texture.colors[0] - texture.colors[1]).max() >= 0.5
        assert np.linalg.norm(texture.axis) == pytest.approx(1.0)
        assert texture.to_dict()['kind'] == kind


def test_make_shape(rng):
    assert quadtex.make_shape('cube', 2).hierarchy.face_counts() == [6, 24]
    box = quadtex.make_shape('box', 1, rng)
    assert box.mesh.n_faces == 6
    assert quadtex.make_shape('sphere', 2).mesh.n_faces == 24
    with pytest.raises(quadtex.ConfigError):
        quadtex.make_shape('teapot', 2)


def test_render_textured(cube_view):
    colors = [[0.5, 0.2, -0.3], [-0.6, 0.1, 0.9]]
    texture = quadtex.ProceduralTexture('checker', colors, [1.0, 0.0, 0.0], 3.0)
    image, mask = quadtex.render_textured(quadtex.make_cube(), cube_view, texture)
    assert image.shape == (32, 32, 3) and mask.any()
    assert np.allclose(image[~mask], -1.0)
    pixels = image[mask]
    distance = np.abs(pixels[:, None, :] - np.asarray(colors)[None]).max(axis=2)
    assert (distance.min(axis=1) < 1e-6).all()
    assert (distance.argmin(axis=1) == 0).any() and (distance.argmin(axis=1) == 1).any()


def test_build_corpus():
    corpus = quadtex.build_corpus(size=3, image_size=16, shapes=('cube', 'sphere'), levels=1, seed=4)
    assert len(corpus) == 3
    assert corpus.images.shape == (3, 16, 16, 3)
    assert corpus.masks.shape == (3, 16, 16)
    assert {r['shape'] for r in corpus.records} <= {'cube', 'sphere'}
    again = quadtex.build_corpus(size=3, image_size=16, shapes=('cube', 'sphere'), levels=1, seed=4)
    assert np.array_equal(corpus.images, again.images)


def test_corpus_round_trip(tmp_path):
    corpus = quadtex.build_corpus(size=2, image_size=16, shapes=('cube',), seed=1)
    quadtex.save_corpus(corpus, str(tmp_path / 'corpus'))
    loaded = quadtex.load_corpus(str(tmp_path / 'corpus'))
    assert np.array_equal(loaded.masks, corpus.masks)
    assert np.abs(loaded.images - corpus.images).max() <= 1.0 / 127.5 + 1e-6
    assert loaded.records == corpus.records
    assert quadtex.load_corpus(str(tmp_path / 'corpus'), image_size=32).image_size == 32


def test_load_corpus_missing_index(tmp_path):
    with pytest.raises(quadtex.FormatError):
        quadtex.load_corpus(str(tmp_path))


def test_corpus_shape_check():
    with pytest.raises(quadtex.ShapeMismatch):
        quadtex.Corpus(np.zeros((2, 4, 4, 3)), np.zeros((3, 4, 4)))
