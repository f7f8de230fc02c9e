import json

import numpy as np
import pytest

import quadtex
from quadtex import diff


@pytest.fixture
def images(rng):
    a = rng.uniform(-1.0, 1.0, (16, 16, 3))
    b = rng.uniform(-1.0, 1.0, (16, 16, 3))
    mask = np.zeros((16, 16), dtype=bool)
    mask[2:14, 3:13] = True
    return a, b, mask


def test_tiny_extractor_taps(tiny_extractor, rng):
    taps = tiny_extractor(rng.uniform(-1.0, 1.0, (32, 32, 3)))
    assert [t.shape for t in taps] == [(16, 32, 32), (32, 32, 32), (64, 16, 16), (64, 8, 8), (64, 8, 8)]
    assert all((t.data >= 0).all() for t in taps)
    assert not tiny_extractor.weights.trainable()


def test_extractor_needs_five_taps(tmp_path):
    path = tmp_path / 'small.json'
    path.write_text(json.dumps({'layers': [{'type': 'conv', 'out': 4}], 'taps': [1]}))
    with pytest.raises(quadtex.ExtractorError):
        quadtex.load_extractor(str(path))


def test_missing_extractor(tmp_path):
    with pytest.raises(quadtex.ExtractorError):
        quadtex.load_extractor(str(tmp_path / 'absent.json'))
    with pytest.raises(FileNotFoundError):
        quadtex.load_extractor(str(tmp_path / 'absent.json'))


def test_identical_images_have_zero_loss(tiny_extractor, images):
    a, _, mask = images
    loss = quadtex.pyramid_style_loss(a, mask, a, mask, tiny_extractor, levels=2)
    assert float(loss.data) == pytest.approx(0.0, abs=1e-9)


def test_style_loss_symmetric(tiny_extractor, images):
    a, b, mask = images
    ab = float(quadtex.pyramid_style_loss(a, mask, b, mask, tiny_extractor, levels=2).data)
    ba = float(quadtex.pyramid_style_loss(b, mask, a, mask, tiny_extractor, levels=2).data)
    assert ab > 0
    assert ab == pytest.approx(ba, rel=1e-5)


def test_empty_masks(tiny_extractor, images):
    a, b, _ = images
    empty = np.zeros((16, 16), dtype=bool)
    loss = quadtex.pyramid_style_loss(a, empty, b, empty, tiny_extractor, levels=2)
    assert float(loss.data) == 0.0


def test_style_loss_gradient_flows(tiny_extractor, images):
    a, b, mask = images
    image = diff.Tensor(a, requires_grad=True)
    diff.backward(quadtex.pyramid_style_loss(image, mask, b, mask, tiny_extractor, levels=2))
    assert image.grad.shape == (16, 16, 3)
    assert np.abs(image.grad).sum() > 0


def test_cached_target_features(tiny_extractor, images):
    a, b, mask = images
    cached = quadtex.pyramid_features(b, mask, tiny_extractor, levels=2)
    direct = float(quadtex.pyramid_style_loss(a, mask, b, mask, tiny_extractor, levels=2).data)
    reused = float(quadtex.pyramid_style_loss(a, mask, None, None, tiny_extractor, levels=2,
                                              target_feats=cached).data)
    assert direct == pytest.approx(reused)


def test_downsample():
    image = np.arange(16 * 3, dtype=np.float64).reshape(4, 4, 3)
    mask = np.ones((4, 4), dtype=bool)
    mask[0, 0] = False
    with diff.precision('float64'):
        small, small_mask = quadtex.downsample(image, mask)
    assert small.shape == (2, 2, 3)
    assert np.allclose(small.data[0, 0], image[:2, :2].mean(axis=(0, 1)))
    assert not small_mask[0, 0] and small_mask[1, 1]


def test_sample_query_patch_centre(rng):
    mask = np.zeros((40, 40), dtype=bool)
    mask[20, 20] = True
    assert quadtex.sample_query_patch(mask, 16, rng) == (20, 20, 16)


def test_sample_query_patch_shrinks(rng):
    mask = np.zeros((40, 40), dtype=bool)
    mask[2, 3] = True
    assert quadtex.sample_query_patch(mask, 16, rng) is None
    assert quadtex.sample_query_patch(mask, 16, rng, min_size=4) == (3, 2, 4)


def test_query_patches_stay_inside(rng):
    mask = rng.uniform(size=(48, 40)) > 0.7
    for _ in range(50):
        x, y, size = quadtex.sample_query_patch(mask, 16, rng)
        half = size // 2
        assert mask[y, x]
        assert x - half >= 0 and x + half <= 40
        assert y - half >= 0 and y + half <= 48
        assert quadtex.crop(mask, (x, y), size).shape == (size, size)


def test_match_patch_self(rng):
    noc = rng.uniform(size=(20, 20, 3))
    mask = np.ones((20, 20), dtype=bool)
    for center in [(0, 0), (5, 17), (19, 3)]:
        assert quadtex.match_patch(noc, noc, mask, center) == center


def test_match_patch_ties_scanline_order():
    noc = np.full((10, 10, 3), 0.5)
    mask = np.zeros((10, 10), dtype=bool)
    mask[4, 7] = mask[4, 2] = mask[6, 1] = True
    assert quadtex.match_patch(noc, noc, mask, (5, 5)) == (2, 4)


def test_match_patch_brute_force(rng):
    query_noc = rng.uniform(size=(12, 12, 3))
    render_noc = rng.uniform(size=(12, 12, 3))
    mask = rng.uniform(size=(12, 12)) > 0.5
    for _ in range(10):
        x, y = rng.integers(12, size=2)
        best, best_distance = None, np.inf
        for v in range(12):
            for u in range(12):
                distance = np.sum((render_noc[v, u] - query_noc[y, x]) ** 2)
                if mask[v, u] and distance < best_distance:
                    best, best_distance = (u, v), distance
        assert quadtex.match_patch(query_noc, render_noc, mask, (x, y)) == best


def test_match_patch_empty_render():
    noc = np.zeros((4, 4, 3))
    with pytest.raises(quadtex.EmptyMask):
        quadtex.match_patch(noc, noc, np.zeros((4, 4), dtype=bool), (1, 1))


def test_clamp_center():
    assert quadtex.clamp_center((1, 30), 8, (32, 32)) == (4, 28)
    assert quadtex.clamp_center((10, 12), 8, (32, 32)) == (10, 12)


def test_total_style_loss_terms(tiny_extractor, images, rng):
    a, b, mask = images
    noc = rng.uniform(size=(16, 16, 3))
    spec = quadtex.StyleLossSpec(w_glob=2.0, n_levels=1, n_patches=1, patch_size=8, min_patch_size=4)
    global_only = quadtex.total_style_loss(b, a, noc, noc, mask, mask, spec, rng, tiny_extractor, use_patch=False)
    expected = 2.0 * float(quadtex.pyramid_style_loss(a, mask, b, mask, tiny_extractor, levels=1).data)
    assert float(global_only.data) == pytest.approx(expected, rel=1e-5)
    both = quadtex.total_style_loss(b, a, noc, noc, mask, mask, spec, rng, tiny_extractor)
    assert float(both.data) >= float(global_only.data)
