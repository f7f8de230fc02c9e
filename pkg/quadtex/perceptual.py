"""
Perceptual losses: masked Gram-matrix style losses over an image pyramid, and
the patch term that pairs a random object patch of the query with the render
patch whose object coordinates are closest.
"""
import json
import logging
import os

import numpy as np

from . import diff
from .exceptions import EmptyMask, ExtractorError, ShapeMismatch
from .formats import read_m2tw
from .weights import WeightSet, he_normal

__all__ = ['FeatureExtractor', 'TapFeatures', 'load_extractor', 'build_tiny_extractor', 'extract_features',
           'style_loss', 'pyramid_style_loss', 'global_style_loss', 'sample_query_patch', 'match_patch',
           'clamp_center', 'crop', 'patch_style_loss', 'total_style_loss', 'pyramid_features', 'downsample', 'TINYVGG_PATH']


LOG = logging.getLogger(__name__)

TINYVGG_PATH = os.path.join(os.path.dirname(__file__), 'data', 'tinyvgg.json')


class FeatureExtractor:
    """A conv/relu/pool stack described by JSON; activations after conv ``taps`` (1-based) are exposed."""

    def __init__(self, descriptor, weights):
        self.descriptor = descriptor
        self.layers = descriptor['layers']
        self.taps = tuple(descriptor['taps'])
        self.weights = weights
        convs = sum(1 for layer in self.layers if layer['type'] == 'conv')
        if len(self.taps) != 5 or max(self.taps) > convs:
            raise ExtractorError('extractor needs 5 taps within its {0} convolutions, got {1}'.format(
                convs, self.taps))
        weights.freeze()

    @property
    def name(self):
        return self.descriptor.get('name', 'extractor')

    def __call__(self, image):
        """Tap activations, each (C, h, w), of an (H, W, 3) image in [-1, 1]."""
        image = diff.as_tensor(image)
        x = diff.reshape(diff.transpose(image, (2, 0, 1)), (1, 3) + image.shape[:2])
        outputs = []
        conv = 0
        for layer in self.layers:
            if layer['type'] == 'pool':
                x = diff.avgpool2x(_even(x))
                continue
            conv += 1
            x = diff.relu(diff.conv2d(x, self.weights['fx.conv.{}.weight'.format(conv)],
                                      self.weights['fx.conv.{}.bias'.format(conv)]))
            if conv in self.taps:
                outputs.append(diff.reshape(x, x.shape[1:]))
            if conv == max(self.taps):
                break
        return outputs

    def __repr__(self):
        return '<FeatureExtractor name={0} taps={1}>'.format(self.name, self.taps)


def _even(x):
    """Crop an NCHW tensor to even spatial size."""
    h, w = x.shape[2] - x.shape[2] % 2, x.shape[3] - x.shape[3] % 2
    return x if (h, w) == x.shape[2:] else diff.getitem(x, (slice(None), slice(None), slice(0, h), slice(0, w)))


def _init_weights(descriptor, rng):
    weights = WeightSet()
    channels = 3
    kernel = descriptor.get('kernel', 3)
    conv = 0
    for layer in descriptor['layers']:
        if layer['type'] != 'conv':
            continue
        conv += 1
        fan_in = channels * kernel * kernel
        weights.add('fx.conv.{}.weight'.format(conv), he_normal(rng, (layer['out'], channels, kernel, kernel), fan_in))
        weights.add('fx.conv.{}.bias'.format(conv), np.zeros(layer['out']))
        channels = layer['out']
    return weights


def load_extractor(path):
    """Read a descriptor; weights come from its ``weights`` M2TW file or are generated from its ``seed``."""
    try:
        with open(path) as f:
            descriptor = json.load(f)
    except FileNotFoundError:
        raise ExtractorError('extractor descriptor not found: {}'.format(path))
    weights = _init_weights(descriptor, np.random.default_rng(descriptor.get('seed', 0)))
    if descriptor.get('weights'):
        weights_path = os.path.join(os.path.dirname(os.path.abspath(path)), descriptor['weights'])
        if not os.path.exists(weights_path):
            raise ExtractorError('extractor weights not found: {}'.format(weights_path))
        weights.load_state_dict(read_m2tw(weights_path))
    LOG.debug('Loaded extractor %s from %s', descriptor.get('name'), path)
    return FeatureExtractor(descriptor, weights)


def build_tiny_extractor(seed=None):
    with open(TINYVGG_PATH) as f:
        descriptor = json.load(f)
    if seed is not None:
        descriptor['seed'] = seed
    return FeatureExtractor(descriptor, _init_weights(descriptor, np.random.default_rng(descriptor['seed'])))


class TapFeatures:
    """Masked activations of one tap and the mask they were filtered with."""

    def __init__(self, values, mask):
        self.values = values
        self.mask = mask

    @property
    def valid(self):
        return int(self.mask.sum())

    def gram(self):
        channels = self.values.shape[0]
        flat = diff.reshape(self.values, (channels, -1))
        return diff.gram(flat, channels * max(self.valid, 1))


def _downsample_mask(mask, shape):
    mask = np.asarray(mask, dtype=bool)
    while mask.shape[0] > shape[0] or mask.shape[1] > shape[1]:
        mask = mask[::2, ::2][:shape[0], :shape[1]] if mask.shape[0] >= 2 * shape[0] else mask[:shape[0], :shape[1]]
    return mask


def extract_features(image, mask, extractor):
    taps = []
    for activation in extractor(image):
        tap_mask = _downsample_mask(mask, activation.shape[1:])
        values = activation * tap_mask[None, :, :].astype(activation.data.dtype)
        taps.append(TapFeatures(values, tap_mask))
    return taps


def style_loss(feats_a, feats_b):
    if len(feats_a) != len(feats_b):
        raise ShapeMismatch('style_loss: {0} taps vs {1}'.format(len(feats_a), len(feats_b)))
    total = diff.as_tensor(0.0)
    for a, b in zip(feats_a, feats_b):
        if a.values.shape[0] != b.values.shape[0]:
            raise ShapeMismatch('style_loss: tap channels {0} vs {1}'.format(a.values.shape, b.values.shape))
        delta = a.gram() - b.gram()
        total = total + diff.tsum(delta * delta)
    return total


def downsample(image, mask):
    """Half resolution: area average for the (H, W, 3) image, nearest for the mask."""
    image = diff.as_tensor(image)
    h, w = image.shape[0] - image.shape[0] % 2, image.shape[1] - image.shape[1] % 2
    chw = diff.reshape(diff.transpose(image[:h, :w], (2, 0, 1)), (1, 3, h, w))
    pooled = diff.avgpool2x(chw)
    return diff.transpose(diff.reshape(pooled, (3, h // 2, w // 2)), (1, 2, 0)), np.asarray(mask)[:h:2, :w:2]


def _pyramid(image, mask, levels):
    out = [(diff.as_tensor(image), np.asarray(mask, dtype=bool))]
    for _ in range(levels - 1):
        out.append(downsample(*out[-1]))
    return out


def pyramid_style_loss(image_a, mask_a, image_b, mask_b, extractor, levels=3, target_feats=None):
    """Sum of style losses over ``levels`` resolutions. ``target_feats`` caches the pyramid of image_b."""
    if target_feats is None:
        target_feats = pyramid_features(image_b, mask_b, extractor, levels)
    total = diff.as_tensor(0.0)
    for (image, mask), target in zip(_pyramid(image_a, mask_a, levels), target_feats):
        total = total + style_loss(extract_features(image, mask, extractor), target)
    return total


def pyramid_features(image, mask, extractor, levels=3):
    with diff.no_grad():
        return [extract_features(level_image, level_mask, extractor)
                for level_image, level_mask in _pyramid(image, mask, levels)]


def global_style_loss(query, query_mask, render, render_mask, spec, extractor, query_feats=None):
    return pyramid_style_loss(render, render_mask, query, query_mask, extractor, spec.n_levels, query_feats)


def sample_query_patch(mask, patch_size, rng, min_size=16):
    """
    ``(x, y, size)`` of a patch centered on a foreground pixel and lying inside the image.

    The size shrinks in steps of 2 down to ``min_size`` when no center fits;
    ``None`` means no patch can be placed.
    """
    mask = np.asarray(mask, dtype=bool)
    height, width = mask.shape
    size = patch_size
    while size >= min_size:
        half = size // 2
        window = mask[half:height - half + 1, half:width - half + 1]
        rows, cols = np.nonzero(window)
        if len(rows):
            pick = rng.integers(len(rows))
            if size != patch_size:
                LOG.debug('Patch shrunk from %d to %d', patch_size, size)
            return int(cols[pick]) + half, int(rows[pick]) + half, size
        size -= 2
    return None


def match_patch(query_noc, render_noc, render_mask, center):
    """Foreground render pixel with the closest object coordinate; first in scanline order on ties."""
    x, y = center
    candidates = np.flatnonzero(np.asarray(render_mask, dtype=bool).reshape(-1))
    if not len(candidates):
        raise EmptyMask('render has no foreground to match against')
    target = np.asarray(query_noc)[y, x]
    distance = np.sum((np.asarray(render_noc).reshape(-1, 3)[candidates] - target) ** 2, axis=1)
    best = candidates[int(np.argmin(distance))]
    width = np.asarray(render_mask).shape[1]
    return int(best % width), int(best // width)


def clamp_center(center, size, shape):
    half = size // 2
    height, width = shape[:2]
    x, y = center
    return min(max(x, half), width - half), min(max(y, half), height - half)


def crop(image, center, size):
    x, y = center
    half = size // 2
    window = (slice(y - half, y + half), slice(x - half, x + half))
    if isinstance(image, diff.Tensor):
        return image[window]
    return np.asarray(image)[window]


def patch_style_loss(query, render, query_noc, render_noc, query_mask, render_mask, spec, rng, extractor):
    total = diff.as_tensor(0.0)
    render_mask = np.asarray(render_mask, dtype=bool)
    for _ in range(spec.n_patches):
        patch = sample_query_patch(query_mask, spec.patch_size, rng, spec.min_patch_size)
        if patch is None:
            LOG.warning('No query patch fits the object, skipping the patch term')
            continue
        x, y, size = patch
        if spec.noc_guidance:
            matched = match_patch(query_noc, render_noc, render_mask, (x, y))
        else:
            candidates = np.flatnonzero(render_mask.reshape(-1))
            if not len(candidates):
                raise EmptyMask('render has no foreground to sample a patch from')
            pick = candidates[rng.integers(len(candidates))]
            matched = int(pick % render_mask.shape[1]), int(pick // render_mask.shape[1])
        matched = clamp_center(matched, size, render_mask.shape)
        total = total + pyramid_style_loss(
            crop(render, matched, size), crop(render_mask, matched, size),
            crop(query, (x, y), size), crop(query_mask, (x, y), size), extractor, spec.n_levels)
    return total


def total_style_loss(query, render, query_noc, render_noc, query_mask, render_mask, spec, rng, extractor,
                     query_feats=None, use_global=True, use_patch=None):
    """Weighted sum of the global and patch style losses, each switched by the arguments and ``spec``."""
    use_patch = spec.use_patch_loss if use_patch is None else use_patch
    total = diff.as_tensor(0.0)
    if use_global:
        total = total + spec.w_glob * global_style_loss(query, query_mask, render, render_mask, spec, extractor,
                                                        query_feats)
    if use_patch:
        total = total + spec.w_patch * patch_style_loss(query, render, query_noc, render_noc, query_mask,
                                                        render_mask, spec, rng, extractor)
    return total
