"""
Face-convolutional generator.

The surface encoder runs residual face-conv blocks from the finest hierarchy level to
the coarsest on the per-face geometry channels. The decoder walks back up,
concatenating the encoder output of every level, and runs one style-modulated
synthesis block per level. Its finest output is the per-face feature map.
"""
import logging

import numpy as np

from . import diff
from .exceptions import LevelMismatch, ShapeMismatch
from .geometry import BOUNDARY, FaceGeometry
from .weights import he_normal

__all__ = ['FaceFeatureMap', 'TextureLatent', 'Generator', 'face_conv', 'modulated_face_conv', 'face_pool',
           'face_unpool', 'mapping_network', 'generate_features', 'init_generator_weights', 'synthesis_conv_names']


LOG = logging.getLogger(__name__)

LRELU_SLOPE = 0.2
DEMOD_EPS = 1e-8


class FaceFeatureMap:
    def __init__(self, level, values):
        self.level = level
        self.values = diff.as_tensor(values)

    @property
    def channels(self):
        return self.values.shape[1]

    def __len__(self):
        return self.values.shape[0]

    def __repr__(self):
        return '<FaceFeatureMap level={0} faces={1} channels={2}>'.format(self.level, len(self), self.channels)


class TextureLatent:
    """A texture code ``z`` and, once mapped, its style vector ``w``."""

    def __init__(self, z, w=None):
        self.z = diff.as_tensor(z)
        self.w = w
        if not np.isfinite(self.z.data).all():
            raise ValueError('latent code has non-finite entries')

    @classmethod
    def sample(cls, rng, dim=512):
        return cls(rng.standard_normal(dim))

    def __repr__(self):
        return '<TextureLatent dim={0} mapped={1}>'.format(self.z.shape[0], self.w is not None)


def _padded_neighbors(x, adjacency):
    adjacency = np.asarray(adjacency)
    if x.shape[0] != len(adjacency):
        raise LevelMismatch('{0} feature rows for a level with {1} faces'.format(x.shape[0], len(adjacency)))
    padded = diff.concat([x, np.zeros((1, x.shape[1]), dtype=x.data.dtype)], axis=0)
    index = np.where(adjacency == BOUNDARY, x.shape[0], adjacency)
    return diff.take(padded, index)


def face_conv(x, weight, bias, adjacency):
    """
    ``out[f] = x[f] @ W[0] + sum_k x[adj[f, k]] @ W[k + 1] + bias``

    ``weight`` is (5, C_in, C_out); boundary slots contribute zero features.
    """
    x, weight = diff.as_tensor(x), diff.as_tensor(weight)
    if weight.ndim != 3 or weight.shape[0] != 5 or weight.shape[1] != x.shape[1]:
        raise ShapeMismatch('face_conv: kernel {0} does not fit features {1}'.format(weight.shape, x.shape))
    faces, channels = x.shape
    stacked = diff.concat([diff.reshape(x, (faces, 1, channels)), _padded_neighbors(x, adjacency)], axis=1)
    out = diff.reshape(stacked, (faces, 5 * channels)) @ diff.reshape(weight, (5 * channels, weight.shape[2]))
    return out if bias is None else out + bias


def modulated_face_conv(x, weight, style, adjacency, demodulate=True):
    weight = diff.as_tensor(weight) * diff.reshape(style, (1, -1, 1))
    if demodulate:
        scale = (diff.tsum(weight * weight, axis=(0, 1), keepdims=True) + DEMOD_EPS) ** -0.5
        weight = weight * scale
    return face_conv(x, weight, None, adjacency)


def face_pool(x, children):
    if children is None:
        raise LevelMismatch('level 0 has no finer level to pool from')
    return diff.mean(diff.take(x, children), axis=1)


def face_unpool(x, parent_of):
    if parent_of is None:
        raise LevelMismatch('level 0 has no coarser level to unpool from')
    return diff.take(x, parent_of)


def _linear(weights, prefix, x):
    return x @ weights[prefix + '.weight'] + weights[prefix + '.bias']


def mapping_network(weights, z, layers=8):
    """RMS-normalized ``z`` through ``layers`` leaky-relu linear layers."""
    z = diff.reshape(diff.as_tensor(z), (1, -1))
    x = z * (diff.mean(z * z) + 1e-8) ** -0.5
    for i in range(layers):
        x = diff.leaky_relu(_linear(weights, 'gen.map.{}'.format(i), x), LRELU_SLOPE)
    return diff.reshape(x, (-1,))


def synthesis_conv_names(levels):
    return ['gen.syn.{}.conv.weight'.format(level) for level in range(levels)]


def init_generator_weights(weights, config, rng):
    channels_in = FaceGeometry.CHANNELS
    for level in reversed(range(config.levels)):
        width = config.enc_channels[config.levels - 1 - level]
        prefix = 'enc.{}'.format(level)
        weights.add(prefix + '.conv0.weight', he_normal(rng, (5, channels_in, width), 5 * channels_in))
        weights.add(prefix + '.conv0.bias', np.zeros(width))
        weights.add(prefix + '.conv1.weight', he_normal(rng, (5, width, width), 5 * width, gain=np.sqrt(0.5)))
        weights.add(prefix + '.conv1.bias', np.zeros(width))
        if channels_in != width:
            weights.add(prefix + '.skip.weight', he_normal(rng, (channels_in, width), channels_in, gain=1.0))
        channels_in = width

    for i in range(config.mapping_layers):
        fan_in = config.z_dim if i == 0 else config.w_dim
        weights.add('gen.map.{}.weight'.format(i), he_normal(rng, (fan_in, config.w_dim), fan_in))
        weights.add('gen.map.{}.bias'.format(i), np.zeros(config.w_dim))

    previous = 0
    for level in range(config.levels):
        width_in = previous + config.enc_channels[config.levels - 1 - level]
        width = config.dec_channels[level]
        prefix = 'gen.syn.{}'.format(level)
        weights.add(prefix + '.affine.weight', he_normal(rng, (config.w_dim, width_in), config.w_dim, gain=1.0))
        weights.add(prefix + '.affine.bias', np.ones(width_in))
        weights.add(prefix + '.conv.weight', rng.standard_normal((5, width_in, width)))
        weights.add(prefix + '.conv.bias', np.zeros(width))
        weights.add(prefix + '.noise_strength', np.zeros(1))
        previous = width

    weights.add('gen.torgb.weight', he_normal(rng, (config.feature_channels, 3), config.feature_channels, gain=1.0))
    weights.add('gen.torgb.bias', np.zeros(3))


class Generator:
    def __init__(self, config, weights):
        self.config = config
        self.weights = weights

    def mapping(self, z):
        return mapping_network(self.weights, z, self.config.mapping_layers)

    def encode(self, shape):
        """Per-level encoder outputs (index = hierarchy level) for a :class:`Shape`."""
        hierarchy = shape.hierarchy
        if len(hierarchy) != self.config.levels:
            raise LevelMismatch('model expects {0} levels, shape has {1}'.format(self.config.levels, len(hierarchy)))
        skips = [None] * self.config.levels
        x = diff.as_tensor(shape.features)
        for level in reversed(range(self.config.levels)):
            adjacency = hierarchy[level].face_adjacency
            prefix = 'enc.{}'.format(level)
            w = self.weights
            h = diff.leaky_relu(face_conv(x, w[prefix + '.conv0.weight'], w[prefix + '.conv0.bias'], adjacency),
                                LRELU_SLOPE)
            h = face_conv(h, w[prefix + '.conv1.weight'], w[prefix + '.conv1.bias'], adjacency)
            residual = x @ w[prefix + '.skip.weight'] if prefix + '.skip.weight' in w else x
            skips[level] = diff.leaky_relu(h + residual, LRELU_SLOPE)
            if level:
                x = face_pool(skips[level], hierarchy.children_of[level])
        return skips

    def make_noise(self, hierarchy, seed):
        if seed is None:
            return [None] * len(hierarchy)
        rng = np.random.default_rng(seed)
        return [rng.standard_normal((mesh.n_faces, 1)).astype(np.float32) for mesh in hierarchy]

    def synthesize(self, w, skips, hierarchy, noise=None):
        """Decode style ``w`` over encoder outputs; returns (features, coarse_rgb) tensors."""
        noise = noise if noise is not None else [None] * self.config.levels
        w = diff.reshape(diff.as_tensor(w), (1, -1))
        x = None
        for level in range(self.config.levels):
            prefix = 'gen.syn.{}'.format(level)
            inputs = skips[level] if x is None else diff.concat(
                [face_unpool(x, hierarchy.parent_of[level]), skips[level]], axis=1)
            style = diff.reshape(_linear(self.weights, prefix + '.affine', w), (-1,))
            x = modulated_face_conv(inputs, self.weights[prefix + '.conv.weight'], style,
                                    hierarchy[level].face_adjacency)
            if noise[level] is not None:
                x = x + diff.as_tensor(noise[level]) * self.weights[prefix + '.noise_strength']
            x = diff.leaky_relu(x + self.weights[prefix + '.conv.bias'], LRELU_SLOPE)
        coarse_rgb = diff.tanh(_linear(self.weights, 'gen.torgb', x))
        return x, coarse_rgb

    def __call__(self, shape, latent, noise_seed=None, skips=None):
        if latent.w is None:
            latent.w = self.mapping(latent.z)
        skips = skips if skips is not None else self.encode(shape)
        return self.synthesize(latent.w, skips, shape.hierarchy, self.make_noise(shape.hierarchy, noise_seed))

    def __repr__(self):
        return '<Generator levels={0} channels={1}>'.format(self.config.levels, self.config.dec_channels)


def generate_features(generator, shape, latent, noise_seed=None):
    """Surface features as a :class:`FaceFeatureMap` on the finest level, and (F, 3) coarse colors."""
    features, coarse_rgb = generator(shape, latent, noise_seed)
    return FaceFeatureMap(len(shape.hierarchy) - 1, features), coarse_rgb
