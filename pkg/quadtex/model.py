import json
import logging

import numpy as np

from . import diff
from .config import ModelConfig
from .exceptions import FormatError
from .field import NeuralField, init_field_weights, vertex_features
from .generator import Generator, TextureLatent, init_generator_weights
from .render import RenderedView, rasterize, render_noc, shade, shade_coarse
from .weights import WeightSet

__all__ = ['TextureModel', 'sidecar_path']


LOG = logging.getLogger(__name__)


def sidecar_path(weights_path):
    return str(weights_path) + '.json'


class TextureModel:
    """Generator, neural field and their weights under one architecture config."""

    def __init__(self, config, weights):
        self.config = config
        self.weights = weights
        self.generator = Generator(config, weights)
        self.field = NeuralField(config, weights)

    @classmethod
    def create(cls, config=None, seed=None):
        config = config or ModelConfig()
        weights = WeightSet()
        rng = np.random.default_rng(config.seed if seed is None else seed)
        init_generator_weights(weights, config, rng)
        init_field_weights(weights, config, rng)
        LOG.debug('Initialised model with %d tensors', len(weights))
        return cls(config, weights)

    @classmethod
    def load(cls, path):
        try:
            with open(sidecar_path(path)) as f:
                config = ModelConfig(**json.load(f))
        except FileNotFoundError:
            raise FormatError('{}: missing architecture sidecar'.format(sidecar_path(path)))
        model = cls.create(config)
        model.weights.load(path)
        return model

    def save(self, path):
        self.weights.save(path)
        with open(sidecar_path(path), 'w') as f:
            json.dump(self.config.to_dict(), f, indent=2, sort_keys=True)
        LOG.info('Saved model weights to %s', path)

    def sample_latent(self, seed):
        return TextureLatent.sample(np.random.default_rng(seed), self.config.z_dim)

    def mean_w(self, rng, samples=16):
        with diff.no_grad():
            ws = [self.generator.mapping(rng.standard_normal(self.config.z_dim)).data for _ in range(samples)]
        return np.mean(ws, axis=0)

    def features(self, shape, latent, noise_seed=None, skips=None):
        return self.generator(shape, latent, noise_seed, skips)

    def render(self, shape, latent, camera, noise_seed=None, noc_padding=0.05, frag=None, coarse=False):
        """Render ``latent`` on ``shape`` through the field (or the flat proxy with ``coarse``)."""
        features, coarse_rgb = self.features(shape, latent, noise_seed)
        frag = frag if frag is not None else rasterize(shape.mesh, camera)
        if coarse:
            rgb = shade_coarse(frag, coarse_rgb)
        else:
            rgb = shade(frag, features, self.field, shape.mesh, vertex_feats=vertex_features(features, shape.mesh))
        return RenderedView(rgb, frag.mask, render_noc(frag, shape.mesh, noc_padding), frag, camera)

    def __repr__(self):
        return '<TextureModel levels={0} tensors={1}>'.format(self.config.levels, len(self.weights))
