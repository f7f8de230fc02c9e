"""
Procedural toy corpus of textured renders.

Textures are functions of object coordinates so that every view of a shape
agrees on where each color sits on the surface.
"""
import json
import logging
import math
import os

import numpy as np
from tqdm import tqdm

from .config import RenderConfig
from .exceptions import ConfigError, FormatError, ShapeMismatch
from .geometry import Shape, make_box, make_cube, make_quad_sphere
from .images import load_mask, load_png, save_mask, save_png
from .render import Camera, rasterize, render_noc
from .utils import BACKGROUND

__all__ = ['TEXTURES', 'SHAPES', 'ProceduralTexture', 'Corpus', 'make_shape', 'random_texture', 'render_textured',
           'build_corpus', 'save_corpus', 'load_corpus']


LOG = logging.getLogger(__name__)

TEXTURES = ('stripes', 'checker', 'two_tone')
SHAPES = ('cube', 'box', 'sphere')

INDEX_FILE = 'index.json'


class ProceduralTexture:
    """``kind`` with two colors in [-1, 1], a unit ``axis`` and a ``frequency`` over the unit cube."""

    def __init__(self, kind, colors, axis, frequency):
        if kind not in TEXTURES:
            raise ConfigError('unknown texture {!r}'.format(kind))
        self.kind = kind
        self.colors = np.asarray(colors, dtype=np.float64).reshape(2, 3)
        self.axis = np.asarray(axis, dtype=np.float64)
        self.frequency = float(frequency)

    def __call__(self, noc):
        """(N, 3) colors of (N, 3) object coordinates."""
        noc = np.asarray(noc, dtype=np.float64)
        if self.kind == 'stripes':
            first = np.sin(2.0 * math.pi * self.frequency * (noc @ self.axis)) >= 0
        elif self.kind == 'checker':
            first = np.floor(noc * self.frequency).astype(np.int64).sum(axis=1) % 2 == 0
        else:
            first = (noc - 0.5) @ self.axis >= 0
        return np.where(first[:, None], self.colors[0], self.colors[1])

    def to_dict(self):
        return {'kind': self.kind, 'colors': self.colors.tolist(), 'axis': self.axis.tolist(),
                'frequency': self.frequency}

    def __repr__(self):
        return '<ProceduralTexture {0} frequency={1:.1f}>'.format(self.kind, self.frequency)


def random_texture(kind, rng):
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    colors = rng.uniform(-0.9, 0.9, (2, 3))
    # keep the two colors apart so the pattern is visible
    while np.abs(colors[0] - colors[1]).max() < 0.5:
        colors[1] = rng.uniform(-0.9, 0.9, 3)
    return ProceduralTexture(kind, colors, axis, rng.uniform(2.0, 6.0))


def make_shape(name, levels, rng=None):
    if name == 'cube':
        return Shape.from_mesh(make_cube(), levels, smooth=False, name='cube')
    if name == 'box':
        rng = rng or np.random.default_rng(0)
        return Shape.from_mesh(make_box(rng.uniform(0.6, 1.4, 3)), levels, smooth=False, name='box')
    if name == 'sphere':
        return Shape(make_quad_sphere(levels), name='sphere')
    raise ConfigError('unknown shape {!r}'.format(name))


def render_textured(mesh, camera, texture):
    """(H, W, 3) image over the background and its (H, W) mask."""
    frag = rasterize(mesh, camera)
    noc = render_noc(frag, mesh)
    image = np.tile(np.asarray(BACKGROUND, dtype=np.float32), frag.shape + (1,))
    mask = frag.mask
    image[mask] = texture(noc[mask])
    return image, mask


class Corpus:
    def __init__(self, images, masks, records=None):
        self.images = np.asarray(images, dtype=np.float32)
        self.masks = np.asarray(masks, dtype=bool)
        self.records = records or [{} for _ in range(len(self.images))]
        if self.images.shape[:3] != self.masks.shape or len(self.records) != len(self.images):
            raise ShapeMismatch('corpus images {0}, masks {1} and {2} records disagree'.format(
                self.images.shape, self.masks.shape, len(self.records)))

    @property
    def image_size(self):
        return self.images.shape[1]

    def __len__(self):
        return len(self.images)

    def __repr__(self):
        return '<Corpus images={0} size={1}>'.format(len(self), self.image_size if len(self) else None)


def build_corpus(size=512, image_size=256, textures=TEXTURES, shapes=SHAPES, levels=1, seed=0, render_config=None,
                 progress=False):
    """``size`` renders of random textures on the listed shapes from random cameras."""
    render_config = render_config or RenderConfig()
    rng = np.random.default_rng(seed)
    meshes = {name: make_shape(name, levels, rng).mesh for name in shapes}
    low, high = render_config.elevation_range
    images, masks, records = [], [], []
    for _ in tqdm(range(size), desc='corpus', disable=not progress):
        shape = shapes[rng.integers(len(shapes))]
        texture = random_texture(textures[rng.integers(len(textures))], rng)
        camera = Camera(rng.uniform(0.0, 2.0 * math.pi), rng.uniform(low, high), render_config.distance,
                        render_config.fov, image_size)
        image, mask = render_textured(meshes[shape], camera, texture)
        images.append(image)
        masks.append(mask)
        records.append({'shape': shape, 'texture': texture.to_dict(),
                        'azimuth': camera.azimuth, 'elevation': camera.elevation})
    LOG.info('Built a corpus of %d images at %dpx', size, image_size)
    return Corpus(np.stack(images), np.stack(masks), records)


def save_corpus(corpus, directory):
    os.makedirs(directory, exist_ok=True)
    for i, (image, mask) in enumerate(zip(corpus.images, corpus.masks)):
        save_png(os.path.join(directory, '{:05d}.png'.format(i)), image)
        save_mask(os.path.join(directory, '{:05d}_mask.png'.format(i)), mask)
    with open(os.path.join(directory, INDEX_FILE), 'w') as f:
        json.dump({'count': len(corpus), 'image_size': corpus.image_size, 'records': corpus.records}, f, indent=2)
    LOG.info('Saved %s to %s', corpus, directory)


def load_corpus(directory, image_size=None):
    try:
        with open(os.path.join(directory, INDEX_FILE)) as f:
            index = json.load(f)
    except FileNotFoundError:
        raise FormatError('{}: not a corpus directory (no {})'.format(directory, INDEX_FILE))
    images, masks = [], []
    for i in range(index['count']):
        images.append(load_png(os.path.join(directory, '{:05d}.png'.format(i)), image_size))
        masks.append(load_mask(os.path.join(directory, '{:05d}_mask.png'.format(i)), image_size))
    return Corpus(np.stack(images), np.stack(masks), index.get('records'))
