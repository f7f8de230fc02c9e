"""
The shared neural field: interpolated vertex features plus the within-face
position go through one branch, the auxiliary latent through another, and a
small trunk maps the fused code to a color in [-1, 1].
"""
import logging

import numpy as np

from . import diff
from .geometry import TRIANGLE_CORNERS
from .weights import he_normal

__all__ = ['NeuralField', 'vertex_features', 'quad_coords', 'eval_field', 'sample_face_grid', 'grid_samples',
           'init_field_weights']


LOG = logging.getLogger(__name__)

LRELU_SLOPE = 0.2


def quad_coords(halves, bary):
    """
    Position inside the quad as ``(1 - u - v, u, v)`` over the bilinear (u, v) chart.

    On half 0 this equals the barycentric coordinates; half 1 uses the same
    affine chart, so both halves agree on the shared diagonal.
    """
    halves = np.asarray(halves)
    bary = np.asarray(bary, dtype=np.float64)
    u = np.where(halves == 0, bary[..., 1], bary[..., 0] + bary[..., 1])
    v = np.where(halves == 0, bary[..., 2], bary[..., 1] + bary[..., 2])
    return np.stack([1.0 - u - v, u, v], axis=-1)


def vertex_features(features, mesh):
    """Mean of incident face features per vertex; vertices without faces get zeros."""
    features = diff.as_tensor(getattr(features, 'values', features))
    faces = mesh.faces
    counts = np.bincount(faces.reshape(-1), minlength=mesh.n_vertices)
    corners = diff.take(features, np.repeat(np.arange(mesh.n_faces), 4))
    summed = diff.index_add(corners, faces.reshape(-1), mesh.n_vertices)
    return summed / np.maximum(counts, 1).astype(features.data.dtype)[:, None]


def init_field_weights(weights, config, rng):
    width = config.field_width
    features_in = config.feature_channels + 3
    weights.add('psi.a.0.weight', he_normal(rng, (features_in, width), features_in))
    weights.add('psi.a.0.bias', np.zeros(width))
    weights.add('psi.a.1.weight', he_normal(rng, (width, width), width))
    weights.add('psi.a.1.bias', np.zeros(width))
    weights.add('psi.b.0.weight', he_normal(rng, (config.aux_dim, width), config.aux_dim))
    weights.add('psi.b.0.bias', np.zeros(width))
    weights.add('psi.b.1.weight', he_normal(rng, (width, width), width))
    weights.add('psi.b.1.bias', np.zeros(width))
    for i in range(config.field_trunk):
        fan_in = 2 * width if i == 0 else width
        weights.add('psi.trunk.{}.weight'.format(i), he_normal(rng, (fan_in, width), fan_in))
        weights.add('psi.trunk.{}.bias'.format(i), np.zeros(width))
    weights.add('psi.head.weight', he_normal(rng, (width, 3), width, gain=1.0))
    weights.add('psi.head.bias', np.zeros(3))
    weights.add('psi.aux_latent', rng.standard_normal(config.aux_dim))


def _dense(weights, prefix, x):
    return diff.leaky_relu(x @ weights[prefix + '.weight'] + weights[prefix + '.bias'], LRELU_SLOPE)


class NeuralField:
    def __init__(self, config, weights):
        self.config = config
        self.weights = weights

    def __call__(self, features, coords, aux=None):
        """Colors for (N, C) interpolated features and (N, 3) within-face coordinates."""
        w = self.weights
        width = self.config.field_width
        aux = w['psi.aux_latent'] if aux is None else aux
        a = diff.concat([diff.as_tensor(features), diff.as_tensor(coords)], axis=1)
        a = _dense(w, 'psi.a.1', _dense(w, 'psi.a.0', a))
        b = diff.reshape(diff.as_tensor(aux), (1, -1))
        b = _dense(w, 'psi.b.1', _dense(w, 'psi.b.0', b))
        # the first trunk layer acts on concat(a, b); b is shared by every row
        first = w['psi.trunk.0.weight']
        x = a @ first[:width] + b @ first[width:] + w['psi.trunk.0.bias']
        x = diff.leaky_relu(x, LRELU_SLOPE)
        for i in range(1, self.config.field_trunk):
            x = _dense(w, 'psi.trunk.{}'.format(i), x)
        return diff.tanh(x @ w['psi.head.weight'] + w['psi.head.bias'])

    def interpolate(self, vertex_feats, mesh, face_ids, halves, bary):
        corners = mesh.faces[np.asarray(face_ids)[:, None], TRIANGLE_CORNERS[np.asarray(halves)]]
        gathered = diff.take(vertex_feats, corners)
        weights = np.asarray(bary, dtype=gathered.data.dtype)[:, :, None]
        return diff.tsum(gathered * weights, axis=1)

    def evaluate(self, vertex_feats, mesh, face_ids, halves, bary, aux=None):
        features = self.interpolate(vertex_feats, mesh, face_ids, halves, bary)
        return self(features, quad_coords(halves, bary), aux)

    def __repr__(self):
        return '<NeuralField width={0} trunk={1}>'.format(self.config.field_width, self.config.field_trunk)


def eval_field(field, sp, vertex_feats, mesh, aux=None):
    """Color of one :class:`SurfacePoint` as a (3,) tensor."""
    rgb = field.evaluate(vertex_feats, mesh, [sp.face_id], [sp.triangle_half], sp.bary[None, :], aux)
    return diff.reshape(rgb, (3,))


def grid_samples(n):
    """Triangle halves and barycentric coordinates of the n x n lattice ``((i + 0.5) / n)`` on a quad."""
    if n < 1:
        raise ValueError('grid resolution must be >= 1, got {}'.format(n))
    ticks = (np.arange(n) + 0.5) / n
    v, u = np.meshgrid(ticks, ticks, indexing='ij')
    u, v = u.reshape(-1), v.reshape(-1)
    lower = u + v <= 1.0
    halves = np.where(lower, 0, 1)
    bary = np.where(lower[:, None],
                    np.stack([1.0 - u - v, u, v], axis=1),
                    np.stack([1.0 - v, u + v - 1.0, 1.0 - u], axis=1))
    return halves, bary


def sample_face_grid(field, shape, vertex_feats, face_id, n, aux=None):
    """(n, n, 3) colors; row index follows v, column index follows u."""
    halves, bary = grid_samples(n)
    if shape.geometry.degenerate[face_id]:
        neighbors = shape.degenerate_neighbors.get(int(face_id), [])
        LOG.debug('Face %d is degenerate, using %d neighbor centers', face_id, len(neighbors))
        if not neighbors:
            return diff.as_tensor(np.zeros((n, n, 3)))
        center_halves, center_bary = grid_samples(1)
        centers = field.evaluate(vertex_feats, shape.mesh, neighbors, np.repeat(center_halves, len(neighbors)),
                                 np.repeat(center_bary, len(neighbors), axis=0), aux)
        color = diff.mean(centers, axis=0, keepdims=True)
        return diff.reshape(diff.concat([color] * (n * n), axis=0), (n, n, 3))
    rgb = field.evaluate(vertex_feats, shape.mesh, np.full(n * n, face_id), halves, bary, aux)
    return diff.reshape(rgb, (n, n, 3))
