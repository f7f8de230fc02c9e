import logging

import numpy as np

__all__ = ['BACKGROUND', 'masked_rmse', 'normalize_rows']


LOG = logging.getLogger(__name__)

# Background color of textured renders, in [-1, 1] space.
BACKGROUND = (-1.0, -1.0, -1.0)


def masked_rmse(a, b, mask):
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return 0.0
    diff = np.asarray(a, dtype=np.float64)[mask] - np.asarray(b, dtype=np.float64)[mask]
    return float(np.sqrt(np.mean(diff * diff)))


def normalize_rows(vectors, eps=1e-12):
    vectors = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(vectors, axis=-1, keepdims=True)
    return np.where(norms > eps, vectors / np.maximum(norms, eps), 0.0), norms[..., 0]
