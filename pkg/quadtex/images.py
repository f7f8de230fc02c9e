import logging

import cv2
import numpy as np
from PIL import Image

from .diff import to_numpy
from .exceptions import FormatError

__all__ = ['save_png', 'load_png', 'save_mask', 'load_mask', 'save_noc_png', 'load_noc_png', 'dump_fragments',
           'to_uint8']


LOG = logging.getLogger(__name__)

NOC_MAX = 65535


def _array(image):
    return np.asarray(to_numpy(image), dtype=np.float64)


def to_uint8(image):
    """[-1, 1] -> 0..255"""
    return np.clip(np.round((_array(image) + 1.0) * 127.5), 0, 255).astype(np.uint8)


def save_png(path, image):
    Image.fromarray(to_uint8(image)).save(path, format='PNG')
    LOG.debug('Wrote %s', path)


def load_png(path, size=None):
    try:
        with Image.open(path) as image:
            image = image.convert('RGB')
            if size is not None and image.size != (size, size):
                image = image.resize((size, size), Image.Resampling.BILINEAR)
            pixels = np.asarray(image, dtype=np.float32)
    except OSError as e:
        raise FormatError('{0}: cannot read image ({1})'.format(path, e))
    return pixels / 127.5 - 1.0


def save_mask(path, mask):
    Image.fromarray(np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)).save(path, format='PNG')


def load_mask(path, size=None):
    try:
        with Image.open(path) as image:
            image = image.convert('L')
            if size is not None and image.size != (size, size):
                image = image.resize((size, size), Image.Resampling.NEAREST)
            return np.asarray(image) > 127
    except OSError as e:
        raise FormatError('{0}: cannot read mask ({1})'.format(path, e))


def save_noc_png(path, noc):
    """16-bit RGB PNG, [0, 1] -> 0..65535."""
    pixels = np.clip(np.round(_array(noc) * NOC_MAX), 0, NOC_MAX).astype(np.uint16)
    if not cv2.imwrite(str(path), cv2.cvtColor(pixels, cv2.COLOR_RGB2BGR)):
        raise FormatError('{}: cannot write NOC image'.format(path))
    LOG.debug('Wrote %s', path)


def load_noc_png(path):
    pixels = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if pixels is None:
        raise FormatError('{}: cannot read NOC image'.format(path))
    if pixels.dtype != np.uint16 or pixels.ndim != 3 or pixels.shape[2] != 3:
        raise FormatError('{0}: NOC images must be 16-bit RGB, got {1} {2}'.format(path, pixels.dtype, pixels.shape))
    return cv2.cvtColor(pixels, cv2.COLOR_BGR2RGB).astype(np.float64) / NOC_MAX


def dump_fragments(path, frag):
    np.savez_compressed(path, face_id=frag.face_id, half=frag.half, bary=frag.bary, depth=frag.depth)
