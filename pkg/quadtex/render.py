"""
Pinhole cameras, z-buffered rasterization of quad meshes and the three shaders
(neural field, flat per-face colors, object coordinates).

Rasterization only produces per-pixel surface points; colors are differentiable
with respect to the texture, never with respect to camera or geometry.
"""
import asyncio
import logging
import math

import numpy as np

from . import diff
from .exceptions import PoseError
from .field import vertex_features
from .geometry import barycentric_points, noc_of_point
from .utils import BACKGROUND

__all__ = ['Camera', 'Fragments', 'RenderedView', 'rasterize', 'rasterize_views', 'shade', 'shade_coarse',
           'render_noc', 'pose_from_bins', 'pose_to_bins', 'AZIMUTH_BINS', 'ELEVATION_BINS']


LOG = logging.getLogger(__name__)

AZIMUTH_BINS = 12
ELEVATION_BINS = 5
DEFAULT_ELEVATION_RANGE = (0.0, math.radians(60.0))
NEAR = 1e-3


class Camera:
    """Looks at ``target`` from azimuth/elevation (radians) around the z axis."""

    def __init__(self, azimuth, elevation, distance, fov, image_size, target=(0.0, 0.0, 0.0)):
        if not distance > 0:
            raise PoseError('camera distance must be positive, got {}'.format(distance))
        if not 0 < fov < math.pi:
            raise PoseError('camera fov must lie in (0, pi), got {}'.format(fov))
        if int(image_size) < 1:
            raise PoseError('image size must be positive, got {}'.format(image_size))
        self.azimuth = float(azimuth)
        self.elevation = float(elevation)
        self.distance = float(distance)
        self.fov = float(fov)
        self.image_size = int(image_size)
        self.target = np.asarray(target, dtype=np.float64)

    @classmethod
    def from_degrees(cls, azimuth, elevation, distance, fov, image_size, target=(0.0, 0.0, 0.0)):
        return cls(math.radians(azimuth), math.radians(elevation), distance, math.radians(fov), image_size, target)

    @property
    def eye(self):
        ce = math.cos(self.elevation)
        return self.target + self.distance * np.array([
            ce * math.cos(self.azimuth), ce * math.sin(self.azimuth), math.sin(self.elevation)])

    @property
    def focal(self):
        return (self.image_size / 2.0) / math.tan(self.fov / 2.0)

    def basis(self):
        forward = self.target - self.eye
        forward /= np.linalg.norm(forward)
        up = np.array([0.0, 0.0, 1.0])
        if np.linalg.norm(np.cross(forward, up)) < 1e-9:
            up = np.array([0.0, 1.0, 0.0])
        right = np.cross(forward, up)
        right /= np.linalg.norm(right)
        return right, np.cross(right, forward), forward

    def project(self, points):
        """Pixel coordinates (x right, y down) and view depth of (N, 3) world points."""
        right, up, forward = self.basis()
        rel = np.asarray(points, dtype=np.float64) - self.eye
        depth = rel @ forward
        with np.errstate(divide='ignore', invalid='ignore'):
            x = self.image_size / 2.0 + self.focal * (rel @ right) / depth
            y = self.image_size / 2.0 - self.focal * (rel @ up) / depth
        return np.stack([x, y], axis=-1), depth

    def with_size(self, image_size):
        return Camera(self.azimuth, self.elevation, self.distance, self.fov, image_size, self.target)

    def _key(self):
        return (self.azimuth, self.elevation, self.distance, self.fov, self.image_size, tuple(self.target))

    def __eq__(self, other):
        return isinstance(other, Camera) and self._key() == other._key()

    __hash__ = object.__hash__

    def __repr__(self):
        return '<Camera az={0:.1f} el={1:.1f} d={2} fov={3:.1f} size={4}>'.format(
            math.degrees(self.azimuth), math.degrees(self.elevation), self.distance, math.degrees(self.fov),
            self.image_size)


class Fragments:
    """Per-pixel face id (-1 on background), triangle half, barycentric coordinates and depth."""

    def __init__(self, face_id, half, bary, depth):
        self.face_id = face_id
        self.half = half
        self.bary = bary
        self.depth = depth

    @property
    def mask(self):
        return self.face_id >= 0

    @property
    def shape(self):
        return self.face_id.shape

    def foreground(self):
        """Flat pixel indices of covered pixels, in scanline order."""
        return np.flatnonzero(self.face_id.reshape(-1) >= 0)

    def samples(self):
        index = self.foreground()
        return (index, self.face_id.reshape(-1)[index], self.half.reshape(-1)[index],
                self.bary.reshape(-1, 3)[index])

    def __repr__(self):
        return '<Fragments size={0} covered={1}>'.format(self.shape, int(self.mask.sum()))


class RenderedView:
    def __init__(self, rgb, mask, noc, frag, camera=None):
        self.rgb = rgb
        self.mask = mask
        self.noc = noc
        self.frag = frag
        self.camera = camera

    def __repr__(self):
        return '<RenderedView camera={0} covered={1}>'.format(self.camera, int(self.mask.sum()))


def _edge(ax, ay, bx, by, px, py):
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


def rasterize(mesh, camera):
    size = camera.image_size
    face_id = np.full((size, size), -1, dtype=np.int64)
    half = np.zeros((size, size), dtype=np.int64)
    bary = np.zeros((size, size, 3), dtype=np.float64)
    depth = np.full((size, size), np.inf)

    screen, z = camera.project(mesh.vertices)
    triangles = mesh.triangles()
    for t, corners in enumerate(triangles):
        zs = z[corners]
        if (zs < NEAR).any():
            continue
        (x0, y0), (x1, y1), (x2, y2) = screen[corners]
        area = _edge(x0, y0, x1, y1, x2, y2)
        if area == 0 or not np.isfinite(area):
            continue
        c0 = max(int(math.floor(min(x0, x1, x2) - 0.5)), 0)
        c1 = min(int(math.ceil(max(x0, x1, x2) - 0.5)), size - 1)
        r0 = max(int(math.floor(min(y0, y1, y2) - 0.5)), 0)
        r1 = min(int(math.ceil(max(y0, y1, y2) - 0.5)), size - 1)
        if c0 > c1 or r0 > r1:
            continue
        py, px = np.mgrid[r0:r1 + 1, c0:c1 + 1] + 0.5
        l0 = _edge(x1, y1, x2, y2, px, py) / area
        l1 = _edge(x2, y2, x0, y0, px, py) / area
        l2 = _edge(x0, y0, x1, y1, px, py) / area
        inside = (l0 >= 0) & (l1 >= 0) & (l2 >= 0)
        if not inside.any():
            continue
        inv = l0 / zs[0] + l1 / zs[1] + l2 / zs[2]
        pixel_depth = 1.0 / inv
        window = depth[r0:r1 + 1, c0:c1 + 1]
        closer = inside & (pixel_depth < window)
        if not closer.any():
            continue
        window[closer] = pixel_depth[closer]
        face_id[r0:r1 + 1, c0:c1 + 1][closer] = t // 2
        half[r0:r1 + 1, c0:c1 + 1][closer] = t % 2
        corrected = np.stack([l0 / zs[0], l1 / zs[1], l2 / zs[2]], axis=-1) * pixel_depth[..., None]
        bary[r0:r1 + 1, c0:c1 + 1][closer] = corrected[closer]
    frag = Fragments(face_id, half, bary, depth)
    LOG.debug('Rasterized %s with %s: %s', mesh, camera, frag)
    return frag


async def rasterize_views(mesh, cameras, executor=None):
    """Rasterize several views concurrently; results keep the order of ``cameras``."""
    loop = asyncio.get_running_loop()
    jobs = [loop.run_in_executor(executor, rasterize, mesh, camera) for camera in cameras]
    return await asyncio.gather(*jobs)


def _compose(colors, frag, background):
    """Scatter (N, 3) foreground colors into an (H, W, 3) image over a constant background."""
    height, width = frag.shape
    index = frag.foreground()
    canvas = np.tile(np.asarray(background, dtype=np.float64), (height * width, 1))
    canvas[index] = 0.0
    image = diff.index_add(colors, index, height * width) + canvas
    return diff.reshape(image, (height, width, 3))


def shade(frag, features, field, mesh, aux=None, background=BACKGROUND, vertex_feats=None):
    """Field colors for every covered pixel; differentiable w.r.t. features and field weights."""
    index, faces, halves, bary = frag.samples()
    if vertex_feats is None:
        vertex_feats = vertex_features(features, mesh)
    if not len(index):
        return _compose(np.zeros((0, 3)), frag, background)
    colors = field.evaluate(vertex_feats, mesh, faces, halves, bary, aux)
    return _compose(colors, frag, background)


def shade_coarse(frag, coarse_rgb, background=BACKGROUND):
    """Flat per-face colors; differentiable w.r.t. ``coarse_rgb``."""
    index, faces, _, _ = frag.samples()
    colors = diff.take(coarse_rgb, faces) if len(index) else np.zeros((0, 3))
    return _compose(colors, frag, background)


def render_noc(frag, mesh, padding=0.0):
    """(H, W, 3) object coordinates in [0, 1]; zero on background pixels."""
    height, width = frag.shape
    index, faces, halves, bary = frag.samples()
    noc = np.zeros((height * width, 3))
    if len(index):
        noc[index] = noc_of_point(barycentric_points(mesh, faces, halves, bary), mesh.bbox, padding)
    return noc.reshape(height, width, 3)


def pose_from_bins(az_bin, el_bin, distance=2.5, fov=math.radians(40.0), image_size=256,
                   elevation_range=DEFAULT_ELEVATION_RANGE):
    if not (0 <= az_bin < AZIMUTH_BINS and 0 <= el_bin < ELEVATION_BINS):
        raise PoseError('pose bins ({0}, {1}) outside {2}x{3}'.format(az_bin, el_bin, AZIMUTH_BINS, ELEVATION_BINS))
    low, high = elevation_range
    azimuth = (az_bin + 0.5) * (2.0 * math.pi / AZIMUTH_BINS)
    elevation = low + (el_bin + 0.5) * (high - low) / ELEVATION_BINS
    return Camera(azimuth, elevation, distance, fov, image_size)


def pose_to_bins(camera, elevation_range=DEFAULT_ELEVATION_RANGE):
    low, high = elevation_range
    az_bin = int(math.floor((camera.azimuth % (2.0 * math.pi)) / (2.0 * math.pi / AZIMUTH_BINS))) % AZIMUTH_BINS
    el_bin = int(math.floor((camera.elevation - low) / ((high - low) / ELEVATION_BINS)))
    return az_bin, min(max(el_bin, 0), ELEVATION_BINS - 1)
