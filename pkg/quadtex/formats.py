"""
Binary file formats, all little-endian.

QMH1 (quad mesh hierarchy)::

    b"QMH1", u32 level count, then per level:
    u32 vertex count V, u32 face count F,
    V * 3 f64 positions, F * 4 u32 vertex indices,
    and for every level but the first F * u32 parent face indices.

M2TW (named tensors), records repeated until end of file::

    b"M2TW", then per tensor: u32 name length, utf-8 name,
    u32 rank, rank * u32 dims, prod(dims) f32 values.
"""
import logging
import struct

import numpy as np

from .diff import to_numpy
from .exceptions import FormatError
from .geometry import QuadMesh, QuadMeshHierarchy

__all__ = ['write_qmh', 'read_qmh', 'write_m2tw', 'read_m2tw', 'QMH_MAGIC', 'M2TW_MAGIC']


LOG = logging.getLogger(__name__)

QMH_MAGIC = b'QMH1'
M2TW_MAGIC = b'M2TW'


class _Reader:
    def __init__(self, buffer, path):
        self.buffer = buffer
        self.offset = 0
        self.path = path

    def take(self, size):
        if self.offset + size > len(self.buffer):
            raise FormatError('{0}: truncated at byte {1}'.format(self.path, self.offset))
        chunk = self.buffer[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def u32(self, count=1):
        values = struct.unpack('<{}I'.format(count), self.take(4 * count))
        return values[0] if count == 1 else values

    def array(self, dtype, count):
        dtype = np.dtype(dtype)
        return np.frombuffer(self.take(dtype.itemsize * count), dtype=dtype).copy()

    @property
    def exhausted(self):
        return self.offset >= len(self.buffer)


def _read_file(path, magic):
    with open(path, 'rb') as f:
        buffer = f.read()
    if buffer[:4] != magic:
        raise FormatError('{0}: bad magic {1!r}, expected {2!r}'.format(path, buffer[:4], magic))
    reader = _Reader(buffer, path)
    reader.offset = 4
    return reader


def write_qmh(path, hierarchy):
    with open(path, 'wb') as f:
        f.write(QMH_MAGIC)
        f.write(struct.pack('<I', len(hierarchy)))
        for level, mesh in enumerate(hierarchy):
            f.write(struct.pack('<II', mesh.n_vertices, mesh.n_faces))
            f.write(mesh.vertices.astype('<f8').tobytes())
            f.write(mesh.faces.astype('<u4').tobytes())
            if level:
                f.write(hierarchy.parent_of[level].astype('<u4').tobytes())
    LOG.debug('Wrote %s to %s', hierarchy, path)


def read_qmh(path):
    reader = _read_file(path, QMH_MAGIC)
    levels, parent_of = [], [None]
    for level in range(reader.u32()):
        n_vertices, n_faces = reader.u32(2)
        vertices = reader.array('<f8', n_vertices * 3).reshape(n_vertices, 3)
        faces = reader.array('<u4', n_faces * 4).reshape(n_faces, 4).astype(np.int64)
        levels.append(QuadMesh(vertices, faces))
        if level:
            parent_of.append(reader.array('<u4', n_faces).astype(np.int64))
    if not reader.exhausted:
        raise FormatError('{}: trailing bytes after the last level'.format(path))
    return QuadMeshHierarchy(levels, parent_of)


def write_m2tw(path, tensors):
    """Write a mapping of name to array or tensor in insertion order."""
    with open(path, 'wb') as f:
        f.write(M2TW_MAGIC)
        for name, value in tensors.items():
            array = np.asarray(to_numpy(value), dtype='<f4')
            encoded = name.encode('utf-8')
            f.write(struct.pack('<I', len(encoded)))
            f.write(encoded)
            f.write(struct.pack('<I', array.ndim))
            f.write(struct.pack('<{}I'.format(array.ndim), *array.shape))
            f.write(array.tobytes())
    LOG.debug('Wrote %d tensors to %s', len(tensors), path)


def read_m2tw(path):
    reader = _read_file(path, M2TW_MAGIC)
    tensors = {}
    while not reader.exhausted:
        name = reader.take(reader.u32()).decode('utf-8')
        rank = reader.u32()
        shape = tuple(reader.u32(rank)) if rank > 1 else ((reader.u32(),) if rank == 1 else ())
        if name in tensors:
            raise FormatError('{0}: duplicate tensor {1!r}'.format(path, name))
        tensors[name] = reader.array('<f4', int(np.prod(shape))).reshape(shape).astype(np.float32)
    return tensors
