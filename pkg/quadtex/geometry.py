"""
Quad meshes, subdivision hierarchies and per-face geometric features.

A face is stored as the vertex cycle ``(a, b, c, d)``. Triangle half 0 is
``(a, b, d)`` and half 1 is ``(b, c, d)``; they share the diagonal ``(b, d)``.
Face adjacency slot ``k`` holds the face across edge ``k`` where the edges are
``(a, b), (b, c), (c, d), (d, a)``, or ``-1`` on the boundary.
"""
import collections
import logging
import math

import numpy as np

from .exceptions import DegenerateGeometry, FormatError, MeshError, NonManifoldMesh, NonQuadFace
from .utils import normalize_rows

__all__ = ['QuadMesh', 'QuadMeshHierarchy', 'FaceGeometry', 'SurfacePoint', 'Shape', 'BOUNDARY',
           'TRIANGLE_CORNERS', 'compute_adjacency', 'load_obj', 'subdivide', 'catmull_clark', 'face_geometry',
           'barycentric_point', 'barycentric_points', 'barycentric_coordinates', 'noc_of_point', 'make_box',
           'make_cube', 'make_plane', 'make_quad_sphere']


LOG = logging.getLogger(__name__)

BOUNDARY = -1

# corner positions of the two triangle halves inside the (a, b, c, d) cycle
TRIANGLE_CORNERS = np.array([[0, 1, 3], [1, 2, 3]])

MERGE_TOLERANCE = 1e-3


def _face_edges(faces):
    return np.stack([faces, np.roll(faces, -1, axis=1)], axis=-1)


def compute_adjacency(faces):
    faces = np.asarray(faces, dtype=np.int64)
    n_faces = len(faces)
    adjacency = np.full(n_faces * 4, BOUNDARY, dtype=np.int64)
    if n_faces == 0:
        return adjacency.reshape(0, 4)
    keys = np.sort(_face_edges(faces).reshape(-1, 2), axis=1)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    if (counts > 2).any():
        bad = np.flatnonzero(counts > 2)[0]
        raise NonManifoldMesh('non-manifold edge {0} shared by {1} faces'.format(
            tuple(keys[np.flatnonzero(inverse == bad)[0]]), counts[bad]))
    order = np.argsort(inverse, kind='stable')
    ranked = inverse[order]
    paired = ranked[:-1] == ranked[1:]
    first, second = order[:-1][paired], order[1:][paired]
    adjacency[first] = second // 4
    adjacency[second] = first // 4
    return adjacency.reshape(n_faces, 4)


class QuadMesh:
    def __init__(self, vertices, faces):
        vertices = np.array(vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.array(faces, dtype=np.int64).reshape(-1, 4)
        if len(faces) and (faces.min() < 0 or faces.max() >= len(vertices)):
            raise MeshError('face index out of range for {} vertices'.format(len(vertices)))
        ordered = np.sort(faces, axis=1)
        repeated = np.flatnonzero((ordered[:, 1:] == ordered[:, :-1]).any(axis=1))
        if len(repeated):
            raise MeshError('face {} does not have 4 distinct vertices'.format(repeated[0]))
        self.vertices = vertices
        self.faces = faces
        self.face_adjacency = compute_adjacency(faces)
        for array in (self.vertices, self.faces, self.face_adjacency):
            array.flags.writeable = False

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def bbox(self):
        if not len(self.vertices):
            raise DegenerateGeometry('empty mesh has no bounding box')
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def is_closed(self):
        return bool((self.face_adjacency != BOUNDARY).all())

    def edges(self):
        keys = np.sort(_face_edges(self.faces).reshape(-1, 2), axis=1)
        return np.unique(keys, axis=0)

    def euler_characteristic(self):
        used = len(np.unique(self.faces))
        return used - len(self.edges()) + self.n_faces

    def triangles(self):
        """(2F, 3) vertex indices; triangle ``2 * f + half`` is a half of face ``f``."""
        return self.faces[:, TRIANGLE_CORNERS].reshape(-1, 3)

    def scaled(self, factor, about=None):
        about = np.mean(self.bbox, axis=0) if about is None else np.asarray(about)
        return QuadMesh((self.vertices - about) * factor + about, self.faces)

    def __eq__(self, other):
        return isinstance(other, QuadMesh) and np.array_equal(self.vertices, other.vertices) \
            and np.array_equal(self.faces, other.faces)

    __hash__ = object.__hash__

    def __repr__(self):
        return '<QuadMesh vertices={0} faces={1}>'.format(self.n_vertices, self.n_faces)


class QuadMeshHierarchy:
    """
    Levels from coarse (0) to fine. ``parent_of[l]`` maps faces of level ``l``
    to their parent on level ``l - 1``; ``children_of[l]`` holds, for each face
    of level ``l - 1``, its 4 children on level ``l``. Both are ``None`` for level 0.
    """

    def __init__(self, levels, parent_of):
        self.levels = list(levels)
        self.parent_of = [None] + [np.asarray(p, dtype=np.int64) for p in list(parent_of)[1:]]
        if len(self.parent_of) != len(self.levels):
            raise MeshError('{0} parent maps for {1} levels'.format(len(self.parent_of) - 1, len(self.levels)))
        self.children_of = [None]
        for level in range(1, len(self.levels)):
            coarse, fine, parents = self.levels[level - 1], self.levels[level], self.parent_of[level]
            if fine.n_faces != 4 * coarse.n_faces or len(parents) != fine.n_faces:
                raise MeshError('level {0} has {1} faces, expected {2}'.format(
                    level, fine.n_faces, 4 * coarse.n_faces))
            counts = np.bincount(parents, minlength=coarse.n_faces)
            if len(counts) != coarse.n_faces or (counts != 4).any():
                raise MeshError('level {} parents must each have exactly 4 children'.format(level))
            children = np.argsort(parents, kind='stable').reshape(coarse.n_faces, 4)
            children.flags.writeable = False
            self.children_of.append(children)

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, level):
        return self.levels[level]

    def __iter__(self):
        return iter(self.levels)

    @property
    def finest(self):
        return self.levels[-1]

    @property
    def coarsest(self):
        return self.levels[0]

    def face_counts(self):
        return [mesh.n_faces for mesh in self.levels]

    def __eq__(self, other):
        if not isinstance(other, QuadMeshHierarchy) or len(self) != len(other):
            return False
        return all(a == b for a, b in zip(self.levels, other.levels)) and \
            all(np.array_equal(a, b) for a, b in zip(self.parent_of[1:], other.parent_of[1:]))

    __hash__ = object.__hash__

    def __repr__(self):
        return '<QuadMeshHierarchy faces={}>'.format(self.face_counts())


class SurfacePoint:
    def __init__(self, face_id, triangle_half, bary):
        bary = np.asarray(bary, dtype=np.float64)
        if triangle_half not in (0, 1):
            raise ValueError('triangle_half must be 0 or 1, got {}'.format(triangle_half))
        if bary.shape != (3,) or (bary < -1e-9).any() or abs(bary.sum() - 1.0) > 1e-6:
            raise ValueError('invalid barycentric coordinates {}'.format(bary.tolist()))
        self.face_id = int(face_id)
        self.triangle_half = int(triangle_half)
        self.bary = bary

    def __repr__(self):
        return '<SurfacePoint face={0} half={1} bary={2}>'.format(self.face_id, self.triangle_half,
                                                                   self.bary.tolist())


def _parse_index(token, n_vertices, lineno):
    try:
        index = int(token.split('/')[0])
    except ValueError:
        raise FormatError('line {0}: bad face index {1!r}'.format(lineno, token))
    index = index - 1 if index > 0 else n_vertices + index
    if not 0 <= index < n_vertices:
        raise FormatError('line {0}: face index {1} out of range'.format(lineno, token))
    return index


def _merge_triangles(vertices, triangles):
    """Pair triangles sharing an edge into planar quads, keeping the first triangle's winding."""
    by_edge = collections.defaultdict(list)
    for t, tri in enumerate(triangles):
        for k in range(3):
            by_edge[frozenset((tri[k], tri[(k + 1) % 3]))].append(t)
    used = [False] * len(triangles)
    quads = []
    for t, tri in enumerate(triangles):
        if used[t]:
            continue
        for k in range(3):
            x, s1, s2 = tri[(k + 2) % 3], tri[k], tri[(k + 1) % 3]
            partners = [o for o in by_edge[frozenset((s1, s2))] if o != t and not used[o]]
            if not partners:
                continue
            other = triangles[partners[0]]
            y = [v for v in other if v not in (s1, s2)][0]
            normal = np.cross(vertices[s1] - vertices[x], vertices[s2] - vertices[x])
            length = np.linalg.norm(normal)
            diagonal = np.linalg.norm(vertices[s2] - vertices[s1])
            if length == 0 or abs(np.dot(normal / length, vertices[y] - vertices[x])) > MERGE_TOLERANCE * diagonal:
                continue
            used[t] = used[partners[0]] = True
            quads.append((x, s1, y, s2))
            break
        else:
            raise NonQuadFace('triangle {} cannot be merged into a planar quad'.format(t))
    return quads


def _orient(faces):
    """Flip faces so every interior edge is traversed in opposite directions by its two faces."""
    faces = [list(f) for f in faces]
    compute_adjacency(faces)
    by_edge = collections.defaultdict(list)
    for f, face in enumerate(faces):
        for k in range(4):
            by_edge[frozenset((face[k], face[(k + 1) % 4]))].append(f)
    visited = [False] * len(faces)
    for seed in range(len(faces)):
        if visited[seed]:
            continue
        visited[seed] = True
        queue = collections.deque([seed])
        while queue:
            f = queue.popleft()
            for k in range(4):
                u, v = faces[f][k], faces[f][(k + 1) % 4]
                for g in by_edge[frozenset((u, v))]:
                    if g == f:
                        continue
                    directed = {(faces[g][i], faces[g][(i + 1) % 4]) for i in range(4)}
                    consistent = (v, u) in directed
                    if visited[g]:
                        if not consistent:
                            raise MeshError('mesh is not orientable (faces {0} and {1})'.format(f, g))
                        continue
                    if not consistent:
                        faces[g] = [faces[g][0], faces[g][3], faces[g][2], faces[g][1]]
                    visited[g] = True
                    queue.append(g)
    return faces


def _signed_volume(vertices, faces):
    tris = vertices[np.asarray(faces)[:, TRIANGLE_CORNERS].reshape(-1, 3)]
    return float(np.einsum('ij,ij->i', tris[:, 0], np.cross(tris[:, 1], tris[:, 2])).sum() / 6.0)


def load_obj(path):
    vertices, quads, triangles = [], [], []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split('#', 1)[0].split()
            if not parts:
                continue
            if parts[0] == 'v':
                try:
                    vertices.append([float(x) for x in parts[1:4]])
                except ValueError:
                    raise FormatError('line {0}: bad vertex {1!r}'.format(lineno, line.strip()))
                if len(vertices[-1]) != 3:
                    raise FormatError('line {}: vertex needs 3 coordinates'.format(lineno))
            elif parts[0] == 'f':
                face = [_parse_index(p, len(vertices), lineno) for p in parts[1:]]
                if len(face) > 4:
                    raise NonQuadFace('line {0}: non-quad face with {1} vertices'.format(lineno, len(face)))
                if len(face) < 3:
                    raise FormatError('line {}: face needs at least 3 vertices'.format(lineno))
                (quads if len(face) == 4 else triangles).append(face)
    vertices = np.array(vertices, dtype=np.float64).reshape(-1, 3)
    if triangles:
        LOG.debug('Merging %d triangles from %s', len(triangles), path)
        quads.extend(_merge_triangles(vertices, triangles))
    if not quads:
        raise FormatError('{}: no faces'.format(path))
    faces = _orient(quads)
    if (compute_adjacency(faces) != BOUNDARY).all() and _signed_volume(vertices, faces) < 0:
        faces = [[f[0], f[3], f[2], f[1]] for f in faces]
    mesh = QuadMesh(vertices, faces)
    LOG.debug('Loaded %s from %s', mesh, path)
    return mesh


def catmull_clark(mesh):
    """One Catmull-Clark step. Returns the refined mesh and each child's parent face index."""
    verts, faces = mesh.vertices, mesh.faces
    n_v, n_f = len(verts), len(faces)
    face_points = verts[faces].mean(axis=1)

    keys = np.sort(_face_edges(faces).reshape(-1, 2), axis=1)
    edges, edge_of = np.unique(keys, axis=0, return_inverse=True)
    edge_of = edge_of.reshape(n_f, 4)
    n_e = len(edges)
    edge_faces = np.bincount(edge_of.reshape(-1), minlength=n_e)
    face_sum = np.zeros((n_e, 3))
    np.add.at(face_sum, edge_of.reshape(-1), np.repeat(face_points, 4, axis=0))
    midpoints = verts[edges].mean(axis=1)
    interior = edge_faces == 2
    edge_points = np.where(interior[:, None], (verts[edges].sum(axis=1) + face_sum) / 4.0, midpoints)

    valence = np.bincount(edges.reshape(-1), minlength=n_v)
    incident = np.bincount(faces.reshape(-1), minlength=n_v)
    face_avg = np.zeros((n_v, 3))
    np.add.at(face_avg, faces.reshape(-1), np.repeat(face_points, 4, axis=0))
    mid_avg = np.zeros((n_v, 3))
    np.add.at(mid_avg, edges[:, 0], midpoints)
    np.add.at(mid_avg, edges[:, 1], midpoints)
    with np.errstate(invalid='ignore', divide='ignore'):
        face_avg /= incident[:, None]
        mid_avg /= valence[:, None]
        n = valence[:, None].astype(np.float64)
        moved = (face_avg + 2.0 * mid_avg + (n - 3.0) * verts) / n

    boundary_edges = edges[~interior]
    boundary_sum = np.zeros((n_v, 3))
    boundary_count = np.zeros(n_v)
    np.add.at(boundary_sum, boundary_edges[:, 0], verts[boundary_edges[:, 1]])
    np.add.at(boundary_sum, boundary_edges[:, 1], verts[boundary_edges[:, 0]])
    np.add.at(boundary_count, boundary_edges.reshape(-1), 1.0)
    on_boundary = boundary_count > 0
    with np.errstate(invalid='ignore', divide='ignore'):
        boundary_moved = 0.75 * verts + 0.25 * boundary_sum / boundary_count[:, None]
    new_verts = np.where(on_boundary[:, None], boundary_moved, moved)
    new_verts = np.where((incident == 0)[:, None], verts, new_verts)

    vertices = np.concatenate([new_verts, face_points, edge_points])
    f = n_v + np.arange(n_f)
    e = n_v + n_f + edge_of
    a, b, c, d = faces.T
    children = np.stack([
        np.stack([a, e[:, 0], f, e[:, 3]], axis=1),
        np.stack([e[:, 0], b, e[:, 1], f], axis=1),
        np.stack([f, e[:, 1], c, e[:, 2]], axis=1),
        np.stack([e[:, 3], f, e[:, 2], d], axis=1),
    ], axis=1).reshape(-1, 4)
    return QuadMesh(vertices, children), np.repeat(np.arange(n_f), 4)


def _limit_positions(mesh):
    verts, faces = mesh.vertices, mesh.faces
    n_v = len(verts)
    edges = mesh.edges()
    adjacency = mesh.face_adjacency
    boundary_slots = np.argwhere(adjacency == BOUNDARY)
    n = np.bincount(edges.reshape(-1), minlength=n_v).astype(np.float64)
    edge_sum = np.zeros((n_v, 3))
    np.add.at(edge_sum, edges[:, 0], verts[edges[:, 1]])
    np.add.at(edge_sum, edges[:, 1], verts[edges[:, 0]])
    diagonal_sum = np.zeros((n_v, 3))
    for k in range(4):
        np.add.at(diagonal_sum, faces[:, k], verts[faces[:, (k + 2) % 4]])
    with np.errstate(invalid='ignore', divide='ignore'):
        limit = ((n * n)[:, None] * verts + 4.0 * edge_sum + diagonal_sum) / (n * (n + 5.0))[:, None]

    boundary_sum = np.zeros((n_v, 3))
    boundary_count = np.zeros(n_v)
    for f, k in boundary_slots:
        u, v = faces[f, k], faces[f, (k + 1) % 4]
        boundary_sum[u] += verts[v]
        boundary_sum[v] += verts[u]
        boundary_count[u] += 1
        boundary_count[v] += 1
    on_boundary = boundary_count > 0
    with np.errstate(invalid='ignore', divide='ignore'):
        boundary_limit = (4.0 * verts + 2.0 * boundary_sum / boundary_count[:, None]) / 6.0
    limit = np.where(on_boundary[:, None], boundary_limit, limit)
    return np.where((n == 0)[:, None], verts, limit)


def subdivide(mesh, levels, smooth=True, project=None):
    """
    Build a ``levels``-deep hierarchy by repeated Catmull-Clark refinement.

    Level 0 is ``mesh`` itself. With ``smooth`` the stored positions of the
    refined levels are their limit-surface positions; refinement always
    continues from the unsmoothed control points. ``project`` maps a vertex
    array onto a target surface after every refinement step.
    """
    if levels < 1:
        raise MeshError('a hierarchy needs at least one level, got {}'.format(levels))
    control = mesh
    stored = [mesh]
    parent_of = [None]
    for level in range(1, levels):
        control, parents = catmull_clark(control)
        if project is not None:
            control = QuadMesh(project(control.vertices), control.faces)
        stored.append(QuadMesh(_limit_positions(control), control.faces) if smooth else control)
        parent_of.append(parents)
        LOG.debug('Subdivided level %d: %s', level, stored[-1])
    return QuadMeshHierarchy(stored, parent_of)


class FaceGeometry:
    """Per-face normal, first fundamental form (E, F, G), curvature proxy and area."""

    CHANNELS = 7

    def __init__(self, normal, fundamental_form, curvature, area, degenerate):
        self.normal = normal
        self.fundamental_form = fundamental_form
        self.curvature = curvature
        self.area = area
        self.degenerate = degenerate

    def __len__(self):
        return len(self.area)

    def as_array(self):
        """(F, 7) scale-normalized encoder input: normal, E/A, F/A, G/A, curvature * A."""
        valid = self.area[~self.degenerate]
        scale = float(valid.mean()) if len(valid) else 1.0
        return np.concatenate([
            self.normal,
            self.fundamental_form / scale,
            (self.curvature * scale)[:, None],
        ], axis=1).astype(np.float32)


def face_geometry(mesh):
    corners = mesh.vertices[mesh.faces]
    a, b, c, d = corners[:, 0], corners[:, 1], corners[:, 2], corners[:, 3]
    pu = ((b - a) + (c - d)) / 2.0
    pv = ((d - a) + (c - b)) / 2.0
    fundamental_form = np.stack([
        np.einsum('ij,ij->i', pu, pu),
        np.einsum('ij,ij->i', pu, pv),
        np.einsum('ij,ij->i', pv, pv),
    ], axis=1)
    area = 0.5 * (np.linalg.norm(np.cross(b - a, d - a), axis=1) + np.linalg.norm(np.cross(c - b, d - b), axis=1))
    normal, length = normalize_rows(np.cross(pu, pv))
    scale = max(float(np.ptp(mesh.vertices, axis=0).max()), 1e-300) if mesh.n_vertices else 1.0
    degenerate = (area <= 1e-12 * scale * scale) | (length <= 1e-12 * scale * scale)
    normal[degenerate] = 0.0
    if degenerate.any():
        LOG.warning('%d degenerate face(s) in %s', int(degenerate.sum()), mesh)

    # interior angle at every corner of every face
    prev_edge, _ = normalize_rows(np.roll(corners, 1, axis=1) - corners)
    next_edge, _ = normalize_rows(np.roll(corners, -1, axis=1) - corners)
    angles = np.arccos(np.clip(np.einsum('fkj,fkj->fk', prev_edge, next_edge), -1.0, 1.0))
    angle_sum = np.zeros(mesh.n_vertices)
    np.add.at(angle_sum, mesh.faces.reshape(-1), angles.reshape(-1))
    vertex_area = np.zeros(mesh.n_vertices)
    np.add.at(vertex_area, mesh.faces.reshape(-1), np.repeat(area / 4.0, 4))
    on_boundary = np.zeros(mesh.n_vertices, dtype=bool)
    for f, k in np.argwhere(mesh.face_adjacency == BOUNDARY):
        on_boundary[mesh.faces[f, k]] = on_boundary[mesh.faces[f, (k + 1) % 4]] = True
    deficit = np.where(on_boundary, math.pi, 2.0 * math.pi) - angle_sum
    with np.errstate(invalid='ignore', divide='ignore'):
        vertex_curvature = np.where(vertex_area > 0, deficit / vertex_area, 0.0)
    curvature = vertex_curvature[mesh.faces].mean(axis=1)
    curvature[degenerate] = 0.0
    return FaceGeometry(normal, fundamental_form, curvature, area, degenerate)


def barycentric_point(sp, mesh):
    corners = mesh.faces[sp.face_id, TRIANGLE_CORNERS[sp.triangle_half]]
    return sp.bary @ mesh.vertices[corners]


def barycentric_points(mesh, face_ids, halves, bary):
    """Vectorized :func:`barycentric_point` over arrays of face ids, halves and (N, 3) coordinates."""
    corners = mesh.faces[np.asarray(face_ids)[:, None], TRIANGLE_CORNERS[np.asarray(halves)]]
    return np.einsum('nk,nkj->nj', np.asarray(bary, dtype=np.float64), mesh.vertices[corners])


def barycentric_coordinates(p, a, b, c):
    """Area ratios of the sub-triangles opposite each corner for a point in the triangle's plane."""
    p, a, b, c = (np.asarray(x, dtype=np.float64) for x in (p, a, b, c))
    normal = np.cross(b - a, c - a)
    total = np.dot(normal, normal)
    if total == 0:
        raise DegenerateGeometry('zero-area triangle')
    return np.array([
        np.dot(np.cross(c - b, p - b), normal),
        np.dot(np.cross(a - c, p - c), normal),
        np.dot(np.cross(b - a, p - a), normal),
    ]) / total


def noc_of_point(p, bbox, padding=0.0):
    """Map positions into the unit cube: centered, uniform scale by the padded largest extent."""
    lo, hi = (np.asarray(x, dtype=np.float64) for x in bbox)
    scale = float((hi - lo).max()) * (1.0 + 2.0 * padding)
    if not scale > 0:
        raise DegenerateGeometry('bounding box {0} - {1} has no extent'.format(lo.tolist(), hi.tolist()))
    return np.clip((np.asarray(p, dtype=np.float64) - (lo + hi) / 2.0) / scale + 0.5, 0.0, 1.0)


def make_box(extents=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)):
    extents = np.asarray(extents, dtype=np.float64)
    corners = np.array([[i, j, k] for k in (0, 1) for j in (0, 1) for i in (0, 1)], dtype=np.float64)
    vertices = (corners - 0.5) * extents + np.asarray(center, dtype=np.float64)
    faces = [(0, 2, 3, 1), (4, 5, 7, 6), (0, 1, 5, 4), (2, 6, 7, 3), (0, 4, 6, 2), (1, 3, 7, 5)]
    return QuadMesh(vertices, faces)


def make_cube(size=1.0):
    return make_box((size, size, size))


def make_plane(nx=1, ny=1, size=1.0):
    xs = np.linspace(-size / 2.0, size / 2.0, nx + 1)
    ys = np.linspace(-size / 2.0, size / 2.0, ny + 1)
    vertices = np.array([[x, y, 0.0] for y in ys for x in xs])
    index = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    faces = [(index[j, i], index[j, i + 1], index[j + 1, i + 1], index[j + 1, i])
             for j in range(ny) for i in range(nx)]
    return QuadMesh(vertices, faces)


def make_quad_sphere(levels=3, radius=1.0):
    def project(vertices):
        unit, _ = normalize_rows(vertices)
        return unit * radius

    cube = make_cube(2.0)
    return subdivide(QuadMesh(project(cube.vertices), cube.faces), levels, smooth=False, project=project)


class Shape:
    """A hierarchy together with everything derived from its finest level."""

    def __init__(self, hierarchy, name=None):
        self.hierarchy = hierarchy
        self.name = name
        self.mesh = hierarchy.finest
        self.geometry = face_geometry(self.mesh)
        self.features = self.geometry.as_array()
        self.vertex_face_counts = np.bincount(self.mesh.faces.reshape(-1), minlength=self.mesh.n_vertices)
        self.isolated_vertices = np.flatnonzero(self.vertex_face_counts == 0)
        if len(self.isolated_vertices):
            LOG.warning('%s: %d isolated vertices get zero features', self, len(self.isolated_vertices))
        self.degenerate_neighbors = self._degenerate_neighbors()

    @classmethod
    def from_mesh(cls, mesh, levels, smooth=True, name=None):
        return cls(subdivide(mesh, levels, smooth=smooth), name=name)

    @property
    def bbox(self):
        return self.mesh.bbox

    @property
    def levels(self):
        return len(self.hierarchy)

    def _degenerate_neighbors(self):
        neighbors = {}
        for f in np.flatnonzero(self.geometry.degenerate):
            around = [int(g) for g in self.mesh.face_adjacency[f] if g != BOUNDARY and not self.geometry.degenerate[g]]
            neighbors[int(f)] = around
        return neighbors

    def __repr__(self):
        return '<Shape name={0} faces={1}>'.format(self.name, self.hierarchy.face_counts())
