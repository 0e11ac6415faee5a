"""Convex hulls with the full face lattice.

Facets come from Qhull (``scipy.spatial.ConvexHull``); triangulated facets
that share a supporting hyperplane are merged back into a single facet, then
every lower-dimensional face is derived combinatorially, so non-simplicial
polytopes such as the cube get their true f-vector.
"""

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from math import factorial

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from ._validation import check_cloud, check_vectors
from .exceptions import DegenerateInput, OriginNotInterior

REL_TOL = 1e-10


def _scale(points):
    return max(1.0, float(np.max(np.abs(points))))


def _affine_rank(points, tol):
    if len(points) <= 1:
        return 0
    diffs = points[1:] - points[0]
    s = np.linalg.svd(diffs, compute_uv=False)
    return int(np.sum(s > tol))


@dataclass(frozen=True, eq=False)
class Polytope:
    """Immutable polytope: vertices, face lattice and facet hyperplanes.

    ``faces[j]`` lists the j-faces as sorted tuples of vertex indices.
    Facet ``i`` is ``faces[d-1][i]`` with outward unit normal ``normals[i]``
    and offset ``offsets[i]``, i.e. it supports ``{z : <z, n> <= offset}``.
    ``source_index[k]`` is the position of vertex ``k`` in the input cloud.
    """

    vertices: np.ndarray
    faces: tuple
    normals: np.ndarray
    offsets: np.ndarray
    source_index: np.ndarray = None
    boundary_simplices: tuple = None

    @property
    def d(self):
        return self.vertices.shape[1]

    @property
    def f_vector(self):
        return tuple(len(level) for level in self.faces)

    @property
    def facets(self):
        return self.faces[self.d - 1]

    @property
    def scale(self):
        return _scale(self.vertices)

    @property
    def tol(self):
        return REL_TOL * self.scale

    @cached_property
    def volume(self):
        return volume(self)

    @cached_property
    def vertex_facets(self):
        """For each vertex, the sorted tuple of facet ids containing it."""
        incident = [[] for _ in range(len(self.vertices))]
        for fid, facet in enumerate(self.facets):
            for v in facet:
                incident[v].append(fid)
        return tuple(tuple(x) for x in incident)

    @cached_property
    def edges(self):
        if self.d == 1:
            return ((0, 1),)
        return self.faces[1]

    def children(self, j):
        """Map each j-face to the (j-1)-faces it contains (j >= 1)."""
        return _children(self, j)

    def euler_characteristic(self):
        return sum((-1) ** j * f for j, f in enumerate(self.f_vector))


def euler_holds(p):
    return p.euler_characteristic() == 1 - (-1) ** p.d


def _freeze(arr):
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def _segment(points, source):
    x = points[:, 0]
    lo, hi = int(np.argmin(x)), int(np.argmax(x))
    if x[hi] - x[lo] <= REL_TOL * _scale(points):
        raise DegenerateInput("points collapse to a single location")
    verts = points[[lo, hi]]
    return Polytope(
        vertices=_freeze(verts),
        faces=(((0,), (1,)),),
        normals=_freeze([[-1.0], [1.0]]),
        offsets=_freeze([-verts[0, 0], verts[1, 0]]),
        source_index=np.asarray(source)[[lo, hi]],
    )


def _merge_coplanar(hull, tol):
    """Group Qhull's triangulated simplices by supporting hyperplane."""
    eq = hull.equations
    n = len(eq)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        for j in hull.neighbors[i]:
            if j > i and np.all(np.abs(eq[i] - eq[j]) <= tol):
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def _lower_faces(facets, points, d, tol):
    """Derive the face lattice below the facets."""
    levels = {d - 1: set(facets)}
    for k in range(d - 1, 1, -1):
        lower = set()
        for face in levels[k]:
            if len(face) == k + 1:
                lower.update(frozenset(c) for c in combinations(sorted(face), k))
                continue
            for g in facets:
                if face <= g:
                    continue
                inter = face & g
                if len(inter) >= k and _affine_rank(points[sorted(inter)], tol) == k - 1:
                    lower.add(inter)
        levels[k - 1] = lower
    levels[0] = {frozenset([i]) for i in range(len(points))}
    return tuple(tuple(sorted(tuple(sorted(f)) for f in levels[j])) for j in range(d))


def convex_hull(points, d=None):
    """Convex hull of a point cloud with its complete face lattice.

    Parameters
    ----------
    points : array_like of shape (n, d)
        Input cloud, ``n >= d + 1`` and affinely full-dimensional.
    d : int, optional
        Expected dimension; inferred from ``points`` when omitted.

    Returns
    -------
    Polytope
        Vertices are exactly the extreme points of the input (interior and
        relative-interior boundary points are dropped).

    Raises
    ------
    DegenerateInput
        If the points are affinely dependent.
    """
    pts = check_cloud(points, d=d, allow_line=True)
    n, dim = pts.shape
    if n < dim + 1:
        raise DegenerateInput(f"need at least {dim + 1} points in dimension {dim}, got {n}")
    scale = _scale(pts)
    tol = REL_TOL * scale
    if dim == 1:
        return _segment(pts, np.arange(n))

    centered = pts - pts.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[-1] <= 1e-9 * max(sv[0], 1e-300):
        raise DegenerateInput("points are affinely dependent")
    try:
        hull = ConvexHull(pts)
    except QhullError as exc:
        raise DegenerateInput(str(exc)) from exc

    groups = _merge_coplanar(hull, 10 * tol + 1e-12)
    facet_members = [set(hull.simplices[g].ravel()) for g in groups]
    facet_eq = [hull.equations[g[0]] for g in groups]

    # a hull vertex is extreme iff the normals of its facets span R^d
    incident = {}
    for fid, members in enumerate(facet_members):
        for v in members:
            incident.setdefault(v, []).append(fid)
    extreme = sorted(
        v for v, fids in incident.items()
        if len(fids) >= dim
        and np.linalg.matrix_rank(np.array([facet_eq[f][:dim] for f in fids]), tol=1e-9) == dim
    )
    relabel = {v: k for k, v in enumerate(extreme)}
    verts = pts[extreme]

    facets = []
    simplices = []
    for members, g in zip(facet_members, groups):
        facets.append(frozenset(relabel[v] for v in members if v in relabel))
        simplices.append(g)
    # coplanar merges can only produce one group per hyperplane; keep facet order sorted
    order = sorted(range(len(facets)), key=lambda i: tuple(sorted(facets[i])))
    facets = [facets[i] for i in order]
    eqs = np.array([facet_eq[i] for i in order])
    tri = []
    for i in order:
        tri.append(tuple(
            tuple(relabel[v] for v in hull.simplices[s] if v in relabel)
            for s in simplices[i]
        ))
    faces = _lower_faces(facets, verts, dim, 1e-9 * scale)
    # faces[d-1] was re-sorted; line it up with the hyperplanes
    pos = {tuple(sorted(f)): i for i, f in enumerate(facets)}
    perm = [pos[f] for f in faces[dim - 1]]
    return Polytope(
        vertices=_freeze(verts),
        faces=faces,
        normals=_freeze(eqs[perm, :dim]),
        offsets=_freeze(-eqs[perm, dim]),
        source_index=np.asarray(extreme),
        # Qhull's triangulation is only reusable when no listed vertex was dropped
        boundary_simplices=tuple(tri[i] for i in perm) if len(extreme) == len(incident) else None,
    )


def facet_offsets(points):
    """Facet offsets of ``conv(points)`` straight from Qhull (no face lattice).

    Cheap helper for stop rules that only need the hyperplane description.
    Returns ``None`` when the hull is degenerate.
    """
    pts = np.asarray(points, dtype=float)
    if len(pts) < pts.shape[1] + 1:
        return None
    try:
        hull = ConvexHull(pts)
    except QhullError:
        return None
    return -hull.equations[:, -1]


def _children(p, j):
    cache = p.__dict__.setdefault("_children_cache", {})
    if j not in cache:
        lower = [frozenset(f) for f in p.faces[j - 1]]
        mapping = []
        for face in p.faces[j]:
            fs = set(face)
            mapping.append(tuple(i for i, h in enumerate(lower) if h <= fs))
        cache[j] = tuple(mapping)
    return cache[j]


def _pull_triangulate(p, j, face_id):
    """Pulling triangulation of a j-face into j-simplices (vertex tuples)."""
    face = p.faces[j][face_id]
    if len(face) == j + 1:
        return [face]
    apex = face[0]
    out = []
    for h in p.children(j)[face_id]:
        sub = p.faces[j - 1][h]
        if apex in sub:
            continue
        out.extend((apex,) + s for s in _pull_triangulate(p, j - 1, h))
    return out


def facet_triangulation(p, facet_id):
    """(d-1)-simplices covering facet ``facet_id``."""
    if p.boundary_simplices is not None:
        return list(p.boundary_simplices[facet_id])
    return _pull_triangulate(p, p.d - 1, facet_id)


def volume(p):
    """Lebesgue volume by coning facet triangulations from the vertex centroid."""
    d = p.d
    if d == 1:
        return float(p.vertices[1, 0] - p.vertices[0, 0])
    c = p.vertices.mean(axis=0)
    total = 0.0
    for fid in range(len(p.facets)):
        for simplex in facet_triangulation(p, fid):
            m = p.vertices[list(simplex)] - c
            total += abs(np.linalg.det(m))
    return total / factorial(d)


def facet_areas(p):
    """(d-1)-volume of every facet."""
    d = p.d
    areas = np.zeros(len(p.facets))
    for fid in range(len(p.facets)):
        acc = 0.0
        for simplex in facet_triangulation(p, fid):
            m = p.vertices[list(simplex[1:])] - p.vertices[simplex[0]]
            acc += np.sqrt(max(np.linalg.det(m @ m.T), 0.0))
        areas[fid] = acc / factorial(d - 1)
    return areas


def support_function(p, u):
    """``max <u, v>`` over the vertices; vectorised over rows of ``u``."""
    arr, single = check_vectors(u, p.d)
    h = np.max(arr @ p.vertices.T, axis=1)
    return float(h[0]) if single else h


def _require_origin_inside(p):
    if np.any(p.offsets <= p.tol):
        raise OriginNotInterior("origin is not strictly interior to the polytope")


def polar_dual(p):
    """Polar body ``{z : <z, v> <= 1 for every vertex v}``.

    The face lattice is obtained by inverting the lattice of ``p``: the dual
    j-face attached to a (d-1-j)-face G of ``p`` consists of the facets of
    ``p`` that contain G. Vertex ``k`` of the dual is ``normals[k] / offsets[k]``.
    """
    _require_origin_inside(p)
    d = p.d
    verts = p.normals / p.offsets[:, None]
    inc = [frozenset(x) for x in p.vertex_facets]
    levels = []
    origin_of = []
    for j in range(d):
        src = p.faces[d - 1 - j]
        dual = []
        for gid, g in enumerate(src):
            s = inc[g[0]]
            for v in g[1:]:
                s = s & inc[v]
            dual.append((tuple(sorted(s)), gid))
        dual.sort()
        levels.append(tuple(f for f, _ in dual))
        if j == d - 1:
            origin_of = [gid for _, gid in dual]
    # dual facet k comes from vertex origin_of[k] of p
    src_vertices = np.array([p.faces[0][g][0] for g in origin_of])
    v = p.vertices[src_vertices]
    norms = np.linalg.norm(v, axis=1)
    return Polytope(
        vertices=_freeze(verts),
        faces=tuple(levels),
        normals=_freeze(v / norms[:, None]),
        offsets=_freeze(1.0 / norms),
    )


def ray_facet(p, direction):
    """Facet crossed by the ray ``{t * direction : t > 0}``.

    Vectorised over rows of ``direction``. Exact ties (ray through a
    lower-dimensional face) resolve to the smallest facet id.
    """
    _require_origin_inside(p)
    arr, single = check_vectors(direction, p.d)
    proj = arr @ p.normals.T
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(proj > 0, p.offsets[None, :] / proj, np.inf)
    tmin = t.min(axis=1, keepdims=True)
    hit = t <= tmin * (1.0 + 1e-12)
    ids = np.argmax(hit, axis=1)
    return int(ids[0]) if single else ids


def project(p, basis):
    """Hull of the vertices projected onto the span of an orthonormal basis.

    Coordinates of the result are taken with respect to ``basis``.
    """
    b = np.atleast_2d(np.asarray(basis, dtype=float))
    j = b.shape[0]
    if not 1 <= j <= p.d or b.shape[1] != p.d:
        raise ValueError(f"basis must be j x {p.d} with 1 <= j <= {p.d}")
    if not np.allclose(b @ b.T, np.eye(j), atol=1e-9):
        raise ValueError("basis must be orthonormal")
    return convex_hull(p.vertices @ b.T)


def membership(p, z):
    """``True`` iff ``z`` lies in ``p`` (boundary included, up to tolerance)."""
    arr, single = check_vectors(z, p.d)
    inside = np.all(arr @ p.normals.T <= p.offsets[None, :] + p.tol, axis=1)
    return bool(inside[0]) if single else inside


def circumradius(p):
    """Largest vertex norm, i.e. the radius of the smallest origin ball containing ``p``."""
    return float(np.max(np.linalg.norm(p.vertices, axis=1)))


__all__ = [
    "Polytope",
    "convex_hull",
    "volume",
    "facet_areas",
    "support_function",
    "polar_dual",
    "ray_facet",
    "project",
    "membership",
    "circumradius",
    "euler_holds",
    "facet_offsets",
    "facet_triangulation",
]
