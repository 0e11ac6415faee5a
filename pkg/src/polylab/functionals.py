"""Key geometric functionals of a Poisson polytope and their empirical measures.

Face-count functionals are exact. Missed-volume type functionals are
hit-or-miss Monte Carlo integrals whose per-point attribution follows the
facet cone hit by the ray from the origin; the facet in turn belongs to its
owner vertex (the vertex of largest norm, ties broken lexicographically).
"""

import re
from dataclasses import dataclass, field
from math import comb, pi

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_cloud, check_vectors
from .exceptions import NotInBall, OriginNotInterior, Unsupported
from .hull import (
    convex_hull,
    facet_areas,
    membership,
    ray_facet,
    support_function,
)
from .sampling import as_generator, ball_volume, uniform_directions, uniform_in_ball

_KIND_RE = re.compile(r"^(V_d|VF|V_(\d+)|f_(\d+))$")


@dataclass(frozen=True)
class FunctionalKind:
    """One element of the functional family together with its exponents.

    ``name`` is ``"V_d"``, ``"VF"``, ``"V_j"`` or ``"f_j"``; ``j`` carries
    the index for the last two (for ``V_d`` it equals ``d``).
    """

    name: str
    d: int
    j: int = None

    @classmethod
    def parse(cls, text, d):
        m = _KIND_RE.match(text.strip())
        if not m:
            raise ValueError(f"unknown functional {text!r}; use V_d, VF, V_<j> or f_<j>")
        if m.group(1) == "V_d":
            return cls("V_d", d, d)
        if m.group(1) == "VF":
            return cls("VF", d)
        if m.group(2) is not None:
            j = int(m.group(2))
            if j == d:
                return cls("V_d", d, d)
            if not 1 <= j <= d - 1:
                raise ValueError(f"V_j needs 1 <= j <= d, got {j}")
            return cls("V_j", d, j)
        j = int(m.group(3))
        if not 0 <= j <= d - 1:
            raise ValueError(f"f_j needs 0 <= j <= d-1, got {j}")
        return cls("f_j", d, j)

    @property
    def label(self):
        if self.name in ("V_d", "VF"):
            return self.name
        return f"{self.name[0]}_{self.j}"

    @property
    def e(self):
        """Scaling exponent: 1 for volume-type functionals, 0 for face counts."""
        return 0 if self.name == "f_j" else 1

    @property
    def w(self):
        return self.j if self.name == "f_j" else 2

    @property
    def v(self):
        return 2 * self.j if self.name == "f_j" else 2


@dataclass
class EmpiricalMeasure:
    """Weighted atoms ``sum_k weights[k] * delta_{locations[k]}``.

    ``total_se`` is the Monte Carlo standard error of the total mass when
    the weights are estimated (``None`` for exact measures).
    """

    locations: np.ndarray
    weights: np.ndarray
    total_se: float = None

    @property
    def total(self):
        return float(np.sum(self.weights))

    def scaled(self, factor):
        se = None if self.total_se is None else self.total_se * abs(factor)
        return EmpiricalMeasure(self.locations, self.weights * factor, se)


@dataclass(frozen=True)
class TestFunction:
    """Bounded continuous test function on the unit ball."""

    __test__ = False  # not a pytest class

    tag: str
    fn: callable = field(compare=False, repr=False)

    def __call__(self, x):
        return self.fn(np.atleast_2d(x))

    @classmethod
    def constant(cls, c=1.0):
        return cls(f"{c:g}", lambda x: np.full(len(x), float(c)))

    @classmethod
    def coordinate(cls, i):
        return cls(f"x{i}", lambda x: x[:, i])

    @classmethod
    def quadratic(cls, i):
        return cls(f"x{i}^2", lambda x: x[:, i] ** 2)

    @classmethod
    def parse(cls, tag):
        tag = tag.strip()
        m = re.fullmatch(r"x(\d+)(\^2)?", tag)
        if m:
            i = int(m.group(1))
            return cls.quadratic(i) if m.group(2) else cls.coordinate(i)
        return cls.constant(float(tag))


def pair(f, m):
    """``<f, m>``: integral of the test function against the measure."""
    if len(m.weights) == 0:
        return 0.0
    return float(np.dot(f(m.locations), m.weights))


# ---------------------------------------------------------------- totals


def face_counts(p):
    return np.array(p.f_vector, dtype=int)


def _check_in_ball(p):
    if np.any(np.linalg.norm(p.vertices, axis=1) > 1.0 + 1e-9):
        raise NotInBall("polytope is not contained in the unit ball")


def missed_volume(p):
    """``kappa_d - V_d(p)`` for a polytope inside the unit ball."""
    _check_in_ball(p)
    return ball_volume(p.d) - p.volume


def intrinsic_volume_ball(d, j):
    """``V_j`` of the d-dimensional unit ball."""
    return comb(d, j) * ball_volume(d) / ball_volume(d - j)


def _edge_dihedral_sum(p):
    """``sum_e length(e) * (pi - interior dihedral angle at e)`` for d = 3."""
    inc = [set(x) for x in p.vertex_facets]
    total = 0.0
    for a, b in p.faces[1]:
        fa, fb = sorted(inc[a] & inc[b])
        cos = float(np.clip(np.dot(p.normals[fa], p.normals[fb]), -1.0, 1.0))
        total += np.linalg.norm(p.vertices[a] - p.vertices[b]) * np.arccos(cos)
    return total


def intrinsic_deficit_exact(p, j):
    """Exact ``V_j(B^d) - V_j(p)`` for d in {2, 3}.

    Uses perimeter (d=2), surface area (d=3, j=2) and the edge-length times
    exterior-angle formula for the mean-width functional (d=3, j=1).
    """
    d = p.d
    if d not in (2, 3):
        raise Unsupported("exact intrinsic deficits are available for d <= 3 only; use the MC path")
    if not 1 <= j <= d - 1:
        raise ValueError(f"need 1 <= j <= {d - 1}")
    if d == 2:
        perimeter = sum(np.linalg.norm(p.vertices[a] - p.vertices[b]) for a, b in p.faces[1])
        return pi - perimeter / 2.0
    if j == 2:
        return 2.0 * pi - facet_areas(p).sum() / 2.0
    return 4.0 - _edge_dihedral_sum(p) / (2.0 * pi)


def _random_frame(x_unit, k, gen):
    """k orthonormal directions orthogonal to each row of ``x_unit``: shape (n, k, d)."""
    n, d = x_unit.shape
    frames = np.empty((n, k, d))
    basis = x_unit[:, None, :]
    for i in range(k):
        z = gen.standard_normal((n, d))
        coef = np.einsum("nkd,nd->nk", basis, z)
        z -= np.einsum("nk,nkd->nd", coef, basis)
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        frames[:, i] = z
        basis = np.concatenate([basis, z[:, None, :]], axis=1)
    return frames


def _outside_projection_plane(q_coords, radius):
    """Point ``(radius, 0)`` outside conv of 2d point sets, vectorised.

    ``q_coords`` has shape (n, m, 2). A point lies outside a convex hull iff
    the angular gap between consecutive hull points seen from it exceeds pi.
    """
    rel = q_coords.copy()
    rel[:, :, 0] -= radius[:, None]
    ang = np.sort(np.arctan2(rel[:, :, 1], rel[:, :, 0]), axis=1)
    gaps = np.diff(ang, axis=1)
    wrap = 2 * pi - (ang[:, -1] - ang[:, 0])
    biggest = np.maximum(gaps.max(axis=1) if gaps.shape[1] else 0.0, wrap)
    return biggest > pi + 1e-12


def _theta_indicator(p, x, j, gen):
    """One-draw estimate of the projection-escape indicator at each row of ``x``."""
    r = np.linalg.norm(x, axis=1)
    u = x / r[:, None]
    if j == 1:
        return r > support_function(p, u) + p.tol
    frame = _random_frame(u, j - 1, gen)
    if j == 2:
        q = np.stack([u @ p.vertices.T, np.einsum("nd,md->nm", frame[:, 0], p.vertices)], axis=-1)
        return _outside_projection_plane(q, r)
    out = np.empty(len(x), dtype=bool)
    for i in range(len(x)):
        basis = np.vstack([u[i], frame[i]])
        proj = convex_hull(p.vertices @ basis.T)
        target = np.zeros(j)
        target[0] = r[i]
        out[i] = not membership(proj, target)
    return out


def intrinsic_deficit_mc(p, j, n, rng, chunk=20000):
    """Monte Carlo estimate of ``V_j(B^d) - V_j(p)`` with its standard error.

    Integrates ``binom(d-1, j-1)/kappa_{d-j} * theta_j(x) * |x|**(j-d)`` over
    the missed region, where ``theta_j(x)`` is the probability that ``x``
    escapes the projection of ``p`` onto a uniform j-plane through ``x``.
    """
    d = p.d
    if not 1 <= j <= d - 1:
        raise ValueError(f"need 1 <= j <= {d - 1}")
    if np.any(p.offsets <= p.tol):
        raise OriginNotInterior("origin is not strictly interior to the polytope")
    gen = as_generator(rng)
    const = comb(d - 1, j - 1) / ball_volume(d - j) * ball_volume(d)
    values = np.zeros(n)
    done = 0
    while done < n:
        m = min(chunk, n - done)
        x = uniform_in_ball(m, d, gen)
        out = ~membership(p, x)
        vals = np.zeros(m)
        if out.any():
            xo = x[out]
            hit = _theta_indicator(p, xo, j, gen)
            vals[np.flatnonzero(out)[hit]] = np.linalg.norm(xo[hit], axis=1) ** (j - d)
        values[done:done + m] = vals
        done += m
    values *= const
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(n))


# ---------------------------------------------------------------- flower


def flower_contains(cloud, z):
    """Membership in the union of balls ``B(x/2, |x|/2)`` over the cloud.

    Uses ``|z - x/2| <= |x|/2  <=>  |z|^2 <= <z, x>``; vectorised over rows
    of ``z``. The origin lies on every ball boundary and counts as inside.
    """
    pts = check_cloud(cloud)
    arr, single = check_vectors(z, pts.shape[1])
    sq = np.einsum("ij,ij->i", arr, arr)
    inside = np.max(arr @ pts.T, axis=1) >= sq - 1e-12
    inside |= sq == 0
    return bool(inside[0]) if single else inside


def _flower_radial_extent(vertices, u):
    return np.maximum(np.max(u @ vertices.T, axis=1), 0.0)


def flower_missed_volume(cloud, n, rng):
    """Hit-or-miss estimate of ``V_d(B^d minus VF(cloud))`` with standard error.

    Only extreme points can maximise ``<z, x>``, so the test runs against
    the hull vertices when the cloud is large enough to have a hull.
    """
    pts = check_cloud(cloud)
    d = pts.shape[1]
    if len(pts) > 4 * (d + 1):
        try:
            pts = convex_hull(pts).vertices
        except Exception:
            pass
    gen = as_generator(rng)
    z = uniform_in_ball(n, d, gen)
    miss = ~flower_contains(pts, z)
    kd = ball_volume(d)
    frac = miss.mean()
    return kd * frac, kd * np.sqrt(frac * (1 - frac) / n)


def flower_missed_volume_quadrature(cloud, n_dir=200000, rng=0):
    """Radial-integral form ``(1/d) int_S (1 - max(h(u), 0)**d) du`` of the flower deficit.

    Exact in the radial variable; the sphere integral is a fixed-seed
    uniform average (d >= 3) or a midpoint rule on the circle (d = 2).
    """
    pts = check_cloud(cloud)
    d = pts.shape[1]
    if d == 2:
        t = (np.arange(n_dir) + 0.5) * 2 * pi / n_dir
        u = np.c_[np.cos(t), np.sin(t)]
    else:
        u = uniform_directions(n_dir, d, as_generator(rng))
    ext = _flower_radial_extent(pts, u)
    area = d * ball_volume(d)
    return area * np.mean(1.0 - ext ** d) / d


# ---------------------------------------------------------------- attribution


def owner_vertex(p, face):
    """Vertex of ``face`` closest to the unit sphere.

    Ties in norm (within 1e-12) go to the lexicographically smallest
    coordinate vector.
    """
    face = tuple(face)
    norms = np.linalg.norm(p.vertices[list(face)], axis=1)
    best = norms.max()
    cands = [v for v, r in zip(face, norms) if r >= best - 1e-12]
    if len(cands) == 1:
        return cands[0]
    return min(cands, key=lambda v: tuple(p.vertices[v]))


def facet_owners(p):
    return np.array([owner_vertex(p, f) for f in p.facets], dtype=int)


def attribute_faces(p, j):
    """Empirical measure of the j-face functional: one unit per face at its owner."""
    if not 0 <= j <= p.d - 1:
        raise ValueError(f"need 0 <= j <= {p.d - 1}")
    counts = np.zeros(len(p.vertices))
    if j == 0:
        counts[:] = 1.0
    else:
        for face in p.faces[j]:
            counts[owner_vertex(p, face)] += 1.0
    return EmpiricalMeasure(p.vertices, counts)


def attribute_missed_volume(p, variant="V_d", n=100000, rng=None, cloud=None):
    """Hit-or-miss empirical measure of the missed-volume or flower functional.

    Each miss point is credited to the owner of the facet its ray from the
    origin crosses; atom weights are ``kappa_d / n`` times the counts.
    """
    if variant not in ("V_d", "VF"):
        raise ValueError("variant must be 'V_d' or 'VF'")
    if np.any(p.offsets <= p.tol):
        raise OriginNotInterior("origin is not strictly interior to the polytope")
    d = p.d
    gen = as_generator(rng)
    z = uniform_in_ball(n, d, gen)
    if variant == "V_d":
        miss = ~membership(p, z)
    else:
        ref = p.vertices if cloud is None else check_cloud(cloud, d=d)
        miss = ~flower_contains(ref, z)
    zm = z[miss]
    counts = np.zeros(len(p.vertices))
    if len(zm):
        fids = ray_facet(p, zm / np.linalg.norm(zm, axis=1, keepdims=True))
        owners = facet_owners(p)
        np.add.at(counts, owners[fids], 1.0)
    kd = ball_volume(d)
    frac = miss.mean()
    return EmpiricalMeasure(p.vertices, counts * kd / n, kd * np.sqrt(frac * (1 - frac) / n))


def empirical_measure(p, kind, n=100000, rng=None):
    """Empirical measure of ``kind`` for the polytope ``p`` (unscaled)."""
    if kind.name == "f_j":
        return attribute_faces(p, kind.j)
    if kind.name in ("V_d", "VF"):
        return attribute_missed_volume(p, kind.name, n, rng)
    return attribute_intrinsic_deficit(p, kind.j, n, rng)


def attribute_intrinsic_deficit(p, j, n, rng):
    """Per-vertex split of the intrinsic-volume deficit estimator by facet cone."""
    d = p.d
    gen = as_generator(rng)
    x = uniform_in_ball(n, d, gen)
    out = ~membership(p, x)
    xo = x[out]
    counts = np.zeros(len(p.vertices))
    vals = np.zeros(n)
    if len(xo):
        hit = _theta_indicator(p, xo, j, gen)
        w = np.where(hit, np.linalg.norm(xo, axis=1) ** (j - d), 0.0)
        vals[np.flatnonzero(out)] = w
        fids = ray_facet(p, xo / np.linalg.norm(xo, axis=1, keepdims=True))
        np.add.at(counts, facet_owners(p)[fids], w)
    const = comb(d - 1, j - 1) / ball_volume(d - j) * ball_volume(d)
    se = const * vals.std(ddof=1) / np.sqrt(n)
    return EmpiricalMeasure(p.vertices, counts * const / n, se)


class PolytopeFunctionals(TransformerMixin, BaseEstimator):
    """Map point clouds to rows ``[f_0, ..., f_{d-1}, missed volume]`` of their hulls.

    ``X`` is a sequence of point clouds (each an (n, d) array), which is why
    the estimator does not validate ``X`` as a single 2-d array.
    """

    def __init__(self, d=2):
        self.d = d

    def fit(self, X, y=None):
        self.n_features_out_ = self.d + 1
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_out_")
        rows = []
        for cloud in X:
            p = convex_hull(check_cloud(cloud, d=self.d))
            rows.append(list(p.f_vector) + [missed_volume(p)])
        return np.asarray(rows, dtype=float)
