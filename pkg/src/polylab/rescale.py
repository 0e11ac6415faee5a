"""Parabolic rescaling of the ball picture around the north pole.

A point ``x`` of the ball is sent to ``(v, h)`` where ``v`` is the
``lam**(1/(d+1))``-scaled tangent coordinate of its direction and ``h`` the
``lam**(2/(d+1))``-scaled distance to the sphere.
"""

from typing import NamedTuple

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_cloud, check_positive, check_vectors
from .exceptions import OutOfInjectivityRegion
from .hull import support_function


class ScaledPoint(NamedTuple):
    """Scaled coordinates; ``v`` has shape (m, d-1) and ``h`` shape (m,)."""

    v: np.ndarray
    h: np.ndarray


class HeightProfile(NamedTuple):
    vertex: np.ndarray
    height: np.ndarray
    adjacency_radius: np.ndarray


def _exponents(lam, d):
    return lam ** (1.0 / (d + 1)), lam ** (2.0 / (d + 1))


def exp_map(u):
    """Spherical exponential map at the north pole ``(0, ..., 0, 1)``.

    ``u`` has shape (d-1,) or (m, d-1); the image is
    ``(sin|u| u/|u|, cos|u|)``.
    """
    arr = np.asarray(u, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    t = np.linalg.norm(arr, axis=1)
    if np.any(t >= np.pi):
        raise OutOfInjectivityRegion("exp_map needs |u| < pi")
    with np.errstate(invalid="ignore", divide="ignore"):
        factor = np.where(t > 0, np.sin(t) / t, 1.0)
    out = np.concatenate([arr * factor[:, None], np.cos(t)[:, None]], axis=1)
    return out[0] if single else out


def exp_inv(y):
    """Inverse of :func:`exp_map` on the sphere minus the south pole."""
    arr = np.asarray(y, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    last = np.clip(arr[:, -1], -1.0, 1.0)
    head = arr[:, :-1]
    s = np.linalg.norm(head, axis=1)
    if np.any((last <= -1.0 + 1e-15) & (s < 1e-12)):
        raise OutOfInjectivityRegion("exp_inv is undefined at the south pole")
    t = np.arctan2(s, last)
    with np.errstate(invalid="ignore", divide="ignore"):
        factor = np.where(s > 0, t / s, 1.0)
    out = head * factor[:, None]
    return out[0] if single else out


def geodesic_distance(a, b):
    cos = np.clip(np.sum(a * b, axis=-1), -1.0, 1.0)
    return np.arccos(cos)


def scale_T(x, lam):
    """Scaled coordinates ``(v, h)`` of ball points ``x`` (shape (d,) or (m, d))."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    d = arr.shape[1]
    r = np.linalg.norm(arr, axis=1)
    if np.any(r == 0):
        raise OutOfInjectivityRegion("scale_T is undefined at the origin")
    a1, a2 = _exponents(lam, d)
    v = a1 * exp_inv(arr / r[:, None])
    h = a2 * (1.0 - r)
    if single:
        return ScaledPoint(v[0], h[0])
    return ScaledPoint(v, h)


def scale_T_inv(sp, lam):
    v = np.asarray(sp.v, dtype=float)
    h = np.asarray(sp.h, dtype=float)
    single = v.ndim == 1
    v = np.atleast_2d(v)
    h = np.atleast_1d(h)
    d = v.shape[1] + 1
    a1, a2 = _exponents(lam, d)
    x = exp_map(v / a1) * (1.0 - h / a2)[:, None]
    return x[0] if single else x


def intensity_density(v, h, lam, d):
    """Density of the rescaled process w.r.t. Lebesgue measure in ``(v, h)``."""
    v = np.atleast_2d(np.asarray(v, dtype=float))
    h = np.asarray(h, dtype=float)
    a1, a2 = _exponents(lam, d)
    s = np.linalg.norm(v, axis=1) / a1
    with np.errstate(invalid="ignore", divide="ignore"):
        sinc = np.where(s > 0, np.sin(s) / s, 1.0)
    out = sinc ** (d - 2) * (1.0 - h / a2) ** (d - 1)
    return out if out.size > 1 else float(out[0])


def rescaled_defect_support(p, v, lam):
    """``lam**(2/(d+1)) * (1 - h_p(exp(lam**(-1/(d+1)) v)))``."""
    a1, a2 = _exponents(lam, p.d)
    u = exp_map(np.asarray(v, dtype=float) / a1)
    return a2 * (1.0 - support_function(p, u))


def vertex_heights(p, lam):
    """Height of every hull vertex and its adjacency radius.

    The adjacency radius of ``x`` is the largest scaled spatial distance
    ``lam**(1/(d+1)) * d_s(x/|x|, y/|y|)`` to a vertex ``y`` sharing an edge
    with ``x``; this is ``|v_x - v_y|`` measured in the chart centred at ``x``.
    """
    d = p.d
    a1, a2 = _exponents(lam, d)
    r = np.linalg.norm(p.vertices, axis=1)
    u = p.vertices / r[:, None]
    radius = np.zeros(len(r))
    edges = np.asarray(p.edges)
    dist = a1 * geodesic_distance(u[edges[:, 0]], u[edges[:, 1]])
    np.maximum.at(radius, edges[:, 0], dist)
    np.maximum.at(radius, edges[:, 1], dist)
    return HeightProfile(np.arange(len(r)), a2 * (1.0 - r), radius)


def paraboloid_up_contains(candidate, apex, lam=np.inf, tol=1e-12):
    """Membership of ``candidate`` in the upward (quasi-)paraboloid with apex ``apex``.

    Finite ``lam``:
    ``h' >= h + lam**(2/(d+1)) (1 - cos w) - h (1 - cos w)``, with ``w`` the
    geodesic angle between the two spatial coordinates; the lower boundary
    of the union over the process is then the rescaled defect support
    function. ``lam = inf``: ``h' - h >= |v' - v|**2 / 2``.
    """
    cv = np.atleast_2d(np.asarray(candidate.v, dtype=float))
    av = np.atleast_2d(np.asarray(apex.v, dtype=float))
    ch = np.asarray(candidate.h, dtype=float)
    ah = np.asarray(apex.h, dtype=float)
    if np.isinf(lam):
        gap = 0.5 * np.sum((cv - av) ** 2, axis=1)
        out = ch - ah >= gap - tol
    else:
        d = cv.shape[1] + 1
        a1, a2 = _exponents(lam, d)
        w = geodesic_distance(exp_map(cv / a1), exp_map(av / a1))
        one_minus = 1.0 - np.cos(w)
        out = ch >= ah + a2 * one_minus - ah * one_minus - tol
    out = np.asarray(out)
    return bool(out.ravel()[0]) if out.size == 1 else out


def growth_lower_boundary(points_vh, v, lam):
    """Lower boundary height of the union of quasi-paraboloids at spatial points ``v``."""
    pv = np.atleast_2d(points_vh.v)
    ph = np.atleast_1d(points_vh.h)
    v = np.atleast_2d(np.asarray(v, dtype=float))
    d = pv.shape[1] + 1
    a1, a2 = _exponents(lam, d)
    e_points = exp_map(pv / a1)
    e_query = exp_map(v / a1)
    one_minus = 1.0 - np.clip(e_query @ e_points.T, -1.0, 1.0)
    heights = ph[None, :] + (a2 - ph[None, :]) * one_minus
    return heights.min(axis=1)


class DecayFit(NamedTuple):
    slope: float
    stderr: float
    t: float
    n_bins: int

    @property
    def rate(self):
        return -self.slope


def _log_linear(x, y, keep):
    keep = keep & (y > 0)
    if keep.sum() < 3:
        raise ValueError("need at least three populated bins for a decay fit")
    res = stats.linregress(x[keep], np.log(y[keep]))
    return DecayFit(float(res.slope), float(res.stderr), float(res.slope / res.stderr), int(keep.sum()))


def height_decay_fit(heights, bins=None, min_count=5):
    """Log-linear fit of the extreme-point height histogram.

    ``heights`` are pooled vertex heights; the fitted slope of log-frequency
    against bin centre is negative under exponential decay. Bins with fewer
    than ``min_count`` entries are left out.
    """
    h = np.asarray(heights, dtype=float)
    if bins is None:
        bins = np.linspace(0.0, np.quantile(h, 0.995), 16)
    counts, edges = np.histogram(h, bins=bins)
    return _log_linear(0.5 * (edges[1:] + edges[:-1]), counts.astype(float), counts >= min_count)


def extreme_fraction_fit(vertex_h, point_h, grid, min_count=5):
    """Fraction of scaled points at height ``>= h`` that are hull vertices, fitted log-linearly in ``h``."""
    vertex_h = np.sort(np.asarray(vertex_h, dtype=float))
    point_h = np.sort(np.asarray(point_h, dtype=float))
    grid = np.asarray(grid, dtype=float)
    nv = len(vertex_h) - np.searchsorted(vertex_h, grid)
    npts = len(point_h) - np.searchsorted(point_h, grid)
    frac = nv / np.maximum(npts, 1)
    return _log_linear(grid, frac, nv >= min_count)


def survival_decay_fit(values, grid=None, min_count=5):
    """Log-linear fit of the empirical survival function ``P(R >= u)``.

    The fitted slope is minus the exponential rate; ``grid`` defaults to
    15 points between the 5th and 99th percentiles.
    """
    v = np.sort(np.asarray(values, dtype=float))
    if grid is None:
        grid = np.linspace(np.quantile(v, 0.05), np.quantile(v, 0.99), 15)
    grid = np.asarray(grid, dtype=float)
    tail = len(v) - np.searchsorted(v, grid)
    return _log_linear(grid, tail / len(v), tail >= min_count)


class ParabolicScaler(TransformerMixin, BaseEstimator):
    """Transformer wrapping the scaling map for pipelines.

    ``transform`` returns ``[v_1, ..., v_{d-1}, h]`` per row;
    ``inverse_transform`` maps back to the ball.

    Parameters
    ----------
    lam : float
        Intensity that sets the two scaling exponents.
    """

    def __init__(self, lam=1.0):
        self.lam = lam

    def fit(self, X, y=None):
        check_positive("lam", self.lam)
        X = check_cloud(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_cloud(X, d=self.n_features_in_)
        sp = scale_T(X, self.lam)
        return np.column_stack([sp.v, sp.h])

    def inverse_transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X, _ = check_vectors(X, self.n_features_in_)
        return scale_T_inv(ScaledPoint(X[:, :-1], X[:, -1]), self.lam)
