"""Zero cells of Poisson hyperplane processes and conditioned Poisson-Voronoi cells.

The generator ``x`` (``|x| >= 1``) stands for the hyperplane with unit normal
``x/|x|`` at distance ``|x|/2`` from the origin. Its half-space is
``{z : <z, p> <= 1}`` with polar point ``p = 2x/|x|**2``, so the zero cell is
the polar body of ``conv{p}`` and its face lattice is the inverted lattice of
that hull.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import cumulants as cm
from .exceptions import DegenerateInput, OriginNotInterior, Unbounded, ZeroPoint
from .hull import convex_hull, polar_dual
from .sampling import (
    HyperplaneProcessConfig,
    RngStream,
    as_generator,
    sample_hyperplane_generators,
)

PLANE_TOL = 1e-9


def inversion(x):
    """``x / |x|**2``; works row-wise on stacks of points."""
    arr = np.asarray(x, dtype=float)
    sq = np.sum(arr * arr, axis=-1)
    if np.any(sq == 0):
        raise ZeroPoint("inversion is undefined at the origin")
    return arr / (sq[..., None] if arr.ndim > 1 else sq)


@dataclass(frozen=True)
class ZeroCellSample:
    """A zero cell together with its generators and the hull of their polar points.

    ``rejected`` counts general-position failures that were resampled on the
    way to this sample.
    """

    generators: np.ndarray
    cell: object
    inradius: float
    dual_hull: object
    rejected: int = 0

    @property
    def d(self):
        return self.cell.d

    @property
    def active(self):
        """Indices of generators whose hyperplane carries a facet of the cell."""
        return np.asarray(self.dual_hull.source_index)


def zero_cell(generators):
    """Zero cell ``{z : <z, 2x/|x|**2> <= 1 for all generators x}``.

    Raises
    ------
    Unbounded
        If the origin is not interior to the hull of the polar points, i.e.
        the half-spaces do not cut out a bounded cell.
    """
    gens = np.atleast_2d(np.asarray(generators, dtype=float))
    if gens.size == 0:
        raise Unbounded("no generators")
    norms = np.linalg.norm(gens, axis=1)
    if np.any(norms < 1.0 - 1e-12):
        raise ValueError("generators must satisfy |x| >= 1")
    polar = 2.0 * inversion(gens)
    try:
        dual_hull = convex_hull(polar)
        cell = polar_dual(dual_hull)
    except (DegenerateInput, OriginNotInterior) as exc:
        raise Unbounded(f"half-spaces do not bound a cell: {exc}") from exc
    rin = 0.5 * float(norms[np.asarray(dual_hull.source_index)].min())
    return ZeroCellSample(gens, cell, rin, dual_hull)


def inradius(sample):
    """Distance from the origin to the nearest facet hyperplane (``min |x|/2`` over active generators)."""
    return sample.inradius


@dataclass(frozen=True)
class PVCellConfig:
    """Conditioned Poisson-Voronoi cell with inradius threshold ``r``: ``alpha = d``, ``lam = (2r)**d``."""

    d: int
    r: float

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("r must be >= 1")

    @property
    def alpha(self):
        return float(self.d)

    @property
    def lam(self):
        return float((2.0 * self.r) ** self.d)

    def process(self):
        return HyperplaneProcessConfig(self.d, self.lam, self.alpha)


@dataclass
class DualityReport:
    """Per-``j`` face-count comparisons for one zero cell."""

    by_j: dict
    facet_planes_ok: bool
    recomputed_ok: bool
    euler_ok: bool

    @property
    def accepted(self):
        """General position: the independent rebuild and the plane check agree."""
        return self.facet_planes_ok and self.recomputed_ok

    @property
    def holds(self):
        return all(self.by_j.values())


def _facet_plane_counts(sample):
    """Number of generator hyperplanes containing each cell facet (by vertex distances)."""
    cell = sample.cell
    gens = sample.generators
    norms = np.linalg.norm(gens, axis=1)
    unit = gens / norms[:, None]
    dist = cell.vertices @ unit.T - 0.5 * norms[None, :]  # (n_vertices, n_generators)
    counts = []
    for facet in cell.facets:
        on = np.all(np.abs(dist[list(facet)]) < PLANE_TOL * max(1.0, cell.scale), axis=0)
        counts.append(int(on.sum()))
    return counts


def duality_check(sample):
    """Compare ``f_j(cell)`` with ``f_{d-1-j}(dual_hull)`` for every ``j``.

    The cell is also rebuilt independently as the hull of its own vertices and
    every facet is matched to the generator hyperplanes containing it; a
    mismatch in either check flags the sample as not in general position.
    """
    d = sample.d
    f_cell = sample.cell.f_vector
    f_dual = sample.dual_hull.f_vector
    by_j = {j: f_cell[j] == f_dual[d - 1 - j] for j in range(d)}
    try:
        rebuilt = convex_hull(sample.cell.vertices)
        recomputed_ok = rebuilt.f_vector == f_cell
        euler_ok = rebuilt.euler_characteristic() == sample.cell.euler_characteristic()
    except DegenerateInput:
        recomputed_ok = euler_ok = False
    euler_ok = euler_ok and sample.cell.euler_characteristic() == 1 - (-1) ** d
    planes_ok = all(c == 1 for c in _facet_plane_counts(sample))
    return DualityReport(by_j, planes_ok, recomputed_ok, euler_ok)


def pv_cell(cfg, rng, stop=None, max_rejections=20):
    """Sample the rescaled Poisson-Voronoi cell conditioned on inradius ``>= cfg.r``.

    Samples that fail :func:`duality_check`'s general-position tests are
    redrawn from the same generator; the number redrawn is stored on the
    returned sample.
    """
    gen = as_generator(rng)
    rejected = 0
    while True:
        gens = sample_hyperplane_generators(cfg.process(), stop, gen)
        sample = zero_cell(gens)
        if duality_check(sample).accepted or rejected >= max_rejections:
            return ZeroCellSample(
                sample.generators, sample.cell, sample.inradius, sample.dual_hull, rejected
            )
        rejected += 1


@dataclass
class FjRow:
    r: float
    n: int
    mean: float
    mean_se: float
    var: float
    var_se: float
    rejected: int
    ks: float
    tails: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)


@dataclass
class FjReport:
    d: int
    j: int
    rows: list
    mean_fit: object
    var_fit: object
    samples: dict = field(default_factory=dict)

    @property
    def expected_exponent(self):
        return self.d * (self.d - 1) / (self.d + 1)


def _fj_values(d, j, r, replicates, seed, stream, stop):
    values = np.empty(replicates)
    rejected = 0
    duality_failures = 0
    for i in range(replicates):
        s = pv_cell(PVCellConfig(d, r), RngStream(seed, stream).child(i), stop)
        rejected += s.rejected
        if not duality_check(s).holds:
            duality_failures += 1
        values[i] = s.cell.f_vector[j]
    return values, rejected, duality_failures


def fj_experiment(d, j, r_grid, replicates, seed=0, stop=None, tail_ys=(0.5, 1.0, 1.5), bound_c=1.0):
    """Face-count scaling study for conditioned Poisson-Voronoi cells.

    For every ``r`` the mean and variance of ``f_j`` are estimated with
    jackknife errors, standardized samples are compared with the Gaussian and
    with the tail bound (``bound_c`` is the unknown constant in ``delta``), and
    log-log exponents are fitted over the grid.
    """
    r_grid = [float(r) for r in r_grid]
    if any(b <= a for a, b in zip(r_grid, r_grid[1:])):
        raise ValueError("r grid must be strictly increasing")
    if replicates < 200:
        warnings.warn("fj_experiment expects at least 200 replicates per r", stacklevel=2)
    rows, samples = [], {}
    for k, r in enumerate(r_grid):
        values, rejected, _ = _fj_values(d, j, r, replicates, seed, k, stop)
        samples[r] = values
        est = cm.k_statistics(values, 2)
        z = (values - values.mean()) / values.std(ddof=1)
        tails = {}
        for y in tail_ys:
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    up, lo = cm.relative_error_tail(z, y, standardize=False)
                tails[y] = (up.value, lo.value)
            except cm.EmptyTail:
                tails[y] = (np.nan, np.nan)
        bp = cm.BoundParams.for_zero_cell(d, j, r, bound_c)
        bounds = {y: (float(np.mean(np.abs(z) >= y)), cm.thm_tail_bound(bp, y)) for y in tail_ys}
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ks = cm.ks_distance(values)
        rows.append(
            FjRow(r, replicates, est.values[0], est.se[0], est.values[1], est.se[1], rejected, ks, tails, bounds)
        )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        mean_fit = cm.fit_scaling_exponent([(row.r, row.mean) for row in rows])
        var_fit = cm.fit_scaling_exponent([(row.r, row.var) for row in rows])
    return FjReport(d, j, rows, mean_fit, var_fit, samples)
