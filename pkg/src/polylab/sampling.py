"""Seeded Poisson point process samplers.

Every sampler takes an :class:`RngStream`; the pair ``(master_seed,
stream_index)`` fixes the sample path. Streams are built on numpy's
counter-based Philox generator keyed through ``SeedSequence`` spawn keys, so
distinct replicate indices give independent streams by construction.
"""

from dataclasses import dataclass
from math import gamma, pi

import numpy as np

from ._validation import check_dimension, check_positive
from .exceptions import NonTerminating
from .hull import convex_hull, facet_offsets


def ball_volume(k):
    """Volume of the k-dimensional unit ball."""
    return pi ** (k / 2) / gamma(k / 2 + 1)


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_index: int = 0

    def generator(self):
        seq = np.random.SeedSequence(int(self.master_seed), spawn_key=(int(self.stream_index),))
        return np.random.Generator(np.random.Philox(seq))

    def child(self, index):
        """Sub-stream for nested randomness (e.g. MC integration inside a replicate)."""
        seq = np.random.SeedSequence(
            int(self.master_seed), spawn_key=(int(self.stream_index), int(index))
        )
        return np.random.Generator(np.random.Philox(seq))


def as_generator(rng):
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True)
class BallProcessConfig:
    """Poisson process on the unit ball.

    ``measure="stationary"`` is intensity ``lam`` times Lebesgue measure;
    ``measure="tilted"`` has density ``lam * |x|**(-2d)`` truncated to the
    annulus ``inner_radius <= |x| <= 1``.
    """

    d: int
    lam: float
    measure: str = "stationary"
    inner_radius: float = 0.5

    def __post_init__(self):
        check_dimension(self.d)
        check_positive("lam", self.lam)
        if self.measure not in ("stationary", "tilted"):
            raise ValueError(f"unknown measure {self.measure!r}")
        if not 0 < self.inner_radius < 1:
            raise ValueError("inner_radius must lie in (0, 1)")

    @property
    def mean_count(self):
        kd = ball_volume(self.d)
        if self.measure == "stationary":
            return self.lam * kd
        return self.lam * kd * (self.inner_radius ** -self.d - 1.0)


@dataclass(frozen=True)
class HyperplaneProcessConfig:
    """Generators of the hyperplane process with intensity ``lam * |x|**(alpha-d)`` off the ball."""

    d: int
    lam: float
    alpha: float = None

    def __post_init__(self):
        check_dimension(self.d)
        check_positive("lam", self.lam)
        if self.alpha is None:
            object.__setattr__(self, "alpha", float(self.d))
        if self.alpha < 1:
            raise ValueError("alpha must be >= 1")

    def shell_mean(self, r1, r2):
        d, a = self.d, self.alpha
        return self.lam * d * ball_volume(d) * (r2 ** a - r1 ** a) / a


@dataclass(frozen=True)
class StopRule:
    """Adaptive shell schedule ``R_k = 2**k``.

    Sampling stops after the first shell whose outer radius ``R`` satisfies
    ``2 * circumradius(cell) <= R``; ``extra_shells`` more shells are drawn
    afterwards (used to test that the stop is sound). With ``prune`` set,
    generators beyond twice the current circumradius are thinned away as
    they are drawn; their hyperplanes cannot meet the cell.
    """

    max_shells: int = 40
    extra_shells: int = 0
    prune: bool = True


def poisson_count(mean, rng):
    check_positive("mean", mean, strict=False)
    return int(as_generator(rng).poisson(mean))


def uniform_directions(n, d, gen):
    z = gen.standard_normal((n, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def uniform_in_ball(n, d, gen):
    r = gen.random(n) ** (1.0 / d)
    return uniform_directions(n, d, gen) * r[:, None]


def sample_uniform_ball(cfg, rng):
    """Stationary Poisson process of intensity ``cfg.lam`` restricted to the unit ball."""
    gen = as_generator(rng)
    n = int(gen.poisson(cfg.mean_count))
    return uniform_in_ball(n, cfg.d, gen)


def sample_tilted_ball(cfg, rng):
    """Poisson process with density ``lam * |x|**(-2d)`` on ``rho <= |x| <= 1``."""
    gen = as_generator(rng)
    d, rho = cfg.d, cfg.inner_radius
    n = int(gen.poisson(cfg.mean_count))
    u = gen.random(n)
    # inverse CDF of the radial density proportional to r**(-d-1) on [rho, 1]
    r = (rho ** -d - u * (rho ** -d - 1.0)) ** (-1.0 / d)
    return uniform_directions(n, d, gen) * r[:, None]


def sample_tilted_polytope(cfg, rng, guard=0.05, max_halvings=10):
    """Hull of the tilted process with the truncation guard.

    After each hull the smallest vertex norm must exceed ``rho + guard``;
    otherwise ``rho`` is halved and the process is drawn again. Returns
    ``(points, polytope, rho_used)``.
    """
    gen = as_generator(rng)
    rho = cfg.inner_radius
    for _ in range(max_halvings + 1):
        c = BallProcessConfig(cfg.d, cfg.lam, "tilted", rho)
        pts = sample_tilted_ball(c, gen)
        p = convex_hull(pts)
        if np.linalg.norm(p.vertices, axis=1).min() > rho + guard:
            return pts, p, rho
        rho /= 2.0
    raise NonTerminating("truncation guard kept failing; intensity too small")


def _cell_circumradius(generators):
    """Circumradius of the zero cell cut out by ``generators`` (inf if unbounded)."""
    if len(generators) == 0:
        return np.inf
    sq = np.einsum("ij,ij->i", generators, generators)
    polar = 2.0 * generators / sq[:, None]
    offsets = facet_offsets(polar)
    if offsets is None or np.any(offsets <= 1e-12):
        return np.inf
    # cell vertices are normal/offset, so their norms are 1/offset
    return float(1.0 / offsets.min())


def sample_hyperplane_generators(cfg, stop=None, rng=None):
    """Generators ``x`` (``|x| >= 1``) of every hyperplane that can touch the zero cell.

    The hyperplane of ``x`` has unit normal ``x/|x|`` and distance ``|x|/2``
    to the origin, so once the cell's circumradius ``C`` satisfies
    ``2C <= R`` no generator beyond radius ``R`` can cut it.

    Raises
    ------
    NonTerminating
        If no bounded, stoppable cell appears within ``stop.max_shells`` shells.
    """
    stop = stop or StopRule()
    gen = as_generator(rng)
    d, a = cfg.d, cfg.alpha
    chunks = []
    inner = 1.0
    cut = np.inf
    remaining_extra = None
    for _ in range(stop.max_shells):
        outer = 2.0 * inner
        n = int(gen.poisson(cfg.shell_mean(inner, outer)))
        top = outer
        if stop.prune and cut < outer:
            # Poisson thinning: keep only generators with |x| <= cut
            top = max(cut, inner)
            q = (top ** a - inner ** a) / (outer ** a - inner ** a)
            n = int(gen.binomial(n, min(max(q, 0.0), 1.0)))
        u = gen.random(n)
        r = (inner ** a + u * (top ** a - inner ** a)) ** (1.0 / a)
        chunks.append(uniform_directions(n, d, gen) * r[:, None])
        inner = outer
        if n or not np.isfinite(cut):
            cut = 2.0 * _cell_circumradius(np.concatenate(chunks))
        if remaining_extra is None:
            if cut <= outer:
                remaining_extra = stop.extra_shells
        else:
            remaining_extra -= 1
        if remaining_extra is not None and remaining_extra <= 0:
            pts = np.concatenate(chunks)
            if stop.prune:
                pts = pts[np.linalg.norm(pts, axis=1) <= cut]
            return pts
    raise NonTerminating(
        f"zero cell not certified after {stop.max_shells} shells (lam={cfg.lam}); intensity too small"
    )
