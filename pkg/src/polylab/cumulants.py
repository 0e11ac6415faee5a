"""Partitions, cumulants and k-statistics, scaling fits and deviation-bound evaluators."""

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special, stats
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_dimension, check_positive
from .exceptions import EmptyTail, InsufficientSamples, NonPositiveValue, TooLarge

MAX_PARTITION_ORDER = 10
MAX_KSTAT_ORDER = 6
MAX_LEMMA56_ORDER = 22


# ---------------------------------------------------------------------------
# partitions


@dataclass(frozen=True)
class SetPartition:
    """Unordered partition of ``{1, ..., k}``; blocks are sorted tuples, sorted by first element."""

    blocks: tuple

    @property
    def k(self):
        return sum(len(b) for b in self.blocks)

    @property
    def sizes(self):
        return tuple(len(b) for b in self.blocks)

    def __len__(self):
        return len(self.blocks)


def _restricted_growth(k):
    """Restricted growth strings of length ``k`` (``a[0] = 0``, ``a[i] <= 1 + max(a[:i])``)."""

    def rec(prefix, top):
        if len(prefix) == k:
            yield tuple(prefix)
            return
        for v in range(top + 2):
            yield from rec(prefix + [v], max(top, v))

    yield from rec([0], 0)


def set_partitions(k):
    """All Bell(k) set partitions of ``{1, ..., k}`` in restricted-growth-string order.

    Raises
    ------
    TooLarge
        If ``k > 10``.
    """
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError("k must be a positive integer")
    if k > MAX_PARTITION_ORDER:
        raise TooLarge(f"set_partitions is limited to k <= {MAX_PARTITION_ORDER}")
    out = []
    for rgs in _restricted_growth(int(k)):
        nblocks = max(rgs) + 1
        blocks = [[] for _ in range(nblocks)]
        for i, label in enumerate(rgs, start=1):
            blocks[label].append(i)
        out.append(SetPartition(tuple(tuple(b) for b in blocks)))
    return out


def integer_partitions(n, max_part=None):
    """Partitions of ``n`` into positive parts, non-increasing, in reverse lexicographic order."""
    if max_part is None:
        max_part = n
    if n == 0:
        yield ()
        return
    for first in range(min(n, max_part), 0, -1):
        for rest in integer_partitions(n - first, first):
            yield (first,) + rest


def _set_partition_count(sizes):
    """Number of set partitions of ``sum(sizes)`` elements with the given block sizes."""
    k = sum(sizes)
    count = math.factorial(k)
    for s in sizes:
        count //= math.factorial(s)
    for mult in Counter(sizes).values():
        count //= math.factorial(mult)
    return count


def _check_order(k):
    if k > MAX_PARTITION_ORDER:
        raise TooLarge(f"order limited to {MAX_PARTITION_ORDER}")


def moments_to_cumulants(m):
    """Cumulants ``c_1..c_k`` from raw moments ``m_1..m_k``.

    Uses the partition sum ``c_k = sum (-1)**(p-1) (p-1)! prod m_|L|`` grouped by
    block-size pattern; exact for ``Fraction`` or integer input.
    """
    m = list(m)
    _check_order(len(m))
    out = []
    for k in range(1, len(m) + 1):
        total = 0
        for sizes in integer_partitions(k):
            p = len(sizes)
            term = (-1) ** (p - 1) * math.factorial(p - 1) * _set_partition_count(sizes)
            prod = 1
            for s in sizes:
                prod = prod * m[s - 1]
            total = total + term * prod
        out.append(total)
    return out


def cumulants_to_moments(c):
    """Raw moments ``m_1..m_k`` from cumulants via ``m_k = sum over partitions of prod c_|L|``."""
    c = list(c)
    _check_order(len(c))
    out = []
    for k in range(1, len(c) + 1):
        total = 0
        for sizes in integer_partitions(k):
            prod = _set_partition_count(sizes)
            for s in sizes:
                prod = prod * c[s - 1]
            total = total + prod
        out.append(total)
    return out


def poisson_moments(mu, k):
    """Raw moments of Poisson(mu) up to order ``k`` via Touchard polynomials (Stirling numbers)."""
    out = []
    for n in range(1, k + 1):
        s = 0
        for j in range(1, n + 1):
            s = s + _stirling2(n, j) * mu ** j
        out.append(s)
    return out


@lru_cache(maxsize=None)
def _stirling2(n, k):
    if n == k:
        return 1
    if k == 0 or k > n:
        return 0
    return k * _stirling2(n - 1, k) + _stirling2(n - 1, k - 1)


# ---------------------------------------------------------------------------
# k-statistics


@lru_cache(maxsize=None)
def _augmented_terms(sizes):
    """Power-sum expansion of the augmented sum over distinct indices.

    ``sum_{i_1 != ... != i_p} x_{i_1}**s_1 ... x_{i_p}**s_p`` equals
    ``sum_sigma prod_B mu(B) S_{sum_{b in B} s_b}`` over set partitions ``sigma`` of
    the ``p`` positions, with ``mu(B) = (-1)**(|B|-1) (|B|-1)!``. Returns a tuple of
    ``(coefficient, power orders)`` terms with like terms merged.
    """
    p = len(sizes)
    acc = Counter()
    for part in set_partitions(p):
        coef = 1
        orders = []
        for block in part.blocks:
            coef *= (-1) ** (len(block) - 1) * math.factorial(len(block) - 1)
            orders.append(sum(sizes[i - 1] for i in block))
        acc[tuple(sorted(orders))] += coef
    return tuple((c, o) for o, c in sorted(acc.items()) if c != 0)


@lru_cache(maxsize=None)
def _kstat_terms(k):
    """``k_k`` as ``sum coef(n) * prod S_r`` with coef a function of the sample size.

    Returns a tuple of ``(integer weight, p, power orders)``; the sample-size factor
    is ``1 / n_(p)`` (falling factorial). Derived by replacing every product of raw
    moments in the moment-cumulant partition sum with its unbiased U-statistic.
    """
    acc = Counter()
    for sizes in integer_partitions(k):
        p = len(sizes)
        weight = (-1) ** (p - 1) * math.factorial(p - 1) * _set_partition_count(sizes)
        for coef, orders in _augmented_terms(tuple(sizes)):
            acc[(p, orders)] += weight * coef
    return tuple((w, p, orders) for (p, orders), w in sorted(acc.items()) if w != 0)


def _falling(n, p):
    out = np.ones_like(n, dtype=float)
    for i in range(p):
        out = out * (n - i)
    return out


def _kstat_from_sums(k, sums, n):
    """Evaluate ``k_k`` from power sums ``sums[r]`` (arrays allowed) and size ``n``."""
    total = 0.0
    for w, p, orders in _kstat_terms(k):
        prod = 1.0
        for r in orders:
            prod = prod * sums[r]
        total = total + w * prod / _falling(n, p)
    return total


def kstat(x, k):
    """Unbiased k-statistic of order ``k`` (``E kstat = c_k``)."""
    return _kstats_with_jackknife(np.asarray(x, dtype=float), k, jackknife=False)[0][k - 1]


def _kstats_with_jackknife(x, kmax, jackknife=True):
    n = len(x)
    mean = float(np.mean(x))
    y = x - mean
    powers = {r: y ** r for r in range(1, kmax + 1)}
    sums = {r: float(np.sum(powers[r])) for r in powers}
    values = [mean]
    for k in range(2, kmax + 1):
        values.append(float(_kstat_from_sums(k, sums, float(n))))
    if not jackknife:
        return values, None
    loo_sums = {r: sums[r] - powers[r] for r in powers}
    nn = float(n - 1)
    ses = [float(np.std(x, ddof=1) / np.sqrt(n))]
    for k in range(2, kmax + 1):
        loo = np.asarray(_kstat_from_sums(k, loo_sums, nn))
        ses.append(float(np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))))
    return values, ses


@dataclass
class CumulantEstimates:
    """k-statistics ``values[k-1]`` with jackknife standard errors ``se[k-1]``.

    ``sigma_inf`` is a free slot for an asymptotic standard deviation estimate.
    """

    values: list
    se: list
    n: int
    sigma_inf: float = None

    @property
    def order(self):
        return len(self.values)

    def __getitem__(self, k):
        return self.values[k - 1]


def k_statistics(samples, k=4):
    """k-statistics of orders ``1..k`` with jackknife standard errors.

    Parameters
    ----------
    samples : array_like
        One-dimensional sample.
    k : int
        Highest order, at most 6.

    Raises
    ------
    InsufficientSamples
        If ``n <= k``.
    TooLarge
        If ``k > 6``.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > MAX_KSTAT_ORDER:
        raise TooLarge(f"k-statistics are limited to order {MAX_KSTAT_ORDER}")
    if len(x) <= max(k, 1) or len(x) < 3:
        raise InsufficientSamples(f"need more than {k} samples, got {len(x)}")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    values, ses = _kstats_with_jackknife(x, k)
    return CumulantEstimates(values=values, se=ses, n=len(x))


class KStatistics(BaseEstimator):
    """Estimator form of :func:`k_statistics`; ``fit`` stores ``cumulants_`` and ``se_``."""

    def __init__(self, order=4):
        self.order = order

    def fit(self, X, y=None):
        est = k_statistics(np.asarray(X, dtype=float).ravel(), self.order)
        self.cumulants_ = np.asarray(est.values)
        self.se_ = np.asarray(est.se)
        self.n_samples_ = est.n
        return self


# ---------------------------------------------------------------------------
# scaling fits


@dataclass
class ScalingFit:
    slope: float
    ci: tuple
    intercept: float
    stderr: float
    n_points: int

    @property
    def prefactor(self):
        return float(np.exp(self.intercept))


def fit_scaling_exponent(pairs, level=0.95, weights=None):
    """OLS fit of ``log value = a + b log lam`` with a t-interval for ``b``.

    Parameters
    ----------
    pairs : sequence of (lam, value)
        At least three distinct ``lam``; a warning is issued when fewer than
        four are given or their span is under a decade.

    Raises
    ------
    NonPositiveValue
        If any ``lam`` or value is not strictly positive.
    """
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("pairs must be a sequence of (lam, value)")
    if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise NonPositiveValue("scaling fits need strictly positive finite lam and values")
    lam = np.unique(arr[:, 0])
    if len(lam) < 3:
        raise InsufficientSamples("need at least three distinct lam values")
    if len(lam) < 4 or lam[-1] / lam[0] < 10:
        warnings.warn(
            "scaling fit over fewer than four points or less than a decade", stacklevel=2
        )
    x = np.log(arr[:, 0])
    y = np.log(arr[:, 1])
    n = len(x)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    xm = np.sum(w * x) / np.sum(w)
    ym = np.sum(w * y) / np.sum(w)
    sxx = np.sum(w * (x - xm) ** 2)
    slope = float(np.sum(w * (x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - intercept - slope * x
    dof = n - 2
    if dof > 0:
        s2 = float(np.sum(w * resid ** 2) / dof)
        stderr = float(np.sqrt(s2 / sxx))
        tq = float(stats.t.ppf(0.5 + level / 2, dof))
    else:
        stderr, tq = 0.0, 0.0
    return ScalingFit(slope, (slope - tq * stderr, slope + tq * stderr), intercept, stderr, n)


class PowerLawRegressor(RegressorMixin, BaseEstimator):
    """Regressor for ``y = C * X**b`` fitted on the log-log scale."""

    def __init__(self, level=0.95):
        self.level = level

    def fit(self, X, y):
        X = np.asarray(X, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        if X.shape != y.shape:
            raise ValueError("X and y must have the same length")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fit = fit_scaling_exponent(np.column_stack([X, y]), level=self.level)
        self.exponent_ = fit.slope
        self.prefactor_ = fit.prefactor
        self.ci_ = fit.ci
        self.stderr_ = fit.stderr
        return self

    def predict(self, X):
        check_is_fitted(self, "exponent_")
        X = np.asarray(X, dtype=float).ravel()
        return self.prefactor_ * X ** self.exponent_


# ---------------------------------------------------------------------------
# deviation bounds


@dataclass(frozen=True)
class BoundParams:
    """Parameters of the cumulant growth condition ``|c_k| <= (k!)**(1+gamma) delta**(-(k-2))``.

    ``constants`` stores the user-supplied reals the bounds need; nothing is
    assumed about their values.
    """

    d: int
    w: float
    gamma: float
    delta: float
    constants: dict = field(default_factory=dict)

    def __post_init__(self):
        check_dimension(self.d)
        if self.gamma < self.d + 3 - 1e-12:
            raise ValueError("gamma must be >= d + 3")
        check_positive("delta", self.delta)

    @classmethod
    def for_polytope(cls, d, w, lam, c=1.0):
        """``gamma = d + w + 3`` and ``delta = c * lam**((d-1)/(2(d+1)))``."""
        check_positive("c", c)
        delta = c * lam ** ((d - 1) / (2 * (d + 1)))
        return cls(d, w, d + w + 3, delta, {"c": c})

    @classmethod
    def for_zero_cell(cls, d, j, r, c=1.0):
        """Zero-cell face counts: ``gamma = d + j + 3`` and ``delta = c * r**(d(d-1)/(2(d+1)))``."""
        check_positive("c", c)
        delta = c * r ** (d * (d - 1) / (2 * (d + 1)))
        return cls(d, j, d + j + 3, delta, {"c": c})

    @property
    def mdp_window_exponent(self):
        """Exponent ``1/(1+2 gamma)`` of ``delta`` bounding the relative-error window."""
        return 1.0 / (1.0 + 2.0 * self.gamma)


def thm_tail_bound(bp, y):
    """``2 exp(-1/4 min{y**2 / 2**(1+gamma), (delta y)**(1/(1+gamma))})``; vectorized in ``y``."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("y must be >= 0")
    g = bp.gamma
    a = y ** 2 / 2.0 ** (1 + g)
    b = (bp.delta * y) ** (1.0 / (1 + g))
    out = 2.0 * np.exp(-0.25 * np.minimum(a, b))
    return float(out) if out.ndim == 0 else out


def crossover(bp):
    """Positive ``y*`` where the Gaussian and the stretched-exponential branches meet."""
    g1 = 1.0 + bp.gamma
    return float((2.0 ** g1 * bp.delta ** (1.0 / g1)) ** (1.0 / (2.0 - 1.0 / g1)))


def mdp_admissible_q(d, w):
    """Upper end of the admissible power ``q`` for ``a_lam = lam**q`` in the MDP window."""
    return (d - 1) / (2 * (d + 1) * (2 * (d + w) + 7))


def normal_cdf(y):
    """Standard normal CDF (``scipy.special.ndtr``, accurate to machine precision)."""
    return special.ndtr(y)


def _standardize(samples):
    x = np.asarray(samples, dtype=float).ravel()
    sd = np.std(x, ddof=1) if len(x) > 1 else 0.0
    if sd == 0:
        return x - np.mean(x), 0.0
    return (x - np.mean(x)) / sd, sd


def wilson_interval(hits, n, z=1.96):
    p = hits / n
    denom = 1.0 + z ** 2 / n
    centre = (p + z ** 2 / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z ** 2 / (4 * n ** 2)) / denom
    return max(centre - half, 0.0), min(centre + half, 1.0)


@dataclass
class TailRatio:
    """``log(P_hat / Gaussian tail)`` with a Wilson-interval band and the hit count."""

    value: float
    lo: float
    hi: float
    hits: int


def _log_ratio(hits, n, log_ref):
    lo, hi = wilson_interval(hits, n)
    value = np.log(hits / n) - log_ref
    lo_v = (np.log(lo) if lo > 0 else -np.inf) - log_ref
    return TailRatio(float(value), float(lo_v), float(np.log(hi) - log_ref), int(hits))


def relative_error_tail(samples, y, standardize=True):
    """Upper and lower log tail ratios of standardized samples against the Gaussian.

    Returns ``(upper, lower)`` :class:`TailRatio` for
    ``log(P_hat(X >= y) / (1 - Phi(y)))`` and ``log(P_hat(X <= -y) / Phi(-y))``.

    Raises
    ------
    EmptyTail
        When one of the tails has no sample; ``upper_bound`` carries the
        Wilson upper limit of the log ratio.
    """
    if not 0 <= y <= 3:
        raise ValueError("y must lie in [0, 3]")
    x = _standardize(samples)[0] if standardize else np.asarray(samples, dtype=float).ravel()
    n = len(x)
    if n < 1000:
        warnings.warn("relative_error_tail expects at least 1000 samples", stacklevel=2)
    up_hits = int(np.sum(x >= y))
    lo_hits = int(np.sum(x <= -y))
    log_ref = float(special.log_ndtr(-y))  # log(1 - Phi(y)) = log Phi(-y)
    for hits in (up_hits, lo_hits):
        if hits == 0:
            bound = float(np.log(wilson_interval(0, n)[1]) - log_ref)
            raise EmptyTail(f"no sample beyond {y} in one tail", upper_bound=bound)
    return _log_ratio(up_hits, n, log_ref), _log_ratio(lo_hits, n, log_ref)


def mdp_functional(samples, a, y, min_hits=5, standardize=True):
    """``(1/a**2) log P_hat(X / a >= y)`` for standardized samples, to compare with ``-y**2/2``.

    Raises
    ------
    EmptyTail
        If fewer than ``min_hits`` samples exceed ``a * y``; ``upper_bound``
        is the censored value computed from the Wilson upper limit.
    """
    if a < 1:
        raise ValueError("a must be >= 1")
    x = _standardize(samples)[0] if standardize else np.asarray(samples, dtype=float).ravel()
    n = len(x)
    hits = int(np.sum(x / a >= y))
    if hits < min_hits:
        bound = float(np.log(wilson_interval(hits, n)[1]) / a ** 2)
        raise EmptyTail(f"only {hits} samples with X/a >= {y}", upper_bound=bound)
    return float(np.log(hits / n) / a ** 2)


def ks_distance(samples):
    """Kolmogorov distance between the standardized empirical CDF and the standard normal.

    A sample with zero spread is compared at the point 0, giving 0.5.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = len(x)
    if n < 100:
        warnings.warn("ks_distance expects at least 100 samples", stacklevel=2)
    z, sd = _standardize(x)
    if sd == 0:
        return 0.5
    z = np.sort(z)
    cdf = special.ndtr(z)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))


# ---------------------------------------------------------------------------
# lemma verifiers


def falling_factorial(n, i):
    """``n (n-1) ... (n-i+1)``; the empty product (``i <= 0``) is 1."""
    out = 1
    for t in range(max(i, 0)):
        out *= n - t
    return out


def lemma51_eval(a, b, d, p):
    """Closed form of ``int_a^inf t**m exp(-b t) dt`` with ``m = (d-1)(p-1)``."""
    check_positive("a", a, strict=False)
    check_positive("b", b)
    m = (d - 1) * (p - 1)
    total = 0.0
    for i in range(1, m + 2):
        total += falling_factorial(m, i - 1) * b ** (-i) * a ** (m - i + 1)
    return float(total * math.exp(-a * b))


def lemma51_quadrature(a, b, d, p):
    """Adaptive-quadrature oracle for :func:`lemma51_eval`."""
    m = (d - 1) * (p - 1)
    val, _ = integrate.quad(lambda t: t ** m * math.exp(-b * t), a, np.inf, epsabs=0, epsrel=1e-13, limit=200)
    return float(val)


def lemma56_max_product(k):
    """Maximum of ``k_1 ... k_l`` over partitions of ``k`` into positive parts.

    Returns ``(max product, witness)`` where the witness is the lexicographically
    largest maximizing partition; raises ``AssertionError`` if the bound
    ``4 * 3**k`` failed.
    """
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError("k must be a positive integer")
    if k > MAX_LEMMA56_ORDER:
        raise TooLarge(f"exhaustive search limited to k <= {MAX_LEMMA56_ORDER}")
    best, witness = 0, None
    for part in integer_partitions(int(k)):
        prod = math.prod(part)
        if prod > best:
            best, witness = prod, part
    assert best <= 4 * 3 ** k
    return best, witness
