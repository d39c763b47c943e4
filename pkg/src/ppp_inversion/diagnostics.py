"""Statistical checks for point-process laws and posterior approximations.

Grid quadrature backs the TV/Hellinger estimates and the count-convergence
study (dimension <= 3); a self-normalized importance-sampling oracle gives
reference posterior moments in any dimension.
"""
from dataclasses import dataclass
import math
import warnings

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from ._rng import as_generator
from .bayes_model import log_unnormalized_posterior
from .errors import DegenerateError, InvalidArgumentError
from .point_process import AxisBox, count_in_region

DEFAULT_RESOLUTION = {1: 2000, 2: 300, 3: 60}


@dataclass(frozen=True, eq=False)
class GridDensity:
    box: AxisBox
    resolution: tuple
    values: np.ndarray
    cell_volume: float

    def centers(self):
        return _cell_centers(self.box, self.resolution)

    def mass(self):
        return float(self.values.sum() * self.cell_volume)

    def mean(self):
        c = self.centers()
        return (self.values.reshape(-1) * self.cell_volume) @ c

    def mass_in(self, region):
        inside = region.contains(self.centers())
        return float(self.values.reshape(-1)[inside].sum() * self.cell_volume)


def _cell_centers(box, resolution):
    axes = [lo + (np.arange(n) + 0.5) * (hi - lo) / n
            for lo, hi, n in zip(box.lower, box.upper, resolution)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.reshape(-1) for m in mesh])


def _resolution(box, resolution):
    if resolution is None:
        resolution = DEFAULT_RESOLUTION.get(box.dim)
    if np.isscalar(resolution):
        resolution = (int(resolution),) * box.dim
    return tuple(int(r) for r in resolution)


def grid_density(density_fn, box, resolution=None, log=False):
    """Midpoint-rule discretization of a density, normalized to unit mass.

    ``density_fn`` is vectorized over an (n, d) array. With ``log=True`` it
    returns log-densities, which are exponentiated after subtracting the max.
    """
    if box.dim > 3:
        raise InvalidArgumentError("grid densities are limited to dimension <= 3")
    res = _resolution(box, resolution)
    cell_volume = box.volume / math.prod(res)
    vals = np.asarray(density_fn(_cell_centers(box, res)), dtype=float).reshape(-1)
    if log:
        top = vals.max()
        if not np.isfinite(top):
            raise DegenerateError("log-density is -inf on the whole grid")
        vals = np.exp(vals - top)
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise InvalidArgumentError("density values must be finite and nonnegative")
    mass = vals.sum() * cell_volume
    if mass <= 0:
        raise DegenerateError("density has zero mass on the grid")
    return GridDensity(box, res, (vals / mass).reshape(res), cell_volume)


def _check_match(a, b):
    if (a.resolution != b.resolution or not np.array_equal(a.box.lower, b.box.lower)
            or not np.array_equal(a.box.upper, b.box.upper)):
        raise InvalidArgumentError("grid densities are on different grids")


def estimate_tv(a, b):
    _check_match(a, b)
    return float(0.5 * np.abs(a.values - b.values).sum() * a.cell_volume)


def estimate_hellinger(a, b):
    _check_match(a, b)
    h2 = 0.5 * ((np.sqrt(a.values) - np.sqrt(b.values)) ** 2).sum() * a.cell_volume
    return float(math.sqrt(max(h2, 0.0)))


@dataclass
class GofResult:
    statistic: float
    p_value: float
    dof: int
    bins: list


def _poisson_bins(mean, n, min_expected=5.0):
    """Consecutive count bins with expected frequency >= min_expected.

    Returns a list of (low, high) with ``high=None`` for the open upper tail.
    """
    bins = []
    low, acc, k = 0, 0.0, 0
    while True:
        acc += n * stats.poisson.pmf(k, mean)
        tail = n * stats.poisson.sf(k, mean)        # P(X > k)
        if tail < min_expected:
            bins.append((low, None))
            break
        if acc >= min_expected:
            bins.append((low, k))
            low, acc = k + 1, 0.0
        k += 1
    if len(bins) > 1:
        lo, _ = bins[-1]
        if n * stats.poisson.sf(lo - 1, mean) < min_expected:
            bins[-2:] = [(bins[-2][0], None)]
    return bins


def poisson_count_gof(counts, mean, min_counts=500):
    """Chi-square goodness of fit of counts against Poisson(mean).

    Tail bins are pooled so every bin expects at least 5 observations.
    """
    counts = np.asarray(counts)
    if counts.size < min_counts:
        raise InvalidArgumentError(f"need at least {min_counts} counts, got {counts.size}")
    if not mean > 0:
        raise InvalidArgumentError(f"mean must be positive, got {mean}")
    n = counts.size
    bins = _poisson_bins(mean, n)
    observed, expected = [], []
    for lo, hi in bins:
        if hi is None:
            observed.append(np.count_nonzero(counts >= lo))
            expected.append(n * stats.poisson.sf(lo - 1, mean))
        else:
            observed.append(np.count_nonzero((counts >= lo) & (counts <= hi)))
            expected.append(n * (stats.poisson.cdf(hi, mean) - stats.poisson.cdf(lo - 1, mean)))
    observed = np.array(observed, dtype=float)
    expected = np.array(expected)
    dof = len(bins) - 1
    if dof < 1:
        raise InvalidArgumentError("mean too small for a binned chi-square test")
    statistic = float(np.sum((observed - expected) ** 2 / expected))
    return GofResult(statistic, float(stats.chi2.sf(statistic, dof)), dof, bins)


@dataclass
class IndependenceResult:
    rho: float
    ci_low: float
    ci_high: float
    n: int


def _boxes_overlap(a, b):
    return bool(np.all(a.lower < b.upper) and np.all(b.lower < a.upper))


def disjoint_independence(patterns, region_a, region_b, min_patterns=500):
    """Pearson correlation of the counts in two disjoint regions.

    The band is a 99% Fisher-z interval.
    """
    patterns = list(patterns)
    if len(patterns) < min_patterns:
        raise InvalidArgumentError(f"need at least {min_patterns} patterns, got {len(patterns)}")
    if isinstance(region_a, AxisBox) and isinstance(region_b, AxisBox):
        if _boxes_overlap(region_a, region_b):
            raise InvalidArgumentError("regions overlap")
    for p in patterns:
        if p.count and any(region_a(x) and region_b(x) for x in p.points):
            raise InvalidArgumentError("regions overlap on sampled points")
    ca = np.array([count_in_region(p, region_a) for p in patterns], dtype=float)
    cb = np.array([count_in_region(p, region_b) for p in patterns], dtype=float)
    if ca.std() == 0 or cb.std() == 0:
        raise DegenerateError("a region count is constant across patterns")
    rho = float(np.corrcoef(ca, cb)[0, 1])
    n = len(patterns)
    z = math.atanh(max(min(rho, 1 - 1e-15), -1 + 1e-15))
    half = stats.norm.ppf(0.995) / math.sqrt(n - 3)
    return IndependenceResult(rho, math.tanh(z - half), math.tanh(z + half), n)


@dataclass
class MomentReport:
    mean: np.ndarray
    covariance: np.ndarray
    ess: float
    stderr: np.ndarray
    n_samples: int
    warning: str = None


def oracle_moments(model, M, seed=None, min_ess=50.0, chunk=None):
    """Self-normalized importance-sampling posterior moments from prior draws.

    The standard errors use the delta-method variance of the ratio estimator.
    """
    if M < 1000:
        raise InvalidArgumentError(f"M must be >= 1000, got {M}")
    rng = as_generator(seed)
    thetas = model.prior.sample(int(M), rng)
    log_r = -model.potentials(thetas)
    if not np.any(np.isfinite(log_r)):
        raise DegenerateError("every importance weight is zero")
    w = np.exp(log_r - logsumexp(log_r))
    w /= w.sum()
    mean = w @ thetas
    d = thetas - mean
    cov = (w[:, None] * d).T @ d
    ess = float(1.0 / np.sum(w * w))
    stderr = np.sqrt(np.sum((w ** 2)[:, None] * d * d, axis=0))
    message = None
    if ess < min_ess:
        message = f"effective sample size {ess:.1f} below {min_ess:g}; oracle unreliable"
        warnings.warn(message, RuntimeWarning)
    return MomentReport(mean, 0.5 * (cov + cov.T), ess, stderr, int(M), message)


@dataclass
class ConvergenceTable:
    resolutions: list
    reference: int
    intensities: np.ndarray            # (n_resolutions, n_regions)
    deviations: np.ndarray             # |row - reference row|

    def rows(self):
        return [{"resolution": int(n), "intensity": self.intensities[i].tolist(),
                 "deviation": self.deviations[i].tolist()}
                for i, n in enumerate(self.resolutions)]


def count_convergence_study(model_family, gamma, regions, resolutions, box,
                            grid_resolution=None):
    """Expected region counts ``gamma * mu_N(A)`` across forward-model resolutions.

    Each posterior is discretized on the same grid over ``box``; the finest
    resolution is the reference.
    """
    resolutions = list(resolutions)
    if box.dim > 3:
        raise InvalidArgumentError("count convergence uses grid quadrature, dimension <= 3")
    table = np.empty((len(resolutions), len(regions)))
    for i, n in enumerate(resolutions):
        model = model_family(n)
        g = grid_density(lambda x: log_unnormalized_posterior(model, x), box,
                         grid_resolution, log=True)
        table[i] = [gamma * g.mass_in(a) for a in regions]
    ref = int(np.argmax(resolutions))
    return ConvergenceTable(resolutions, resolutions[ref], table, np.abs(table - table[ref]))


def two_sample_equivalence(x, y, level=0.01):
    """Per-coordinate KS tests and mean z-tests, Bonferroni-combined.

    Returns the smallest adjusted p-value and whether it stays above ``level``.
    """
    x, y = np.atleast_2d(x), np.atleast_2d(y)
    pvals = []
    for j in range(x.shape[1]):
        pvals.append(stats.ks_2samp(x[:, j], y[:, j]).pvalue)
        se = math.sqrt(x[:, j].var(ddof=1) / len(x) + y[:, j].var(ddof=1) / len(y))
        z = (x[:, j].mean() - y[:, j].mean()) / se
        pvals.append(2 * stats.norm.sf(abs(z)))
    p_min = min(1.0, min(pvals) * len(pvals))
    return p_min, p_min > level


def diagnostic_record(test_name, passed, statistic=None, p_value=None, distance=None,
                      params=None):
    """One entry of the diagnostics JSON array."""
    rec = {"test_name": test_name, "statistic": statistic}
    if distance is not None:
        rec["distance"] = distance
    else:
        rec["p_value"] = p_value
    rec["params"] = params or {}
    rec["pass"] = bool(passed)
    return rec
