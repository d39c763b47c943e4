"""Poisson point process primitives on R^d.

Realizations are finite point patterns. Counts are drawn exactly (sequential
inversion for small means, PTRS transformed rejection for large ones), and
inhomogeneous processes are realized by thinning a homogeneous candidate
process on a bounding box.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from ._rng import as_generator
from .errors import BoundViolationError, ContractViolationError, InvalidArgumentError

# below this mean, sequential-search inversion is cheaper than PTRS
_INVERSION_CUTOFF = 30.0
_N_PROBES = 10_000


@dataclass(frozen=True, eq=False)
class PointPattern:
    """A finite multiset of points in R^dim, stored as an (n, dim) array."""

    dim: int
    points: np.ndarray = field(default=None)

    def __post_init__(self):
        if int(self.dim) < 1:
            raise InvalidArgumentError(f"dim must be positive, got {self.dim}")
        pts = self.points
        if pts is None:
            pts = np.empty((0, self.dim))
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 1 and pts.size == 0:
            pts = pts.reshape(0, self.dim)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise InvalidArgumentError(
                f"points must have shape (n, {self.dim}), got {pts.shape}")
        pts.setflags(write=False)
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "points", pts)

    @property
    def count(self):
        return self.points.shape[0]

    def __len__(self):
        return self.count

    def __eq__(self, other):
        if not isinstance(other, PointPattern):
            return NotImplemented
        return self.dim == other.dim and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash((self.dim, self.points.tobytes()))


@dataclass(frozen=True, eq=False)
class MarkedPattern:
    dim: int
    points: np.ndarray
    marks: list

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, self.dim)
        if len(self.marks) != pts.shape[0]:
            raise InvalidArgumentError("one mark per point is required")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "marks", list(self.marks))

    @property
    def count(self):
        return self.points.shape[0]

    @property
    def pairs(self):
        return list(zip(self.points, self.marks))


@dataclass(frozen=True, eq=False)
class AxisBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise InvalidArgumentError("lower and upper must be vectors of equal length")
        if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)) or np.any(lo >= hi):
            raise InvalidArgumentError(f"degenerate box: lower={lo}, upper={hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self):
        return self.lower.shape[0]

    @property
    def volume(self):
        return float(np.prod(self.upper - self.lower))

    def contains(self, points):
        """Vectorized half-open membership test ``lower <= x < upper``."""
        pts = np.atleast_2d(points)
        return np.all((pts >= self.lower) & (pts < self.upper), axis=1)

    def __call__(self, theta):
        return bool(self.contains(theta)[0])


class BoundedIntensity:
    """An intensity function with a verified upper bound on a box.

    Args:
        eval: intensity function. With ``vectorized=True`` it receives an
            (n, d) array and returns n values, otherwise one point at a time.
        box: the region the process lives on.
        lambda_max: claimed upper bound of ``eval`` on ``box``.
        vectorized: calling convention of ``eval``.
        probe_seed: seed for the random bound probe run at construction.

    Raises:
        BoundViolationError: a probe point exceeds ``lambda_max``.
        InvalidArgumentError: a probe returns a negative or non-finite value.
    """

    def __init__(self, eval, box, lambda_max, vectorized=False, probe_seed=0,
                 n_probes=_N_PROBES):
        if not (np.isfinite(lambda_max) and lambda_max > 0):
            raise InvalidArgumentError(f"lambda_max must be positive, got {lambda_max}")
        self.eval = eval
        self.box = box
        self.lambda_max = float(lambda_max)
        self.vectorized = vectorized
        if n_probes:
            rng = np.random.default_rng(probe_seed)
            probes = box.lower + (box.upper - box.lower) * rng.random((n_probes, box.dim))
            self._check(self.evaluate(probes))

    def evaluate(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[0] == 0:
            return np.empty(0)
        if self.vectorized:
            vals = np.asarray(self.eval(pts), dtype=float).reshape(-1)
        else:
            vals = np.array([float(self.eval(p)) for p in pts])
        return vals

    def _check(self, vals):
        if np.any(~np.isfinite(vals)) or np.any(vals < 0):
            raise InvalidArgumentError("intensity must be finite and nonnegative")
        worst = vals.max(initial=0.0)
        if worst > self.lambda_max * (1 + 1e-12):
            raise BoundViolationError(
                f"intensity value {worst!r} exceeds lambda_max={self.lambda_max!r}")


def _poisson_inversion(mean, rng):
    u = rng.random()
    k = 0
    p = math.exp(-mean)
    cdf = p
    while u > cdf:
        k += 1
        p *= mean / k
        cdf += p
        if p == 0.0 and cdf < u:
            # u fell in the round-off gap at the far tail; redraw
            u = rng.random()
            k, p = 0, math.exp(-mean)
            cdf = p
    return k


def _poisson_ptrs(mean, rng):
    # Hormann (1993) transformed rejection with squeeze, valid for mean >= 10
    slam = math.sqrt(mean)
    loglam = math.log(mean)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u = rng.random() - 0.5
        v = rng.random()
        us = 0.5 - abs(u)
        if us <= 0.0 or v <= 0.0:
            continue
        k = math.floor((2.0 * a / us + b) * u + mean + 0.43)
        if us >= 0.07 and v <= v_r:
            return k
        if k < 0 or (us < 0.013 and v > us):
            continue
        lhs = math.log(v) + math.log(inv_alpha) - math.log(a / (us * us) + b)
        if lhs <= -mean + k * loglam - math.lgamma(k + 1):
            return k


def sample_poisson_count(mean, seed=None):
    """Draw one Poisson(mean) variate; ``mean == 0`` returns 0 without using the RNG."""
    mean = float(mean)
    if not math.isfinite(mean) or mean < 0:
        raise InvalidArgumentError(f"Poisson mean must be finite and >= 0, got {mean}")
    if mean == 0.0:
        return 0
    rng = as_generator(seed)
    if mean < _INVERSION_CUTOFF:
        return _poisson_inversion(mean, rng)
    return _poisson_ptrs(mean, rng)


def _uniform_in_box(box, n, rng):
    return box.lower + (box.upper - box.lower) * rng.random((n, box.dim))


def sample_homogeneous(box, rate, seed=None):
    """Homogeneous PPP on ``box``: Poisson(rate * volume) uniform points."""
    if not (np.isfinite(rate) and rate > 0):
        raise InvalidArgumentError(f"rate must be positive, got {rate}")
    rng = as_generator(seed)
    n = sample_poisson_count(rate * box.volume, rng)
    return PointPattern(box.dim, _uniform_in_box(box, n, rng))


def sample_binomial(n, sampler, dim, seed=None):
    """Fixed-count binomial process: ``n`` i.i.d. draws from ``sampler``.

    ``sampler(n, rng)`` must return an (n, dim) array.
    """
    if int(n) != n or n < 0:
        raise InvalidArgumentError(f"n must be a nonnegative integer, got {n}")
    rng = as_generator(seed)
    if n == 0:
        return PointPattern(dim)
    pts = np.asarray(sampler(int(n), rng), dtype=float)
    if pts.shape != (int(n), dim):
        raise ContractViolationError(f"sampler returned shape {pts.shape}, expected {(int(n), dim)}")
    return PointPattern(dim, pts)


def sample_mixed_binomial(count_mean, sampler, dim, seed=None):
    """Mixed binomial process with Poisson(count_mean) mixing.

    This is a PPP with intensity measure ``count_mean`` times the sampler's law.
    """
    rng = as_generator(seed)
    kappa = sample_poisson_count(count_mean, rng)
    return sample_binomial(kappa, sampler, dim, rng)


def thin_candidates(candidates, intensity, seed=None):
    """Keep each candidate independently with probability eval/lambda_max."""
    rng = as_generator(seed)
    if candidates.count == 0:
        return candidates
    if not np.all(intensity.box.contains(candidates.points)):
        raise InvalidArgumentError("candidate points must lie inside the intensity box")
    vals = intensity.evaluate(candidates.points)
    intensity._check(vals)
    keep = rng.random(candidates.count) < vals / intensity.lambda_max
    return PointPattern(candidates.dim, candidates.points[keep])


def sample_ppp_thinning(intensity, seed=None):
    """Realize a PPP with the given bounded intensity by thinning."""
    rng = as_generator(seed)
    candidates = sample_homogeneous(intensity.box, intensity.lambda_max, rng)
    return thin_candidates(candidates, intensity, rng)


def superpose(patterns, dim=None):
    """Union of independent patterns (concatenation in list order)."""
    patterns = list(patterns)
    dims = {p.dim for p in patterns}
    if dim is not None:
        dims.add(int(dim))
    if len(dims) > 1:
        raise InvalidArgumentError(f"cannot superpose patterns of dims {sorted(dims)}")
    if not dims:
        raise InvalidArgumentError("superposing an empty list needs an explicit dim")
    d = dims.pop()
    if not patterns:
        return PointPattern(d)
    return PointPattern(d, np.concatenate([p.points for p in patterns], axis=0))


def map_pattern(pattern, f, out_dim):
    """Pointwise image of a pattern under ``f``; counts are preserved."""
    out = np.empty((pattern.count, out_dim))
    for i, p in enumerate(pattern.points):
        y = np.atleast_1d(np.asarray(f(p), dtype=float))
        if y.shape != (out_dim,):
            raise ContractViolationError(
                f"map returned shape {y.shape}, expected ({out_dim},)")
        out[i] = y
    return PointPattern(out_dim, out)


def binary_kernel(retention):
    """Thinning kernel: mark 1 with probability retention(theta), else 0."""
    def kernel(theta):
        p = float(retention(theta))
        if not 0.0 <= p <= 1.0:
            raise InvalidArgumentError(f"retention probability {p} outside [0, 1]")
        return lambda rng: int(rng.random() < p)
    return kernel


def mark_pattern(pattern, kernel, seed=None):
    """Attach one independent mark per point.

    ``kernel(theta)`` returns a mark sampler, a callable taking a Generator.
    """
    rng = as_generator(seed)
    marks = [kernel(p)(rng) for p in pattern.points]
    return MarkedPattern(pattern.dim, pattern.points.copy(), marks)


def thin_by_retention(pattern, retention, seed=None):
    """Independent thinning: keep the points whose binary mark is 1."""
    marked = mark_pattern(pattern, binary_kernel(retention), seed)
    keep = np.array([m == 1 for m in marked.marks], dtype=bool)
    return PointPattern(pattern.dim, pattern.points[keep.reshape(-1)])


def count_in_region(pattern, region):
    """Number of points inside ``region`` (an AxisBox or a point predicate)."""
    if pattern.count == 0:
        return 0
    if isinstance(region, AxisBox):
        return int(np.count_nonzero(region.contains(pattern.points)))
    return sum(1 for p in pattern.points if region(p))
