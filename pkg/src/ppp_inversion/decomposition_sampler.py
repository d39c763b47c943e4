"""Posterior sampling by superposing one Poisson process per mixture component.

With intensity ``gamma * sum_k w_k phi_k``, component k is an independent PPP
with expected count ``gamma * w_k``. Each component is realized either
exactly (Poisson count, then Gaussian draws) or by thinning a homogeneous
process on a truncated box; the union of the component patterns is a
realization of the full process.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._rng import as_generator, spawn, thread_count
from .errors import EmptyPatternError, InvalidArgumentError
from .bayes_model import cholesky_spd
from .point_process import (AxisBox, BoundedIntensity, PointPattern,
                            sample_poisson_count, sample_ppp_thinning, superpose)


@dataclass(frozen=True, eq=False)
class LabeledPattern:
    pattern: PointPattern
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int).reshape(-1)
        if labels.size != self.pattern.count:
            raise InvalidArgumentError("one label per point is required")
        if labels.size and labels.min() < 0:
            raise InvalidArgumentError("labels must be nonnegative component indices")
        object.__setattr__(self, "labels", labels)

    @property
    def count(self):
        return self.pattern.count

    def __eq__(self, other):
        return (isinstance(other, LabeledPattern) and self.pattern == other.pattern
                and np.array_equal(self.labels, other.labels))


@dataclass
class SamplerConfig:
    gamma: float = 1000.0
    method: str = "direct"
    box_sigma: float = 6.0
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise InvalidArgumentError(f"gamma must be positive, got {self.gamma}")
        if self.method not in ("direct", "thinning"):
            raise InvalidArgumentError(f"unknown sampling method {self.method!r}")
        if self.box_sigma < 4:
            raise InvalidArgumentError(f"box_sigma must be >= 4, got {self.box_sigma}")


def component_counts(mixture, gamma, seed=None):
    """Independent Poisson(gamma * w_k) counts, one per component."""
    if not gamma > 0:
        raise InvalidArgumentError(f"gamma must be positive, got {gamma}")
    rng = as_generator(seed)
    return [sample_poisson_count(gamma * w, rng) for w in mixture.weights]


def sample_component_direct(component, count, seed=None):
    if count < 0:
        raise InvalidArgumentError(f"count must be >= 0, got {count}")
    chol = cholesky_spd(component.cov, "component covariance")
    rng = as_generator(seed)
    z = rng.standard_normal((int(count), component.mean.size))
    return PointPattern(component.mean.size, component.mean + z @ chol.T)


def component_box(component, box_sigma):
    half = box_sigma * np.sqrt(np.diag(component.cov))
    return AxisBox(component.mean - half, component.mean + half)


def sample_component_thinning(component, expected_count, box_sigma=6.0, seed=None):
    """Thinning realization of ``expected_count * phi`` truncated to a box.

    The bound is the density at the mean, which is the exact maximum.
    """
    if not expected_count > 0:
        raise InvalidArgumentError(f"expected_count must be positive, got {expected_count}")
    scale = float(expected_count)
    intensity = BoundedIntensity(lambda x: scale * np.exp(component.log_pdf(x)),
                                 component_box(component, box_sigma),
                                 scale * float(np.exp(component.log_pdf(component.mean)[0])),
                                 vectorized=True)
    return sample_ppp_thinning(intensity, seed)


def sample_posterior_ppp(mixture, config):
    """One labeled realization of the PPP with intensity gamma * mixture.

    The seed tree is fixed: child 0 draws the counts, child k+1 samples
    component k, so the result does not depend on ``PPP_THREADS``.
    """
    K = len(mixture)
    children = spawn(config.seed, K + 1)
    counts = component_counts(mixture, config.gamma, children[0])

    def run(k):
        comp = mixture.components[k]
        if config.method == "direct":
            return sample_component_direct(comp, counts[k], children[k + 1])
        if comp.weight == 0:
            return PointPattern(mixture.dim)
        return sample_component_thinning(comp, config.gamma * comp.weight,
                                         config.box_sigma, children[k + 1])

    workers = min(thread_count(), K)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, range(K)))
    else:
        parts = [run(k) for k in range(K)]
    labels = np.concatenate([np.full(p.count, k, dtype=int) for k, p in enumerate(parts)])
    return LabeledPattern(superpose(parts, mixture.dim), labels)


@dataclass
class PatternSummary:
    label_counts: list
    total: int
    mean: np.ndarray = None
    covariance: np.ndarray = None


def pattern_statistics(labeled, n_labels=None, require_moments=True):
    """Per-label counts and pooled (1/n-normalized) sample moments."""
    labels = labeled.labels
    if n_labels is None:
        n_labels = int(labels.max()) + 1 if labels.size else 0
    counts = np.bincount(labels, minlength=n_labels).tolist()
    summary = PatternSummary(counts, labeled.count)
    if labeled.count == 0:
        if require_moments:
            raise EmptyPatternError("moments of an empty pattern are undefined", summary)
        return summary
    pts = labeled.pattern.points
    summary.mean = pts.mean(axis=0)
    d = pts - summary.mean
    summary.covariance = d.T @ d / pts.shape[0]
    return summary
