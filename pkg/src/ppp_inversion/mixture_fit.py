"""Importance-weighted EM for a Gaussian mixture approximation of a posterior.

Prior draws are weighted by their likelihood ``exp(-Phi)``, self-normalized,
and a K-component Gaussian mixture is fitted to the weighted sample by EM.
All densities are handled in log space.
"""
from dataclasses import dataclass, field
import math
import warnings

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from ._rng import as_generator, spawn
from .bayes_model import cholesky_spd
from .errors import DegenerateError, InvalidArgumentError

_EMPTY_MASS = 1e-12
_LOG_2PI = math.log(2 * math.pi)


@dataclass(frozen=True, eq=False)
class GaussianComponent:
    weight: float
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise InvalidArgumentError(f"cov shape {cov.shape} does not match mean {mean.shape}")
        if not 0.0 <= self.weight <= 1.0 + 1e-12:
            raise InvalidArgumentError(f"weight {self.weight} outside [0, 1]")
        chol = cholesky_spd(cov, "component covariance")
        object.__setattr__(self, "weight", float(self.weight))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "chol", chol)

    @property
    def dim(self):
        return self.mean.size

    def log_pdf(self, x):
        z = linalg.solve_triangular(self.chol, (np.atleast_2d(x) - self.mean).T, lower=True)
        return (-0.5 * np.sum(z * z, axis=0) - np.sum(np.log(np.diag(self.chol)))
                - 0.5 * self.dim * _LOG_2PI)


class GaussianMixture:
    """Weighted sum of Gaussian components; weights must sum to one."""

    def __init__(self, components):
        self.components = list(components)
        if not self.components:
            raise InvalidArgumentError("a mixture needs at least one component")
        dims = {c.dim for c in self.components}
        if len(dims) != 1:
            raise InvalidArgumentError(f"components disagree on dimension: {dims}")
        self.dim = dims.pop()
        total = sum(c.weight for c in self.components)
        if abs(total - 1.0) > 1e-10:
            raise InvalidArgumentError(f"mixture weights sum to {total!r}, not 1")

    def __len__(self):
        return len(self.components)

    @property
    def weights(self):
        return np.array([c.weight for c in self.components])

    @property
    def means(self):
        return np.array([c.mean for c in self.components])

    @property
    def covs(self):
        return np.array([c.cov for c in self.components])

    def log_joint(self, x):
        """(n, K) matrix of ``log w_k + log phi_k(x_i)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        with np.errstate(divide="ignore"):
            return np.column_stack([math.log(c.weight) + c.log_pdf(x) if c.weight > 0
                                    else np.full(x.shape[0], -np.inf)
                                    for c in self.components])

    def log_density(self, x):
        return logsumexp(self.log_joint(x), axis=1)

    def mean(self):
        return self.weights @ self.means

    def covariance(self):
        """Law-of-total-covariance moment of the mixture."""
        w, mu = self.weights, self.means
        m = w @ mu
        second = np.einsum("k,kij->ij", w, self.covs + np.einsum("ki,kj->kij", mu, mu))
        return second - np.outer(m, m)

    def to_dict(self):
        return {"dim": self.dim,
                "components": [{"w": c.weight, "mean": c.mean.tolist(), "cov": c.cov.tolist()}
                               for c in self.components]}

    @classmethod
    def from_dict(cls, data):
        comps = [GaussianComponent(c["w"], c["mean"], c["cov"]) for c in data["components"]]
        mix = cls(comps)
        if mix.dim != int(data["dim"]):
            raise InvalidArgumentError(f"declared dim {data['dim']} != component dim {mix.dim}")
        return mix


def mixture_density(mixture, theta):
    return float(np.exp(mixture.log_density(np.asarray(theta, dtype=float)[None, :])[0]))


@dataclass(frozen=True, eq=False)
class WeightedSampleSet:
    samples: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.samples, dtype=float))
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if s.shape[0] != w.size:
            raise InvalidArgumentError(f"{s.shape[0]} samples but {w.size} weights")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
            raise InvalidArgumentError("weights must be nonnegative and sum to 1")
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "weights", w)

    @property
    def ess(self):
        return float(1.0 / np.sum(self.weights ** 2))

    def mean(self):
        return self.weights @ self.samples

    def covariance(self):
        d = self.samples - self.mean()
        return (self.weights[:, None] * d).T @ d


@dataclass
class EmConfig:
    """EM settings.

    ``cov_floor=None`` selects ``1e-6`` times the weighted total variance of
    the data. ``weighting`` is ``"likelihood"`` (``r = exp(-Phi)``) or
    ``"literal"`` (``r = Phi * prior_density``).
    """
    K: int = 2
    max_iter: int = 500
    tol: float = 1e-8
    cov_floor: float = None
    seed: int = 0
    weighting: str = "likelihood"

    def __post_init__(self):
        if int(self.K) < 1:
            raise InvalidArgumentError(f"K must be >= 1, got {self.K}")
        if not self.tol > 0:
            raise InvalidArgumentError("tol must be positive")
        if self.cov_floor is not None and not self.cov_floor > 0:
            raise InvalidArgumentError("cov_floor must be positive")
        if self.max_iter < 1:
            raise InvalidArgumentError("max_iter must be positive")
        if self.weighting not in ("likelihood", "literal"):
            raise InvalidArgumentError(f"unknown weighting {self.weighting!r}")


@dataclass
class FitReport:
    iterations: int
    converged: bool
    log_likelihood: float
    history: list = field(default_factory=list)
    n_samples: int = 0
    ess: float = float("nan")
    cov_floor: float = float("nan")
    reseeded: int = 0


def importance_weights(model, samples, weighting="likelihood"):
    """Self-normalized importance weights for prior draws."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if weighting == "likelihood":
        log_r = -model.potentials(samples)
    elif weighting == "literal":
        with np.errstate(divide="ignore"):
            log_r = np.log(model.potentials(samples)) + model.prior.log_density(samples)
    else:
        raise InvalidArgumentError(f"unknown weighting {weighting!r}")
    if not np.any(np.isfinite(log_r)):
        raise DegenerateError("every importance weight is zero")
    log_r = log_r - logsumexp(log_r)
    w = np.exp(log_r)
    return WeightedSampleSet(samples, w / w.sum())


def _responsibilities(mixture, samples):
    lj = mixture.log_joint(samples)
    lse = logsumexp(lj, axis=1)
    if np.any(~np.isfinite(lse)):
        raise DegenerateError("all component densities vanish at some sample")
    return np.exp(lj - lse[:, None]), lse


def e_step(mixture, samples):
    """Responsibility matrix (M, K); rows sum to one."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.shape[0] < 1:
        raise InvalidArgumentError("e_step needs at least one sample")
    return _responsibilities(mixture, samples)[0]


def _floored(cov, floor):
    cov = 0.5 * (cov + cov.T)
    if np.linalg.eigvalsh(cov)[0] < floor:
        cov = cov + floor * np.eye(cov.shape[0])
    return cov


def default_cov_floor(data):
    return 1e-6 * max(float(np.trace(data.covariance())), 1e-300)


def m_step(data, rho, cov_floor, _stats=None):
    """Weighted mean/covariance updates with ``rho_hat = r * rho``.

    A component whose weighted mass drops below 1e-12 is reseeded at the
    sample whose importance weight is least explained by the surviving
    components, with the data covariance as its shape.
    """
    x, r = data.samples, data.weights
    rho = np.asarray(rho, dtype=float)
    if rho.shape[0] != x.shape[0]:
        raise InvalidArgumentError("responsibility rows must match the samples")
    rho_hat = r[:, None] * rho
    mass = rho_hat.sum(axis=0)
    total = mass.sum()
    K, d = rho.shape[1], x.shape[1]
    means = np.zeros((K, d))
    covs = np.zeros((K, d, d))
    alive = mass > _EMPTY_MASS
    for k in np.flatnonzero(alive):
        means[k] = rho_hat[:, k] @ x / mass[k]
        diff = x - means[k]
        covs[k] = _floored((rho_hat[:, k, None] * diff).T @ diff / mass[k], cov_floor)
    weights = np.where(alive, mass / total, 0.0)
    dead = np.flatnonzero(~alive)
    if dead.size:
        if not alive.any():
            raise DegenerateError("every component lost its mass")
        survivors = GaussianMixture([GaussianComponent(weights[k] / weights[alive].sum(),
                                                       means[k], covs[k])
                                     for k in np.flatnonzero(alive)])
        with np.errstate(divide="ignore"):
            deficit = np.log(r) - survivors.log_density(x)
        shape = _floored(data.covariance(), cov_floor)
        for k in dead:
            i = int(np.argmax(deficit))
            means[k], covs[k] = x[i], shape
            weights[k] = 1.0 / K
            deficit[i] = -np.inf
        weights = weights / weights.sum()
        if _stats is not None:
            _stats["reseeded"] = _stats.get("reseeded", 0) + dead.size
    weights = weights / weights.sum()
    return GaussianMixture([GaussianComponent(weights[k], means[k], covs[k]) for k in range(K)])


def _kmeanspp_init(data, K, rng, cov_floor):
    x, r = data.samples, data.weights
    chosen = []
    d2 = np.full(x.shape[0], np.inf)
    for _ in range(K):
        p = r if not chosen else r * d2
        if p.sum() <= 0:
            # fewer weighted distinct points than components: spread by distance only
            p = np.where(np.isfinite(d2), d2, 1.0)
            if p.sum() <= 0:
                p = np.ones(x.shape[0])
        i = int(rng.choice(x.shape[0], p=p / p.sum()))
        chosen.append(i)
        d2 = np.minimum(d2, np.sum((x - x[i]) ** 2, axis=1))
    shape = _floored(data.covariance(), cov_floor)
    return GaussianMixture([GaussianComponent(1.0 / K, x[i], shape) for i in chosen])


def weighted_log_likelihood(mixture, data):
    """``sum_i r_i log sum_k w_k phi_k(theta_i)`` over samples with r_i > 0."""
    pos = data.weights > 0
    return float(data.weights[pos] @ mixture.log_density(data.samples[pos]))


def fit_weighted(data, config, init=None):
    """Run EM on a weighted sample. Returns ``(mixture, FitReport)``."""
    K = int(config.K)
    floor = config.cov_floor if config.cov_floor is not None else default_cov_floor(data)
    rng = as_generator(config.seed)
    mixture = init if init is not None else _kmeanspp_init(data, K, rng, floor)
    pos = data.weights > 0
    stats = {}
    history = []
    converged = False
    it = 0
    for it in range(1, config.max_iter + 1):
        rho = np.zeros((data.samples.shape[0], K))
        rho_pos, lse = _responsibilities(mixture, data.samples[pos])
        rho[pos] = rho_pos
        # zero-weight samples carry no mass; their rows only need to be valid
        rho[~pos] = 1.0 / K
        L = float(data.weights[pos] @ lse)
        history.append(L)
        if len(history) > 1 and abs(L - history[-2]) < config.tol * max(abs(history[-2]), 1.0):
            converged = True
            break
        mixture = m_step(data, rho, floor, stats)
    else:
        history.append(weighted_log_likelihood(mixture, data))
    report = FitReport(iterations=it, converged=converged, log_likelihood=history[-1],
                       history=history, n_samples=data.samples.shape[0], ess=data.ess,
                       cov_floor=floor, reseeded=stats.get("reseeded", 0))
    return mixture, report


def em_fit(model, M, config, prior_seed=None):
    """Fit a K-component mixture to the posterior of ``model`` from M prior draws.

    ``prior_seed`` defaults to a substream of ``config.seed``. Non-convergence
    is reported through ``FitReport.converged``, not raised.
    """
    M = int(M)
    K, d = int(config.K), model.dim
    if M < 10 * K * d:
        warnings.warn(f"M={M} is below the 10*K*d={10 * K * d} sufficiency heuristic",
                      RuntimeWarning)
    if prior_seed is None:
        prior_seed = spawn(config.seed, 1)[0]
    samples = model.prior.sample(M, as_generator(prior_seed))
    data = importance_weights(model, samples, config.weighting)
    return fit_weighted(data, config)
