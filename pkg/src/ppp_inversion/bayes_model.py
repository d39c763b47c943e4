"""Bayesian inverse problem: priors, data-misfit potential, posterior intensity.

The potential is the squared Mahalanobis norm of the residual,
``Phi(theta) = (G(theta) - u)^T Sigma^{-1} (G(theta) - u)``, evaluated through
the Cholesky factor of the noise covariance. The unnormalized posterior is
``exp(-Phi) * prior_density`` and the PPP intensity scales it by ``gamma``.
The normalizer Z is never needed for sampling since thinning only uses ratios.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math
import warnings

import numpy as np
from scipy import linalg

from ._rng import as_generator, thread_count
from .errors import (ContractViolationError, DegenerateError, ForwardError,
                     InvalidArgumentError, SPDViolationError)
from .point_process import AxisBox


def cholesky_spd(mat, what="matrix"):
    """Lower Cholesky factor of a symmetric positive-definite matrix."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if mat.shape[0] != mat.shape[1]:
        raise SPDViolationError(f"{what} must be square, got {mat.shape}")
    if not np.allclose(mat, mat.T, rtol=0, atol=1e-12 * max(1.0, np.abs(mat).max())):
        raise SPDViolationError(f"{what} is not symmetric")
    try:
        return linalg.cholesky(mat, lower=True)
    except linalg.LinAlgError as exc:
        raise SPDViolationError(f"{what} is not positive definite") from exc


@dataclass(frozen=True, eq=False)
class GaussianPrior:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise InvalidArgumentError(f"cov shape {cov.shape} does not match mean {mean.shape}")
        chol = cholesky_spd(cov, "prior covariance")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(self, "_log_norm",
                           -0.5 * mean.size * math.log(2 * math.pi)
                           - float(np.sum(np.log(np.diag(chol)))))

    @property
    def dim(self):
        return self.mean.size

    def log_density(self, thetas):
        x = np.atleast_2d(thetas) - self.mean
        z = linalg.solve_triangular(self._chol, x.T, lower=True)
        return self._log_norm - 0.5 * np.sum(z * z, axis=0)

    def sample(self, n, rng):
        z = rng.standard_normal((n, self.dim))
        return self.mean + z @ self._chol.T


@dataclass(frozen=True, eq=False)
class UniformBoxPrior:
    box: AxisBox

    @property
    def dim(self):
        return self.box.dim

    @property
    def mean(self):
        return 0.5 * (self.box.lower + self.box.upper)

    @property
    def cov(self):
        return np.diag((self.box.upper - self.box.lower) ** 2 / 12.0)

    def log_density(self, thetas):
        x = np.atleast_2d(thetas)
        # closed box: the boundary belongs to the support
        inside = np.all((x >= self.box.lower) & (x <= self.box.upper), axis=1)
        return np.where(inside, -math.log(self.box.volume), -np.inf)

    def sample(self, n, rng):
        return self.box.lower + (self.box.upper - self.box.lower) * rng.random((n, self.dim))


class PosteriorSpec:
    """Forward map, observation, Gaussian noise model and prior.

    ``forward`` maps a length-d vector to a length-m vector. If it also has a
    ``batch`` method taking an (n, d) array, batch evaluations use it;
    otherwise they fan out over a thread pool capped by ``PPP_THREADS``.
    """

    def __init__(self, forward, observation, noise_cov, prior):
        self.forward = forward
        self.observation = np.atleast_1d(np.asarray(observation, dtype=float))
        m = self.observation.size
        noise_cov = np.atleast_2d(np.asarray(noise_cov, dtype=float))
        if noise_cov.shape != (m, m):
            raise InvalidArgumentError(
                f"noise covariance shape {noise_cov.shape} does not match observation length {m}")
        self.noise_cov = noise_cov
        self.noise_chol = cholesky_spd(noise_cov, "noise covariance")
        self.prior = prior

    @property
    def dim(self):
        return self.prior.dim

    def forward_batch(self, thetas):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        try:
            if hasattr(self.forward, "batch"):
                out = np.asarray(self.forward.batch(thetas), dtype=float)
            else:
                workers = min(thread_count(), max(1, len(thetas)))
                if workers > 1:
                    with ThreadPoolExecutor(workers) as pool:
                        rows = list(pool.map(self.forward, thetas))
                else:
                    rows = [self.forward(t) for t in thetas]
                out = np.array([np.atleast_1d(np.asarray(r, dtype=float)) for r in rows])
        except (ForwardError, ContractViolationError):
            raise
        except Exception as exc:
            raise ForwardError(f"forward map failed: {exc}") from exc
        out = out.reshape(len(thetas), -1)
        if out.shape[1] != self.observation.size:
            raise ContractViolationError(
                f"forward output length {out.shape[1]} != observation length {self.observation.size}")
        if not np.all(np.isfinite(out)):
            raise ForwardError("forward map returned non-finite values")
        return out

    def potentials(self, thetas):
        """Potential at each row of an (n, d) array."""
        resid = self.forward_batch(thetas) - self.observation
        z = linalg.solve_triangular(self.noise_chol, resid.T, lower=True)
        return np.sum(z * z, axis=0)

    def potential_gradient(self, theta):
        """Analytic gradient ``2 J^T Sigma^{-1} (G - u)``; needs ``forward.jacobian``."""
        theta = np.asarray(theta, dtype=float)
        resid = np.atleast_1d(self.forward(theta)) - self.observation
        jac = np.atleast_2d(self.forward.jacobian(theta)).reshape(self.observation.size, -1)
        w = linalg.cho_solve((self.noise_chol, True), resid)
        return 2.0 * jac.T @ w


@dataclass(frozen=True, eq=False)
class IntensitySpec:
    model: PosteriorSpec
    gamma: float

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise InvalidArgumentError(f"gamma must be positive, got {self.gamma}")


def _check_theta(model, theta):
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.dim,):
        raise InvalidArgumentError(f"theta must have length {model.dim}, got shape {theta.shape}")
    return theta


def potential(model, theta):
    theta = _check_theta(model, theta)
    return float(model.potentials(theta[None, :])[0])


def prior_log_density(prior, theta):
    return float(prior.log_density(np.asarray(theta, dtype=float)[None, :])[0])


def prior_sample(prior, n, seed=None):
    if n < 0:
        raise InvalidArgumentError(f"n must be >= 0, got {n}")
    rng = as_generator(seed)
    return prior.sample(int(n), rng)


def log_unnormalized_posterior(model, thetas):
    """``-Phi + log prior`` per row; -inf outside the prior support.

    The forward map is only evaluated inside the support.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    logp = model.prior.log_density(thetas)
    inside = np.isfinite(logp)
    if np.any(inside):
        logp[inside] -= model.potentials(thetas[inside])
    return logp


def unnormalized_posterior_density(model, theta):
    theta = _check_theta(model, theta)
    return float(np.exp(log_unnormalized_posterior(model, theta[None, :])[0]))


def unnormalized_intensity(spec, theta):
    return spec.gamma * unnormalized_posterior_density(spec.model, theta)


def estimate_normalizer(model, n_samples, seed=None):
    """Monte Carlo estimate of Z = E_prior[exp(-Phi)] and its standard error."""
    if n_samples < 100:
        raise InvalidArgumentError(f"n_samples must be >= 100, got {n_samples}")
    rng = as_generator(seed)
    thetas = model.prior.sample(int(n_samples), rng)
    lik = np.exp(-model.potentials(thetas))
    if not np.any(lik > 0):
        raise DegenerateError("exp(-Phi) vanished at every prior sample")
    z_hat = float(lik.mean())
    se = float(lik.std(ddof=1) / math.sqrt(n_samples))
    if z_hat < 10 * se:
        warnings.warn("normalizer estimate has large relative error", RuntimeWarning)
    return z_hat, se
