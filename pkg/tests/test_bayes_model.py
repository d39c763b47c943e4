import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from ppp_inversion.bayes_model import (GaussianPrior, IntensitySpec, PosteriorSpec,
                                       UniformBoxPrior, estimate_normalizer,
                                       log_unnormalized_posterior, potential,
                                       prior_log_density, prior_sample, unnormalized_intensity,
                                       unnormalized_posterior_density)
from ppp_inversion.errors import (ContractViolationError, DegenerateError, ForwardError,
                                  InvalidArgumentError, SPDViolationError)
from ppp_inversion.forward_models import BimodalForward, UnimodalForward
from ppp_inversion.point_process import AxisBox


def shift_model(u, noise_cov, prior=None):
    """G(theta) = theta, so the residual is theta - u."""
    u = np.asarray(u, dtype=float)
    prior = prior or GaussianPrior(np.zeros(u.size), np.eye(u.size))
    return PosteriorSpec(lambda t: np.asarray(t), u, noise_cov, prior)


STD1 = GaussianPrior([0.0], [[1.0]])


def test_potential_zero_residual():
    m = shift_model([0.3, -0.2], np.eye(2))
    assert potential(m, [0.3, -0.2]) == 0.0


def test_potential_scaled_noise():
    m = shift_model([0.0, 0.0], 0.01 * np.eye(2))
    assert potential(m, [0.1, 0.0]) == pytest.approx(1.0, rel=1e-12)


def test_potential_identity_noise():
    m = shift_model([0.0, 0.0], np.eye(2))
    assert potential(m, [1.0, 1.0]) == pytest.approx(2.0, rel=1e-12)


def test_noise_cov_must_be_spd():
    with pytest.raises(SPDViolationError):
        shift_model([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])


def test_noise_cov_shape_checked():
    with pytest.raises(InvalidArgumentError):
        shift_model([0.0, 0.0], np.eye(3))


def test_forward_failure_is_forward_error():
    def broken(t):
        raise RuntimeError("solver diverged")
    m = PosteriorSpec(broken, [0.0], [[1.0]], STD1)
    with pytest.raises(ForwardError):
        potential(m, [0.0])


def test_forward_nonfinite_is_forward_error():
    m = PosteriorSpec(lambda t: np.array([np.nan]), [0.0], [[1.0]], STD1)
    with pytest.raises(ForwardError):
        potential(m, [0.0])


def test_forward_wrong_length():
    m = PosteriorSpec(lambda t: np.zeros(2), [0.0], [[1.0]], STD1)
    with pytest.raises(ContractViolationError):
        potential(m, [0.0])


def test_theta_length_checked():
    m = shift_model([0.0], [[1.0]], STD1)
    with pytest.raises(InvalidArgumentError):
        potential(m, [0.0, 1.0])


def test_gaussian_log_density_at_zero():
    assert prior_log_density(STD1, [0.0]) == pytest.approx(-0.5 * math.log(2 * math.pi))


def test_uniform_log_density():
    prior = UniformBoxPrior(AxisBox([-1.0, -1.0], [1.0, 1.0]))
    assert prior_log_density(prior, [0.0, 0.0]) == pytest.approx(math.log(0.25))
    assert prior_log_density(prior, [2.0, 0.0]) == -math.inf
    # closed support: the upper face belongs to the prior
    assert np.isfinite(prior_log_density(prior, [1.0, 1.0]))


def test_gaussian_prior_rejects_non_spd():
    with pytest.raises(SPDViolationError):
        GaussianPrior([0.0, 0.0], [[1.0, 0.0], [0.0, -1.0]])


def test_prior_sample_empty():
    assert prior_sample(STD1, 0, 1).shape == (0, 1)


def test_prior_sample_gaussian_mean():
    x = prior_sample(GaussianPrior([0.0, 0.0], np.eye(2)), 100_000, 3)
    assert np.all(np.abs(x.mean(axis=0)) <= 3 / math.sqrt(1e5))


def test_prior_sample_correlated():
    cov = np.array([[2.0, 0.8], [0.8, 1.0]])
    x = prior_sample(GaussianPrior([1.0, -1.0], cov), 200_000, 4)
    assert np.allclose(np.cov(x.T), cov, atol=0.03)


def test_prior_sample_uniform_variance():
    x = prior_sample(UniformBoxPrior(AxisBox([-1.0], [1.0])), 100_000, 5)[:, 0]
    # var of the sample variance of U(-1,1): (E x^4 - (1/3)^2)/n = (1/5 - 1/9)/n
    assert abs(x.var() - 1 / 3) <= 3 * math.sqrt((1 / 5 - 1 / 9) / 1e5)


def test_posterior_density_closed_form():
    m = shift_model([0.0], [[1.0]], STD1)
    assert unnormalized_posterior_density(m, [0.0]) == pytest.approx(1 / math.sqrt(2 * math.pi))


def test_posterior_outside_uniform_support_skips_forward():
    calls = []

    def fwd(t):
        calls.append(t)
        return np.asarray(t)

    m = PosteriorSpec(fwd, [0.0], [[1.0]], UniformBoxPrior(AxisBox([-1.0], [1.0])))
    assert unnormalized_posterior_density(m, [3.0]) == 0.0
    assert calls == []


def test_intensity_scaling():
    m = shift_model([0.2], [[0.5]], STD1)
    theta = [0.7]
    base = unnormalized_posterior_density(m, theta)
    assert unnormalized_intensity(IntensitySpec(m, 1.0), theta) == base
    assert unnormalized_intensity(IntensitySpec(m, 2.0), theta) == pytest.approx(2 * base)


@pytest.mark.parametrize("gamma", [0.0, -3.0, np.nan])
def test_intensity_rejects_bad_gamma(gamma):
    with pytest.raises(InvalidArgumentError):
        IntensitySpec(shift_model([0.0], [[1.0]], STD1), gamma)


def test_normalizer_flat_likelihood():
    m = PosteriorSpec(lambda t: np.zeros(1), [0.0], [[1.0]], STD1)
    z, se = estimate_normalizer(m, 1000, 1)
    assert z == 1.0 and se == 0.0


def test_normalizer_gaussian_integral():
    # Phi = theta^2 / 2 when G = theta, u = 0, Sigma = 2
    m = shift_model([0.0], [[2.0]], STD1)
    z, se = estimate_normalizer(m, 100_000, 2)
    assert abs(z - 1 / math.sqrt(2)) <= 3 * se


def test_normalizer_error_shrinks_with_n():
    m = shift_model([0.0], [[2.0]], STD1)
    _, se4 = estimate_normalizer(m, 10_000, 3)
    _, se6 = estimate_normalizer(m, 1_000_000, 4)
    assert 8.0 <= se4 / se6 <= 12.5


def test_normalizer_consistency_across_n():
    m = shift_model([0.5], [[0.3]], STD1)
    z1, s1 = estimate_normalizer(m, 5_000, 5)
    z2, s2 = estimate_normalizer(m, 500_000, 6)
    assert abs(z1 - z2) <= 3 * math.hypot(s1, s2)


def test_normalizer_minimum_samples():
    with pytest.raises(InvalidArgumentError):
        estimate_normalizer(shift_model([0.0], [[1.0]], STD1), 99, 0)


def test_normalizer_degenerate():
    m = PosteriorSpec(lambda t: np.array([1e6]), [0.0], [[1e-6]], STD1)
    with pytest.raises(DegenerateError):
        estimate_normalizer(m, 100, 0)


def test_thread_pool_matches_batch():
    fwd = UnimodalForward()
    u = [-0.0173, -0.573]
    prior = GaussianPrior([0.0, 0.0], np.eye(2))
    batched = PosteriorSpec(fwd, u, 0.01 * np.eye(2), prior)
    pooled = PosteriorSpec(lambda t: fwd(t), u, 0.01 * np.eye(2), prior)
    x = np.random.default_rng(0).standard_normal((200, 2))
    assert np.allclose(batched.potentials(x), pooled.potentials(x), rtol=1e-13)


# -- properties -------------------------------------------------------------

finite = st.floats(-5, 5, allow_nan=False)


@given(arrays(float, 2, elements=finite))
def test_potential_nonnegative(theta):
    m = PosteriorSpec(UnimodalForward(), [-0.0173, -0.573], 0.01 * np.eye(2),
                      GaussianPrior([0.0, 0.0], np.eye(2)))
    assert potential(m, theta) >= 0.0


@given(arrays(float, 2, elements=finite))
def test_posterior_below_prior(theta):
    prior = GaussianPrior([0.0, 0.0], np.eye(2))
    m = PosteriorSpec(BimodalForward(), [4.2297], [[1.0]], prior)
    lp = log_unnormalized_posterior(m, theta[None, :])[0]
    assert lp <= prior_log_density(prior, theta) + 1e-12


@pytest.mark.parametrize("forward, u, cov", [
    (UnimodalForward(), [-0.0173, -0.573], 0.01 * np.eye(2)),
    (BimodalForward(), [4.2297], np.eye(1)),
])
def test_gradient_matches_central_differences(forward, u, cov):
    m = PosteriorSpec(forward, u, cov, GaussianPrior([0.0, 0.0], np.eye(2)))
    rng = np.random.default_rng(9)
    h = 1e-6
    for theta in rng.uniform(-1.5, 1.5, (20, 2)):
        g = m.potential_gradient(theta)
        fd = np.array([(potential(m, theta + h * e) - potential(m, theta - h * e)) / (2 * h)
                       for e in np.eye(2)])
        assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(g), 1.0)
