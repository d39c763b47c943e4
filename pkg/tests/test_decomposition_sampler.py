import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from ppp_inversion._rng import spawn
from ppp_inversion.decomposition_sampler import (LabeledPattern, SamplerConfig,
                                                 component_counts, pattern_statistics,
                                                 sample_component_direct,
                                                 sample_component_thinning,
                                                 sample_posterior_ppp)
from ppp_inversion.diagnostics import poisson_count_gof, two_sample_equivalence
from ppp_inversion.errors import EmptyPatternError, InvalidArgumentError, SPDViolationError
from ppp_inversion.mixture_fit import GaussianComponent, GaussianMixture
from ppp_inversion.point_process import PointPattern

STD2 = GaussianMixture([GaussianComponent(1.0, [0.0, 0.0], np.eye(2))])
HALVES = GaussianMixture([GaussianComponent(0.5, [-2.0, 0.0], np.eye(2)),
                          GaussianComponent(0.5, [2.0, 1.0], [[0.5, 0.2], [0.2, 0.3]])])
BIMODAL_MIX = GaussianMixture([
    GaussianComponent(0.498, [0.92807199, -0.93907239],
                      [[0.27007109, 0.22820827], [0.22820827, 0.26950376]]),
    GaussianComponent(0.502, [-0.93352663, 0.93225046],
                      [[0.27174892, 0.22923468], [0.22923468, 0.26951865]]),
])


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        SamplerConfig(gamma=0.0)
    with pytest.raises(InvalidArgumentError):
        SamplerConfig(method="rejection")
    with pytest.raises(InvalidArgumentError):
        SamplerConfig(box_sigma=3.0)


def test_labels_must_match_points():
    with pytest.raises(InvalidArgumentError):
        LabeledPattern(PointPattern(1, [[0.0], [1.0]]), [0])


def test_counts_tiny_gamma_are_zero():
    assert component_counts(STD2, 1e-12, 0) == [0]


def test_counts_split_by_weight():
    counts = np.array([component_counts(HALVES, 200.0, g) for g in spawn(1, 2000)])
    for k in range(2):
        assert poisson_count_gof(counts[:, k], 100.0).p_value > 0.01
    assert poisson_count_gof(counts.sum(axis=1), 200.0).p_value > 0.01


def test_direct_zero_count():
    assert sample_component_direct(STD2.components[0], 0, 1).count == 0


def test_direct_covariance():
    x = sample_component_direct(STD2.components[0], 100_000, 2).points
    d = x - x.mean(axis=0)
    se = (d[:, :, None] * d[:, None, :]).std(axis=0) / math.sqrt(len(x))
    assert np.all(np.abs(np.cov(x.T, bias=True) - np.eye(2)) <= 3 * se)


def test_direct_rejects_non_spd():
    class Broken:
        mean = np.zeros(2)
        cov = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(SPDViolationError):
        sample_component_direct(Broken(), 5, 0)


def test_thinning_component_law():
    comp = GaussianComponent(1.0, [0.0], [[1.0]])
    pats = [sample_component_thinning(comp, 500.0, 6.0, g) for g in spawn(3, 200)]
    counts = np.array([p.count for p in pats])
    expected = 500.0 * (1 - 2 * stats.norm.sf(6))
    assert abs(counts.mean() - expected) <= 3 * math.sqrt(expected / len(counts))
    pts = np.concatenate([p.points for p in pats])[:, 0]
    assert abs(pts.mean()) <= 3 / math.sqrt(len(pts))
    # acceptance rate = in-box mass / (phi(0) * 12)
    rate = counts.mean() / (500.0 * stats.norm.pdf(0) * 12)
    assert rate == pytest.approx(1 / (stats.norm.pdf(0) * 12), rel=0.02)
    assert rate == pytest.approx(0.209, abs=0.005)


def test_thinning_component_needs_positive_mean():
    with pytest.raises(InvalidArgumentError):
        sample_component_thinning(STD2.components[0], 0.0)


def test_single_component_pipeline():
    runs = [sample_posterior_ppp(STD2, SamplerConfig(gamma=100.0, seed=s)) for s in range(2000)]
    assert poisson_count_gof([r.count for r in runs], 100.0).p_value > 0.01
    pooled = np.concatenate([r.pattern.points for r in runs])
    assert np.all(np.abs(pooled.mean(axis=0)) <= 3 / math.sqrt(len(pooled)))


def test_bimodal_mixture_label_fraction():
    lp = sample_posterior_ppp(BIMODAL_MIX, SamplerConfig(gamma=1000.0, seed=7))
    frac = np.mean(lp.labels == 0)
    assert abs(frac - 0.498) <= 3 * math.sqrt(0.498 * 0.502 / lp.count)


def test_direct_and_thinning_agree():
    a = sample_posterior_ppp(HALVES, SamplerConfig(gamma=5000.0, method="direct", seed=1))
    b = sample_posterior_ppp(HALVES, SamplerConfig(gamma=5000.0, method="thinning", seed=2))
    xa, xb = a.pattern.points, b.pattern.points
    se = np.sqrt(xa.var(axis=0) / len(xa) + xb.var(axis=0) / len(xb))
    assert np.all(np.abs(xa.mean(axis=0) - xb.mean(axis=0)) <= 3 * se)
    assert two_sample_equivalence(xa, xb, 0.01)[1]


def test_labels_follow_components():
    lp = sample_posterior_ppp(HALVES, SamplerConfig(gamma=2000.0, seed=3))
    left = lp.pattern.points[lp.labels == 0]
    right = lp.pattern.points[lp.labels == 1]
    assert abs(left[:, 0].mean() + 2.0) < 0.2 and abs(right[:, 0].mean() - 2.0) < 0.2


def test_seed_determinism_and_thread_independence(monkeypatch):
    cfg = SamplerConfig(gamma=3000.0, method="thinning", seed=11)
    monkeypatch.setenv("PPP_THREADS", "1")
    a = sample_posterior_ppp(BIMODAL_MIX, cfg)
    monkeypatch.setenv("PPP_THREADS", "4")
    b = sample_posterior_ppp(BIMODAL_MIX, cfg)
    assert a == b


def test_statistics_single_point():
    s = pattern_statistics(LabeledPattern(PointPattern(2, [[1.0, 2.0]]), [0]))
    assert np.array_equal(s.mean, [1.0, 2.0]) and np.all(s.covariance == 0)


def test_statistics_empty_pattern():
    with pytest.raises(EmptyPatternError) as err:
        pattern_statistics(LabeledPattern(PointPattern(2), []), n_labels=2)
    assert err.value.summary.label_counts == [0, 0]


def test_pooled_moments_match_mixture():
    lp = sample_posterior_ppp(BIMODAL_MIX, SamplerConfig(gamma=1e4, seed=5))
    s = pattern_statistics(lp, 2)
    x = lp.pattern.points
    se_mean = np.sqrt(np.diag(BIMODAL_MIX.covariance()) / len(x))
    assert np.all(np.abs(s.mean - BIMODAL_MIX.mean()) <= 3 * se_mean)


@given(st.floats(1.0, 500.0), st.integers(0, 10_000))
def test_label_counts_sum_to_total(gamma, seed):
    lp = sample_posterior_ppp(HALVES, SamplerConfig(gamma=gamma, seed=seed))
    s = pattern_statistics(lp, 2, require_moments=False)
    assert sum(s.label_counts) == s.total == lp.count
    assert np.all((lp.labels >= 0) & (lp.labels < 2))
