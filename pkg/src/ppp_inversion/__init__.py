"""Bayesian inversion through Poisson point processes.

A posterior is approximated by a Gaussian mixture fitted with
importance-weighted EM, and posterior point processes are sampled by
superposing independent per-component Poisson processes.
"""
from .bayes_model import (GaussianPrior, IntensitySpec, PosteriorSpec, UniformBoxPrior,
                          estimate_normalizer, potential, unnormalized_intensity,
                          unnormalized_posterior_density)
from .config import ExperimentConfig, default_config, parse_config
from .decomposition_sampler import (LabeledPattern, SamplerConfig, pattern_statistics,
                                    sample_posterior_ppp)
from .errors import (BoundViolationError, ConfigError, ContractViolationError, DegenerateError,
                     EmptyPatternError, ForwardError, InvalidArgumentError, SolverError,
                     SPDViolationError)
from .mixture_fit import EmConfig, GaussianComponent, GaussianMixture, em_fit, fit_weighted
from .point_process import (AxisBox, BoundedIntensity, MarkedPattern, PointPattern,
                            sample_homogeneous, sample_poisson_count, sample_ppp_thinning,
                            superpose)

__all__ = [
    "AxisBox", "BoundedIntensity", "BoundViolationError", "ConfigError",
    "ContractViolationError", "DegenerateError", "EmConfig", "EmptyPatternError",
    "ExperimentConfig", "ForwardError", "GaussianComponent", "GaussianMixture",
    "GaussianPrior", "IntensitySpec", "InvalidArgumentError", "LabeledPattern",
    "MarkedPattern", "PointPattern", "PosteriorSpec", "SamplerConfig", "SolverError",
    "SPDViolationError", "UniformBoxPrior", "default_config", "em_fit",
    "estimate_normalizer", "fit_weighted", "parse_config", "pattern_statistics", "potential",
    "sample_homogeneous", "sample_poisson_count", "sample_posterior_ppp", "sample_ppp_thinning",
    "superpose", "unnormalized_intensity", "unnormalized_posterior_density",
]
