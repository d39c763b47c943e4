"""Fit -> sample -> diagnose pipeline for the benchmark problems."""
from dataclasses import dataclass, field
import logging
from pathlib import Path
import time

import numpy as np

from ._rng import as_generator
from .bayes_model import GaussianPrior, PosteriorSpec, UniformBoxPrior, log_unnormalized_posterior
from .config import serialize_config
from .decomposition_sampler import SamplerConfig, pattern_statistics, sample_posterior_ppp
from .diagnostics import (diagnostic_record, estimate_hellinger, estimate_tv, grid_density,
                          oracle_moments)
from .forward_models import (BimodalForward, HeatForward, HeatSetup, KLForward, KLSetup,
                             UnimodalForward, kappa_from_theta)
from .io import write_json, write_mixture, write_samples
from .mixture_fit import EmConfig, em_fit
from .point_process import AxisBox

log = logging.getLogger(__name__)

OUTPUT_FILES = ("samples.csv", "mixture.json", "report.json", "diagnostics.json")


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunReport:
    config: object
    mixture: object
    fit: object
    oracle: object
    observation: np.ndarray
    diagnostics: list
    sample_summary: object
    timings: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)


def forward_for(cfg):
    if cfg.model == "unimodal":
        return UnimodalForward()
    if cfg.model == "bimodal":
        return BimodalForward()
    if cfg.model == "heat2d":
        return HeatForward(HeatSetup(n=cfg.heat_n))
    return KLForward(kl_setup_for(cfg))


def kl_setup_for(cfg):
    return KLSetup(N=cfg.kl_N, s=cfg.kl_s, n_nodes=cfg.kl_n_nodes, noise_var=cfg.noise_sigma ** 2)


def prior_for(cfg):
    d = cfg.dim
    if cfg.prior_kind == "kl":
        return kl_setup_for(cfg).prior()
    if cfg.prior_kind == "uniform":
        lo = cfg.prior_lower if cfg.prior_lower is not None else [-1.0] * d
        hi = cfg.prior_upper if cfg.prior_upper is not None else [1.0] * d
        return UniformBoxPrior(AxisBox(lo, hi))
    mean = cfg.prior_mean if cfg.prior_mean is not None else [0.0] * d
    var = cfg.prior_var if cfg.prior_var is not None else [1.0] * d
    return GaussianPrior(mean, np.diag(var))


def observation_for(cfg, forward):
    if cfg.observation_mode == "explicit":
        return np.asarray(cfg.observation_values, dtype=float)
    clean = np.atleast_1d(forward(np.asarray(cfg.observation_true_theta)))
    noise = as_generator(cfg.seeds_noise).standard_normal(clean.size)
    return clean + cfg.noise_sigma * noise


def build_model(cfg):
    forward = forward_for(cfg)
    u = observation_for(cfg, forward)
    return PosteriorSpec(forward, u, cfg.noise_sigma ** 2 * np.eye(u.size), prior_for(cfg))


def _grid_box(oracle, prior, width=6.0):
    sd = np.sqrt(np.maximum(np.diag(oracle.covariance), 1e-12))
    lo, hi = oracle.mean - width * sd, oracle.mean + width * sd
    if isinstance(prior, UniformBoxPrior):
        lo, hi = np.maximum(lo, prior.box.lower), np.minimum(hi, prior.box.upper)
    return AxisBox(lo, hi)


def _diagnose(cfg, model, mixture, oracle, labeled, summary):
    recs = []
    diff = np.abs(mixture.mean() - oracle.mean)
    recs.append(diagnostic_record(
        "mixture_mean_vs_oracle", bool(np.all(diff <= 0.1)), statistic=float(diff.max()),
        distance=float(np.linalg.norm(diff)), params={"tolerance": 0.1, "oracle_ess": oracle.ess}))
    tr_m, tr_o = float(np.trace(mixture.covariance())), float(np.trace(oracle.covariance))
    recs.append(diagnostic_record(
        "mixture_cov_trace_vs_oracle", abs(tr_m - tr_o) <= 0.2 * tr_o,
        statistic=tr_m / tr_o, distance=abs(tr_m - tr_o), params={"relative_tolerance": 0.2}))
    if labeled.count > 0:
        from scipy import stats
        expected = mixture.weights * labeled.count
        keep = expected > 0
        obs = np.asarray(summary.label_counts + [0] * (len(mixture) - len(summary.label_counts)))
        if keep.sum() > 1:
            chi = stats.chisquare(obs[keep], expected[keep])
            recs.append(diagnostic_record("label_fractions", chi.pvalue > 0.01,
                                          statistic=float(chi.statistic),
                                          p_value=float(chi.pvalue),
                                          params={"weights": mixture.weights.tolist()}))
        if labeled.count > 1:
            se = np.sqrt(np.diag(mixture.covariance()) / labeled.count)
            z = (summary.mean - mixture.mean()) / se
            p = float(min(1.0, 2 * stats.norm.sf(np.abs(z)).min() * z.size))
            recs.append(diagnostic_record("pooled_mean_vs_mixture_mean", p > 0.01,
                                          statistic=float(np.abs(z).max()), p_value=p,
                                          params={"n_points": labeled.count}))
    if model.dim <= 3 and hasattr(model.forward, "batch"):
        box = _grid_box(oracle, model.prior)
        post = grid_density(lambda x: log_unnormalized_posterior(model, x), box, log=True)
        approx = grid_density(mixture.log_density, box, log=True)
        tv, hell = estimate_tv(post, approx), estimate_hellinger(post, approx)
        recs.append(diagnostic_record("tv_posterior_vs_mixture", tv <= np.sqrt(2) * hell + 1e-12,
                                      statistic=tv, distance=tv,
                                      params={"box_lower": box.lower.tolist(),
                                              "box_upper": box.upper.tolist(),
                                              "resolution": list(post.resolution),
                                              "check": "tv <= sqrt(2) * hellinger"}))
        recs.append(diagnostic_record("hellinger_posterior_vs_mixture", True, statistic=hell,
                                      distance=hell, params={"resolution": list(post.resolution)}))
    return recs


def _timed(timings, stage, fn):
    t0 = time.perf_counter()
    try:
        return fn()
    except Exception as exc:
        raise StageError(stage, exc) from exc
    finally:
        timings[stage] = time.perf_counter() - t0


def run_experiment(cfg, out_dir=None, write=True):
    """Run one experiment end to end and write its artifacts.

    On failure every output file written by this call is removed and a
    StageError naming the failed stage is raised.
    """
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    timings = {}
    written = []
    try:
        model = _timed(timings, "model", lambda: build_model(cfg))
        em_cfg = EmConfig(K=cfg.em_K, max_iter=cfg.em_max_iter, tol=cfg.em_tol,
                          seed=cfg.seeds_em, weighting=cfg.em_weighting)
        mixture, fit = _timed(timings, "fit", lambda: em_fit(model, cfg.em_M, em_cfg,
                                                              prior_seed=cfg.seeds_prior))
        log.info("fit: %d iterations, converged=%s", fit.iterations, fit.converged)
        s_cfg = SamplerConfig(gamma=cfg.sampler_gamma, method=cfg.sampler_method,
                              box_sigma=cfg.sampler_box_sigma, seed=cfg.seeds_sampler)
        labeled = _timed(timings, "sample", lambda: sample_posterior_ppp(mixture, s_cfg))
        summary = pattern_statistics(labeled, len(mixture), require_moments=False)
        oracle = _timed(timings, "oracle", lambda: oracle_moments(model, cfg.oracle_M,
                                                                  cfg.seeds_oracle))
        diags = _timed(timings, "diagnose",
                       lambda: _diagnose(cfg, model, mixture, oracle, labeled, summary))
        report = RunReport(cfg, mixture, fit, oracle, model.observation, diags, summary,
                           timings)
        if cfg.model == "heat2d":
            report.extras["kappa_of_mixture_mean"] = kappa_from_theta(mixture.mean()).tolist()
        if labeled.count:
            dens = np.exp(mixture.log_density(labeled.pattern.points))
            report.extras["density_quantiles"] = {
                str(q): float(np.quantile(dens, q / 100)) for q in (85, 90, 95)}
        if write:
            def dump():
                out.mkdir(parents=True, exist_ok=True)
                for name, fn in (("samples.csv", lambda p: write_samples(labeled, p)),
                                 ("mixture.json", lambda p: write_mixture(mixture, p)),
                                 ("diagnostics.json", lambda p: write_json(diags, p))):
                    written.append(out / name)
                    fn(out / name)
                report.files = {n: str(out / n) for n in OUTPUT_FILES}
                written.append(out / "report.json")
                write_report(report, out / "report.json")
            _timed(timings, "write", dump)
        return report
    except StageError:
        for p in written:
            p.unlink(missing_ok=True)
        raise


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


def report_dict(report):
    cfg = report.config
    o = report.oracle
    return {
        "model": cfg.model,
        "config": cfg.to_dict(),
        "config_text": serialize_config(cfg),
        "seeds": cfg.seeds(),
        "observation": _jsonable(report.observation),
        "mixture": report.mixture.to_dict(),
        "mixture_mean": _jsonable(report.mixture.mean()),
        "mixture_covariance": _jsonable(report.mixture.covariance()),
        "fit": {"iterations": report.fit.iterations, "converged": report.fit.converged,
                "log_likelihood": report.fit.log_likelihood, "history": report.fit.history,
                "n_samples": report.fit.n_samples, "ess": report.fit.ess,
                "cov_floor": report.fit.cov_floor, "reseeded": report.fit.reseeded},
        "oracle": {"mean": _jsonable(o.mean), "covariance": _jsonable(o.covariance),
                   "ess": o.ess, "stderr": _jsonable(o.stderr), "n_samples": o.n_samples,
                   "warning": o.warning},
        "samples": {"total": report.sample_summary.total,
                    "label_counts": report.sample_summary.label_counts,
                    "mean": _jsonable(report.sample_summary.mean),
                    "covariance": _jsonable(report.sample_summary.covariance)},
        "diagnostics": report.diagnostics,
        "extras": report.extras,
        "files": report.files,
        "timings": report.timings,
    }


REPORT_SCHEMA = {
    "type": "object",
    "required": ["model", "config", "seeds", "mixture", "fit", "oracle", "diagnostics",
                 "files", "timings"],
    "properties": {
        "mixture": {
            "type": "object", "required": ["dim", "components"],
            "properties": {"components": {"type": "array", "minItems": 1, "items": {
                "type": "object", "required": ["w", "mean", "cov"]}}}},
        "diagnostics": {"type": "array", "items": {
            "type": "object", "required": ["test_name", "statistic", "params", "pass"]}},
        "seeds": {"type": "object",
                  "required": ["prior", "em", "sampler", "noise", "oracle"]},
    },
}


def write_report(report, path):
    write_json(report_dict(report), path)
