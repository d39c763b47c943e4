"""Command line entry point: ``ppp-bayes {fit,sample,diagnose,experiment}``.

Exit status is 0 on success, 1 when a pipeline stage fails and 2 on a
configuration or usage error.
"""
import argparse
import logging
from pathlib import Path
import sys

import numpy as np
from scipy import stats

from .config import MODELS, SEED_KEYS, build_config, parse_config
from .decomposition_sampler import SamplerConfig, sample_posterior_ppp
from .diagnostics import diagnostic_record, poisson_count_gof
from .errors import ConfigError
from .experiments import StageError, build_model, run_experiment
from .io import read_mixture, read_samples, write_json, write_mixture, write_samples
from .mixture_fit import EmConfig, em_fit

log = logging.getLogger("ppp_inversion")


def _load_config(args, model=None):
    if args.config:
        cfg = parse_config(args.config)
        if model is not None and cfg.model != model:
            raise ConfigError(f"{args.config}: config is for model {cfg.model!r}, not {model!r}")
        values = cfg.to_dict()
    elif model is not None:
        values = {"model": model}
    else:
        raise ConfigError("--config is required")
    if getattr(args, "seed", None) is not None:
        for offset, key in enumerate(SEED_KEYS):
            values[key] = args.seed + offset
    if getattr(args, "gamma", None) is not None:
        values["sampler.gamma"] = args.gamma
    if getattr(args, "method", None) is not None:
        values["sampler.method"] = args.method
    if getattr(args, "out", None) is not None:
        values["output.dir"] = str(args.out)
    return build_config(values, args.config or "<command line>")


def cmd_experiment(args):
    cfg = _load_config(args, args.name)
    report = run_experiment(cfg)
    failed = [d["test_name"] for d in report.diagnostics if not d["pass"]]
    print(f"{cfg.model}: {report.sample_summary.total} points, "
          f"{report.fit.iterations} EM iterations -> {cfg.output_dir}")
    if failed:
        print("diagnostics not passing: " + ", ".join(failed))
    return 0


def cmd_fit(args):
    cfg = _load_config(args)
    out = Path(cfg.output_dir)
    try:
        model = build_model(cfg)
        em_cfg = EmConfig(K=cfg.em_K, max_iter=cfg.em_max_iter, tol=cfg.em_tol,
                          seed=cfg.seeds_em, weighting=cfg.em_weighting)
        mixture, fit = em_fit(model, cfg.em_M, em_cfg, prior_seed=cfg.seeds_prior)
    except Exception as exc:
        raise StageError("fit", exc) from exc
    out.mkdir(parents=True, exist_ok=True)
    write_mixture(mixture, out / "mixture.json")
    write_json({"config": cfg.to_dict(), "observation": model.observation.tolist(),
                "iterations": fit.iterations, "converged": fit.converged,
                "log_likelihood": fit.log_likelihood, "ess": fit.ess},
               out / "fit.json")
    print(f"wrote {out / 'mixture.json'}")
    return 0


def cmd_sample(args):
    mixture = read_mixture(args.mixture)
    try:
        s_cfg = SamplerConfig(gamma=args.gamma, method=args.method, box_sigma=args.box_sigma,
                              seed=args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    from ._rng import spawn
    seeds = [s_cfg.seed] if args.realizations == 1 else spawn(s_cfg.seed, args.realizations)
    runs = []
    for s in seeds:
        cfg = SamplerConfig(s_cfg.gamma, s_cfg.method, s_cfg.box_sigma, s)
        runs.append(sample_posterior_ppp(mixture, cfg))
    write_samples(runs, args.out, dim=mixture.dim)
    print(f"wrote {sum(r.count for r in runs)} points in {len(runs)} realization(s) to {args.out}")
    return 0


def diagnose_samples(mixture, realizations, gamma=None):
    """Diagnostics for sampled realizations against the mixture they came from."""
    recs = []
    pooled_labels = np.concatenate([r.labels for r in realizations])
    pooled_points = np.concatenate([r.pattern.points for r in realizations])
    n = pooled_labels.size
    if n:
        obs = np.bincount(pooled_labels, minlength=len(mixture))
        exp = mixture.weights * n
        keep = exp > 0
        if keep.sum() > 1:
            chi = stats.chisquare(obs[keep], exp[keep])
            recs.append(diagnostic_record("label_fractions", chi.pvalue > 0.01,
                                          statistic=float(chi.statistic),
                                          p_value=float(chi.pvalue),
                                          params={"n_points": int(n)}))
        se = np.sqrt(np.diag(mixture.covariance()) / n)
        z = (pooled_points.mean(axis=0) - mixture.mean()) / se
        p = float(min(1.0, 2 * stats.norm.sf(np.abs(z)).min() * z.size))
        recs.append(diagnostic_record("pooled_mean_vs_mixture_mean", p > 0.01,
                                      statistic=float(np.abs(z).max()), p_value=p,
                                      params={"n_points": int(n)}))
    if gamma is not None and len(realizations) >= 500:
        gof = poisson_count_gof([r.count for r in realizations], gamma)
        recs.append(diagnostic_record("total_count_poisson_gof", gof.p_value > 0.01,
                                      statistic=gof.statistic, p_value=gof.p_value,
                                      params={"gamma": gamma, "dof": gof.dof,
                                              "realizations": len(realizations)}))
    return recs


def cmd_diagnose(args):
    mixture = read_mixture(args.mixture)
    realizations = read_samples(args.samples)
    recs = diagnose_samples(mixture, realizations, args.gamma)
    write_json(recs, args.out)
    for r in recs:
        print(f"{'PASS' if r['pass'] else 'FAIL'}  {r['test_name']}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="ppp-bayes",
                                description="Posterior sampling through Poisson point processes.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("experiment", help="run fit, sample and diagnose for one model")
    e.add_argument("name", choices=MODELS)
    e.add_argument("--config")
    e.add_argument("--out")
    e.add_argument("--seed", type=int)
    e.add_argument("--gamma", type=float)
    e.add_argument("--method", choices=("direct", "thinning"))
    e.set_defaults(func=cmd_experiment)

    f = sub.add_parser("fit", help="fit the mixture and write mixture.json")
    f.add_argument("--config", required=True)
    f.add_argument("--out")
    f.add_argument("--seed", type=int)
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("sample", help="sample PPP realizations from a mixture")
    s.add_argument("--mixture", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--gamma", type=float, default=1000.0)
    s.add_argument("--method", choices=("direct", "thinning"), default="direct")
    s.add_argument("--box-sigma", type=float, default=6.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--realizations", type=int, default=1)
    s.set_defaults(func=cmd_sample)

    d = sub.add_parser("diagnose", help="check samples against their mixture")
    d.add_argument("--mixture", required=True)
    d.add_argument("--samples", required=True)
    d.add_argument("--gamma", type=float)
    d.add_argument("--out", default="diagnostics.json")
    d.set_defaults(func=cmd_diagnose)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
