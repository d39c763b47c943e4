"""Run one experiment from a config file and print a short summary.

    python3 scripts/run_experiment.py configs/bimodal.cfg [--out DIR]
"""
import argparse
import logging

import numpy as np

from ppp_inversion.config import parse_config
from ppp_inversion.experiments import run_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config")
    ap.add_argument("--out")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = parse_config(args.config)
    rep = run_experiment(cfg, args.out)
    np.set_printoptions(precision=4, suppress=True)
    print(f"model {cfg.model}: EM {rep.fit.iterations} iterations, converged={rep.fit.converged}")
    for c in rep.mixture.components:
        print(f"  w={c.weight:.3f} mean={c.mean} cov diag={np.diag(c.cov)}")
    print(f"mixture mean {rep.mixture.mean()}  oracle mean {rep.oracle.mean}")
    s = rep.sample_summary
    print(f"samples: {s.total} points, per component {s.label_counts}, pooled mean {s.mean}")
    for d in rep.diagnostics:
        print(f"  {'ok  ' if d['pass'] else 'FAIL'} {d['test_name']}")
    print("timings " + ", ".join(f"{k}={v:.2f}s" for k, v in rep.timings.items()))
    for f in rep.files:
        print(f"wrote {f}")


if __name__ == "__main__":
    main()
