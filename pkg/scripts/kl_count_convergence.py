"""Expected PPP counts in a few boxes as the KL solver mesh is refined.

Prints one row per mesh size with the count in every region and the
deviation from the finest mesh.
"""
import argparse

import numpy as np

from ppp_inversion.bayes_model import PosteriorSpec
from ppp_inversion.config import default_config
from ppp_inversion.diagnostics import count_convergence_study, oracle_moments
from ppp_inversion.experiments import build_model, kl_setup_for
from ppp_inversion.forward_models import KLForward
from ppp_inversion.point_process import AxisBox


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--gamma", type=float, default=1000.0)
    ap.add_argument("--meshes", type=int, nargs="+", default=[11, 21, 41, 81, 161])
    ap.add_argument("--grid", type=int, default=60)
    args = ap.parse_args()

    cfg = default_config("kl")
    base = build_model(cfg)
    setup = kl_setup_for(cfg)
    oracle = oracle_moments(base, 200_000, seed=10)
    sd = np.sqrt(np.diag(oracle.covariance))
    lo, hi = oracle.mean - 4 * sd, oracle.mean + 4 * sd
    mid = (lo + hi) / 2
    regions = [AxisBox(lo, np.r_[mid[0], hi[1:]]),                    # theta_1 below centre
               AxisBox(lo, hi - np.r_[0.0, 0.6 * (hi[1] - lo[1]), 0.0]),
               AxisBox(np.r_[lo[:2], lo[2] + 0.6 * (hi[2] - lo[2])], hi),
               AxisBox(lo + (hi - lo) / 4, hi - (hi - lo) / 4),
               AxisBox(lo, np.r_[hi[:2], mid[2]])]

    def family(n):
        return PosteriorSpec(KLForward(setup.with_nodes(n)), base.observation,
                             base.noise_cov, base.prior)

    table = count_convergence_study(family, args.gamma, regions, args.meshes,
                                    AxisBox(lo, hi), grid_resolution=args.grid)
    print("mesh  " + "  ".join(f"region{j}".rjust(10) for j in range(len(regions))))
    for row in table.rows():
        print(f"{row['resolution']:4d}  " + "  ".join(f"{v:10.3f}" for v in row["intensity"]))
    print("deviation from finest mesh")
    for row in table.rows()[:-1]:
        print(f"{row['resolution']:4d}  " + "  ".join(f"{v:10.4f}" for v in row["deviation"]))


if __name__ == "__main__":
    main()
