"""Posterior mean and score of the one-dimensional marginal over a grid of observations.

The gap ``y - E(beta | y)`` should stay bounded and the score should decay to
zero as ``|y|`` grows.
"""
import argparse

import numpy as np

from gbridge.oracle import OneDimModel, posterior_mean_1d, score


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--e", type=float, default=1.0, help="shape of both Gamma components")
    ap.add_argument("--f", type=float, default=1.0, help="rate of both Gamma components")
    ap.add_argument("--k1", type=float, default=0.5)
    ap.add_argument("--k2", type=float, default=4.0)
    ap.add_argument("--ymax", type=float, default=50.0)
    ap.add_argument("--points", type=int, default=26)
    args = ap.parse_args()

    m = OneDimModel(e1=args.e, f1=args.f, e2=args.e, f2=args.f, k1=args.k1, k2=args.k2)
    print("y,posterior_mean,y_minus_mean,score")
    for y in np.linspace(0.0, args.ymax, args.points):
        mean = posterior_mean_1d(y, m)
        print(f"{y:.4g},{mean:.6g},{y - mean:.6g},{score(y, m):.6g}")


if __name__ == "__main__":
    main()
