"""Posterior mass outside an epsilon-ball around the truth as n grows."""
import argparse

from gbridge.scenarios import ConsistencySpec, consistency_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-grid", default="100,200,400,800")
    ap.add_argument("--alpha", type=float, default=1.0)
    ap.add_argument("--epsilon", type=float, default=0.5)
    ap.add_argument("--iterations", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    spec = ConsistencySpec(
        n_grid=tuple(int(n) for n in args.n_grid.split(",")),
        alpha=args.alpha,
        epsilon=args.epsilon,
        iterations=args.iterations,
        burn_in=args.iterations // 10,
        seed=args.seed,
    )
    print("n,p_n,lambda,mass")
    for r in consistency_experiment(spec):
        print(f"{r['n']},{r['p_n']},{r['lambda']:.4g},{r['mass']:.4f}")


if __name__ == "__main__":
    main()
