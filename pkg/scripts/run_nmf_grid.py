"""Compare the two growth-control sequences on synthetic nonnegative matrix
factorization: iterations to reach a 1e-6 gradient-mapping residual.

Usage: python scripts/run_nmf_grid.py [--seeds N]
"""

import argparse

import numpy as np

from adaprox import RhoSequence, SolverConfig, run
from adaprox.problems import FactorShape, nmf_problem, nmf_synthetic, rng


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--r", type=int, default=5)
    ap.add_argument("--m", type=int, default=300)
    ap.add_argument("--tol", type=float, default=1e-6)
    args = ap.parse_args()

    shape = FactorShape(p=args.n, q=args.m, r=args.r)
    table = {"rho1": [], "rho2": []}
    for seed in range(args.seeds):
        A = nmf_synthetic(args.n, args.r, args.m, seed)
        x0 = np.abs(rng(seed + 1).standard_normal(shape.dim))
        for rho in (RhoSequence.rho1(), RhoSequence.rho2()):
            problem = nmf_problem(A, shape)
            cfg = SolverConfig(engine="adapgnc", rho=rho, lambda0=0.001,
                               max_iters=20000, gradmap_tol=args.tol)
            res = run(problem, x0.copy(), cfg, seed=seed)
            table[rho.kind].append(len(res.trace.records))
            print(f"seed {seed} rho={rho.kind}: {len(res.trace.records)} iters "
                  f"({res.trace.termination}), best f = {res.best_F:.6e}")
    for kind, vals in table.items():
        print(f"{kind}: mean iterations {np.mean(vals):.1f}")


if __name__ == "__main__":
    main()
