"""Show how the private preconditioner flattens an ill-conditioned covariance.

Prints the condition number of A Sigma A after learning A at several budgets.
"""
import argparse
import math

import numpy as np

from dpreg.multivariate import learn_preconditioner, preconditioner_rounds
from dpreg.privacy import PrivacyBudget


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--d", type=int, default=5)
    parser.add_argument("--kappa", type=float, default=1000.0)
    parser.add_argument("--n", type=int, default=100_000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    Q, _ = np.linalg.qr(rng.normal(size=(args.d, args.d)))
    Sigma = (Q * np.geomspace(1.0, args.kappa, args.d)) @ Q.T
    x = rng.multivariate_normal(np.zeros(args.d), Sigma, size=args.n)
    print(f"kappa={args.kappa:g}, rounds={preconditioner_rounds(args.kappa)}")
    for eps in (0.1, 1.0, 10.0, math.inf):
        pre = learn_preconditioner(x, args.kappa, PrivacyBudget(eps, 1e-6), 0.05, rng)
        lam = np.linalg.eigvalsh(pre.A @ Sigma @ pre.A)
        print(f"eps={eps:<6g} cond(A Sigma A)={lam[-1] / lam[0]:10.3f}  kappa_out={pre.kappa_out:.3f}")


if __name__ == "__main__":
    main()
