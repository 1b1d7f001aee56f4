"""Tabulate the Stein scaling factor E[f'(beta^T x)] for the built-in links.

Quadrature and Monte Carlo are reported side by side so disagreements stand out.
"""
import argparse

import numpy as np

from dpreg.oracles import stein_expectation_quad, stein_k
from dpreg.synthetic import logistic, smoothed_sign


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--d", type=int, default=5)
    parser.add_argument("--n", type=int, default=10_000)
    parser.add_argument("--mc", type=int, default=200_000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    links = [("logistic", logistic())] + [(f"smoothed-sign({lam:g})", smoothed_sign(lam)) for lam in (0.5, 2.0, 20.0)]
    Sigma = np.eye(args.d)
    print(f"{'link':<22}{'|beta|':>8}{'quad':>12}{'mc':>12}{'stderr':>10}{'k':>12}")
    for name, link in links:
        for norm in (0.0, 0.5, 1.0, 2.0, 5.0):
            beta = np.zeros(args.d)
            beta[0] = norm
            quad = stein_expectation_quad(link, beta, Sigma)
            sf = stein_k(link, beta, Sigma, args.n, args.d, args.mc, rng)
            print(f"{name:<22}{norm:>8.2f}{quad:>12.6f}{sf.expectation:>12.6f}{sf.stderr:>10.1e}{sf.k:>12.6f}")


if __name__ == "__main__":
    main()
