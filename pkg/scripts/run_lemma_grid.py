#!/usr/bin/env python3
"""Monte Carlo bound reports over a (lambda, sigma) grid.

Prints one row per grid point for the lower-bound expectation F (against
3/8 - 1/(lambda+1)^2 and its series form) and the truncated second moment G
(against the exact ceiling lambda^2 (lambda^2 + 2) / (lambda^2 + 1)^2).
"""

import argparse
import sys

from kaczpr import LemmaParams, RngStream, closed_form_g, lower_bound_f, mc_F, mc_G, series_F


def run(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--samples", type=int, default=10**6)
    args = ap.parse_args(argv)

    print("F: lambda  sigma   estimate     se        series      bound     pass")
    stream = 0
    for lam in (3.0, 5.0, 10.0):
        for sigma in (0.0, 0.3, 0.6, 0.9):
            params = LemmaParams(lam=lam, sigma=sigma)
            rep = mc_F(params, args.samples, RngStream(args.seed, stream))
            stream += 1
            print(f"   {lam:5.1f}  {sigma:4.1f}  {rep.estimate:9.5f}  {rep.std_error:.1e}"
                  f"  {series_F(params):9.5f}  {lower_bound_f(lam):8.5f}  {rep.passed}")

    print("G: lambda  sigma   estimate     se        ceiling   pass")
    for lam in (0.1, 0.25, 0.4):
        for sigma in (0.0, 0.5, 0.9):
            rep = mc_G(LemmaParams(lam=lam, sigma=sigma), args.samples, RngStream(args.seed, stream))
            stream += 1
            print(f"   {lam:5.2f}  {sigma:4.1f}  {rep.estimate:9.5f}  {rep.std_error:.1e}"
                  f"  {closed_form_g(lam):8.5f}  {rep.passed}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
