"""Parameter recovery study for the GARCH and GJR-GARCH fitters.

Simulates ``--reps`` series per model, fits each, and prints mean and spread
of the estimates next to the true values.
"""

import argparse
import time

import numpy as np

from volregime.baselines import GarchParams, fit_garch, simulate_garch

MODELS = {
    "garch": GarchParams(1e-6, 0.10, 0.85),
    "gjr": GarchParams(1e-6, 0.05, 0.85, 0.10),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10_000)
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    for name, truth in MODELS.items():
        est, secs = [], []
        for rep in range(args.reps):
            r = simulate_garch(truth, args.n, seed=args.seed + rep)
            t0 = time.perf_counter()
            p, _ = fit_garch(r, asymmetric=truth.gamma > 0, seed=rep)
            secs.append(time.perf_counter() - t0)
            est.append((p.omega, p.alpha, p.beta, p.gamma))
        est = np.array(est)
        print(f"{name}: n={args.n}, {args.reps} reps, mean fit time {np.mean(secs):.2f}s")
        for k, label in enumerate(("omega", "alpha", "beta", "gamma")):
            true = (truth.omega, truth.alpha, truth.beta, truth.gamma)[k]
            print(f"  {label:5s} true {true:.3g}  mean {est[:, k].mean():.4g}  sd {est[:, k].std():.2g}")


if __name__ == "__main__":
    main()
