"""Bias versus step size for EM and RI6 on the scalar linear model.

Each sample is f(Y_T^h) - f(X_T) with X_T the exact solution driven by the same
Brownian path, so the bias is resolved far below the plain Monte Carlo noise.

    python scripts/weak_order.py --paths 100000 --max-k 7
"""

import argparse

from accelmlmc.diagnostics import gbm_exact_terminal, loglog_slope, weak_error_study
from accelmlmc.noise import RngStreamSpec
from accelmlmc.schemes import SCHEMES
from accelmlmc.sde import GBM_R, GBM_SIGMA, GBM_X0, get_model


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=100_000)
    ap.add_argument("--max-k", type=int, default=7, help="finest step 2^-k")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    model = get_model("gbm")
    f, _ = model.reference("identity")
    terminal = gbm_exact_terminal(GBM_R, GBM_SIGMA, GBM_X0, model.horizon)
    steps = [2**k for k in range(2, args.max_k + 1)]
    for i, (key, scheme) in enumerate(SCHEMES.items()):
        pts = weak_error_study(model, f, scheme, steps, args.paths, model.exact("identity"),
                               RngStreamSpec(args.seed, (i,)), exact_terminal=terminal)
        print(f"{scheme.name} (nominal order {scheme.weak_order})")
        for p in pts:
            print(f"  h={p.h:<10.6g} bias={p.bias:+.5e}  se={p.stderr:.2e}")
        print(f"  slope {loglog_slope([p.h for p in pts], [p.bias for p in pts]):.3f}")


if __name__ == "__main__":
    main()
