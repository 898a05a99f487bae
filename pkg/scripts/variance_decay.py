"""Sample variance of coupled level summands and its log-log slope.

    python scripts/variance_decay.py --model gbm --levels 2-7 --samples 100000
"""

import argparse

from accelmlmc.diagnostics import level_variance_study
from accelmlmc.noise import RngStreamSpec
from accelmlmc.schemes import SCHEMES
from accelmlmc.sde import DEFAULT_FUNCTIONAL, MODEL_BUILDERS, get_model


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--model", default="gbm", choices=sorted(MODEL_BUILDERS))
    ap.add_argument("--functional")
    ap.add_argument("--scheme", default="em", choices=sorted(SCHEMES))
    ap.add_argument("--levels", default="2-7")
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    model = get_model(args.model)
    f, _ = model.reference(args.functional or DEFAULT_FUNCTIONAL[args.model])
    lo, hi = map(int, args.levels.split("-"))
    h, var, slope = level_variance_study(model, f, range(lo, hi + 1), args.samples,
                                         SCHEMES[args.scheme], spec=RngStreamSpec(args.seed))
    for l, (hl, v) in enumerate(zip(h, var), lo):
        print(f"l={l:2d} h={hl:<10.6g} var={v:.5e}")
    print(f"slope {slope:.3f}")


if __name__ == "__main__":
    main()
