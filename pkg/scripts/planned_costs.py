"""Planned (pre-simulation) cost of both estimators from pilot constants.

The metered cost of a run is fully determined by the plan, so this reproduces
the cost column of a benchmark without simulating, and extends it to smaller
eps than is practical to run.

    python scripts/planned_costs.py --model gbm --j-max 8
"""

import argparse

from accelmlmc.bench import ExperimentConfig, resolve_constants
from accelmlmc.mlmc import plan_levels
from accelmlmc.sde import MODEL_BUILDERS, get_model


def planned_cost(constants, mode, eps, T, M=2, q=0.5):
    cs = constants.standard() if mode == "standard" else constants
    order = cs.alpha if mode == "standard" else cs.p
    plan = plan_levels(eps, cs, T, M, q, order, cs.bias_constant_p if mode != "standard" else cs.c1)
    per_sample = [cs.c30] + [cs.c3 * T / h for h in plan.h[1:-1]] + [cs.c3L * T / plan.h[-1]]
    return plan, sum(n * c for n, c in zip(plan.N, per_sample))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--model", default="gbm", choices=sorted(MODEL_BUILDERS))
    ap.add_argument("--functional")
    ap.add_argument("--j-max", type=int, default=8)
    args = ap.parse_args()

    cfg = ExperimentConfig(model_id=args.model, functional_id=args.functional).validate()
    cs = resolve_constants(cfg)
    T = get_model(args.model).horizon
    print(f"constants: {cs}")
    for j in range(args.j_max + 1):
        eps = 4.0**-j
        ps, cost_s = planned_cost(cs, "standard", eps, T)
        pm, cost_m = planned_cost(cs, "modified", eps, T)
        print(f"eps=4^-{j}: L={ps.L}/{pm.L} cost {cost_s:.4g}/{cost_m:.4g} "
              f"ratio {cost_s / cost_m:.3f}")


if __name__ == "__main__":
    main()
