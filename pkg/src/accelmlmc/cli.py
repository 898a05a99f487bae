"""Command line entry point: ``accelmlmc run|constants|theory``."""

from __future__ import annotations

import argparse
import logging
import sys

from .bench import (CONSTANT_KEYS, ConfigError, ExperimentConfig, build_config, load_config,
                    resolve_constants, run_experiment, summarize, write_outputs)
from .mlmc import ConstantSet
from .sde import DEFAULT_FUNCTIONAL, MODEL_BUILDERS
from .theory import (BETA_EQ_GAMMA, BETA_LT_GAMMA, classify, improvement_guaranteed,
                     ratio_beta_eq_gamma, ratio_beta_lt_gamma)

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="accelmlmc", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a benchmark and write CSV output")
    run.add_argument("--config", help="key = value config file")
    run.add_argument("--model", choices=sorted(MODEL_BUILDERS))
    run.add_argument("--functional")
    run.add_argument("--eps-min", type=int, metavar="J", help="use eps = 4^-j, j = 0..J")
    run.add_argument("--replications", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--mode", choices=("standard", "modified", "both"))
    run.add_argument("--out", default="results")

    cst = sub.add_parser("constants", help="print pilot-estimated constants")
    cst.add_argument("--model", required=True, choices=sorted(MODEL_BUILDERS))
    cst.add_argument("--functional")
    cst.add_argument("--pilot-n", type=int, default=20_000)
    cst.add_argument("--pilot-levels", type=int, default=6)
    cst.add_argument("--seed", type=int, default=0)

    th = sub.add_parser("theory", help="cost regime and asymptotic ratio bounds")
    th.add_argument("--alpha", type=float, required=True)
    th.add_argument("--p", type=float, required=True)
    th.add_argument("--beta", type=float, required=True)
    th.add_argument("--gamma", type=float, required=True)
    th.add_argument("--beta-L", type=float)
    th.add_argument("--gamma-L", type=float)
    th.add_argument("--M", type=int, default=2)
    for name in ("c2", "c3", "c2L", "c3L", "chat3", "chat3L"):
        th.add_argument(f"--{name}", type=float, default=1.0)
    return ap


def cmd_run(args) -> int:
    overrides = {"model_id": args.model, "functional_id": args.functional,
                 "eps_min": args.eps_min, "replications": args.replications,
                 "master_seed": args.seed, "mode_list": args.mode}
    if args.model and not args.functional and args.config:
        overrides["functional_id"] = DEFAULT_FUNCTIONAL[args.model]
    if args.config:
        config = load_config(args.config, overrides)
    else:
        config = build_config({k: str(v) for k, v in overrides.items() if v is not None})
    constants = resolve_constants(config)
    rows = run_experiment(config, constants)
    write_outputs(args.out, config, constants, rows)
    for s in summarize(rows, constants.alpha, constants.p):
        ratio = "-" if s.ratio is None else f"{s.ratio:.3f}"
        print(f"{s.model_id:9s} eps={s.eps:<10.6g} rmse_std={s.rmse_standard!s:.10} "
              f"rmse_mod={s.rmse_modified!s:.10} ratio={ratio} (asymptote {s.theory_bound:g})")
    failed = [r for r in rows if not r.ok]
    for r in failed:
        print(f"FAILED {r.mode} eps={r.eps:g} rep={r.replication}: {r.error}", file=sys.stderr)
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_constants(args) -> int:
    config = ExperimentConfig(model_id=args.model, functional_id=args.functional,
                              pilot_N=args.pilot_n, pilot_levels=args.pilot_levels,
                              master_seed=args.seed).validate()
    cs = resolve_constants(config)
    print(f"# pilot constants for {config.model_id}/{config.functional_id}")
    for key in CONSTANT_KEYS:
        print(f"{key} = {getattr(cs, key)!r}")
    return EXIT_OK


def cmd_theory(args) -> int:
    beta_L = args.beta if args.beta_L is None else args.beta_L
    gamma_L = args.gamma if args.gamma_L is None else args.gamma_L
    try:
        cs = ConstantSet(args.alpha, args.p, args.beta, beta_L, args.gamma, gamma_L, 1.0, 1.0,
                         args.c2, args.c2L, 1.0, args.c3, args.c3L,
                         poly_cost=(((1.0, args.chat3, args.chat3L), 0.0),))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    reg = classify(cs)
    log_part = " (log eps)^2" if reg.log_squared else ""
    print(f"regime: {reg.regime}  cost = O(eps^-{reg.cost_exponent:g}{log_part})")
    for text, ok in reg.conditions_met:
        print(f"  [{'ok' if ok else 'FAIL'}] {text}")
    if reg.regime == BETA_EQ_GAMMA:
        print(f"asymptotic cost ratio >= (p/alpha)^2 = {ratio_beta_eq_gamma(cs.alpha, cs.p):g}")
    elif reg.regime == BETA_LT_GAMMA:
        r = ratio_beta_lt_gamma(args.M, cs.beta, cs.gamma, args.c2, args.c3, args.c2L, args.c3L,
                                args.chat3, args.chat3L)
        print(f"asymptotic cost ratio vs all-order-p baseline >= {r:.6g}")
    else:
        ok, conds = improvement_guaranteed(cs, args.M)
        print(f"eventual strict improvement: {'yes' if ok else 'not guaranteed'}")
        for text, good in conds:
            print(f"  [{'ok' if good else 'FAIL'}] {text}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": cmd_run, "constants": cmd_constants, "theory": cmd_theory}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
