"""``qtdt-sim`` command line interface."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .errors import QTDTError
from .imputation import select_strategy, CorrelationSummary
from .power_harness import compare_strategies, simulate_scenario, summarize, write_run
from .scenario import load_scenario
from .trait_models import TraitKind, binary_prevalence, p_star_oracle

log = logging.getLogger("qtdt")


def _cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    if args.replications is not None:
        scenario = replace(scenario, replications=args.replications)
    run = simulate_scenario(scenario, threads=args.threads)
    paths = write_run(run, args.out, svg=args.svg)
    for row in summarize(run):
        print(f"delta*={row.delta_star:<5g} {row.variant.label:<11} power={row.power:.3f} (se {row.monte_carlo_se:.3f})")
    if run.errors:
        print(f"{len(run.errors)} analysis error(s); see {paths['manifest']}", file=sys.stderr)
    for kind, path in paths.items():
        log.info("wrote %s: %s", kind, path)
    return 0


def _cmd_strategies(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    if args.replications is not None:
        scenario = replace(scenario, replications=args.replications)
    rows, (rho1, rho2) = compare_strategies(scenario, threads=args.threads)
    deltas = scenario.delta_stars
    print(f"rho1 = {rho1:.3f}, rho2 = {rho2:.3f}")
    print("strategy   " + "".join(f"delta={d:<8g}" for d in deltas))
    for strategy in dict.fromkeys(r.strategy for r in rows):
        powers = [r.power for r in rows if r.strategy is strategy]
        print(f"{strategy.value:<11}" + "".join(f"{p:<14.3f}" for p in powers))
    try:
        pick = select_strategy(scenario.kinds, CorrelationSummary(rho1, rho2))
        print(f"recommended: {pick.value}")
    except QTDTError as exc:
        print(f"recommended: n/a ({exc})")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["strategy,delta_star,power"] + [f"{r.strategy.value},{r.delta_star:g},{r.power:.6f}" for r in rows]
        (out / f"{scenario.name}.strategies.csv").write_text("\n".join(lines) + "\n")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    ok = True
    for j, spec in enumerate(scenario.traits):
        exact = p_star_oracle(spec, scenario.d)
        target = scenario.p_star_targets[j] if j < len(scenario.p_star_targets) else None
        line = (f"trait {j + 1}: {spec.kind.value} alpha={spec.alpha:g} beta={spec.beta:g} "
                f"residual={spec.residual:.6g} p*={exact:.6f}")
        if spec.kind is TraitKind.BINARY_THRESHOLD:
            line += f" prevalence={binary_prevalence(spec, scenario.d):.4f}"
        if target is not None:
            good = abs(exact - target) <= 1e-10
            ok &= good
            line += f" target={target:g} {'OK' if good else 'MISMATCH'}"
        print(line)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qtdt-sim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="power study for one scenario")
    run.add_argument("--scenario", required=True)
    run.add_argument("--seed", type=int, default=None, help="master seed (overrides the scenario file)")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--replications", type=int, default=None)
    run.add_argument("--svg", action="store_true", help="also write a power-curve SVG")
    run.set_defaults(func=_cmd_run)

    strat = sub.add_parser("strategies", help="compare the type 2.1 imputation strategies")
    strat.add_argument("--scenario", required=True)
    strat.add_argument("--seed", type=int, default=None)
    strat.add_argument("--threads", type=int, default=1)
    strat.add_argument("--replications", type=int, default=None)
    strat.add_argument("--out", default=None)
    strat.set_defaults(func=_cmd_strategies)

    val = sub.add_parser("validate", help="heritability calibration report")
    val.add_argument("--scenario", required=True)
    val.set_defaults(func=_cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (QTDTError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
