# -*- coding: utf-8 -*-
"""
flipdyn-g command line

    python app.py solve specs/sird.json --out out/ --format csv
    python app.py simulate specs/sird.json --samples 10000 --seed 7
    python app.py verify specs/stock_market.json
    python app.py example sird --out my_specs/

exit codes: 0 ok, 1 invalid spec, 2 solver failure, 3 verification failure
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from dual_deter import FORMULA_SETS
from errors import EXIT_OK, FlipDynError, VerificationError, exit_code_for
from settings import LOG_LEVEL, OUTPUT_DIR, SADDLE_TOL, SOLVER_VERSION, configure_logging
from spec_io import (
    BUNDLED_EXAMPLES, FORMATS, GameSpecFile, ResultBundle, emit, parse_spec, run_simulation,
    run_solve, run_verify, write_example,
)

log = logging.getLogger("flipdyn")


# helper functions
def banner(title: str) -> None:
    print("\n" + "=" * 70)
    print(title)
    print("=" * 70)


def print_summary(spec_file: GameSpecFile, bundle: ResultBundle) -> None:
    print(f"model: {bundle.model}")
    print(f"nodes: {', '.join(bundle.node_names)}")
    print(f"horizon: {bundle.horizon}")
    print(f"spec hash: {bundle.spec_hash[:16]}...")
    if bundle.state_dependent:
        values = bundle.table.values[0, :, spec_file.initial_state]
        print(f"values at k=1, grid index {spec_file.initial_state}:")
    else:
        values = bundle.table.coefficients[0]
        print("value coefficients at k=1:")
    for name, v in zip(bundle.node_names, values):
        print(f"   {name}: {v:.10g}")
    if bundle.approximate_maps:
        print(f"approximate: {bundle.approximate_maps} dynamics map(s) snapped to the nearest grid point")
    if bundle.diagnostics:
        agreed = sum(1 for d in bundle.diagnostics if d.agreed)
        print(f"closed form ({bundle.formulas}): {agreed}/{len(bundle.diagnostics)} cells agree with the lp")


def _parse_x1(spec_file: GameSpecFile, raw: str | None):
    if raw is None:
        return None
    # grid models take a grid index
    return int(raw) if spec_file.model == "general" else float(raw)


# subcommands
def cmd_solve(args) -> int:
    start = time.time()
    spec_file = parse_spec(args.spec)
    bundle = run_solve(spec_file, formulas=args.formulas, max_workers=args.workers)
    written = emit(bundle, args.format, args.out)

    banner(f"solved {Path(args.spec).name}")
    print_summary(spec_file, bundle)
    for path in written:
        print(f"saved: {path}")
    print(f"time: {time.time() - start:.2f}s")
    print("=" * 70)
    return EXIT_OK


def cmd_simulate(args) -> int:
    start = time.time()
    spec_file = parse_spec(args.spec)
    bundle = run_solve(spec_file, formulas=args.formulas, max_workers=args.workers)
    bundle = run_simulation(spec_file, bundle, samples=args.samples, seed=args.seed,
                            x1=_parse_x1(spec_file, args.x1), alpha1=args.alpha1)
    sim = bundle.simulation

    banner(f"simulated {Path(args.spec).name}")
    print(f"start: node {sim['alpha1']}, x1 = {sim['x1']}")
    print(f"samples: {sim['samples']} (seed {sim['seed']})")
    print(f"mean cost: {sim['mean']:.10g} +/- {sim['stderr']:.3g}")
    print(f"solver value: {sim['solver_value']:.10g}")
    print(f"policy value: {sim['policy_value']:.10g}")
    print(f"within 3 stderr: {'yes' if sim['within_3_stderr'] else 'no'}")
    if args.out:
        for path in emit(bundle, "json", args.out):
            print(f"saved: {path}")
    print(f"time: {time.time() - start:.2f}s")
    print("=" * 70)
    return EXIT_OK


def cmd_verify(args) -> int:
    start = time.time()
    spec_file = parse_spec(args.spec)
    bundle = run_verify(spec_file, run_solve(spec_file, formulas=args.formulas, max_workers=args.workers), tol=args.tol)
    report = bundle.verification

    banner(f"verified {Path(args.spec).name}")
    for check in report["saddle_checks"]:
        mark = "ok" if check["passed"] else "FAIL"
        print(f"   {check['node']}: value {check['value']:.10g}, gaps {check['defender_gap']:.2e} / {check['adversary_gap']:.2e}  {mark}")
    cells = report["cell_checks"]
    print(f"cells: {cells['cells']} checked, worst violation {cells['worst_violation']:.2e}")
    if "closed_form" in report:
        cf = report["closed_form"]
        print(f"closed form: {cf['agreed']} agreed, {cf['disagreed']} resolved by lp, {cf['lp_only']} lp only")
    if "value_spread" in report and report["value_spread"]["ratio"] is not None:
        print(f"value spread k=1 / k=L: {report['value_spread']['ratio']:.4g}")
    if args.out:
        for path in emit(bundle, "json", args.out):
            print(f"saved: {path}")
    print(f"time: {time.time() - start:.2f}s")
    print("=" * 70)

    if not report["passed"]:
        raise VerificationError(f"{Path(args.spec).name} failed verification", report)
    return EXIT_OK


def cmd_example(args) -> int:
    written = write_example(args.name, args.out)
    banner(f"example {args.name}")
    for path in written:
        print(f"saved: {path}")
    print("=" * 70)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flipdyn", description="FlipDyn-G takeover games on graphs")
    parser.add_argument("--version", action="version", version=f"%(prog)s {SOLVER_VERSION}")
    parser.add_argument("--log-level", default=LOG_LEVEL, help="DEBUG, INFO, WARNING or ERROR (env FLIPDYN_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    def solver_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("spec", help="game spec json file")
        p.add_argument("--formulas", choices=FORMULA_SETS, default=None, help="dual-deter closed forms")
        p.add_argument("--workers", type=int, default=None, help="threads per backward-induction step")

    p = sub.add_parser("solve", help="solve a game spec and write value and policy tables")
    solver_flags(p)
    p.add_argument("--out", default=str(OUTPUT_DIR), help="output directory (or .json file)")
    p.add_argument("--format", choices=FORMATS, default="json")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="monte-carlo rollouts of the equilibrium policies")
    solver_flags(p)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--x1", default=None, help="initial state (grid index for general models)")
    p.add_argument("--alpha1", default=None, help="initial node name or index")
    p.add_argument("--out", default=None, help="write the result bundle as json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="saddle and closed-form checks on a solved spec")
    solver_flags(p)
    p.add_argument("--tol", type=float, default=SADDLE_TOL, help="best-response gap tolerance, relative to max(1, |V|)")
    p.add_argument("--out", default=None, help="write the result bundle as json")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("example", help="write a bundled example spec")
    p.add_argument("name", choices=sorted(BUNDLED_EXAMPLES))
    p.add_argument("--out", default=str(OUTPUT_DIR))
    p.set_defaults(func=cmd_example)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.func(args)
    except FlipDynError as exc:
        code = exit_code_for(exc)
        violations = getattr(exc, "violations", None)
        if violations:
            print(f"error: {len(violations)} spec violation(s)", file=sys.stderr)
            for violation in violations:
                print(f"   {violation}", file=sys.stderr)
        else:
            print(f"error: {exc}", file=sys.stderr)
        log.debug("exit %d after %s", code, type(exc).__name__)
        return code


if __name__ == "__main__":
    sys.exit(main())
