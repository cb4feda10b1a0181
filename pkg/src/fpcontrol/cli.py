"""Command-line entry point.

Exit codes: 0 success, 2 scenario validation failure, 3 solver failure,
4 line-search failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import LineSearchError, ScenarioError, SolverError
from .pipeline import run_forward, run_gradcheck, run_oracle, run_pipeline, run_target
from .scenario import load_scenario


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fpcontrol",
        description="Optimal combination-therapy schedules via density-constrained control",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log stage progress")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "solve": "full pipeline: target, optimization, reports",
        "forward": "untreated density solve only",
        "oracle": "compare the density solver against Monte Carlo paths",
        "gradcheck": "finite-difference audit of the adjoint gradient",
        "target": "emit the target trajectory and marginals",
    }
    for name, help_text in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("scenario", help="path to a .scenario file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--full-scale", action="store_true",
                       help="use the production grid and time resolution")
        p.add_argument("--checkpoint-every", type=int, default=1, metavar="K",
                       help="store every K-th snapshot and recompute between")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2

    out_dir = args.out or str(Path("runs") / f"{scenario.name}-{args.command}")
    kwargs = dict(seed=args.seed, full_scale=args.full_scale,
                  checkpoint_every=max(1, args.checkpoint_every))
    try:
        if args.command == "solve":
            report = run_pipeline(scenario, out_dir, **kwargs)
            print(f"final objective {report.final_objective:.6e} "
                  f"after {report.iterations} iterations "
                  f"(converged={report.converged})")
            print(f"total Doxorubicin {report.total_doxorubicin_mg:.3f} mg, "
                  f"peak IL-2 {report.peak_il2_iu_per_l:.4g} IU/l/day")
            print(f"outputs in {out_dir}")
            if report.line_search_failed:
                print("line search failed; best iterate reported", file=sys.stderr)
                return 4
        elif args.command == "forward":
            info = run_forward(scenario, out_dir, **kwargs)
            print(f"mass deviation {info['max_mass_deviation']:.3e}, "
                  f"min density {info['min_density']:.3e}")
            print(f"outputs in {out_dir}")
        elif args.command == "oracle":
            info = run_oracle(scenario, out_dir, **kwargs)
            print(f"worst marginal L1 distance {info['worst_l1']:.4f}")
            print(f"outputs in {out_dir}")
        elif args.command == "gradcheck":
            info = run_gradcheck(scenario, out_dir, **kwargs)
            print(f"worst relative error {info['worst_relative_error']:.3e}")
            print(f"outputs in {out_dir}")
        elif args.command == "target":
            info = run_target(scenario, out_dir, **kwargs)
            print(f"max target mass error {info['max_mass_error']:.3e}")
            print(f"outputs in {out_dir}")
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    except LineSearchError as exc:
        print(f"line-search failure: {exc}", file=sys.stderr)
        return 4
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
