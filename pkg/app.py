import argparse
import logging
import os
import sys
from dataclasses import replace
from typing import List, Optional

from gbt_tracker.exceptions import ConfigValidationError
from gbt_tracker.managers import load_config, write_table
from gbt_tracker.models import OutputFormat, ScenarioConfig, SweepKind
from gbt_tracker.pipeline.checks import SUITES, results_table, run_checks
from gbt_tracker.pipeline.pipeline_runner import run_pipeline
from gbt_tracker.pipeline.sweep import compare, default_seeds, sweep

logger = logging.getLogger("gbt_tracker")


def create_parser() -> argparse.ArgumentParser:
    """
    Factory for the command-line parser: run, sweep, compare and check.
    """
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario JSON file (defaults apply when omitted)")
    common.add_argument("--out", default="results", help="output directory")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--format", choices=[f.value for f in OutputFormat], help="step log format")
    common.add_argument("--quiet", action="store_true", help="warnings only, no progress bars")

    parser = argparse.ArgumentParser(prog="gbt", description="Bearing-only AUV target tracking simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("run", parents=[common], help="run one episode")

    sweep_parser = sub.add_parser("sweep", parents=[common], help="run a variant matrix over shared seeds")
    sweep_parser.add_argument("kind", choices=[k.value for k in SweepKind])
    sweep_parser.add_argument("--seeds", type=int, default=10, help="number of seeds, starting at --seed")

    compare_parser = sub.add_parser("compare", parents=[common], help="paired comparison of scenario files")
    compare_parser.add_argument("configs", nargs="+", help="two or more scenario JSON files")
    compare_parser.add_argument("--seeds", type=int, default=10, help="number of seeds, starting at --seed")

    check_parser = sub.add_parser("check", parents=[common], help="run the invariant suites")
    check_parser.add_argument("suites", nargs="*", default=[],
                              help=f"suites to run (all by default): {', '.join(SUITES)}")
    check_parser.add_argument("--full", action="store_true", help="full trial counts")
    return parser


def _resolve(path: Optional[str], args: argparse.Namespace) -> ScenarioConfig:
    config = load_config(path) if path else ScenarioConfig()
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.format:
        config = replace(config, output=replace(config.output, format=OutputFormat(args.format)))
    errors = config.validate()
    if errors:
        raise ConfigValidationError(errors)
    return config


def _labels(paths: List[str]) -> List[str]:
    labels = []
    for i, path in enumerate(paths):
        label = os.path.splitext(os.path.basename(path))[0]
        labels.append(label if label not in labels else f"{label}_{i}")
    return labels


def main(argv: Optional[List[str]] = None) -> int:
    args = create_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )
    progress = not args.quiet

    try:
        if args.command == "run":
            config = _resolve(args.config, args)
            summary, paths = run_pipeline(config, args.out, progress=progress)
            print(f"[Run] seed={summary.seed} hash={summary.config_hash} steady_error={summary.mean_error:.4f} m "
                  f"coverage={summary.coverage_fraction:.3f}" + (f" FAILED ({summary.failure_code})" if summary.failed else ""))
            print(f"[Run] Records: {', '.join(paths['records'])}")
            return 1 if summary.failed else 0

        if args.command == "sweep":
            config = _resolve(args.config, args)
            cells, table = sweep(SweepKind(args.kind), config, default_seeds(config.seed, args.seeds),
                                 args.out, progress=progress)
            print(table.to_string(index=False))
            return 1 if cells["failed"].any() else 0

        if args.command == "compare":
            if len(args.configs) < 2:
                print("compare needs at least two scenario files", file=sys.stderr)
                return 2
            configs = [(label, _resolve(path, args)) for label, path in zip(_labels(args.configs), args.configs)]
            seeds = default_seeds(args.seed if args.seed is not None else configs[0][1].seed, args.seeds)
            cells, table = compare(configs, seeds, args.out, progress=progress)
            print(table.to_string(index=False))
            return 1 if cells["failed"].any() else 0

        if args.command == "check":
            unknown = [name for name in args.suites if name not in SUITES]
            if unknown:
                print(f"unknown check suites: {', '.join(unknown)}", file=sys.stderr)
                return 2
            results = run_checks(args.suites or None, seed=args.seed or 0, quick=not args.full)
            table = results_table(results)
            print(table.to_string(index=False))
            write_table(table, args.out, "checks.csv")
            return 0 if all(r.passed for r in results) else 1

    except ConfigValidationError as e:
        for error in e.errors:
            print(f"config error: {error}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 2
    return 2


if __name__ == '__main__':
    sys.exit(main())
