"""Command line entry point.

    germorder --example mix --out out/
    germorder --config experiment.yaml --seed 7 --reps 20000
    germorder --example list

Exit codes: 0 success, 1 schema error, 2 module error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .catalog import get_example, list_named_examples
from .config import ExperimentConfig, Source, load_config
from .errors import GermOrderError, NotFound, SchemaError
from .runner import run_experiment, with_overrides, write_outputs

EXIT_OK, EXIT_SCHEMA, EXIT_MODULE = 0, 1, 2

log = logging.getLogger("germorder")


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="germorder", description="Run order, branching and rumor experiments.")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", help="YAML experiment config")
    src.add_argument("--example", help="named example to reproduce, or 'list'")
    p.add_argument("--seed", type=_u64, default=None, help="seed (unsigned 64-bit)")
    p.add_argument("--out", default=None, help="output directory (default: config output.dir or ./out)")
    p.add_argument("--reps", type=_positive, default=None, help="Monte Carlo replications")
    p.add_argument("--horizon", type=_positive, default=None, help="simulation horizon")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _summary(report: dict) -> str:
    lines = [f"{report['name']}: schema {report['schema']}, seed {report['seed']}"]
    for v in report["verdicts"]:
        lines.append(f"  {v['name']}: {v['kind']} [{v['method']}]")
    for m in report["monte_carlo"]:
        vals = {k: m[k] for k in ("frequency", "stderr", "reps", "probability") if k in m}
        lines.append(f"  {m['name']}: {json.dumps(vals)}")
    return "\n".join(lines)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    if args.example == "list":
        for ex in list_named_examples():
            print(f"{ex['name']:24s} {ex['summary']}")
        return EXIT_OK

    try:
        if args.example:
            get_example(args.example)
            cfg, src = ExperimentConfig(experiment="named-example", example=args.example), Source("<cli>", None)
        elif args.config:
            cfg, src = load_config(args.config)
        else:
            raise SchemaError("no experiment: pass --config <path> or --example <name>")
        cfg = with_overrides(cfg, seed=args.seed, reps=args.reps, horizon=args.horizon)
    except (SchemaError, NotFound) as err:
        print(f"schema error: {err}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as err:
        print(f"schema error: cannot read config: {err}", file=sys.stderr)
        return EXIT_SCHEMA

    try:
        report, tables, elapsed = run_experiment(cfg, src)
    except (SchemaError, NotFound) as err:
        print(f"schema error: {err}", file=sys.stderr)
        return EXIT_SCHEMA
    except (GermOrderError, ValueError, ArithmeticError) as err:
        print(f"module error in {cfg.experiment}: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_MODULE

    out_dir = args.out or cfg.output.dir
    target = write_outputs(report, tables, elapsed, out_dir)
    print(_summary(report))
    log.info("wrote %s in %.2f s", target, elapsed)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
