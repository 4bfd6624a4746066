"""Command line front end: ``irs-isac run | summarize | validate``.

Exit codes: 0 success, 1 invalid input, 2 I/O failure. Set ISAC_LOG to
error, info or debug to change verbosity (default: warning).
"""
import argparse
import json
import logging
import os
import sys

from ._validation import ValidationError
from .harness import load_config, read_csv, run_sweep, summarize, write_summary

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2
_LEVELS = {"error": logging.ERROR, "warning": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging():
    name = os.environ.get("ISAC_LOG", "warning").strip().lower()
    level = _LEVELS.get(name)
    logging.basicConfig(level=level or logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if level is None:
        logging.getLogger(__name__).warning("unknown ISAC_LOG value %r, using warning", name)


def _u64(text):
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 bits: {text}")
    return value


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser():
    p = argparse.ArgumentParser(prog="irs-isac", description="IRS-assisted ISAC beamforming sweeps")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte-Carlo sweep and write CSV records")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--seed", type=_u64, help="override base_seed")
    run.add_argument("--trials", type=_positive, help="override n_trials")
    run.add_argument("--jobs", type=_positive, default=1)
    run.add_argument("--timing", action="store_true", help="fill wall_ms (output is then not reproducible)")

    summ = sub.add_parser("summarize", help="aggregate a results CSV into JSON")
    summ.add_argument("--in", dest="inp", required=True)
    summ.add_argument("--out", required=True)

    val = sub.add_parser("validate", help="check a config and print its canonical form")
    val.add_argument("--config", required=True)
    return p


def _cmd_run(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.base_seed = args.seed
    if args.trials is not None:
        cfg.n_trials = args.trials
    records = run_sweep(cfg, args.out, jobs=args.jobs, timing=args.timing)
    logging.getLogger(__name__).info("wrote %d records to %s", len(records), args.out)


def _cmd_summarize(args):
    write_summary(summarize(read_csv(args.inp)), args.out)


def _cmd_validate(args):
    cfg = load_config(args.config)
    json.dump(cfg.to_dict(), sys.stdout, indent=2)
    sys.stdout.write("\n")


def main(argv=None):
    args = build_parser().parse_args(argv)
    _setup_logging()
    handler = {"run": _cmd_run, "summarize": _cmd_summarize, "validate": _cmd_validate}[args.command]
    try:
        handler(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
