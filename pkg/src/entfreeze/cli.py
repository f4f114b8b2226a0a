"""Command line entry point.

    entfreeze run <config.yaml> [--out DIR] [--jobs N] [--stop-early]
    entfreeze preset <name> [--emit-config] [--extended] [--out DIR] [--jobs N]
    entfreeze analyze <run-dir>
    entfreeze validate <config.yaml>

Exit codes: 0 success, 2 validation failure, 3 numerical-integrity abort,
1 any other failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ConfigError, load_config
from .presets import PRESET_NAMES, UnknownPresetError, preset_experiment
from .runner import JOBS_ENV, analyze_run_dir, run_experiment

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2
EXIT_INTEGRITY = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="entfreeze", description="Entanglement freezing in open spin chains.")
    p.add_argument("-v", "--verbose", action="store_true", help="log job progress to stderr")
    sub = p.add_subparsers(dest="verb", required=True)

    def run_opts(sp):
        sp.add_argument("--out", help="output directory (overrides output_dir)")
        sp.add_argument("--jobs", type=int, help=f"parallel jobs (default: max_jobs, then ${JOBS_ENV}, then 1)")
        sp.add_argument("--stop-early", action="store_true",
                        help="end each trajectory once every tracked pair has unfrozen")

    sp = sub.add_parser("run", help="run an experiment from a YAML config")
    sp.add_argument("config")
    run_opts(sp)

    sp = sub.add_parser("preset", help="run (or print) a named preset")
    sp.add_argument("name", help=", ".join(PRESET_NAMES))
    sp.add_argument("--emit-config", action="store_true", help="print the YAML config and exit")
    sp.add_argument("--extended", action="store_true", help="use the larger size sweep")
    run_opts(sp)

    sp = sub.add_parser("analyze", help="recompute analysis from stored trajectories")
    sp.add_argument("run_dir")

    sp = sub.add_parser("validate", help="check a config and report every problem")
    sp.add_argument("config")
    return p


def _execute(cfg, args) -> int:
    if args.jobs is not None and args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    result = run_experiment(cfg, output_dir=args.out, max_jobs=args.jobs, stop_when_unfrozen=args.stop_early)
    print(f"wrote {result.output_dir}")
    if result.failed:
        for f in result.failed:
            print(f"job {f['name']} failed: {f['error']['kind']}: {f['error']['message']}", file=sys.stderr)
        if any(f["error"]["kind"] == "numerical-integrity" for f in result.failed):
            return EXIT_INTEGRITY
        return EXIT_FAILURE
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.verb == "validate":
            cfg = load_config(args.config)
            print(f"ok: {cfg.name} ({cfg.config_hash()[:12]})")
            return EXIT_OK
        if args.verb == "run":
            return _execute(load_config(args.config), args)
        if args.verb == "preset":
            cfg = preset_experiment(args.name, extended=args.extended)
            if args.emit_config:
                sys.stdout.write(cfg.to_yaml())
                return EXIT_OK
            return _execute(cfg, args)
        if args.verb == "analyze":
            summary = analyze_run_dir(args.run_dir)
            print(json.dumps({k: v for k, v in summary.items() if k != "reports"}, indent=2))
            return EXIT_OK
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID
    except UnknownPresetError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
