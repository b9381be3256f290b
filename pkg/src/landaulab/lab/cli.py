"""Command line entry point ``landaulab``.

Usage::

    landaulab <subcommand> SCENARIO [key=value ...] [--out DIR] [--workers N]

Subcommands: ``coeffs``, ``dissipativity``, ``spectrum``, ``evolve``,
``probe``, ``decay-fit`` and ``run`` (the scenario's own pipeline).
``SCENARIO`` is a YAML file or the name of a bundled scenario.  The worker
count can also be set with ``LANDAULAB_WORKERS``.

Exit codes: 0 success, 2 validation error, 3 numerical failure
(``BlowUp``, ``MomentDrift``), 4 infeasible request.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from ..errors import Infeasible, LandauLabError, NonPositiveDensity, NumericalFailure, SearchExhausted, ValidationError
from ..probes import WORKERS_ENV
from .config import bundled_scenarios, load_scenario
from .pipelines import run_pipeline

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_INFEASIBLE = 0, 2, 3, 4
SUBCOMMANDS = ("coeffs", "dissipativity", "spectrum", "evolve", "probe", "decay-fit", "run")

log = logging.getLogger("landaulab")


def build_parser():
    ap = argparse.ArgumentParser(prog="landaulab", description="Landau equation numerical laboratory.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} pipeline" if name != "run" else "run the scenario's pipeline")
        p.add_argument("scenario", help="scenario YAML file or bundled scenario name")
        p.add_argument("overrides", nargs="*", metavar="key=value")
        p.add_argument("--out", default=None, help="output directory (overrides output.dir)")
        p.add_argument("--workers", type=int, default=None, help=f"worker threads (default ${WORKERS_ENV} or 1)")
    sub.add_parser("list", help="list bundled scenarios")
    return ap


def exit_code(err: BaseException) -> int:
    if isinstance(err, (Infeasible, SearchExhausted)):
        return EXIT_INFEASIBLE
    if isinstance(err, NumericalFailure):
        return EXIT_NUMERICAL
    if isinstance(err, (ValidationError, NonPositiveDensity)):
        return EXIT_VALIDATION
    return EXIT_NUMERICAL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "list":
        print("\n".join(bundled_scenarios()))
        return EXIT_OK
    if args.workers is not None:
        os.environ[WORKERS_ENV] = str(args.workers)
    try:
        sc = load_scenario(args.scenario, args.overrides, args.out)
        name = None if args.command == "run" else args.command
        summary = run_pipeline(sc, name)
    except LandauLabError as err:
        code = exit_code(err)
        where = f"scenario {args.scenario!r}"
        print(f"error ({where}): {err}", file=sys.stderr)
        return code
    print(json.dumps({k: summary[k] for k in ("scenario", "pipeline", "wall") if k in summary}))
    print(f"artifacts in {sc.output_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
